#pragma once

#include <functional>

#include <CLI11.hpp>

namespace doseguard::cli {

/// Adds every subcommand to `app`. The parsed subcommand stores its work in
/// `action`, which main() runs after parsing.
void register_commands(CLI::App& app, std::function<void()>& action);

}  // namespace doseguard::cli
