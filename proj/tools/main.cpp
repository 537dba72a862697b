#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "doseguard/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kTraining = 4 };

int fail(ExitCode code, const char* kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", static_cast<int>(code)}};
    std::cerr << j.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"doseguard: dosing-error detection from clinical trial narratives"};
    app.require_subcommand(1);
    std::function<void()> action;
    doseguard::cli::register_commands(app, action);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(kUsage, "usage", e.what());
    }

    try {
        if (action) action();
        return kOk;
    } catch (const doseguard::ConfigError& e) {
        return fail(kUsage, "config", e.what());
    } catch (const doseguard::TrainingError& e) {
        return fail(kTraining, "training", e.what());
    } catch (const doseguard::FormatError& e) {
        return fail(kData, "format", e.what());
    } catch (const doseguard::DataError& e) {
        return fail(kData, "data", e.what());
    } catch (const doseguard::Error& e) {
        return fail(kData, "io", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(kData, "io", e.what());
    } catch (const std::exception& e) {
        return fail(kTraining, "internal", e.what());
    }
}
