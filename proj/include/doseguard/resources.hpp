#pragma once

#include <string_view>

// Versioned JSON data files under resources/, embedded at build time.
namespace doseguard::resources {
extern const std::string_view kPatternBankJson;
extern const std::string_view kPhraseBanksJson;
}  // namespace doseguard::resources
