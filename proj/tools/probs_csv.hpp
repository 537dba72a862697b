#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace doseguard::cli {

struct ProbabilityTable {
    std::vector<std::string> ids;  // empty when the file has no id column
    std::vector<double> probs;
};

/// "id,prob" rows (or "row,prob" without ids), probabilities printed with
/// round-trip precision.
void write_probs_csv(const std::filesystem::path& path, const ProbabilityTable& table);
ProbabilityTable read_probs_csv(const std::filesystem::path& path);

}  // namespace doseguard::cli
