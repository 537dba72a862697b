#include "probs_csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "doseguard/errors.hpp"

namespace doseguard::cli {

void write_probs_csv(const std::filesystem::path& path, const ProbabilityTable& table) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    const bool with_ids = !table.ids.empty();
    out << (with_ids ? "id,prob\n" : "row,prob\n");
    for (std::size_t i = 0; i < table.probs.size(); ++i) {
        if (with_ids) {
            out << table.ids[i];
        } else {
            out << i;
        }
        out << fmt::format(",{:.17g}\n", table.probs[i]);
    }
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

ProbabilityTable read_probs_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    std::string line;
    if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty file", path.string()));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool with_ids = false;
    if (line == "id,prob") {
        with_ids = true;
    } else if (line != "row,prob") {
        throw DataError(fmt::format("{}: expected header 'id,prob' or 'row,prob'", path.string()));
    }

    ProbabilityTable table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw DataError(fmt::format("{}:{}: missing comma", path.string(), line_no));
        const std::string value = line.substr(comma + 1);
        double p = 0.0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), p);
        if (ec != std::errc{} || ptr != value.data() + value.size() || !(p >= 0.0 && p <= 1.0)) {
            throw DataError(fmt::format("{}:{}: '{}' is not a probability", path.string(), line_no, value));
        }
        if (with_ids) table.ids.push_back(line.substr(0, comma));
        table.probs.push_back(p);
    }
    return table;
}

}  // namespace doseguard::cli
