#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "doseguard/corpus.hpp"

namespace doseguard {

inline constexpr std::size_t kMedPatternWidth = 43;
inline constexpr std::size_t kMedFlagCount = 30;
inline constexpr std::size_t kMedCountFeatures = 4;
inline constexpr std::size_t kMedStatistics = 4;
inline constexpr std::size_t kMedMetadata = 5;

/// 43 handcrafted features in fixed taxonomy order: 30 binary flags
/// (dose units, dose calculations, routes, frequencies, dose concepts, special
/// populations, error keywords), 4 counts, 4 text statistics and 5 study
/// metadata values.
struct MedPatternVector {
    std::array<double, kMedPatternWidth> values{};

    static const std::vector<std::string>& names();
    double operator[](std::string_view name) const;
};

struct PatternBankEntry {
    std::string name;
    std::string group;
    std::string kind;    // "flag", "count" or "statistic"
    std::string source;  // regex for flags/counts, prose definition for statistics
};

/// One entry per non-metadata feature (38), loaded from the embedded
/// resources/pattern_bank.json.
const std::vector<PatternBankEntry>& pattern_bank();
std::vector<std::pair<std::string, std::string>> pattern_bank_sources();

/// Raw JSON of the bank, byte-identical to resources/pattern_bank.json.
std::string_view pattern_bank_json();

/// Total function. Flags are case-insensitive; statistics use the raw text;
/// absent metadata defaults to zero.
MedPatternVector extract_medical_patterns(const ConcatenatedDoc& doc, const NarrativeRecord& record);

/// Text-only part (metadata left at zero), used by tests and the extractor.
MedPatternVector extract_text_patterns(std::string_view text);

struct TextStatistics {
    double text_length = 0;
    double word_count = 0;
    double sentence_count = 0;
    double avg_word_length = 0;
};
TextStatistics text_statistics(std::string_view text);

}  // namespace doseguard
