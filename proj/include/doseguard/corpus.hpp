#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace doseguard {

/// The nine free-text registry fields, in concatenation order.
inline constexpr std::array<std::string_view, 9> kTextFieldNames = {
    "briefSummary",     "detailedDescription",      "protocolPdfText",
    "armDescriptions",  "interventionDescriptions", "interventionNames",
    "conditions",       "conditionsKeywords",       "locationDetails",
};

/// One trial sample as it arrives in the JSONL corpus.
struct NarrativeRecord {
    std::string id;
    /// Indexed like kTextFieldNames. nullopt = key absent or null.
    std::array<std::optional<std::string>, 9> text_fields;
    int label = 0;

    // Structured registry metadata; nullopt when the key is absent.
    std::optional<std::int64_t> num_trials;
    std::optional<std::int64_t> num_conditions;
    std::optional<std::int64_t> enrollment_count;
    std::optional<std::int64_t> phase_encoded;       // 0..4, 0 = unknown
    std::optional<std::int64_t> study_type_encoded;  // 0..2

    std::optional<std::string>& field(std::string_view name);
    const std::optional<std::string>& field(std::string_view name) const;

    bool operator==(const NarrativeRecord&) const = default;
};

struct ConcatenatedDoc {
    std::string id;
    std::string text;
    int label = 0;

    bool operator==(const ConcatenatedDoc&) const = default;
};

struct CorpusStats {
    std::size_t n_docs = 0;
    std::size_t n_positive = 0;
    double positive_rate = 0.0;
    std::size_t min_length = 0;
    std::size_t q25_length = 0;
    std::size_t median_length = 0;
    std::size_t q75_length = 0;
    std::size_t max_length = 0;
    std::size_t n_empty = 0;
};

/// Parses one JSONL line. `line_number` is 1-based and used in error text.
NarrativeRecord parse_record(std::string_view line, std::size_t line_number = 0);

/// Reads a JSONL corpus. Throws DataError naming the offending line for
/// malformed JSON, bad labels, invalid metadata or duplicate ids.
std::vector<NarrativeRecord> load_corpus(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const NarrativeRecord& record);
void write_corpus(const std::filesystem::path& path, const std::vector<NarrativeRecord>& records);

/// Joins the present, non-blank text fields with a single space.
ConcatenatedDoc concatenate_fields(const NarrativeRecord& record);
std::vector<ConcatenatedDoc> concatenate_all(const std::vector<NarrativeRecord>& records);

nlohmann::ordered_json to_json(const ConcatenatedDoc& doc);
ConcatenatedDoc doc_from_json(const nlohmann::json& j);

/// Counts, positive rate and nearest-rank length quantiles (lengths in
/// Unicode code points).
CorpusStats corpus_stats(const std::vector<ConcatenatedDoc>& docs);
nlohmann::ordered_json to_json(const CorpusStats& stats);

/// Nearest-rank quantile of an unsorted sample, q in (0, 1].
std::size_t nearest_rank(std::vector<std::size_t> values, double q);

std::vector<int> labels_of(const std::vector<NarrativeRecord>& records);

/// Deterministic synthetic corpus. Exactly floor(n * positive_rate) records
/// are positive; each positive carries a dosing-deviation phrase with
/// probability `signal_strength`, otherwise it is worded like a negative.
std::vector<NarrativeRecord> generate_synthetic_corpus(std::size_t n, double positive_rate,
                                                       double signal_strength,
                                                       std::uint64_t seed);

}  // namespace doseguard
