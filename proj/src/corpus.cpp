#include "doseguard/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/resources.hpp"
#include "doseguard/rng.hpp"
#include "doseguard/text.hpp"

namespace doseguard {

namespace {

using nlohmann::json;

struct MetadataKey {
    std::string_view name;
    std::optional<std::int64_t> NarrativeRecord::*member;
    std::int64_t max_value;
};

constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max();

const std::array<MetadataKey, 5> kMetadataKeys = {{
    {"numTrials", &NarrativeRecord::num_trials, kUnbounded},
    {"numConditions", &NarrativeRecord::num_conditions, kUnbounded},
    {"enrollmentCount", &NarrativeRecord::enrollment_count, kUnbounded},
    {"phaseEncoded", &NarrativeRecord::phase_encoded, 4},
    {"studyTypeEncoded", &NarrativeRecord::study_type_encoded, 2},
}};

std::size_t field_index(std::string_view name) {
    const auto it = std::find(kTextFieldNames.begin(), kTextFieldNames.end(), name);
    if (it == kTextFieldNames.end()) {
        throw ConfigError(fmt::format("unknown text field '{}'", name));
    }
    return static_cast<std::size_t>(it - kTextFieldNames.begin());
}

std::string where(std::size_t line_number) {
    return line_number > 0 ? fmt::format("line {}: ", line_number) : std::string{};
}

}  // namespace

std::optional<std::string>& NarrativeRecord::field(std::string_view name) {
    return text_fields[field_index(name)];
}

const std::optional<std::string>& NarrativeRecord::field(std::string_view name) const {
    return text_fields[field_index(name)];
}

NarrativeRecord parse_record(std::string_view line, std::size_t line_number) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(fmt::format("{}malformed JSON ({})", where(line_number), e.what()));
    }
    if (!j.is_object()) throw DataError(where(line_number) + "record is not a JSON object");

    NarrativeRecord r;
    const auto id = j.find("id");
    if (id == j.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
        throw DataError(where(line_number) + "missing or empty string 'id'");
    }
    r.id = id->get<std::string>();

    const auto label = j.find("label");
    if (label == j.end() || !label->is_number_integer()) {
        throw DataError(fmt::format("{}record '{}': 'label' must be the integer 0 or 1",
                                    where(line_number), r.id));
    }
    const auto lv = label->get<std::int64_t>();
    if (lv != 0 && lv != 1) {
        throw DataError(fmt::format("{}record '{}': label {} outside {{0,1}}", where(line_number),
                                    r.id, lv));
    }
    r.label = static_cast<int>(lv);

    for (std::size_t f = 0; f < kTextFieldNames.size(); ++f) {
        const auto it = j.find(std::string(kTextFieldNames[f]));
        if (it == j.end() || it->is_null()) continue;
        if (!it->is_string()) {
            throw DataError(fmt::format("{}record '{}': field '{}' must be a string or null",
                                        where(line_number), r.id, kTextFieldNames[f]));
        }
        r.text_fields[f] = it->get<std::string>();
    }

    for (const auto& key : kMetadataKeys) {
        const auto it = j.find(std::string(key.name));
        if (it == j.end() || it->is_null()) continue;
        if (!it->is_number_integer()) {
            throw DataError(fmt::format("{}record '{}': '{}' must be an integer", where(line_number),
                                        r.id, key.name));
        }
        const auto v = it->get<std::int64_t>();
        if (v < 0 || v > key.max_value) {
            throw DataError(fmt::format("{}record '{}': '{}' value {} out of range",
                                        where(line_number), r.id, key.name, v));
        }
        r.*(key.member) = v;
    }
    return r;
}

std::vector<NarrativeRecord> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open corpus '{}'", path.string()));
    std::vector<NarrativeRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::is_blank(line)) continue;
        NarrativeRecord r = parse_record(line, line_number);
        if (!seen.insert(r.id).second) {
            throw DataError(fmt::format("line {}: duplicate id '{}'", line_number, r.id));
        }
        records.push_back(std::move(r));
    }
    return records;
}

nlohmann::ordered_json to_json(const NarrativeRecord& record) {
    nlohmann::ordered_json j;
    j["id"] = record.id;
    for (std::size_t f = 0; f < kTextFieldNames.size(); ++f) {
        if (record.text_fields[f]) j[std::string(kTextFieldNames[f])] = *record.text_fields[f];
    }
    for (const auto& key : kMetadataKeys) {
        if (const auto& v = record.*(key.member)) j[std::string(key.name)] = *v;
    }
    j["label"] = record.label;
    return j;
}

void write_corpus(const std::filesystem::path& path, const std::vector<NarrativeRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write corpus '{}'", path.string()));
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

ConcatenatedDoc concatenate_fields(const NarrativeRecord& record) {
    ConcatenatedDoc doc{record.id, {}, record.label};
    for (const auto& f : record.text_fields) {
        if (!f || text::is_blank(*f)) continue;
        if (!doc.text.empty()) doc.text.push_back(' ');
        doc.text += *f;
    }
    return doc;
}

std::vector<ConcatenatedDoc> concatenate_all(const std::vector<NarrativeRecord>& records) {
    std::vector<ConcatenatedDoc> docs;
    docs.reserve(records.size());
    for (const auto& r : records) docs.push_back(concatenate_fields(r));
    return docs;
}

nlohmann::ordered_json to_json(const ConcatenatedDoc& doc) {
    return {{"id", doc.id}, {"text", doc.text}, {"label", doc.label}};
}

ConcatenatedDoc doc_from_json(const nlohmann::json& j) {
    try {
        return {j.at("id").get<std::string>(), j.at("text").get<std::string>(),
                j.at("label").get<int>()};
    } catch (const json::exception& e) {
        throw DataError(fmt::format("invalid document JSON: {}", e.what()));
    }
}

std::size_t nearest_rank(std::vector<std::size_t> values, double q) {
    if (values.empty()) throw DataError("nearest_rank of an empty sample");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

CorpusStats corpus_stats(const std::vector<ConcatenatedDoc>& docs) {
    if (docs.empty()) throw DataError("corpus_stats requires at least one document");
    CorpusStats s;
    s.n_docs = docs.size();
    std::vector<std::size_t> lengths;
    lengths.reserve(docs.size());
    for (const auto& d : docs) {
        s.n_positive += d.label == 1 ? 1 : 0;
        lengths.push_back(text::codepoint_count(d.text));
        s.n_empty += d.text.empty() ? 1 : 0;
    }
    s.positive_rate = static_cast<double>(s.n_positive) / static_cast<double>(s.n_docs);
    s.min_length = *std::min_element(lengths.begin(), lengths.end());
    s.max_length = *std::max_element(lengths.begin(), lengths.end());
    s.q25_length = nearest_rank(lengths, 0.25);
    s.median_length = nearest_rank(lengths, 0.5);
    s.q75_length = nearest_rank(lengths, 0.75);
    return s;
}

nlohmann::ordered_json to_json(const CorpusStats& s) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["n_docs"] = s.n_docs;
    j["n_positive"] = s.n_positive;
    j["positive_rate"] = s.positive_rate;
    j["n_empty_text"] = s.n_empty;
    j["length_chars"] = {{"min", s.min_length},       {"q25", s.q25_length},
                         {"median", s.median_length}, {"q75", s.q75_length},
                         {"max", s.max_length}};
    return j;
}

std::vector<int> labels_of(const std::vector<NarrativeRecord>& records) {
    std::vector<int> y;
    y.reserve(records.size());
    for (const auto& r : records) y.push_back(r.label);
    return y;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

struct PhraseBanks {
    std::vector<std::string> deviation, compliant, summary, description, protocol, regimens,
        drugs, conditions, keywords, arm_templates, locations;
};

const PhraseBanks& phrase_banks() {
    static const PhraseBanks banks = [] {
        const json j = json::parse(resources::kPhraseBanksJson);
        auto list = [&](const char* key) { return j.at(key).get<std::vector<std::string>>(); };
        return PhraseBanks{list("deviation_phrases"),   list("compliant_phrases"),
                           list("summary_sentences"),   list("description_sentences"),
                           list("protocol_sentences"),  list("regimens"),
                           list("drug_names"),          list("conditions"),
                           list("keywords"),            list("arm_templates"),
                           list("locations")};
    }();
    return banks;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& bank) {
    return bank[rng.below(bank.size())];
}

std::string sentences(Rng& rng, const std::vector<std::string>& bank, int lo, int hi) {
    const auto count = rng.integer(lo, hi);
    std::string out;
    for (std::int64_t i = 0; i < count; ++i) {
        if (!out.empty()) out.push_back(' ');
        out += pick(rng, bank);
    }
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos;
         pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

void append_sentence(std::optional<std::string>& field, const std::string& sentence) {
    if (!field || field->empty()) {
        field = sentence;
    } else {
        *field += ' ';
        *field += sentence;
    }
}

}  // namespace

std::vector<NarrativeRecord> generate_synthetic_corpus(std::size_t n, double positive_rate,
                                                       double signal_strength,
                                                       std::uint64_t seed) {
    if (n < 10) throw ConfigError("synthetic corpus needs n >= 10");
    if (!(positive_rate > 0.0 && positive_rate < 1.0)) {
        throw ConfigError("positive_rate must lie strictly between 0 and 1");
    }
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
        throw ConfigError("signal_strength must lie in [0, 1]");
    }
    const auto& banks = phrase_banks();
    Rng rng(seed);

    // The small epsilon keeps e.g. 1000 * 0.046 from flooring to 45.
    const auto n_pos = static_cast<std::size_t>(std::floor(static_cast<double>(n) * positive_rate + 1e-9));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n_pos; ++i) labels[order[i]] = 1;

    std::vector<NarrativeRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        NarrativeRecord r;
        r.id = fmt::format("syn-{:06d}", i);
        r.label = labels[i];

        const std::string& drug = pick(rng, banks.drugs);
        const std::string& regimen = pick(rng, banks.regimens);
        const std::string& condition = pick(rng, banks.conditions);

        r.field("briefSummary") = sentences(rng, banks.summary, 1, 2);
        if (rng.bernoulli(0.62)) r.field("detailedDescription") = sentences(rng, banks.description, 1, 3);
        if (rng.bernoulli(0.42)) r.field("protocolPdfText") = sentences(rng, banks.protocol, 2, 4);
        if (rng.bernoulli(0.99)) {
            std::string arms;
            const auto n_arms = rng.integer(1, 2);
            for (std::int64_t a = 0; a < n_arms; ++a) {
                std::string arm = replace_all(pick(rng, banks.arm_templates), "{drug}", drug);
                arm = replace_all(std::move(arm), "{regimen}", regimen);
                if (!arms.empty()) arms.push_back(' ');
                arms += arm;
            }
            r.field("armDescriptions") = arms;
        }
        r.field("interventionDescriptions") = fmt::format("{} administered as {}.", drug, regimen);
        r.field("interventionNames") = drug;
        r.field("conditions") = condition;
        if (rng.bernoulli(0.64)) r.field("conditionsKeywords") = pick(rng, banks.keywords);
        if (rng.bernoulli(0.94)) r.field("locationDetails") = pick(rng, banks.locations);

        // Signal draw happens for every record so that the random stream, and
        // hence the rest of the corpus, does not depend on the label layout.
        const bool carries_signal = rng.bernoulli(signal_strength);
        const std::string& deviation = pick(rng, banks.deviation);
        const std::string& compliant = pick(rng, banks.compliant);
        const auto target = rng.below(3);
        auto& slot = target == 0   ? r.field("briefSummary")
                     : target == 1 ? r.field("detailedDescription")
                                   : r.field("armDescriptions");
        append_sentence(slot, r.label == 1 && carries_signal ? deviation : compliant);

        r.num_trials = 1;
        r.num_conditions = rng.integer(1, 4);
        r.enrollment_count = rng.integer(20, 2000);
        r.phase_encoded = rng.integer(0, 4);
        r.study_type_encoded = rng.integer(1, 2);
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace doseguard
