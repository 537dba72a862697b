#include "doseguard/medpatterns.hpp"

#include <algorithm>
#include <stdexcept>

#include <boost/regex.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "doseguard/errors.hpp"
#include "doseguard/resources.hpp"
#include "doseguard/text.hpp"

namespace doseguard {

namespace {

struct CompiledBank {
    std::vector<PatternBankEntry> entries;
    std::vector<boost::regex> regexes;  // aligned with the flag+count prefix of entries
    std::vector<std::string> names;     // all 43
};

const CompiledBank& compiled_bank() {
    static const CompiledBank bank = [] {
        CompiledBank b;
        const auto j = nlohmann::json::parse(resources::kPatternBankJson);
        for (const auto& f : j.at("features")) {
            PatternBankEntry e;
            e.name = f.at("name").get<std::string>();
            e.group = f.at("group").get<std::string>();
            e.kind = f.at("kind").get<std::string>();
            e.source = e.kind == "statistic" ? f.at("definition").get<std::string>()
                                             : f.at("pattern").get<std::string>();
            if (e.kind != "statistic") {
                b.regexes.emplace_back(e.source, boost::regex::perl | boost::regex::icase |
                                                     boost::regex::optimize);
            }
            b.names.push_back(e.name);
            b.entries.push_back(std::move(e));
        }
        for (const auto& m : j.at("metadata")) b.names.push_back(m.at("name").get<std::string>());
        if (b.names.size() != kMedPatternWidth ||
            b.regexes.size() != kMedFlagCount + kMedCountFeatures) {
            throw std::logic_error("pattern bank resource has the wrong arity");
        }
        return b;
    }();
    return bank;
}

bool is_word_char(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

const std::vector<std::string>& MedPatternVector::names() { return compiled_bank().names; }

double MedPatternVector::operator[](std::string_view name) const {
    const auto& n = names();
    const auto it = std::find(n.begin(), n.end(), name);
    if (it == n.end()) throw ConfigError(fmt::format("unknown medical feature '{}'", name));
    return values[static_cast<std::size_t>(it - n.begin())];
}

const std::vector<PatternBankEntry>& pattern_bank() { return compiled_bank().entries; }

std::vector<std::pair<std::string, std::string>> pattern_bank_sources() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : pattern_bank()) out.emplace_back(e.name, e.source);
    return out;
}

std::string_view pattern_bank_json() { return resources::kPatternBankJson; }

TextStatistics text_statistics(std::string_view text) {
    TextStatistics s;
    s.text_length = static_cast<double>(text::codepoint_count(text));
    std::size_t words = 0;
    std::size_t letters = 0;
    std::size_t sentences = 0;
    for (std::size_t i = 0; i < text.size();) {
        if (is_word_char(text[i])) {
            ++words;
            while (i < text.size() && is_word_char(text[i])) {
                letters += is_alpha(text[i]) ? 1 : 0;
                ++i;
            }
        } else if (is_terminator(text[i])) {
            while (i < text.size() && is_terminator(text[i])) ++i;
            if (i == text.size() || is_space(text[i])) ++sentences;
        } else {
            ++i;
        }
    }
    s.word_count = static_cast<double>(words);
    s.sentence_count = static_cast<double>(sentences);
    s.avg_word_length = words == 0 ? 0.0 : static_cast<double>(letters) / static_cast<double>(words);
    return s;
}

MedPatternVector extract_text_patterns(std::string_view text) {
    const auto& bank = compiled_bank();
    MedPatternVector v;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    std::size_t k = 0;
    for (; k < kMedFlagCount; ++k) {
        v.values[k] = boost::regex_search(begin, end, bank.regexes[k]) ? 1.0 : 0.0;
    }
    for (; k < kMedFlagCount + kMedCountFeatures; ++k) {
        boost::cregex_iterator it(begin, end, bank.regexes[k]);
        v.values[k] = static_cast<double>(std::distance(it, boost::cregex_iterator{}));
    }
    const TextStatistics st = text_statistics(text);
    v.values[k++] = st.text_length;
    v.values[k++] = st.word_count;
    v.values[k++] = st.sentence_count;
    v.values[k++] = st.avg_word_length;
    return v;
}

MedPatternVector extract_medical_patterns(const ConcatenatedDoc& doc, const NarrativeRecord& record) {
    MedPatternVector v = extract_text_patterns(doc.text);
    std::size_t k = kMedPatternWidth - kMedMetadata;
    for (const auto& field : {record.num_trials, record.num_conditions, record.enrollment_count,
                              record.phase_encoded, record.study_type_encoded}) {
        v.values[k++] = static_cast<double>(field.value_or(0));
    }
    return v;
}

}  // namespace doseguard
