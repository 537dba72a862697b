#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "doseguard/corpus.hpp"
#include "doseguard/errors.hpp"
#include "doseguard/medpatterns.hpp"
#include "doseguard/text.hpp"
#include "support.hpp"

using namespace doseguard;
using doseguard::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

double flag(const MedPatternVector& v, std::string_view name) { return v[name]; }

}  // namespace

TEST(Text, Utf8RoundTripAndCounting) {
    const std::string s = "caf\xC3\xA9 \xE2\x80\x94 \xF0\x9F\x92\x8A";
    EXPECT_EQ(text::encode_utf8(text::decode_utf8(s)), s);
    EXPECT_EQ(text::codepoint_count(s), 8U);
    EXPECT_EQ(text::decode_utf8("\xFF"), std::u32string(1, U'�'));
}

TEST(Text, WordTokens) {
    EXPECT_EQ(text::word_tokens("Dose-Escalation, 50mg x IV!", 2),
              (std::vector<std::string>{"dose", "escalation", "50mg", "iv"}));
    EXPECT_EQ(text::word_tokens("a b", 1), (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(text::word_tokens("", 1).empty());
    EXPECT_TRUE(text::is_blank(" \t\n"));
    EXPECT_FALSE(text::is_blank(" x "));
}

TEST(Corpus, MinimalRecordHasEightMissingFields) {
    const auto r = parse_record(R"({"id":"a","briefSummary":"x","label":0})", 1);
    EXPECT_EQ(r.id, "a");
    EXPECT_EQ(r.label, 0);
    int missing = 0;
    for (const auto& f : r.text_fields) missing += f.has_value() ? 0 : 1;
    EXPECT_EQ(missing, 8);
    EXPECT_EQ(r.field("briefSummary"), std::optional<std::string>("x"));
    EXPECT_FALSE(r.num_trials.has_value());
}

TEST(Corpus, ParseErrorsNameTheLine) {
    auto expect_line_error = [](const std::string& line, const std::string& needle) {
        try {
            parse_record(line, 17);
            FAIL() << "no error for " << line;
        } catch (const DataError& e) {
            EXPECT_NE(std::string(e.what()).find("17"), std::string::npos) << e.what();
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_line_error(R"({"id":"a","label":2})", "label");
    expect_line_error(R"({"id":"a","label":"1"})", "label");
    expect_line_error(R"({"id":"a","label":0.5})", "label");
    expect_line_error(R"({"id":"a","label":1)", "malformed");
    expect_line_error(R"([1,2])", "object");
    expect_line_error(R"({"label":1})", "id");
    expect_line_error(R"({"id":"a","label":1,"briefSummary":3})", "briefSummary");
    expect_line_error(R"({"id":"a","label":1,"phaseEncoded":9})", "phaseEncoded");
}

TEST(Corpus, LoadRejectsDuplicateIdsAndKeepsOrder) {
    TempDir dir("corpus");
    write_text(dir / "ok.jsonl", "{\"id\":\"b\",\"label\":1}\n\n{\"id\":\"a\",\"label\":0}\n");
    const auto records = load_corpus(dir / "ok.jsonl");
    ASSERT_EQ(records.size(), 2U);
    EXPECT_EQ(records[0].id, "b");
    EXPECT_EQ(records[1].id, "a");

    write_text(dir / "dup.jsonl", "{\"id\":\"a\",\"label\":1}\n{\"id\":\"a\",\"label\":0}\n");
    try {
        load_corpus(dir / "dup.jsonl");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_corpus(dir / "missing.jsonl"), DataError);
}

TEST(Corpus, Concatenation) {
    NarrativeRecord r;
    r.id = "x";
    EXPECT_EQ(concatenate_fields(r).text, "");
    r.field("conditions") = "B";
    r.field("briefSummary") = "A";
    r.field("detailedDescription") = "   ";
    EXPECT_EQ(concatenate_fields(r).text, "A B");
}

TEST(Corpus, ConcatenationKeepsFieldsInOrderAndSurvivesReserialization) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        NarrativeRecord r;
        r.id = "r" + std::to_string(trial);
        r.label = static_cast<int>(rng.integer(0, 1));
        std::vector<std::string> present;
        for (std::size_t f = 0; f < kTextFieldNames.size(); ++f) {
            const auto roll = rng.integer(0, 3);
            if (roll == 0) continue;
            if (roll == 1) {
                r.text_fields[f] = " ";
                continue;
            }
            r.text_fields[f] = "field" + std::to_string(f) + "_" + std::to_string(rng.integer(0, 99));
            present.push_back(*r.text_fields[f]);
        }
        const auto doc = concatenate_fields(r);
        std::size_t pos = 0;
        for (const auto& p : present) {
            const auto at = doc.text.find(p, pos);
            ASSERT_NE(at, std::string::npos);
            pos = at + p.size();
        }
        EXPECT_EQ(doc_from_json(nlohmann::json::parse(to_json(doc).dump())), doc);
        EXPECT_EQ(parse_record(to_json(r).dump()), r);
    }
}

TEST(Corpus, StatsNearestRank) {
    std::vector<ConcatenatedDoc> docs{{"a", "x", 0}, {"b", "yy", 1}, {"c", "zzz", 0}};
    const auto s = corpus_stats(docs);
    EXPECT_EQ(s.n_docs, 3U);
    EXPECT_EQ(s.n_positive, 1U);
    EXPECT_EQ(s.median_length, 2U);
    EXPECT_EQ(s.min_length, 1U);
    EXPECT_EQ(s.max_length, 3U);
    EXPECT_DOUBLE_EQ(corpus_stats({{"a", "", 0}, {"b", "q", 1}}).positive_rate, 0.5);
    EXPECT_EQ(nearest_rank({10, 20, 30, 40}, 0.25), 10U);
    EXPECT_EQ(nearest_rank({10, 20, 30, 40}, 0.5), 20U);
    EXPECT_EQ(nearest_rank({10, 20, 30, 40}, 1.0), 40U);
    EXPECT_THROW(corpus_stats({}), DataError);
}

TEST(Synthetic, ExactPositiveCountAndDeterminism) {
    const auto a = generate_synthetic_corpus(1000, 0.046, 1.0, 7);
    ASSERT_EQ(a.size(), 1000U);
    int positives = 0;
    for (const auto& r : a) positives += r.label;
    EXPECT_EQ(positives, 46);

    TempDir dir("synth");
    write_corpus(dir / "a.jsonl", a);
    write_corpus(dir / "b.jsonl", generate_synthetic_corpus(1000, 0.046, 1.0, 7));
    EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
    EXPECT_EQ(load_corpus(dir / "a.jsonl"), a);

    const auto other = generate_synthetic_corpus(1000, 0.046, 1.0, 8);
    EXPECT_NE(other, a);

    for (std::size_t n : {10U, 37U, 999U}) {
        for (double rate : {0.046, 0.5, 0.91}) {
            const auto c = generate_synthetic_corpus(n, rate, 0.5, 3);
            std::size_t p = 0;
            for (const auto& r : c) p += static_cast<std::size_t>(r.label);
            EXPECT_EQ(p, static_cast<std::size_t>(std::floor(static_cast<double>(n) * rate)));
        }
    }
    EXPECT_THROW(generate_synthetic_corpus(5, 0.1, 1.0, 1), ConfigError);
    EXPECT_THROW(generate_synthetic_corpus(100, 0.0, 1.0, 1), ConfigError);
    EXPECT_THROW(generate_synthetic_corpus(100, 0.1, 1.5, 1), ConfigError);
}

TEST(Synthetic, FullStrengthPositivesCarryErrorVocabulary) {
    const auto corpus = generate_synthetic_corpus(400, 0.1, 1.0, 11);
    for (const auto& r : corpus) {
        const auto doc = concatenate_fields(r);
        const auto v = extract_text_patterns(doc.text);
        if (r.label == 1) {
            EXPECT_EQ(flag(v, "has_error_keyword") + flag(v, "has_adjustment") + flag(v, "has_titration") +
                          flag(v, "has_max_dose") + flag(v, "has_loading_dose") >
                      0.0,
                      true)
                << doc.text;
        }
    }
}

TEST(MedPatterns, ArityAndBank) {
    EXPECT_EQ(MedPatternVector::names().size(), 43U);
    EXPECT_EQ(pattern_bank().size(), 38U);
    std::size_t flags = 0;
    for (const auto& e : pattern_bank()) flags += e.kind == "flag" ? 1 : 0;
    EXPECT_EQ(flags, kMedFlagCount);
    EXPECT_NE(pattern_bank_json().find("has_mg_dose"), std::string_view::npos);
    EXPECT_THROW((void)MedPatternVector{}["no_such_feature"], ConfigError);
}

TEST(MedPatterns, EmptyTextCopiesMetadataOnly) {
    NarrativeRecord r;
    r.id = "m";
    r.num_trials = 3;
    r.enrollment_count = 120;
    r.phase_encoded = 2;
    const auto v = extract_medical_patterns(concatenate_fields(r), r);
    const auto& names = MedPatternVector::names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == "num_trials") {
            EXPECT_EQ(v.values[i], 3.0);
        } else if (names[i] == "enrollment_count") {
            EXPECT_EQ(v.values[i], 120.0);
        } else if (names[i] == "phase_encoded") {
            EXPECT_EQ(v.values[i], 2.0);
        } else {
            EXPECT_EQ(v.values[i], 0.0) << names[i];
        }
    }
}

TEST(MedPatterns, WorkedExamples) {
    const auto a = extract_text_patterns("Administered 50 mg IV twice daily; dose reduced due to overdose.");
    EXPECT_EQ(flag(a, "has_mg_dose"), 1.0);
    EXPECT_EQ(flag(a, "has_iv"), 1.0);
    EXPECT_EQ(flag(a, "has_bid"), 1.0);
    EXPECT_EQ(flag(a, "has_error_keyword"), 1.0);
    EXPECT_GE(flag(a, "dose_count"), 1.0);

    const auto b = extract_text_patterns("10 mg/kg q.d. max dose 800 mg");
    EXPECT_EQ(flag(b, "has_weight_based"), 1.0);
    EXPECT_EQ(flag(b, "has_qd"), 1.0);
    EXPECT_EQ(flag(b, "has_max_dose"), 1.0);
    EXPECT_EQ(flag(b, "dose_count"), 2.0);
}

TEST(MedPatterns, UnitAndFrequencyPatterns) {
    EXPECT_EQ(flag(extract_text_patterns("250mg"), "has_mg_dose"), 1.0);
    EXPECT_EQ(flag(extract_text_patterns("250 mg"), "has_mg_dose"), 1.0);
    EXPECT_EQ(flag(extract_text_patterns("mgso4"), "has_mg_dose"), 0.0);
    EXPECT_EQ(flag(extract_text_patterns("given 4 mgso4"), "has_mg_dose"), 0.0);
    for (const char* s : {"BID", "b.i.d.", "twice daily", "taken bid with food"}) {
        EXPECT_EQ(flag(extract_text_patterns(s), "has_bid"), 1.0) << s;
    }
    EXPECT_EQ(flag(extract_text_patterns("morbid"), "has_bid"), 0.0);
    EXPECT_EQ(flag(extract_text_patterns("25 %"), "percentage_count"), 1.0);
    EXPECT_EQ(flag(extract_text_patterns("1.5 and 2.25"), "decimal_count"), 2.0);
    EXPECT_EQ(flag(extract_text_patterns("10-20 mg or 5 to 7"), "range_count"), 2.0);
}

TEST(MedPatterns, TextStatistics) {
    const auto s = text_statistics("Dose was high. Reduced!");
    EXPECT_EQ(s.word_count, 4.0);
    EXPECT_EQ(s.sentence_count, 2.0);
    EXPECT_DOUBLE_EQ(s.avg_word_length, (4 + 3 + 4 + 7) / 4.0);
    EXPECT_EQ(s.text_length, 23.0);
    EXPECT_EQ(text_statistics("...").avg_word_length, 0.0);
}

TEST(MedPatterns, CaseInvarianceMonotonicityAndRanges) {
    const auto corpus = generate_synthetic_corpus(200, 0.2, 1.0, 13);
    for (std::size_t i = 0; i + 1 < corpus.size(); i += 2) {
        const auto t1 = concatenate_fields(corpus[i]).text;
        const auto t2 = concatenate_fields(corpus[i + 1]).text;
        const auto v = extract_text_patterns(t1);
        const auto lower = extract_text_patterns(text::ascii_lower(t1));
        std::string upper = t1;
        for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        const auto up = extract_text_patterns(upper);
        const auto joined = extract_text_patterns(t1 + " " + t2);
        for (std::size_t k = 0; k < kMedFlagCount + kMedCountFeatures; ++k) {
            if (k < kMedFlagCount) {
                EXPECT_TRUE(v.values[k] == 0.0 || v.values[k] == 1.0);
                EXPECT_EQ(v.values[k], lower.values[k]) << MedPatternVector::names()[k];
                EXPECT_EQ(v.values[k], up.values[k]) << MedPatternVector::names()[k];
            }
            EXPECT_GE(joined.values[k], v.values[k]) << MedPatternVector::names()[k];
        }
        for (double x : v.values) EXPECT_GE(x, 0.0);
        EXPECT_EQ(extract_text_patterns(t1).values, v.values);
        const auto st = text_statistics(t1);
        if (st.sentence_count > 0) {
            EXPECT_GE(st.word_count, st.sentence_count);
        }
    }
}
