#include "doseguard/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/text.hpp"

namespace doseguard {

VectorizerConfig VectorizerConfig::word_defaults() { return {}; }

VectorizerConfig VectorizerConfig::char_defaults() {
    VectorizerConfig c;
    c.ngram_lo = 3;
    c.ngram_hi = 7;
    c.max_features = 1000;
    c.min_df = 2;
    c.max_df_fraction = 1.0;
    return c;
}

void VectorizerConfig::validate() const {
    if (ngram_lo < 1 || ngram_hi < ngram_lo) throw ConfigError("invalid n-gram range");
    if (max_features == 0) throw ConfigError("max_features must be positive");
    if (!(max_df_fraction > 0.0 && max_df_fraction <= 1.0)) {
        throw ConfigError("max_df_fraction must lie in (0, 1]");
    }
}

double smoothed_idf(std::uint64_t n_docs, std::uint64_t df) {
    return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
}

std::vector<std::string> word_terms(std::string_view text, const VectorizerConfig& config) {
    const auto tokens = text::word_tokens(text, config.min_token_length);
    if (config.ngram_lo == 1 && config.ngram_hi == 1) return tokens;
    std::vector<std::string> terms;
    for (int n = config.ngram_lo; n <= config.ngram_hi; ++n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
            std::string t = tokens[i];
            for (std::size_t k = 1; k < un; ++k) t += ' ' + tokens[i + k];
            terms.push_back(std::move(t));
        }
    }
    return terms;
}

std::vector<std::string> char_terms(std::string_view text, const VectorizerConfig& config) {
    const std::u32string cps = text::decode_utf8(text::ascii_lower(text));
    std::vector<std::string> terms;
    for (int n = config.ngram_lo; n <= config.ngram_hi; ++n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + un <= cps.size(); ++i) {
            terms.push_back(text::encode_utf8(std::u32string_view(cps).substr(i, un)));
        }
    }
    return terms;
}

VectorizerModel::VectorizerModel(VectorizerKind kind, VectorizerConfig config, std::uint64_t n_docs,
                                 std::vector<std::string> vocabulary, std::vector<std::uint64_t> df)
    : kind_(kind), config_(config), n_docs_(n_docs), vocabulary_(std::move(vocabulary)), df_(std::move(df)) {
    if (df_.size() != vocabulary_.size()) throw FormatError("vocabulary and df lengths differ");
    if (!std::is_sorted(vocabulary_.begin(), vocabulary_.end()) ||
        std::adjacent_find(vocabulary_.begin(), vocabulary_.end()) != vocabulary_.end()) {
        throw FormatError("vocabulary must be strictly increasing");
    }
    idf_.reserve(df_.size());
    for (std::size_t j = 0; j < vocabulary_.size(); ++j) {
        idf_.push_back(smoothed_idf(n_docs_, df_[j]));
        index_.emplace(vocabulary_[j], static_cast<std::uint32_t>(j));
    }
}

std::int64_t VectorizerModel::column_of(std::string_view term) const {
    const auto it = index_.find(term);
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::vector<std::string> VectorizerModel::analyze(std::string_view text) const {
    return kind_ == VectorizerKind::word_tfidf ? word_terms(text, config_) : char_terms(text, config_);
}

nlohmann::ordered_json VectorizerModel::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind_ == VectorizerKind::word_tfidf ? "word_tfidf" : "char_tfidf";
    j["config"] = {{"ngram_lo", config_.ngram_lo},
                   {"ngram_hi", config_.ngram_hi},
                   {"max_features", config_.max_features},
                   {"min_df", config_.min_df},
                   {"max_df_fraction", config_.max_df_fraction},
                   {"sublinear_tf", config_.sublinear_tf},
                   {"l2_normalize", config_.l2_normalize},
                   {"min_token_length", config_.min_token_length}};
    j["n_docs"] = n_docs_;
    j["vocabulary"] = vocabulary_;
    j["df"] = df_;
    return j;
}

VectorizerModel VectorizerModel::from_json(const nlohmann::json& j) {
    try {
        const auto kind_name = j.at("kind").get<std::string>();
        VectorizerKind kind;
        if (kind_name == "word_tfidf") {
            kind = VectorizerKind::word_tfidf;
        } else if (kind_name == "char_tfidf") {
            kind = VectorizerKind::char_tfidf;
        } else {
            throw FormatError(fmt::format("unknown vectorizer kind '{}'", kind_name));
        }
        const auto& c = j.at("config");
        VectorizerConfig config;
        config.ngram_lo = c.at("ngram_lo").get<int>();
        config.ngram_hi = c.at("ngram_hi").get<int>();
        config.max_features = c.at("max_features").get<std::size_t>();
        config.min_df = c.at("min_df").get<std::size_t>();
        config.max_df_fraction = c.at("max_df_fraction").get<double>();
        config.sublinear_tf = c.at("sublinear_tf").get<bool>();
        config.l2_normalize = c.at("l2_normalize").get<bool>();
        config.min_token_length = c.at("min_token_length").get<std::size_t>();
        config.validate();
        return VectorizerModel(kind, config, j.at("n_docs").get<std::uint64_t>(),
                               j.at("vocabulary").get<std::vector<std::string>>(),
                               j.at("df").get<std::vector<std::uint64_t>>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("malformed vectorizer JSON: {}", e.what()));
    }
}

VectorizerModel fit_tfidf(VectorizerKind kind, const std::vector<ConcatenatedDoc>& docs,
                          const VectorizerConfig& config) {
    config.validate();
    if (docs.size() < 2) throw DataError("fitting a vectorizer needs at least 2 documents");

    struct Counts {
        std::uint64_t df = 0;
        std::uint64_t total = 0;
    };
    std::unordered_map<std::string, Counts> counts;
    std::unordered_map<std::string, std::uint32_t> local;
    for (const auto& doc : docs) {
        local.clear();
        auto terms = kind == VectorizerKind::word_tfidf ? word_terms(doc.text, config)
                                                        : char_terms(doc.text, config);
        for (auto& t : terms) ++local[std::move(t)];
        for (const auto& [term, tf] : local) {
            auto& c = counts[term];
            ++c.df;
            c.total += tf;
        }
    }

    const double max_df = config.max_df_fraction * static_cast<double>(docs.size());
    struct Candidate {
        std::string term;
        Counts counts;
    };
    std::vector<Candidate> kept;
    for (auto& [term, c] : counts) {
        if (c.df < config.min_df) continue;
        if (config.max_df_fraction < 1.0 && static_cast<double>(c.df) > max_df) continue;
        kept.push_back({term, c});
    }
    if (kept.empty()) {
        throw DataError("vocabulary is empty after document-frequency filtering");
    }
    if (kept.size() > config.max_features) {
        std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
            if (a.counts.total != b.counts.total) return a.counts.total > b.counts.total;
            return a.term < b.term;
        });
        kept.resize(config.max_features);
    }
    std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) { return a.term < b.term; });

    std::vector<std::string> vocabulary;
    std::vector<std::uint64_t> df;
    vocabulary.reserve(kept.size());
    df.reserve(kept.size());
    for (auto& c : kept) {
        vocabulary.push_back(std::move(c.term));
        df.push_back(c.counts.df);
    }
    return VectorizerModel(kind, config, docs.size(), std::move(vocabulary), std::move(df));
}

VectorizerModel fit_word_tfidf(const std::vector<ConcatenatedDoc>& docs, const VectorizerConfig& config) {
    return fit_tfidf(VectorizerKind::word_tfidf, docs, config);
}

VectorizerModel fit_char_tfidf(const std::vector<ConcatenatedDoc>& docs, const VectorizerConfig& config) {
    return fit_tfidf(VectorizerKind::char_tfidf, docs, config);
}

SparseMatrix transform_tfidf(const VectorizerModel& model, const std::vector<ConcatenatedDoc>& docs) {
    SparseMatrixBuilder builder(model.size());
    std::map<std::uint32_t, std::uint32_t> tf;
    std::vector<double> weights;
    for (const auto& doc : docs) {
        tf.clear();
        for (const auto& term : model.analyze(doc.text)) {
            if (const auto col = model.column_of(term); col >= 0) ++tf[static_cast<std::uint32_t>(col)];
        }
        weights.clear();
        double norm_sq = 0.0;
        for (const auto& [col, count] : tf) {
            const double scaled = model.config().sublinear_tf ? 1.0 + std::log(static_cast<double>(count))
                                                              : static_cast<double>(count);
            const double w = scaled * model.idf()[col];
            weights.push_back(w);
            norm_sq += w * w;
        }
        const double norm = model.config().l2_normalize && norm_sq > 0.0 ? std::sqrt(norm_sq) : 1.0;
        std::size_t k = 0;
        for (const auto& [col, count] : tf) builder.push(col, static_cast<float>(weights[k++] / norm));
        builder.end_row();
    }
    return std::move(builder).finish();
}

}  // namespace doseguard
