#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "doseguard/corpus.hpp"
#include "doseguard/sparse_matrix.hpp"

namespace doseguard {

enum class VectorizerKind { word_tfidf, char_tfidf };

struct VectorizerConfig {
    int ngram_lo = 1;
    int ngram_hi = 1;
    std::size_t max_features = 2000;
    std::size_t min_df = 2;
    /// Terms with df > max_df_fraction * n_docs are dropped; 1.0 disables the cap.
    double max_df_fraction = 0.8;
    bool sublinear_tf = true;
    bool l2_normalize = true;
    /// Word analyzer only: shortest token kept, in code points.
    std::size_t min_token_length = 2;

    static VectorizerConfig word_defaults();
    static VectorizerConfig char_defaults();
    void validate() const;
    bool operator==(const VectorizerConfig&) const = default;
};

/// A fitted vocabulary with smoothed idf weights. Columns follow the
/// lexicographic (byte-wise) order of the terms.
class VectorizerModel {
public:
    VectorizerModel() = default;
    VectorizerModel(VectorizerKind kind, VectorizerConfig config, std::uint64_t n_docs,
                    std::vector<std::string> vocabulary, std::vector<std::uint64_t> df);

    VectorizerKind kind() const { return kind_; }
    const VectorizerConfig& config() const { return config_; }
    std::uint64_t n_docs() const { return n_docs_; }
    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    const std::vector<double>& idf() const { return idf_; }
    const std::vector<std::uint64_t>& document_frequency() const { return df_; }
    std::size_t size() const { return vocabulary_.size(); }

    /// Column of `term`, or -1 if out of vocabulary.
    std::int64_t column_of(std::string_view term) const;

    /// Terms produced by this model's analyzer, with repetition.
    std::vector<std::string> analyze(std::string_view text) const;

    nlohmann::ordered_json to_json() const;
    static VectorizerModel from_json(const nlohmann::json& j);

    bool operator==(const VectorizerModel& o) const {
        return kind_ == o.kind_ && config_ == o.config_ && n_docs_ == o.n_docs_ &&
               vocabulary_ == o.vocabulary_ && df_ == o.df_ && idf_ == o.idf_;
    }

private:
    struct StringHash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    };

    VectorizerKind kind_ = VectorizerKind::word_tfidf;
    VectorizerConfig config_;
    std::uint64_t n_docs_ = 0;
    std::vector<std::string> vocabulary_;
    std::vector<std::uint64_t> df_;
    std::vector<double> idf_;
    std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> index_;
};

/// Term lists of the two analyzers, exposed for tests and oracles.
std::vector<std::string> word_terms(std::string_view text, const VectorizerConfig& config);
std::vector<std::string> char_terms(std::string_view text, const VectorizerConfig& config);

/// idf(t) = ln((1 + N) / (1 + df)) + 1
double smoothed_idf(std::uint64_t n_docs, std::uint64_t df);

VectorizerModel fit_tfidf(VectorizerKind kind, const std::vector<ConcatenatedDoc>& docs,
                          const VectorizerConfig& config);
VectorizerModel fit_word_tfidf(const std::vector<ConcatenatedDoc>& docs,
                               const VectorizerConfig& config = VectorizerConfig::word_defaults());
VectorizerModel fit_char_tfidf(const std::vector<ConcatenatedDoc>& docs,
                               const VectorizerConfig& config = VectorizerConfig::char_defaults());

/// Entry = (1 + ln tf) * idf (or tf * idf without sublinear scaling), rows
/// L2-normalized; unseen terms are ignored.
SparseMatrix transform_tfidf(const VectorizerModel& model, const std::vector<ConcatenatedDoc>& docs);

}  // namespace doseguard
