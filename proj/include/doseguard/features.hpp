#pragma once

#include <optional>
#include <string>
#include <vector>

#include "doseguard/corpus.hpp"
#include "doseguard/sparse_matrix.hpp"
#include "doseguard/tfidf.hpp"

namespace doseguard {

/// A horizontal slice of the design matrix with its column names.
struct FeatureBlock {
    FeatureCategory category;
    SparseMatrix matrix;
    std::vector<std::string> names;  // empty => generated "<category>_<j>"

    /// Dense row-major block; exact zeros are not stored.
    static FeatureBlock dense(FeatureCategory category, std::span<const float> values,
                              std::uint64_t n_rows, std::uint64_t n_cols,
                              std::vector<std::string> names = {});
};

struct AssembledFeatures {
    SparseMatrix matrix;
    FeatureRegistry registry;
};

/// Concatenates blocks column-wise in the fixed category order
/// medical, word, char, embedding, transformer_score (stable within a
/// category). Zero-width blocks are skipped. Throws DataError on row-count
/// mismatch.
AssembledFeatures assemble_features(std::vector<FeatureBlock> blocks);

FeatureBlock medical_pattern_block(const std::vector<NarrativeRecord>& records,
                                   const std::vector<ConcatenatedDoc>& docs);
FeatureBlock tfidf_block(const VectorizerModel& model, const std::vector<ConcatenatedDoc>& docs);

/// Wraps an externally produced matrix (embedding or score export). Names
/// come from its registry when one is given.
FeatureBlock external_block(FeatureCategory category, SparseMatrix matrix,
                            const FeatureRegistry* registry = nullptr);

struct FittedVectorizers {
    VectorizerModel word;
    VectorizerModel chr;

    nlohmann::ordered_json to_json() const;
    static FittedVectorizers from_json(const nlohmann::json& j);
};

FittedVectorizers fit_vectorizers(const std::vector<ConcatenatedDoc>& docs,
                                  const VectorizerConfig& word = VectorizerConfig::word_defaults(),
                                  const VectorizerConfig& chr = VectorizerConfig::char_defaults());

/// Full text-side extraction: medical patterns, word and char TF-IDF, plus
/// optional precomputed embedding / score blocks.
AssembledFeatures extract_features(const std::vector<NarrativeRecord>& records,
                                   const FittedVectorizers& vectorizers,
                                   std::optional<FeatureBlock> embeddings = std::nullopt,
                                   std::optional<FeatureBlock> scores = std::nullopt);

}  // namespace doseguard
