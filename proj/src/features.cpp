#include "doseguard/features.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/medpatterns.hpp"

namespace doseguard {

FeatureBlock FeatureBlock::dense(FeatureCategory category, std::span<const float> values,
                                 std::uint64_t n_rows, std::uint64_t n_cols,
                                 std::vector<std::string> names) {
    return {category, SparseMatrix::from_dense(values, n_rows, n_cols), std::move(names)};
}

AssembledFeatures assemble_features(std::vector<FeatureBlock> blocks) {
    std::erase_if(blocks, [](const FeatureBlock& b) { return b.matrix.n_cols == 0; });
    std::stable_sort(blocks.begin(), blocks.end(), [](const FeatureBlock& a, const FeatureBlock& b) {
        const auto rank = [](FeatureCategory c) {
            return std::find(kCategoryOrder.begin(), kCategoryOrder.end(), c) - kCategoryOrder.begin();
        };
        return rank(a.category) < rank(b.category);
    });

    AssembledFeatures out;
    if (blocks.empty()) return out;
    const auto n_rows = blocks.front().matrix.n_rows;
    std::uint64_t n_cols = 0;
    for (const auto& b : blocks) {
        if (b.matrix.n_rows != n_rows) {
            throw DataError(fmt::format("feature block '{}' has {} rows, expected {}",
                                        category_name(b.category), b.matrix.n_rows, n_rows));
        }
        if (!b.names.empty() && b.names.size() != b.matrix.n_cols) {
            throw DataError(fmt::format("feature block '{}' has {} names for {} columns",
                                        category_name(b.category), b.names.size(), b.matrix.n_cols));
        }
        for (std::uint64_t j = 0; j < b.matrix.n_cols; ++j) {
            out.registry.entries.push_back(
                {b.names.empty() ? fmt::format("{}_{}", category_name(b.category), j) : b.names[j],
                 b.category});
        }
        n_cols += b.matrix.n_cols;
    }

    SparseMatrix& m = out.matrix;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    std::uint64_t total_nnz = 0;
    for (const auto& b : blocks) total_nnz += b.matrix.nnz();
    m.col_idx.reserve(total_nnz);
    m.values.reserve(total_nnz);
    m.row_ptr.reserve(n_rows + 1);
    for (std::uint64_t r = 0; r < n_rows; ++r) {
        std::uint32_t offset = 0;
        for (const auto& b : blocks) {
            const auto rv = b.matrix.row(r);
            for (std::size_t k = 0; k < rv.cols.size(); ++k) {
                m.col_idx.push_back(offset + rv.cols[k]);
                m.values.push_back(rv.vals[k]);
            }
            offset += static_cast<std::uint32_t>(b.matrix.n_cols);
        }
        m.row_ptr.push_back(m.values.size());
    }
    return out;
}

FeatureBlock medical_pattern_block(const std::vector<NarrativeRecord>& records,
                                   const std::vector<ConcatenatedDoc>& docs) {
    if (records.size() != docs.size()) throw DataError("records and documents differ in length");
    std::vector<float> dense;
    dense.reserve(records.size() * kMedPatternWidth);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto v = extract_medical_patterns(docs[i], records[i]);
        for (double x : v.values) dense.push_back(static_cast<float>(x));
    }
    return FeatureBlock::dense(FeatureCategory::medical, dense, records.size(), kMedPatternWidth,
                               MedPatternVector::names());
}

FeatureBlock tfidf_block(const VectorizerModel& model, const std::vector<ConcatenatedDoc>& docs) {
    const bool word = model.kind() == VectorizerKind::word_tfidf;
    std::vector<std::string> names;
    names.reserve(model.size());
    for (const auto& t : model.vocabulary()) names.push_back((word ? "word:" : "char:") + t);
    return {word ? FeatureCategory::word : FeatureCategory::char_ngram, transform_tfidf(model, docs),
            std::move(names)};
}

FeatureBlock external_block(FeatureCategory category, SparseMatrix matrix, const FeatureRegistry* registry) {
    std::vector<std::string> names;
    if (registry != nullptr) {
        if (registry->size() != matrix.n_cols) {
            throw DataError("external block registry width differs from matrix width");
        }
        for (const auto& e : registry->entries) names.push_back(e.name);
    }
    return {category, std::move(matrix), std::move(names)};
}

nlohmann::ordered_json FittedVectorizers::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["word"] = word.to_json();
    j["char"] = chr.to_json();
    return j;
}

FittedVectorizers FittedVectorizers::from_json(const nlohmann::json& j) {
    try {
        return {VectorizerModel::from_json(j.at("word")), VectorizerModel::from_json(j.at("char"))};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("malformed vectorizer bundle: {}", e.what()));
    }
}

FittedVectorizers fit_vectorizers(const std::vector<ConcatenatedDoc>& docs, const VectorizerConfig& word,
                                  const VectorizerConfig& chr) {
    return {fit_word_tfidf(docs, word), fit_char_tfidf(docs, chr)};
}

AssembledFeatures extract_features(const std::vector<NarrativeRecord>& records,
                                   const FittedVectorizers& vectorizers,
                                   std::optional<FeatureBlock> embeddings,
                                   std::optional<FeatureBlock> scores) {
    const auto docs = concatenate_all(records);
    std::vector<FeatureBlock> blocks;
    blocks.push_back(medical_pattern_block(records, docs));
    blocks.push_back(tfidf_block(vectorizers.word, docs));
    blocks.push_back(tfidf_block(vectorizers.chr, docs));
    if (embeddings) blocks.push_back(std::move(*embeddings));
    if (scores) blocks.push_back(std::move(*scores));
    return assemble_features(std::move(blocks));
}

}  // namespace doseguard
