#include "doseguard/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "doseguard/errors.hpp"

namespace doseguard {

float SparseMatrix::at(std::uint64_t r, std::uint32_t c) const {
    const auto rv = row(r);
    const auto it = std::lower_bound(rv.cols.begin(), rv.cols.end(), c);
    if (it == rv.cols.end() || *it != c) return 0.0f;
    return rv.vals[static_cast<std::size_t>(it - rv.cols.begin())];
}

void SparseMatrix::validate() const {
    if (row_ptr.size() != n_rows + 1) {
        throw FormatError(fmt::format("row_ptr has {} entries, expected {}", row_ptr.size(), n_rows + 1));
    }
    if (row_ptr.front() != 0) throw FormatError("row_ptr[0] must be 0");
    if (row_ptr.back() != values.size() || col_idx.size() != values.size()) {
        throw FormatError("row_ptr, col_idx and values disagree on nnz");
    }
    for (std::uint64_t r = 0; r < n_rows; ++r) {
        if (row_ptr[r] > row_ptr[r + 1]) {
            throw FormatError(fmt::format("row_ptr decreases at row {}", r));
        }
        for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            if (col_idx[k] >= n_cols) {
                throw FormatError(fmt::format("column index {} out of range in row {}", col_idx[k], r));
            }
            if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1]) {
                throw FormatError(fmt::format("column indices not strictly increasing in row {}", r));
            }
            if (values[k] == 0.0f || std::isnan(values[k])) {
                throw FormatError(fmt::format("stored zero or NaN in row {}", r));
            }
        }
    }
}

std::vector<float> SparseMatrix::to_dense() const {
    std::vector<float> d(n_rows * n_cols, 0.0f);
    for (std::uint64_t r = 0; r < n_rows; ++r) {
        for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d[r * n_cols + col_idx[k]] = values[k];
    }
    return d;
}

SparseMatrix SparseMatrix::empty(std::uint64_t n_rows, std::uint64_t n_cols) {
    SparseMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_ptr.assign(n_rows + 1, 0);
    return m;
}

SparseMatrix SparseMatrix::from_dense(std::span<const float> dense, std::uint64_t n_rows,
                                      std::uint64_t n_cols) {
    if (dense.size() != n_rows * n_cols) throw DataError("dense block size mismatch");
    SparseMatrixBuilder b(n_cols);
    for (std::uint64_t r = 0; r < n_rows; ++r) {
        for (std::uint64_t c = 0; c < n_cols; ++c) b.push(static_cast<std::uint32_t>(c), dense[r * n_cols + c]);
        b.end_row();
    }
    return std::move(b).finish();
}

SparseMatrix SparseMatrix::select_rows(std::span<const std::size_t> rows) const {
    SparseMatrix m;
    m.n_rows = rows.size();
    m.n_cols = n_cols;
    m.row_ptr.reserve(rows.size() + 1);
    for (std::size_t r : rows) {
        if (r >= n_rows) throw DataError(fmt::format("row {} out of range", r));
        const auto rv = row(r);
        m.col_idx.insert(m.col_idx.end(), rv.cols.begin(), rv.cols.end());
        m.values.insert(m.values.end(), rv.vals.begin(), rv.vals.end());
        m.row_ptr.push_back(m.values.size());
    }
    return m;
}

SparseMatrix SparseMatrix::select_columns(std::span<const std::uint32_t> cols) const {
    std::vector<std::int64_t> remap(n_cols, -1);
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] >= n_cols || (j > 0 && cols[j] <= cols[j - 1])) {
            throw DataError("column selection must be strictly increasing and in range");
        }
        remap[cols[j]] = static_cast<std::int64_t>(j);
    }
    SparseMatrix m;
    m.n_rows = n_rows;
    m.n_cols = cols.size();
    for (std::uint64_t r = 0; r < n_rows; ++r) {
        for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            if (const auto to = remap[col_idx[k]]; to >= 0) {
                m.col_idx.push_back(static_cast<std::uint32_t>(to));
                m.values.push_back(values[k]);
            }
        }
        m.row_ptr.push_back(m.values.size());
    }
    return m;
}

void SparseMatrixBuilder::push(std::uint32_t col, float value) {
    if (value == 0.0f) return;
    if (std::isnan(value)) throw DataError("NaN value in feature matrix");
    if (col >= m_.n_cols) throw DataError(fmt::format("column {} out of range", col));
    if (m_.row_ptr.back() < m_.col_idx.size() && m_.col_idx.back() >= col) {
        throw DataError("builder columns must be strictly increasing within a row");
    }
    m_.col_idx.push_back(col);
    m_.values.push_back(value);
}

void SparseMatrixBuilder::end_row() {
    m_.row_ptr.push_back(m_.values.size());
    ++m_.n_rows;
}

SparseMatrix SparseMatrixBuilder::finish() && { return std::move(m_); }

std::string_view category_name(FeatureCategory c) {
    switch (c) {
        case FeatureCategory::medical: return "medical";
        case FeatureCategory::word: return "word";
        case FeatureCategory::char_ngram: return "char";
        case FeatureCategory::embedding: return "embedding";
        case FeatureCategory::transformer_score: return "transformer_score";
    }
    return "?";
}

FeatureCategory parse_category(std::string_view name) {
    for (auto c : kCategoryOrder) {
        if (category_name(c) == name) return c;
    }
    throw ConfigError(fmt::format("unknown feature category '{}'", name));
}

std::vector<std::uint32_t> FeatureRegistry::columns_of(FeatureCategory c) const {
    std::vector<std::uint32_t> cols;
    for (std::size_t j = 0; j < entries.size(); ++j) {
        if (entries[j].category == c) cols.push_back(static_cast<std::uint32_t>(j));
    }
    return cols;
}

std::vector<FeatureCategory> FeatureRegistry::categories() const {
    std::vector<FeatureCategory> out;
    for (auto c : kCategoryOrder) {
        if (has(c)) out.push_back(c);
    }
    return out;
}

void FeatureRegistry::validate() const {
    std::vector<FeatureCategory> seen;
    for (std::size_t j = 0; j < entries.size(); ++j) {
        const auto c = entries[j].category;
        if (j > 0 && c == entries[j - 1].category) continue;
        if (std::find(seen.begin(), seen.end(), c) != seen.end()) {
            throw FormatError(fmt::format("category '{}' is not contiguous (column {})", category_name(c), j));
        }
        seen.push_back(c);
    }
}

FeatureRegistry FeatureRegistry::select(std::span<const std::uint32_t> cols) const {
    FeatureRegistry out;
    out.entries.reserve(cols.size());
    for (auto c : cols) {
        if (c >= entries.size()) throw DataError("registry selection out of range");
        out.entries.push_back(entries[c]);
    }
    return out;
}

}  // namespace doseguard
