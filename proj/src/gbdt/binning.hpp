#pragma once

#include <cstdint>
#include <vector>

#include "doseguard/sparse_matrix.hpp"

namespace doseguard::gbdt {

/// Ordered value bins of one feature. Bin b holds values v with
/// upper_bounds[b-1] < v <= upper_bounds[b]; zero always has its own bin.
struct FeatureBins {
    std::vector<double> upper_bounds;  // n_bins - 1 cut points, strictly increasing
    std::uint32_t zero_bin = 0;

    std::uint32_t n_bins() const { return static_cast<std::uint32_t>(upper_bounds.size() + 1); }
    std::uint32_t bin_of(double v) const;
};

/// Quantile bins fitted on the nonzero values of one column. `n_zeros` only
/// matters for the distinct-value budget.
FeatureBins fit_feature_bins(std::vector<float> nonzero_values, std::uint64_t n_zeros, int max_bins);

/// Row-major binned copy of a training matrix. Only nonzero entries are
/// stored; absent entries fall in the feature's zero bin.
class BinnedMatrix {
public:
    BinnedMatrix(const SparseMatrix& X, int max_bins);

    std::uint32_t n_rows() const { return n_rows_; }
    std::uint32_t n_features() const { return static_cast<std::uint32_t>(bins_.size()); }
    const FeatureBins& feature(std::uint32_t f) const { return bins_[f]; }

    /// Offset of feature f's bins in a flat histogram; size n_features + 1.
    const std::vector<std::uint64_t>& hist_offsets() const { return hist_offset_; }
    std::uint64_t total_bins() const { return hist_offset_.back(); }

    std::uint32_t bin(std::uint32_t row, std::uint32_t f) const;

    struct RowBins {
        const std::uint32_t* features;
        const std::uint16_t* bins;
        std::size_t size;
    };
    /// Entries of column f in ascending row order.
    struct ColumnBins {
        const std::uint32_t* rows;
        const std::uint16_t* bins;
        std::size_t size;
    };
    ColumnBins column(std::uint32_t f) const {
        const auto b = col_ptr_[f];
        return {col_rows_.data() + b, col_bins_.data() + b, static_cast<std::size_t>(col_ptr_[f + 1] - b)};
    }

    RowBins row(std::uint32_t r) const {
        const auto b = row_ptr_[r];
        return {features_.data() + b, bins_of_entries_.data() + b, static_cast<std::size_t>(row_ptr_[r + 1] - b)};
    }

private:
    std::uint32_t n_rows_ = 0;
    std::vector<FeatureBins> bins_;
    std::vector<std::uint64_t> hist_offset_;
    std::vector<std::uint64_t> row_ptr_;
    std::vector<std::uint32_t> features_;
    std::vector<std::uint16_t> bins_of_entries_;
    std::vector<std::uint64_t> col_ptr_;
    std::vector<std::uint32_t> col_rows_;
    std::vector<std::uint16_t> col_bins_;
};

}  // namespace doseguard::gbdt
