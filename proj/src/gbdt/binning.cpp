#include "gbdt/binning.hpp"

#include <algorithm>
#include <cmath>

#include "doseguard/errors.hpp"

namespace doseguard::gbdt {

namespace {

struct Distinct {
    double value;
    std::uint64_t count;
};

/// Greedy equal-frequency grouping of sorted distinct values into at most
/// `budget` groups; returns the index one past the end of each group.
std::vector<std::size_t> group_ends(const std::vector<Distinct>& d, std::size_t budget) {
    std::vector<std::size_t> ends;
    if (d.empty()) return ends;
    if (d.size() <= budget) {
        for (std::size_t i = 1; i <= d.size(); ++i) ends.push_back(i);
        return ends;
    }
    std::uint64_t total = 0;
    for (const auto& x : d) total += x.count;
    std::uint64_t cumulative = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        cumulative += d[i].count;
        const std::size_t remaining_values = d.size() - i - 1;
        const std::size_t remaining_groups = budget - ends.size() - 1;
        const double target = static_cast<double>(total) * static_cast<double>(ends.size() + 1) /
                              static_cast<double>(budget);
        const bool last = i + 1 == d.size();
        if (last || (remaining_groups > 0 &&
                     (static_cast<double>(cumulative) >= target || remaining_values <= remaining_groups))) {
            ends.push_back(i + 1);
        }
    }
    return ends;
}

}  // namespace

std::uint32_t FeatureBins::bin_of(double v) const {
    return static_cast<std::uint32_t>(std::lower_bound(upper_bounds.begin(), upper_bounds.end(), v) -
                                      upper_bounds.begin());
}

FeatureBins fit_feature_bins(std::vector<float> nonzero_values, std::uint64_t /*n_zeros*/, int max_bins) {
    std::sort(nonzero_values.begin(), nonzero_values.end());
    std::vector<Distinct> neg;
    std::vector<Distinct> pos;
    for (float v : nonzero_values) {
        auto& side = v < 0.0f ? neg : pos;
        if (!side.empty() && side.back().value == static_cast<double>(v)) {
            ++side.back().count;
        } else {
            side.push_back({static_cast<double>(v), 1});
        }
    }

    // One bin is reserved for zero; the rest are shared by the two signs in
    // proportion to their counts.
    const std::size_t budget = static_cast<std::size_t>(max_bins) - 1;
    std::size_t neg_budget = 0;
    std::size_t pos_budget = 0;
    if (!neg.empty() && !pos.empty()) {
        const double neg_share = static_cast<double>(neg.size()) / static_cast<double>(neg.size() + pos.size());
        neg_budget = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(neg_share * static_cast<double>(budget))));
        pos_budget = std::max<std::size_t>(1, budget > neg_budget ? budget - neg_budget : 0);
    } else if (!neg.empty()) {
        neg_budget = budget;
    } else {
        pos_budget = budget;
    }

    // Each bin is summarized by its [min, max] value range, in value order.
    std::vector<std::pair<double, double>> ranges;
    const auto append_groups = [&](const std::vector<Distinct>& d, std::size_t b) {
        std::size_t start = 0;
        for (std::size_t end : group_ends(d, b)) {
            ranges.emplace_back(d[start].value, d[end - 1].value);
            start = end;
        }
    };
    append_groups(neg, neg_budget);
    FeatureBins bins;
    bins.zero_bin = static_cast<std::uint32_t>(ranges.size());
    ranges.emplace_back(0.0, 0.0);
    append_groups(pos, pos_budget);

    for (std::size_t b = 0; b + 1 < ranges.size(); ++b) {
        bins.upper_bounds.push_back((ranges[b].second + ranges[b + 1].first) / 2.0);
    }
    return bins;
}

BinnedMatrix::BinnedMatrix(const SparseMatrix& X, int max_bins) : n_rows_(static_cast<std::uint32_t>(X.n_rows)) {
    if (max_bins < 2 || max_bins > 65535) throw ConfigError("max_bins must lie in [2, 65535]");
    const auto n_features = static_cast<std::uint32_t>(X.n_cols);

    std::vector<std::vector<float>> columns(n_features);
    {
        std::vector<std::uint64_t> col_counts(n_features, 0);
        for (auto c : X.col_idx) ++col_counts[c];
        for (std::uint32_t f = 0; f < n_features; ++f) columns[f].reserve(col_counts[f]);
    }
    for (std::uint64_t k = 0; k < X.nnz(); ++k) {
        if (!std::isfinite(X.values[k])) throw DataError("non-finite value in training matrix");
        columns[X.col_idx[k]].push_back(X.values[k]);
    }

    bins_.reserve(n_features);
    hist_offset_.reserve(n_features + 1);
    hist_offset_.push_back(0);
    for (std::uint32_t f = 0; f < n_features; ++f) {
        const std::uint64_t n_zeros = X.n_rows - columns[f].size();
        bins_.push_back(fit_feature_bins(std::move(columns[f]), n_zeros, max_bins));
        hist_offset_.push_back(hist_offset_.back() + bins_.back().n_bins());
    }

    row_ptr_ = X.row_ptr;
    features_ = X.col_idx;
    bins_of_entries_.resize(X.nnz());
    for (std::uint64_t k = 0; k < X.nnz(); ++k) {
        bins_of_entries_[k] = static_cast<std::uint16_t>(bins_[X.col_idx[k]].bin_of(X.values[k]));
    }

    col_ptr_.assign(n_features + 1, 0);
    for (auto c : features_) ++col_ptr_[c + 1];
    for (std::uint32_t f = 0; f < n_features; ++f) col_ptr_[f + 1] += col_ptr_[f];
    col_rows_.resize(X.nnz());
    col_bins_.resize(X.nnz());
    std::vector<std::uint64_t> next(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::uint32_t r = 0; r < n_rows_; ++r) {
        for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            const auto pos = next[features_[k]]++;
            col_rows_[pos] = r;
            col_bins_[pos] = bins_of_entries_[k];
        }
    }
}

std::uint32_t BinnedMatrix::bin(std::uint32_t row, std::uint32_t f) const {
    const auto* begin = features_.data() + row_ptr_[row];
    const auto* end = features_.data() + row_ptr_[row + 1];
    const auto* it = std::lower_bound(begin, end, f);
    if (it == end || *it != f) return bins_[f].zero_bin;
    return bins_of_entries_[static_cast<std::size_t>(it - features_.data())];
}

}  // namespace doseguard::gbdt
