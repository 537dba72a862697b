#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "doseguard/gbdt.hpp"
#include "gbdt/binning.hpp"

namespace doseguard::gbdt {

struct SplitCandidate {
    std::int32_t feature = -1;
    std::uint32_t bin = 0;  // rows with bin <= this go left
    double threshold = 0.0;
    double gain = 0.0;
    std::int64_t left_count = 0;
    std::int64_t right_count = 0;

    bool valid() const { return feature >= 0; }
};

struct HistBin {
    double g = 0.0;
    double h = 0.0;
    std::int64_t count = 0;
};

/// Gradient histogram of one node. Only the features listed in `features`
/// hold valid bins; every other feature has all of the node's rows in its
/// zero bin and cannot be split.
struct Histogram {
    std::vector<HistBin> bins;            // flat, indexed through hist_offsets()
    std::vector<std::uint32_t> features;  // ascending
    std::vector<char> touched;            // per feature
};

/// Best-first (leaf-wise) regression tree growth over feature histograms.
class TreeLearner {
public:
    TreeLearner(const BinnedMatrix& data, const TrainConfig& config);

    /// Grows one tree on `rows` (sorted training rows of this round) using
    /// only the features flagged in `feature_mask`. Afterwards
    /// leaf_of_row()[r] is the leaf node of every row in `rows`.
    Tree grow(std::span<const double> g, std::span<const double> h, std::span<const std::uint32_t> rows,
              const std::vector<char>& feature_mask);

    const std::vector<std::int32_t>& leaf_of_row() const { return leaf_of_row_; }

    /// Best split of a node given its histogram and totals.
    SplitCandidate best_split(const Histogram& hist, double sum_g, double sum_h, std::int64_t count) const;

private:
    struct Leaf {
        std::int32_t node = 0;
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
        int depth = 0;
        double sum_g = 0.0;
        double sum_h = 0.0;
        SplitCandidate split;
        std::unique_ptr<Histogram> hist;  // null when not cached
    };

    std::unique_ptr<Histogram> acquire();
    void release(std::unique_ptr<Histogram>& hist);
    void build_histogram(Histogram& hist, std::uint32_t begin, std::uint32_t end, std::span<const double> g,
                         std::span<const double> h, const std::vector<char>& feature_mask);
    void subtract(Histogram& larger, const Histogram& smaller, double small_g, double small_h,
                  std::int64_t small_count) const;
    void evaluate(Leaf& leaf, std::span<const double> g, std::span<const double> h,
                  const std::vector<char>& feature_mask);
    bool splittable(const Leaf& leaf) const;

    const BinnedMatrix& data_;
    TrainConfig config_;
    std::int64_t min_child_;
    std::size_t max_cached_histograms_;
    std::vector<std::uint32_t> partition_;
    std::vector<std::uint32_t> scratch_;
    std::vector<std::int32_t> leaf_of_row_;
    std::vector<std::unique_ptr<Histogram>> pool_;
    std::vector<std::uint32_t> stamp_;  // per row: id of the last column-wise build containing it
    std::uint32_t current_stamp_ = 0;
};

}  // namespace doseguard::gbdt
