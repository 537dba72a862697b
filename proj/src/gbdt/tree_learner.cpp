#include "gbdt/tree_learner.hpp"

#include <algorithm>

namespace doseguard::gbdt {

namespace {

constexpr std::size_t kHistogramCacheBytes = std::size_t{512} << 20;

}  // namespace

TreeLearner::TreeLearner(const BinnedMatrix& data, const TrainConfig& config)
    : data_(data),
      config_(config),
      min_child_(std::max(1, config.min_child_samples)),
      leaf_of_row_(data.n_rows(), -1),
      stamp_(data.n_rows(), 0) {
    const std::size_t per_hist = std::max<std::size_t>(1, data.total_bins() * sizeof(HistBin));
    max_cached_histograms_ = kHistogramCacheBytes / per_hist;
}

std::unique_ptr<Histogram> TreeLearner::acquire() {
    if (!pool_.empty()) {
        auto hist = std::move(pool_.back());
        pool_.pop_back();
        return hist;
    }
    auto hist = std::make_unique<Histogram>();
    hist->bins.resize(data_.total_bins());
    hist->touched.assign(data_.n_features(), 0);
    return hist;
}

void TreeLearner::release(std::unique_ptr<Histogram>& hist) {
    if (!hist) return;
    for (auto f : hist->features) hist->touched[f] = 0;
    hist->features.clear();
    if (pool_.size() < max_cached_histograms_ + 2) pool_.push_back(std::move(hist));
    hist.reset();
}

void TreeLearner::build_histogram(Histogram& hist, std::uint32_t begin, std::uint32_t end,
                                  std::span<const double> g, std::span<const double> h,
                                  const std::vector<char>& feature_mask) {
    const auto& offsets = data_.hist_offsets();
    const auto touch = [&](std::uint32_t f) {
        hist.touched[f] = 1;
        hist.features.push_back(f);
        std::fill(hist.bins.begin() + static_cast<std::ptrdiff_t>(offsets[f]),
                  hist.bins.begin() + static_cast<std::ptrdiff_t>(offsets[f + 1]), HistBin{});
    };
    double total_g = 0.0;
    double total_h = 0.0;
    // Rows inside a leaf are in ascending order, so both traversals add each
    // bin's terms in the same sequence.
    if (std::uint64_t{end - begin} * 4 >= data_.n_rows()) {
        if (++current_stamp_ == 0) {
            std::fill(stamp_.begin(), stamp_.end(), 0U);
            current_stamp_ = 1;
        }
        for (std::uint32_t i = begin; i < end; ++i) {
            const std::uint32_t r = partition_[i];
            stamp_[r] = current_stamp_;
            total_g += g[r];
            total_h += h[r];
        }
        for (std::uint32_t f = 0; f < data_.n_features(); ++f) {
            if (!feature_mask[f]) continue;
            const auto col = data_.column(f);
            HistBin* base = nullptr;
            for (std::size_t k = 0; k < col.size; ++k) {
                const std::uint32_t r = col.rows[k];
                if (stamp_[r] != current_stamp_) continue;
                if (base == nullptr) {
                    touch(f);
                    base = hist.bins.data() + offsets[f];
                }
                HistBin& b = base[col.bins[k]];
                b.g += g[r];
                b.h += h[r];
                ++b.count;
            }
        }
    } else {
        for (std::uint32_t i = begin; i < end; ++i) {
            const std::uint32_t r = partition_[i];
            const double gr = g[r];
            const double hr = h[r];
            total_g += gr;
            total_h += hr;
            const auto rb = data_.row(r);
            for (std::size_t k = 0; k < rb.size; ++k) {
                const std::uint32_t f = rb.features[k];
                if (!feature_mask[f]) continue;
                if (!hist.touched[f]) touch(f);
                HistBin& b = hist.bins[offsets[f] + rb.bins[k]];
                b.g += gr;
                b.h += hr;
                ++b.count;
            }
        }
    }
    std::sort(hist.features.begin(), hist.features.end());
    const auto total_count = static_cast<std::int64_t>(end - begin);
    // Rows without a stored entry for f sit in f's zero bin.
    for (const std::uint32_t f : hist.features) {
        const std::uint64_t zero = offsets[f] + data_.feature(f).zero_bin;
        double sg = 0.0;
        double sh = 0.0;
        std::int64_t sc = 0;
        for (std::uint64_t b = offsets[f]; b < offsets[f + 1]; ++b) {
            if (b == zero) continue;
            sg += hist.bins[b].g;
            sh += hist.bins[b].h;
            sc += hist.bins[b].count;
        }
        const std::int64_t zc = total_count - sc;
        hist.bins[zero] = zc == 0 ? HistBin{} : HistBin{total_g - sg, total_h - sh, zc};
    }
}

void TreeLearner::subtract(Histogram& larger, const Histogram& smaller, double small_g, double small_h,
                           std::int64_t small_count) const {
    const auto& offsets = data_.hist_offsets();
    const auto sub = [](HistBin& hb, const HistBin& s) {
        hb.count -= s.count;
        if (hb.count == 0) {
            hb = HistBin{};
        } else {
            hb.g -= s.g;
            hb.h -= s.h;
        }
    };
    for (const std::uint32_t f : larger.features) {
        if (smaller.touched[f]) {
            for (std::uint64_t b = offsets[f]; b < offsets[f + 1]; ++b) sub(larger.bins[b], smaller.bins[b]);
        } else {
            // Every row of the smaller child sits in f's zero bin.
            sub(larger.bins[offsets[f] + data_.feature(f).zero_bin], HistBin{small_g, small_h, small_count});
        }
    }
}

SplitCandidate TreeLearner::best_split(const Histogram& hist, double sum_g, double sum_h,
                                       std::int64_t count) const {
    SplitCandidate best;
    const auto& offsets = data_.hist_offsets();
    const double l1 = config_.lambda_l1;
    const double l2 = config_.lambda_l2;
    const auto score = [&](double g, double h) {
        const double s = soft_threshold(g, l1);
        return s * s / (h + l2);
    };
    const double parent = score(sum_g, sum_h);
    for (const std::uint32_t f : hist.features) {
        const std::uint32_t n_bins = data_.feature(f).n_bins();
        double gl = 0.0;
        double hl = 0.0;
        std::int64_t cl = 0;
        for (std::uint32_t b = 0; b + 1 < n_bins; ++b) {
            const HistBin& hb = hist.bins[offsets[f] + b];
            gl += hb.g;
            hl += hb.h;
            cl += hb.count;
            if (hb.count == 0) continue;  // same partition as the previous cut
            const std::int64_t cr = count - cl;
            if (cl < min_child_) continue;
            if (cr < min_child_) break;
            const double gain = 0.5 * (score(gl, hl) + score(sum_g - gl, sum_h - hl) - parent);
            if (gain > best.gain) {
                best.feature = static_cast<std::int32_t>(f);
                best.bin = b;
                best.threshold = data_.feature(f).upper_bounds[b];
                best.gain = gain;
                best.left_count = cl;
                best.right_count = cr;
            }
        }
    }
    return best;
}

bool TreeLearner::splittable(const Leaf& leaf) const {
    if (config_.max_depth > 0 && leaf.depth >= config_.max_depth) return false;
    return static_cast<std::int64_t>(leaf.end - leaf.begin) >= 2 * min_child_;
}

void TreeLearner::evaluate(Leaf& leaf, std::span<const double> g, std::span<const double> h,
                           const std::vector<char>& feature_mask) {
    leaf.split = SplitCandidate{};
    if (!splittable(leaf)) {
        release(leaf.hist);
        return;
    }
    if (!leaf.hist) {
        leaf.hist = acquire();
        build_histogram(*leaf.hist, leaf.begin, leaf.end, g, h, feature_mask);
    }
    leaf.split = best_split(*leaf.hist, leaf.sum_g, leaf.sum_h, static_cast<std::int64_t>(leaf.end - leaf.begin));
}

Tree TreeLearner::grow(std::span<const double> g, std::span<const double> h, std::span<const std::uint32_t> rows,
                       const std::vector<char>& feature_mask) {
    partition_.assign(rows.begin(), rows.end());
    scratch_.resize(partition_.size());

    const auto sums = [&](std::uint32_t begin, std::uint32_t end) {
        double sg = 0.0;
        double sh = 0.0;
        for (std::uint32_t i = begin; i < end; ++i) {
            sg += g[partition_[i]];
            sh += h[partition_[i]];
        }
        return std::pair{sg, sh};
    };

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Leaf> leaves(1);
    leaves[0].end = static_cast<std::uint32_t>(partition_.size());
    std::tie(leaves[0].sum_g, leaves[0].sum_h) = sums(0, leaves[0].end);
    evaluate(leaves[0], g, h, feature_mask);

    while (leaves.size() < static_cast<std::size_t>(config_.num_leaves)) {
        std::size_t pick = leaves.size();
        double best_gain = 0.0;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            if (leaves[i].split.valid() && leaves[i].split.gain > best_gain) {
                best_gain = leaves[i].split.gain;
                pick = i;
            }
        }
        if (pick == leaves.size()) break;

        Leaf parent = std::move(leaves[pick]);
        const SplitCandidate split = parent.split;
        const auto f = static_cast<std::uint32_t>(split.feature);

        // Stable partition keeps row order deterministic inside each child.
        std::uint32_t n_left = 0;
        std::uint32_t n_right = 0;
        for (std::uint32_t i = parent.begin; i < parent.end; ++i) {
            const std::uint32_t r = partition_[i];
            if (data_.bin(r, f) <= split.bin) {
                partition_[parent.begin + n_left++] = r;
            } else {
                scratch_[n_right++] = r;
            }
        }
        std::copy_n(scratch_.begin(), n_right, partition_.begin() + parent.begin + n_left);

        const auto left_node = static_cast<std::int32_t>(tree.nodes.size());
        const auto right_node = left_node + 1;
        TreeNode& pn = tree.nodes[static_cast<std::size_t>(parent.node)];
        pn.feature = split.feature;
        pn.threshold = split.threshold;
        pn.gain = split.gain;
        pn.left = left_node;
        pn.right = right_node;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();

        Leaf left;
        left.node = left_node;
        left.begin = parent.begin;
        left.end = parent.begin + n_left;
        left.depth = parent.depth + 1;
        std::tie(left.sum_g, left.sum_h) = sums(left.begin, left.end);
        Leaf right;
        right.node = right_node;
        right.begin = left.end;
        right.end = parent.end;
        right.depth = parent.depth + 1;
        std::tie(right.sum_g, right.sum_h) = sums(right.begin, right.end);

        const bool want_children = splittable(left) || splittable(right);
        if (want_children && parent.hist) {
            Leaf& smaller = n_left <= n_right ? left : right;
            Leaf& larger = n_left <= n_right ? right : left;
            smaller.hist = acquire();
            build_histogram(*smaller.hist, smaller.begin, smaller.end, g, h, feature_mask);
            larger.hist = std::move(parent.hist);
            subtract(*larger.hist, *smaller.hist, smaller.sum_g, smaller.sum_h,
                     static_cast<std::int64_t>(smaller.end - smaller.begin));
        } else {
            release(parent.hist);
        }
        evaluate(left, g, h, feature_mask);
        evaluate(right, g, h, feature_mask);

        leaves[pick] = std::move(left);
        leaves.push_back(std::move(right));

        std::size_t cached = 0;
        for (auto& leaf : leaves) {
            if (!leaf.hist) continue;
            if (!leaf.split.valid() || ++cached > max_cached_histograms_) release(leaf.hist);
        }
    }

    const double l1 = config_.lambda_l1;
    const double l2 = config_.lambda_l2;
    for (auto& leaf : leaves) {
        release(leaf.hist);
        tree.nodes[static_cast<std::size_t>(leaf.node)].leaf_value = leaf_output(leaf.sum_g, leaf.sum_h, l1, l2);
        for (std::uint32_t i = leaf.begin; i < leaf.end; ++i) leaf_of_row_[partition_[i]] = leaf.node;
    }
    return tree;
}

}  // namespace doseguard::gbdt
