#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "doseguard/gbdt.hpp"
#include "doseguard/sparse_matrix.hpp"

namespace doseguard {

/// Stratified assignment of rows to k folds.
struct FoldPlan {
    int k = 5;
    std::uint64_t seed = 0;
    std::vector<int> assignment;  // row -> fold id in [0, k)

    std::vector<std::size_t> held_out(int fold) const;
    std::vector<std::size_t> training(int fold) const;

    nlohmann::ordered_json to_json() const;
    static FoldPlan from_json(const nlohmann::json& j);
    bool operator==(const FoldPlan&) const = default;
};

/// Shuffles each class with the seed and deals its rows round-robin over the
/// folds. Negatives continue where the positives stopped, so fold sizes also
/// differ by at most one. Requires k >= 2 and at least k rows of each class.
FoldPlan make_folds(std::span<const int> y, int k, std::uint64_t seed);

struct OofPredictions {
    std::vector<double> probs;
    FoldPlan plan;
    std::vector<double> per_fold_auc;
};

struct CvResult {
    std::vector<GbdtModel> models;  // one per fold, in fold order
    OofPredictions oof;
    std::vector<TrainingTrace> traces;

    double mean_auc() const;
    double std_auc() const;
    double oof_auc(std::span<const int> y) const;
};

struct CvOptions {
    int threads = 1;
    bool keep_traces = false;
};

/// Trains one model per fold on the other k-1 folds, using the held-out fold
/// for early stopping and out-of-fold predictions. Failures are rethrown
/// with the fold id in the message.
CvResult cv_train(const SparseMatrix& X, std::span<const int> y, const TrainConfig& config, const FoldPlan& plan,
                  const CvOptions& options = {});

/// Mean of the per-model probabilities.
std::vector<double> ensemble_predict(std::span<const GbdtModel> models, const SparseMatrix& X);

/// negatives / positives.
double scale_pos_weight_from(std::span<const int> y);

}  // namespace doseguard
