#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "doseguard/sparse_matrix.hpp"

namespace doseguard {

/// Booster hyperparameters. Defaults are the tuned configuration used for
/// the full feature set.
struct TrainConfig {
    int n_estimators = 4000;
    double learning_rate = 0.0054;
    int num_leaves = 118;
    int max_depth = 9;  // <= 0: unlimited
    int min_child_samples = 211;
    double lambda_l1 = 4.29;
    double lambda_l2 = 4.33;
    double feature_fraction = 0.795;
    double bagging_fraction = 0.813;
    int bagging_freq = 1;
    double scale_pos_weight = 20.87;
    int early_stopping_patience = 200;  // 0 disables early stopping
    int max_bins = 255;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j);

    bool operator==(const TrainConfig&) const = default;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left iff value <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double gain = 0.0;
    double leaf_value = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    /// Index of the leaf reached by a row.
    std::int32_t leaf_index(const SparseMatrix::RowView& row) const;
    double predict(const SparseMatrix::RowView& row) const { return nodes[leaf_index(row)].leaf_value; }
    /// Same, reading feature values from a dense row buffer.
    double predict_dense(std::span<const float> row) const;

    std::size_t leaf_count() const;
    int depth() const;  // a single leaf has depth 0

    bool operator==(const Tree&) const = default;
};

struct GbdtModel {
    TrainConfig config;
    std::uint64_t n_features = 0;
    double learning_rate = 0.0;
    double base_score = 0.0;  // log-odds prior
    int best_iteration = 0;   // number of trees used for prediction
    std::vector<Tree> trees;
    std::vector<double> feature_gain;  // total split gain per column over used trees

    void recompute_feature_gain();
    bool operator==(const GbdtModel&) const = default;
};

struct ValidationSet {
    const SparseMatrix& X;
    std::span<const int> y;
};

struct RoundRecord {
    int iteration = 0;
    double train_loss = 0.0;  // weighted cross-entropy over all training rows
    double valid_auc = 0.0;   // NaN without a validation set
    std::size_t leaves = 0;
};

struct TrainingTrace {
    std::vector<RoundRecord> rounds;
};

/// Weighted binary cross-entropy boosting with positives weighted by
/// config.scale_pos_weight. With a validation set, stops after
/// early_stopping_patience rounds without a validation ROC-AUC improvement and
/// keeps the trees up to the best round.
GbdtModel train(const SparseMatrix& X, std::span<const int> y, const TrainConfig& config,
                std::optional<ValidationSet> valid = std::nullopt, TrainingTrace* trace = nullptr);

/// base_score + sum over used trees of learning_rate * leaf value.
std::vector<double> predict_raw(const GbdtModel& model, const SparseMatrix& X);
std::vector<double> predict_proba(const GbdtModel& model, const SparseMatrix& X);

double sigmoid(double x);

struct GradientPair {
    std::vector<double> g;
    std::vector<double> h;
};

/// g = w (p - y), h = w p (1 - p) with p = sigmoid(score).
GradientPair gradients(std::span<const int> y, std::span<const double> w, std::span<const double> scores);

/// Per-row weighted cross-entropy w [-y log p - (1 - y) log(1 - p)], computed
/// stably from the raw score.
double weighted_logloss_term(int y, double w, double score);
/// Mean of weighted_logloss_term over rows.
double weighted_logloss(std::span<const int> y, std::span<const double> w, std::span<const double> scores);

std::vector<double> instance_weights(std::span<const int> y, double scale_pos_weight);

/// L1 soft-thresholding of a gradient sum.
inline double soft_threshold(double g, double lambda_l1) {
    if (g > lambda_l1) return g - lambda_l1;
    if (g < -lambda_l1) return g + lambda_l1;
    return 0.0;
}
/// 0.5 [S(GL)^2/(HL+l2) + S(GR)^2/(HR+l2) - S(G)^2/(H+l2)]
inline double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda_l1,
                         double lambda_l2) {
    const auto score = [&](double g, double h) {
        const double s = soft_threshold(g, lambda_l1);
        return s * s / (h + lambda_l2);
    };
    return 0.5 * (score(g_left, h_left) + score(g_right, h_right) - score(g_left + g_right, h_left + h_right));
}
/// -S(G) / (H + l2)
inline double leaf_output(double g, double h, double lambda_l1, double lambda_l2) {
    const double denom = h + lambda_l2;
    if (denom <= 0.0) return 0.0;
    return -soft_threshold(g, lambda_l1) / denom;
}

/// Per-column gain importance of the used trees (non-negative).
std::vector<double> feature_importance(const GbdtModel& model);

inline constexpr int kModelFormatVersion = 1;

nlohmann::ordered_json model_to_json(const GbdtModel& model);
GbdtModel model_from_json(const nlohmann::json& j);
std::string model_to_string(const GbdtModel& model);
void save_model(const std::filesystem::path& path, const GbdtModel& model);
/// Throws FormatError (UnsupportedVersionError for a version mismatch).
GbdtModel load_model(const std::filesystem::path& path);

}  // namespace doseguard
