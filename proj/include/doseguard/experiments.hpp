#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "doseguard/cv.hpp"
#include "doseguard/gbdt.hpp"
#include "doseguard/sparse_matrix.hpp"

namespace doseguard {

/// A reporting group of one or more registry categories. Word and character
/// n-grams are reported together as one text group.
struct CategoryGroup {
    std::string key;    // "text", "embedding", "medical", "transformer_score"
    std::string label;  // table row label
    std::vector<FeatureCategory> categories;

    std::vector<std::uint32_t> columns(const FeatureRegistry& registry) const;
};

/// The standard groups in table order.
const std::vector<CategoryGroup>& standard_groups();
const CategoryGroup& find_group(const std::string& key);

struct GroupImportance {
    std::string key;
    std::string label;
    std::size_t width = 0;
    double total_gain = 0.0;  // sum over the group's columns of the model-averaged gain
    double total_pct = 0.0;   // share of the grand total, in percent
    double avg_gain = 0.0;    // total_gain / width
    double std_pct = 0.0;     // population std of the per-model share, in percent
};

struct ImportanceReport {
    std::size_t n_models = 0;
    std::vector<double> per_feature;  // gain averaged across models
    std::vector<GroupImportance> groups;  // groups present in the registry

    /// Columns ordered by decreasing averaged gain; ties by column index.
    std::vector<std::uint32_t> ranking() const;

    nlohmann::ordered_json to_json(const FeatureRegistry& registry, std::size_t top_n = 50) const;
    std::string markdown() const;
    std::string csv() const;
};

ImportanceReport aggregate_importance(std::span<const GbdtModel> models, const FeatureRegistry& registry);

struct ExperimentRow {
    std::string configuration;
    std::size_t n_features = 0;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    double oof_auc = 0.0;
    std::vector<double> per_fold_auc;
};

struct AblationRow : ExperimentRow {
    /// (baseline - ablated) / baseline in percent; positive means the
    /// score dropped when the group was removed.
    double delta_pct = 0.0;
};

struct AblationTable {
    ExperimentRow baseline;
    std::vector<AblationRow> rows;

    nlohmann::ordered_json to_json() const;
    std::string markdown() const;
    std::string csv() const;
};

/// Reruns cross-validation on identical folds without each listed group.
AblationTable run_ablation(const SparseMatrix& X, std::span<const int> y, const FeatureRegistry& registry,
                           const std::vector<std::string>& groups_to_drop, const TrainConfig& config,
                           const FoldPlan& plan, const CvOptions& options = {});

struct TopKRow : ExperimentRow {
    int k = 0;
    double pct_of_baseline = 0.0;  // mean_auc / baseline mean_auc, in percent
    std::vector<std::uint32_t> selected;  // ascending column indices
};

struct TopKTable {
    ExperimentRow baseline;
    std::vector<TopKRow> rows;

    nlohmann::ordered_json to_json(const FeatureRegistry& registry) const;
    std::string markdown() const;
    std::string csv() const;
};

/// Keeps the k columns with the largest baseline-averaged gain and reruns
/// cross-validation on identical folds for every k.
TopKTable topk_experiment(const SparseMatrix& X, std::span<const int> y, const FeatureRegistry& registry,
                          std::span<const int> ks, const TrainConfig& config, const FoldPlan& plan,
                          const CvOptions& options = {});
/// Same, reusing an existing baseline run on the same folds.
TopKTable topk_experiment(const SparseMatrix& X, std::span<const int> y, const FeatureRegistry& registry,
                          std::span<const int> ks, const TrainConfig& config, const FoldPlan& plan,
                          const CvResult& baseline, const CvOptions& options = {});

/// Top-k columns of a ranking, sorted ascending.
std::vector<std::uint32_t> select_top_k(std::span<const std::uint32_t> ranking, int k);

struct DynamicsReport {
    std::vector<int> best_iterations;
    double mean_iteration = 0.0;
    double std_iteration = 0.0;
    int min_iteration = 0;
    int max_iteration = 0;
    std::vector<double> per_fold_auc;
    double min_auc = 0.0;
    double max_auc = 0.0;

    nlohmann::ordered_json to_json() const;
};

DynamicsReport training_dynamics(std::span<const GbdtModel> models, std::span<const double> per_fold_auc = {});

ExperimentRow summarize_run(const std::string& configuration, std::size_t n_features, const CvResult& run,
                            std::span<const int> y);

}  // namespace doseguard
