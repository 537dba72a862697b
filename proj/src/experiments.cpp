#include "doseguard/experiments.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/metrics.hpp"

namespace doseguard {

std::vector<std::uint32_t> CategoryGroup::columns(const FeatureRegistry& registry) const {
    std::vector<std::uint32_t> cols;
    for (std::uint32_t j = 0; j < registry.size(); ++j) {
        if (std::find(categories.begin(), categories.end(), registry.entries[j].category) != categories.end()) {
            cols.push_back(j);
        }
    }
    return cols;
}

const std::vector<CategoryGroup>& standard_groups() {
    static const std::vector<CategoryGroup> groups = {
        {"text", "Word/Char Features", {FeatureCategory::word, FeatureCategory::char_ngram}},
        {"embedding", "Sentence Embeddings", {FeatureCategory::embedding}},
        {"medical", "Medical Patterns", {FeatureCategory::medical}},
        {"transformer_score", "Transformer Scores", {FeatureCategory::transformer_score}},
    };
    return groups;
}

const CategoryGroup& find_group(const std::string& key) {
    for (const auto& g : standard_groups()) {
        if (g.key == key) return g;
    }
    throw ConfigError(fmt::format("unknown feature group '{}' (expected text, embedding, medical or "
                                  "transformer_score)",
                                  key));
}

std::vector<std::uint32_t> ImportanceReport::ranking() const {
    std::vector<std::uint32_t> order(per_feature.size());
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return per_feature[a] > per_feature[b]; });
    return order;
}

ImportanceReport aggregate_importance(std::span<const GbdtModel> models, const FeatureRegistry& registry) {
    if (models.empty()) throw DataError("importance needs at least one model");
    for (std::size_t m = 0; m < models.size(); ++m) {
        if (models[m].n_features != registry.size()) {
            throw DataError(fmt::format("model {} has {} features but the registry lists {}", m,
                                        models[m].n_features, registry.size()));
        }
    }
    ImportanceReport report;
    report.n_models = models.size();
    report.per_feature.assign(registry.size(), 0.0);
    std::vector<std::vector<double>> per_model;
    for (const auto& model : models) per_model.push_back(feature_importance(model));
    for (std::size_t j = 0; j < registry.size(); ++j) {
        double s = 0.0;
        for (const auto& v : per_model) s += v[j];
        report.per_feature[j] = s / static_cast<double>(models.size());
    }

    const double grand = std::accumulate(report.per_feature.begin(), report.per_feature.end(), 0.0);
    for (const auto& group : standard_groups()) {
        const auto cols = group.columns(registry);
        if (cols.empty()) continue;
        GroupImportance gi;
        gi.key = group.key;
        gi.label = group.label;
        gi.width = cols.size();
        for (auto c : cols) gi.total_gain += report.per_feature[c];
        gi.total_pct = grand > 0.0 ? 100.0 * gi.total_gain / grand : 0.0;
        gi.avg_gain = gi.total_gain / static_cast<double>(gi.width);
        std::vector<double> shares;
        for (const auto& v : per_model) {
            const double model_total = std::accumulate(v.begin(), v.end(), 0.0);
            double group_total = 0.0;
            for (auto c : cols) group_total += v[c];
            shares.push_back(model_total > 0.0 ? 100.0 * group_total / model_total : 0.0);
        }
        gi.std_pct = stddev(shares);
        report.groups.push_back(gi);
    }
    return report;
}

nlohmann::ordered_json ImportanceReport::to_json(const FeatureRegistry& registry, std::size_t top_n) const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["n_models"] = n_models;
    auto groups_json = nlohmann::ordered_json::array();
    for (const auto& g : groups) {
        groups_json.push_back({{"group", g.key},
                               {"label", g.label},
                               {"features", g.width},
                               {"total_gain", g.total_gain},
                               {"total_pct", g.total_pct},
                               {"avg_gain", g.avg_gain},
                               {"std_pct", g.std_pct}});
    }
    j["groups"] = std::move(groups_json);
    auto top = nlohmann::ordered_json::array();
    const auto order = ranking();
    for (std::size_t i = 0; i < std::min(top_n, order.size()); ++i) {
        const auto c = order[i];
        top.push_back({{"rank", i + 1},
                       {"column", c},
                       {"name", registry.entries[c].name},
                       {"category", category_name(registry.entries[c].category)},
                       {"gain", per_feature[c]}});
    }
    j["top_features"] = std::move(top);
    return j;
}

std::string ImportanceReport::markdown() const {
    std::string out = "| Category | Features | Total (%) | Avg Gain | Std |\n|---|---:|---:|---:|---:|\n";
    for (const auto& g : groups) {
        out += fmt::format("| {} | {} | {:.2f} | {:.2f} | ±{:.1f} |\n", g.label, g.width, g.total_pct, g.avg_gain,
                           g.std_pct);
    }
    return out;
}

std::string ImportanceReport::csv() const {
    std::string out = "group,label,features,total_gain,total_pct,avg_gain,std_pct\n";
    for (const auto& g : groups) {
        out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", g.key, g.label, g.width, g.total_gain,
                           g.total_pct, g.avg_gain, g.std_pct);
    }
    return out;
}

ExperimentRow summarize_run(const std::string& configuration, std::size_t n_features, const CvResult& run,
                            std::span<const int> y) {
    ExperimentRow row;
    row.configuration = configuration;
    row.n_features = n_features;
    row.mean_auc = run.mean_auc();
    row.std_auc = run.std_auc();
    row.oof_auc = run.oof_auc(y);
    row.per_fold_auc = run.oof.per_fold_auc;
    return row;
}

namespace {

nlohmann::ordered_json row_json(const ExperimentRow& r) {
    nlohmann::ordered_json j;
    j["configuration"] = r.configuration;
    j["features"] = r.n_features;
    j["mean_auc"] = r.mean_auc;
    j["std_auc"] = r.std_auc;
    j["oof_auc"] = r.oof_auc;
    j["per_fold_auc"] = r.per_fold_auc;
    return j;
}

std::string thousands(std::size_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

}  // namespace

AblationTable run_ablation(const SparseMatrix& X, std::span<const int> y, const FeatureRegistry& registry,
                           const std::vector<std::string>& groups_to_drop, const TrainConfig& config,
                           const FoldPlan& plan, const CvOptions& options) {
    if (registry.size() != X.n_cols) {
        throw DataError(fmt::format("registry lists {} columns, matrix has {}", registry.size(), X.n_cols));
    }
    std::vector<std::vector<std::uint32_t>> keep_sets;
    for (const auto& key : groups_to_drop) {
        const auto& group = find_group(key);
        const auto drop = group.columns(registry);
        if (drop.empty()) throw DataError(fmt::format("feature group '{}' is not present in the registry", key));
        std::vector<std::uint32_t> keep;
        for (std::uint32_t j = 0; j < registry.size(); ++j) {
            if (!std::binary_search(drop.begin(), drop.end(), j)) keep.push_back(j);
        }
        if (keep.empty()) throw DataError(fmt::format("dropping '{}' leaves no columns", key));
        keep_sets.push_back(std::move(keep));
    }

    AblationTable table;
    const CvResult base = cv_train(X, y, config, plan, options);
    table.baseline = summarize_run("All Features", registry.size(), base, y);
    for (std::size_t i = 0; i < groups_to_drop.size(); ++i) {
        const auto& group = find_group(groups_to_drop[i]);
        const SparseMatrix Xs = X.select_columns(keep_sets[i]);
        const CvResult run = cv_train(Xs, y, config, plan, options);
        AblationRow row;
        static_cast<ExperimentRow&>(row) = summarize_run("w/o " + group.label, keep_sets[i].size(), run, y);
        row.delta_pct = 100.0 * (table.baseline.mean_auc - row.mean_auc) / table.baseline.mean_auc;
        table.rows.push_back(std::move(row));
    }
    return table;
}

nlohmann::ordered_json AblationTable::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["delta_convention"] = "delta_pct = 100 * (baseline_mean_auc - ablated_mean_auc) / baseline_mean_auc";
    j["baseline"] = row_json(baseline);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        auto rj = row_json(r);
        rj["delta_pct"] = r.delta_pct;
        arr.push_back(std::move(rj));
    }
    j["rows"] = std::move(arr);
    return j;
}

std::string AblationTable::markdown() const {
    std::string out = "| Configuration | Features | Mean AUC | Std | Δ% |\n|---|---:|---:|---:|---:|\n";
    out += fmt::format("| **{}** | **{}** | **{:.4f}** | **±{:.4f}** | **--** |\n", baseline.configuration,
                       thousands(baseline.n_features), baseline.mean_auc, baseline.std_auc);
    for (const auto& r : rows) {
        out += fmt::format("| {} | {} | {:.4f} | ±{:.4f} | {:+.2f}% |\n", r.configuration, thousands(r.n_features),
                           r.mean_auc, r.std_auc, r.delta_pct);
    }
    out += "\nΔ% is positive when the mean AUC dropped after removing the group.\n";
    return out;
}

std::string AblationTable::csv() const {
    std::string out = "configuration,features,mean_auc,std_auc,oof_auc,delta_pct\n";
    out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},\n", baseline.configuration, baseline.n_features,
                       baseline.mean_auc, baseline.std_auc, baseline.oof_auc);
    for (const auto& r : rows) {
        out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.configuration, r.n_features, r.mean_auc,
                           r.std_auc, r.oof_auc, r.delta_pct);
    }
    return out;
}

std::vector<std::uint32_t> select_top_k(std::span<const std::uint32_t> ranking, int k) {
    if (k <= 0) throw ConfigError(fmt::format("k must be positive (got {})", k));
    if (static_cast<std::size_t>(k) > ranking.size()) {
        throw ConfigError(fmt::format("k = {} exceeds the {} available features", k, ranking.size()));
    }
    std::vector<std::uint32_t> chosen(ranking.begin(), ranking.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

TopKTable topk_experiment(const SparseMatrix& X, std::span<const int> y, const FeatureRegistry& registry,
                          std::span<const int> ks, const TrainConfig& config, const FoldPlan& plan,
                          const CvOptions& options) {
    const CvResult baseline = cv_train(X, y, config, plan, options);
    return topk_experiment(X, y, registry, ks, config, plan, baseline, options);
}

TopKTable topk_experiment(const SparseMatrix& X, std::span<const int> y, const FeatureRegistry& registry,
                          std::span<const int> ks, const TrainConfig& config, const FoldPlan& plan,
                          const CvResult& baseline, const CvOptions& options) {
    if (registry.size() != X.n_cols) {
        throw DataError(fmt::format("registry lists {} columns, matrix has {}", registry.size(), X.n_cols));
    }
    const auto ranking = aggregate_importance(baseline.models, registry).ranking();
    std::vector<std::vector<std::uint32_t>> selections;
    for (int k : ks) selections.push_back(select_top_k(ranking, k));

    TopKTable table;
    table.baseline = summarize_run(fmt::format("{} (All)", thousands(registry.size())), registry.size(), baseline, y);
    for (std::size_t i = 0; i < selections.size(); ++i) {
        const SparseMatrix Xs = X.select_columns(selections[i]);
        const CvResult run = cv_train(Xs, y, config, plan, options);
        TopKRow row;
        static_cast<ExperimentRow&>(row) = summarize_run(thousands(selections[i].size()), selections[i].size(), run, y);
        row.k = ks[i];
        row.pct_of_baseline = 100.0 * row.mean_auc / table.baseline.mean_auc;
        row.selected = std::move(selections[i]);
        table.rows.push_back(std::move(row));
    }
    return table;
}

nlohmann::ordered_json TopKTable::to_json(const FeatureRegistry& registry) const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["baseline"] = row_json(baseline);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        auto rj = row_json(r);
        rj["k"] = r.k;
        rj["pct_of_baseline"] = r.pct_of_baseline;
        auto names = nlohmann::ordered_json::array();
        for (auto c : r.selected) names.push_back(registry.entries[c].name);
        rj["selected_columns"] = r.selected;
        rj["selected_names"] = std::move(names);
        arr.push_back(std::move(rj));
    }
    j["rows"] = std::move(arr);
    return j;
}

std::string TopKTable::markdown() const {
    std::string out = "| K Features | Mean AUC | Std | % Baseline |\n|---:|---:|---:|---:|\n";
    out += fmt::format("| {} | {:.4f} | ±{:.4f} | 100.00% |\n", baseline.configuration, baseline.mean_auc,
                       baseline.std_auc);
    for (const auto& r : rows) {
        out += fmt::format("| {} | {:.4f} | ±{:.4f} | {:.2f}% |\n", thousands(static_cast<std::size_t>(r.k)),
                           r.mean_auc, r.std_auc, r.pct_of_baseline);
    }
    return out;
}

std::string TopKTable::csv() const {
    std::string out = "k,mean_auc,std_auc,oof_auc,pct_of_baseline\n";
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},100\n", baseline.n_features, baseline.mean_auc, baseline.std_auc,
                       baseline.oof_auc);
    for (const auto& r : rows) {
        out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.k, r.mean_auc, r.std_auc, r.oof_auc,
                           r.pct_of_baseline);
    }
    return out;
}

DynamicsReport training_dynamics(std::span<const GbdtModel> models, std::span<const double> per_fold_auc) {
    DynamicsReport r;
    std::vector<double> iters;
    for (const auto& m : models) {
        r.best_iterations.push_back(m.best_iteration);
        iters.push_back(m.best_iteration);
    }
    if (!iters.empty()) {
        r.mean_iteration = mean(iters);
        r.std_iteration = stddev(iters);
        r.min_iteration = *std::min_element(r.best_iterations.begin(), r.best_iterations.end());
        r.max_iteration = *std::max_element(r.best_iterations.begin(), r.best_iterations.end());
    }
    r.per_fold_auc.assign(per_fold_auc.begin(), per_fold_auc.end());
    if (!per_fold_auc.empty()) {
        r.min_auc = *std::min_element(per_fold_auc.begin(), per_fold_auc.end());
        r.max_auc = *std::max_element(per_fold_auc.begin(), per_fold_auc.end());
    }
    return r;
}

nlohmann::ordered_json DynamicsReport::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["best_iterations"] = best_iterations;
    j["mean_iteration"] = mean_iteration;
    j["std_iteration"] = std_iteration;
    j["min_iteration"] = min_iteration;
    j["max_iteration"] = max_iteration;
    j["per_fold_auc"] = per_fold_auc;
    j["min_auc"] = min_auc;
    j["max_auc"] = max_auc;
    return j;
}

}  // namespace doseguard
