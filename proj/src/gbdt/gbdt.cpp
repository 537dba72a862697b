#include "doseguard/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/metrics.hpp"
#include "doseguard/rng.hpp"
#include "gbdt/binning.hpp"
#include "gbdt/tree_learner.hpp"

namespace doseguard {

namespace {

void require(bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(fmt::format("invalid {}: {}", field, what));
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(fmt::format("config field '{}' has the wrong type", key));
    }
}

}  // namespace

void TrainConfig::validate() const {
    require(n_estimators >= 1, "n_estimators", "must be at least 1");
    require(learning_rate > 0.0 && learning_rate <= 1.0, "learning_rate", "must lie in (0, 1]");
    require(num_leaves >= 2, "num_leaves", "must be at least 2");
    require(min_child_samples >= 0, "min_child_samples", "must be non-negative");
    require(lambda_l1 >= 0.0, "lambda_l1", "must be non-negative");
    require(lambda_l2 >= 0.0, "lambda_l2", "must be non-negative");
    require(feature_fraction > 0.0 && feature_fraction <= 1.0, "feature_fraction", "must lie in (0, 1]");
    require(bagging_fraction > 0.0 && bagging_fraction <= 1.0, "bagging_fraction", "must lie in (0, 1]");
    require(bagging_freq >= 0, "bagging_freq", "must be non-negative");
    require(scale_pos_weight > 0.0 && std::isfinite(scale_pos_weight), "scale_pos_weight", "must be positive");
    require(early_stopping_patience >= 0, "early_stopping_patience", "must be non-negative");
    require(max_bins >= 2 && max_bins <= 65535, "max_bins", "must lie in [2, 65535]");
}

nlohmann::ordered_json TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_estimators"] = n_estimators;
    j["learning_rate"] = learning_rate;
    j["num_leaves"] = num_leaves;
    j["max_depth"] = max_depth;
    j["min_child_samples"] = min_child_samples;
    j["lambda_l1"] = lambda_l1;
    j["lambda_l2"] = lambda_l2;
    j["feature_fraction"] = feature_fraction;
    j["bagging_fraction"] = bagging_fraction;
    j["bagging_freq"] = bagging_freq;
    j["scale_pos_weight"] = scale_pos_weight;
    j["early_stopping_patience"] = early_stopping_patience;
    j["max_bins"] = max_bins;
    j["seed"] = seed;
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("training config must be a JSON object");
    static const char* const kKeys[] = {"n_estimators",     "learning_rate",    "num_leaves",
                                        "max_depth",        "min_child_samples", "lambda_l1",
                                        "lambda_l2",        "feature_fraction", "bagging_fraction",
                                        "bagging_freq",     "scale_pos_weight", "early_stopping_patience",
                                        "max_bins",         "seed"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
            throw ConfigError(fmt::format("unknown config field '{}'", key));
        }
    }
    TrainConfig c;
    read_field(j, "n_estimators", c.n_estimators);
    read_field(j, "learning_rate", c.learning_rate);
    read_field(j, "num_leaves", c.num_leaves);
    read_field(j, "max_depth", c.max_depth);
    read_field(j, "min_child_samples", c.min_child_samples);
    read_field(j, "lambda_l1", c.lambda_l1);
    read_field(j, "lambda_l2", c.lambda_l2);
    read_field(j, "feature_fraction", c.feature_fraction);
    read_field(j, "bagging_fraction", c.bagging_fraction);
    read_field(j, "bagging_freq", c.bagging_freq);
    read_field(j, "scale_pos_weight", c.scale_pos_weight);
    read_field(j, "early_stopping_patience", c.early_stopping_patience);
    read_field(j, "max_bins", c.max_bins);
    read_field(j, "seed", c.seed);
    c.validate();
    return c;
}

std::int32_t Tree::leaf_index(const SparseMatrix::RowView& row) const {
    std::int32_t n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
        const TreeNode& node = nodes[static_cast<std::size_t>(n)];
        const auto f = static_cast<std::uint32_t>(node.feature);
        const auto it = std::lower_bound(row.cols.begin(), row.cols.end(), f);
        const double v = (it != row.cols.end() && *it == f) ? row.vals[static_cast<std::size_t>(it - row.cols.begin())]
                                                            : 0.0;
        n = v <= node.threshold ? node.left : node.right;
    }
    return n;
}

double Tree::predict_dense(std::span<const float> row) const {
    std::int32_t n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
        const TreeNode& node = nodes[static_cast<std::size_t>(n)];
        n = static_cast<double>(row[static_cast<std::size_t>(node.feature)]) <= node.threshold ? node.left
                                                                                                : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].leaf_value;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int Tree::depth() const {
    if (nodes.empty()) return 0;
    int deepest = 0;
    std::vector<std::pair<std::int32_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [n, d] = stack.back();
        stack.pop_back();
        const TreeNode& node = nodes[static_cast<std::size_t>(n)];
        if (node.is_leaf()) {
            deepest = std::max(deepest, d);
        } else {
            stack.emplace_back(node.left, d + 1);
            stack.emplace_back(node.right, d + 1);
        }
    }
    return deepest;
}

void GbdtModel::recompute_feature_gain() {
    feature_gain.assign(n_features, 0.0);
    const auto used = std::min<std::size_t>(static_cast<std::size_t>(std::max(best_iteration, 0)), trees.size());
    for (std::size_t t = 0; t < used; ++t) {
        for (const auto& node : trees[t].nodes) {
            if (!node.is_leaf()) feature_gain[static_cast<std::size_t>(node.feature)] += node.gain;
        }
    }
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

GradientPair gradients(std::span<const int> y, std::span<const double> w, std::span<const double> scores) {
    GradientPair out;
    out.g.resize(y.size());
    out.h.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = sigmoid(scores[i]);
        out.g[i] = w[i] * (p - static_cast<double>(y[i]));
        out.h[i] = w[i] * p * (1.0 - p);
    }
    return out;
}

double weighted_logloss_term(int y, double w, double score) {
    // -log sigmoid(s) = log1p(exp(-s)), computed without overflow.
    const auto softplus = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
    return w * (y == 1 ? softplus(-score) : softplus(score));
}

double weighted_logloss(std::span<const int> y, std::span<const double> w, std::span<const double> scores) {
    if (y.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += weighted_logloss_term(y[i], w[i], scores[i]);
    return total / static_cast<double>(y.size());
}

std::vector<double> instance_weights(std::span<const int> y, double scale_pos_weight) {
    std::vector<double> w(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] == 1 ? scale_pos_weight : 1.0;
    return w;
}

std::vector<double> feature_importance(const GbdtModel& model) {
    GbdtModel copy;
    copy.n_features = model.n_features;
    copy.best_iteration = model.best_iteration;
    copy.trees = model.trees;
    copy.recompute_feature_gain();
    return copy.feature_gain;
}

namespace {

void check_labels(std::span<const int> y, std::uint64_t n_rows, const char* what) {
    if (y.size() != n_rows) {
        throw DataError(fmt::format("{}: {} labels for {} rows", what, y.size(), n_rows));
    }
    for (int v : y) {
        if (v != 0 && v != 1) throw DataError(fmt::format("{}: labels must be 0 or 1", what));
    }
}

std::vector<std::uint32_t> bag_rows(Rng& rng, std::uint32_t n, double fraction) {
    std::vector<std::uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0U);
    if (fraction >= 1.0) return rows;
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n * fraction)));
    // Partial Fisher-Yates: the first k slots become a uniform sample.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(n - i);
        std::swap(rows[i], rows[j]);
    }
    rows.resize(k);
    std::sort(rows.begin(), rows.end());
    return rows;
}

std::vector<char> sample_features(Rng& rng, std::uint32_t n_features, double fraction) {
    std::vector<char> mask(n_features, 0);
    if (fraction >= 1.0) {
        std::fill(mask.begin(), mask.end(), 1);
        return mask;
    }
    const auto k = std::min<std::size_t>(
        n_features, std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * n_features + 0.5))));
    std::vector<std::uint32_t> order(n_features);
    std::iota(order.begin(), order.end(), 0U);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(n_features - i);
        std::swap(order[i], order[j]);
        mask[order[i]] = 1;
    }
    return mask;
}

}  // namespace

GbdtModel train(const SparseMatrix& X, std::span<const int> y, const TrainConfig& config,
                std::optional<ValidationSet> valid, TrainingTrace* trace) {
    config.validate();
    check_labels(y, X.n_rows, "training set");
    if (X.n_rows < 2) throw DataError("training set needs at least 2 rows");
    if (X.n_rows > std::numeric_limits<std::uint32_t>::max()) throw DataError("training set has too many rows");
    const auto n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    const std::size_t n_neg = y.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("training labels hold a single class");
    if (valid) {
        check_labels(valid->y, valid->X.n_rows, "validation set");
        if (valid->X.n_cols != X.n_cols) {
            throw DataError(fmt::format("validation set has {} columns, training set {}", valid->X.n_cols, X.n_cols));
        }
        for (float v : valid->X.values) {
            if (!std::isfinite(v)) throw DataError("non-finite value in validation matrix");
        }
    }

    const gbdt::BinnedMatrix binned(X, config.max_bins);
    gbdt::TreeLearner learner(binned, config);
    const auto n = static_cast<std::uint32_t>(X.n_rows);

    GbdtModel model;
    model.config = config;
    model.n_features = X.n_cols;
    model.learning_rate = config.learning_rate;
    model.base_score = std::log(config.scale_pos_weight * static_cast<double>(n_pos) / static_cast<double>(n_neg));

    const std::vector<double> w = instance_weights(y, config.scale_pos_weight);
    std::vector<double> scores(n, model.base_score);
    std::vector<double> valid_scores(valid ? valid->X.n_rows : 0, model.base_score);
    // A single-class validation set has no AUC to monitor.
    const bool valid_has_auc = valid && std::count(valid->y.begin(), valid->y.end(), 1) > 0 &&
                               std::count(valid->y.begin(), valid->y.end(), 0) > 0;
    const bool early_stopping = valid_has_auc && config.early_stopping_patience > 0;

    Rng bag_rng = Rng::stream(config.seed, 1);
    Rng feature_rng = Rng::stream(config.seed, 2);
    std::vector<std::uint32_t> rows;
    std::vector<char> in_bag(n, 0);

    double best_auc = -std::numeric_limits<double>::infinity();
    int best_iteration = 0;
    int since_best = 0;

    for (int it = 0; it < config.n_estimators; ++it) {
        if (rows.empty() || (config.bagging_freq > 0 && it % config.bagging_freq == 0)) {
            rows = bag_rows(bag_rng, n, config.bagging_freq > 0 ? config.bagging_fraction : 1.0);
            std::fill(in_bag.begin(), in_bag.end(), 0);
            for (auto r : rows) in_bag[r] = 1;
        }
        const auto mask = sample_features(feature_rng, binned.n_features(), config.feature_fraction);
        const GradientPair gh = gradients(y, w, scores);

        Tree tree = learner.grow(gh.g, gh.h, rows, mask);
        const double eta = config.learning_rate;
        const auto& leaf_of_row = learner.leaf_of_row();
        for (std::uint32_t r = 0; r < n; ++r) {
            const std::int32_t leaf = in_bag[r] ? leaf_of_row[r] : tree.leaf_index(X.row(r));
            scores[r] += eta * tree.nodes[static_cast<std::size_t>(leaf)].leaf_value;
        }

        RoundRecord record;
        record.iteration = it + 1;
        record.leaves = tree.leaf_count();
        record.valid_auc = std::numeric_limits<double>::quiet_NaN();
        if (valid) {
            for (std::uint64_t r = 0; r < valid->X.n_rows; ++r) {
                valid_scores[r] += eta * tree.predict(valid->X.row(r));
            }
            if (valid_has_auc) record.valid_auc = roc_auc(valid->y, valid_scores);
        }
        model.trees.push_back(std::move(tree));
        if (trace) {
            record.train_loss = weighted_logloss(y, w, scores);
            trace->rounds.push_back(record);
        }

        if (early_stopping) {
            const double auc = record.valid_auc;
            if (auc > best_auc) {
                best_auc = auc;
                best_iteration = it + 1;
                since_best = 0;
            } else if (++since_best >= config.early_stopping_patience) {
                break;
            }
        }
    }

    model.best_iteration = early_stopping ? best_iteration : static_cast<int>(model.trees.size());
    model.trees.resize(static_cast<std::size_t>(model.best_iteration));
    model.recompute_feature_gain();
    return model;
}

std::vector<double> predict_raw(const GbdtModel& model, const SparseMatrix& X) {
    if (X.n_cols != model.n_features) {
        throw DataError(fmt::format("model expects {} columns, matrix has {}", model.n_features, X.n_cols));
    }
    const auto used = std::min<std::size_t>(static_cast<std::size_t>(std::max(model.best_iteration, 0)),
                                            model.trees.size());
    std::vector<double> out(X.n_rows, model.base_score);
    std::vector<float> dense(X.n_cols, 0.0f);
    for (std::uint64_t r = 0; r < X.n_rows; ++r) {
        const auto row = X.row(r);
        for (std::size_t k = 0; k < row.cols.size(); ++k) dense[row.cols[k]] = row.vals[k];
        double s = model.base_score;
        for (std::size_t t = 0; t < used; ++t) s += model.learning_rate * model.trees[t].predict_dense(dense);
        out[r] = s;
        for (auto c : row.cols) dense[c] = 0.0f;
    }
    return out;
}

std::vector<double> predict_proba(const GbdtModel& model, const SparseMatrix& X) {
    auto raw = predict_raw(model, X);
    for (auto& v : raw) v = sigmoid(v);
    return raw;
}

}  // namespace doseguard
