#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "doseguard/errors.hpp"
#include "doseguard/gbdt.hpp"
#include "doseguard/metrics.hpp"
#include "support.hpp"

using namespace doseguard;
using doseguard::testing::random_sparse;
using doseguard::testing::TempDir;

namespace {

TrainConfig plain_config() {
    TrainConfig c;
    c.n_estimators = 20;
    c.learning_rate = 0.1;
    c.num_leaves = 8;
    c.max_depth = 0;
    c.min_child_samples = 1;
    c.lambda_l1 = 0.0;
    c.lambda_l2 = 1.0;
    c.feature_fraction = 1.0;
    c.bagging_fraction = 1.0;
    c.scale_pos_weight = 1.0;
    c.early_stopping_patience = 0;
    return c;
}

double loss_of(int y, double w, double s) { return weighted_logloss_term(y, w, s); }

struct OracleSplit {
    int feature = -1;
    double lo = 0.0;  // left gets values <= lo, right gets values >= next distinct value
    double gain = 0.0;
    double runner_up_gap = std::numeric_limits<double>::infinity();
};

/// Exhaustive search over every feature and every cut between adjacent
/// distinct values, using the same gain formula and tie rule.
OracleSplit exhaustive_root_split(const std::vector<float>& dense, std::size_t n, std::size_t f,
                                  const std::vector<double>& g, const std::vector<double>& h, double l1,
                                  double l2) {
    OracleSplit best;
    std::vector<double> gains;
    const double G = std::accumulate(g.begin(), g.end(), 0.0);
    const double H = std::accumulate(h.begin(), h.end(), 0.0);
    for (std::size_t j = 0; j < f; ++j) {
        std::set<float> distinct;
        for (std::size_t r = 0; r < n; ++r) distinct.insert(dense[r * f + j]);
        for (auto it = distinct.begin(); std::next(it) != distinct.end(); ++it) {
            double gl = 0.0;
            double hl = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                if (dense[r * f + j] <= *it) {
                    gl += g[r];
                    hl += h[r];
                }
            }
            const double gain = split_gain(gl, hl, G - gl, H - hl, l1, l2);
            gains.push_back(gain);
            if (gain > best.gain) {
                best.feature = static_cast<int>(j);
                best.lo = *it;
                best.gain = gain;
            }
        }
    }
    for (double x : gains) {
        if (std::abs(x - best.gain) > 0.0 && x != best.gain) {
            best.runner_up_gap = std::min(best.runner_up_gap, std::abs(best.gain - x));
        }
    }
    std::size_t at_max = 0;
    for (double x : gains) at_max += std::abs(x - best.gain) <= 1e-12 ? 1 : 0;
    if (at_max > 1) best.runner_up_gap = 0.0;
    return best;
}

/// Reference path-following interpreter over a dense row.
double walk(const Tree& t, const std::vector<float>& row) {
    std::size_t n = 0;
    while (t.nodes[n].feature >= 0) {
        const auto& node = t.nodes[n];
        n = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                  : node.right);
    }
    return t.nodes[n].leaf_value;
}

}  // namespace

TEST(Gradients, ClosedFormAtZero) {
    const auto gh = gradients(std::vector<int>{1}, std::vector<double>{1.0}, std::vector<double>{0.0});
    EXPECT_DOUBLE_EQ(gh.g[0], -0.5);
    EXPECT_DOUBLE_EQ(gh.h[0], 0.25);
}

TEST(Gradients, MatchCentralFiniteDifferences) {
    Rng rng(17);
    const double eps = 1e-4;
    for (int i = 0; i < 1000; ++i) {
        const int y = rng.bernoulli(0.5) ? 1 : 0;
        const double w = rng.uniform(0.1, 25.0);
        const double s = rng.uniform(-6.0, 6.0);
        const auto gh = gradients(std::vector<int>{y}, std::vector<double>{w}, std::vector<double>{s});
        const double fd = (loss_of(y, w, s + eps) - loss_of(y, w, s - eps)) / (2 * eps);
        EXPECT_NEAR(gh.g[0], fd, 1e-5);
        const double fd2 = (loss_of(y, w, s + eps) - 2 * loss_of(y, w, s) + loss_of(y, w, s - eps)) / (eps * eps);
        EXPECT_NEAR(gh.h[0], fd2, 1e-3);
    }
}

TEST(Gradients, WeightScalesLinearly) {
    const std::vector<int> y{1, 0, 1};
    const std::vector<double> s{0.3, -1.2, 2.0};
    const auto a = gradients(y, std::vector<double>{1, 1, 1}, s);
    const auto b = gradients(y, std::vector<double>{20.87, 20.87, 20.87}, s);
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_DOUBLE_EQ(b.g[i], 20.87 * a.g[i]);
        EXPECT_DOUBLE_EQ(b.h[i], 20.87 * a.h[i]);
    }
}

TEST(Regularization, SoftThresholdGainAndLeaf) {
    EXPECT_DOUBLE_EQ(soft_threshold(3.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(soft_threshold(-3.0, 1.0), -2.0);
    EXPECT_DOUBLE_EQ(soft_threshold(0.5, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(leaf_output(4.0, 1.0, 1.0, 2.0), -1.0);
    EXPECT_DOUBLE_EQ(split_gain(-2.0, 1.0, 2.0, 1.0, 0.0, 1.0), 0.5 * (4.0 / 2.0 + 4.0 / 2.0 - 0.0));
    EXPECT_DOUBLE_EQ(instance_weights(std::vector<int>{1, 0}, 3.5)[0], 3.5);
}

TEST(Training, RootSplitMatchesExhaustiveOracle) {
    Rng rng(101);
    int checked_partitions = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::size_t>(rng.integer(4, 16));
        const auto f = static_cast<std::size_t>(rng.integer(1, 4));
        std::vector<float> dense(n * f);
        for (auto& v : dense) v = rng.bernoulli(0.3) ? 0.0f : static_cast<float>(rng.integer(-4, 4)) * 0.5f;
        std::vector<int> y(n);
        for (auto& v : y) v = rng.bernoulli(0.5) ? 1 : 0;
        y[0] = 0;
        y[1] = 1;

        TrainConfig c = plain_config();
        c.n_estimators = 1;
        c.num_leaves = 2;
        c.lambda_l1 = rng.uniform(0.0, 0.3);
        c.lambda_l2 = rng.uniform(0.0, 2.0);
        c.scale_pos_weight = rng.uniform(0.5, 3.0);
        const auto X = SparseMatrix::from_dense(dense, n, f);
        const auto model = train(X, y, c);

        const auto w = instance_weights(y, c.scale_pos_weight);
        const std::vector<double> base(n, model.base_score);
        const auto gh = gradients(y, w, base);
        const auto oracle = exhaustive_root_split(dense, n, f, gh.g, gh.h, c.lambda_l1, c.lambda_l2);

        const TreeNode& root = model.trees.at(0).nodes.at(0);
        if (oracle.feature < 0) {
            EXPECT_TRUE(root.is_leaf()) << "trial " << trial;
            continue;
        }
        ASSERT_FALSE(root.is_leaf()) << "trial " << trial;
        EXPECT_NEAR(root.gain, oracle.gain, 1e-9) << "trial " << trial;
        if (oracle.runner_up_gap > 1e-9) {
            ++checked_partitions;
            EXPECT_EQ(root.feature, oracle.feature) << "trial " << trial;
            // Same partition: the learner's cut lies between the oracle's value and the next one.
            const auto j = static_cast<std::size_t>(oracle.feature);
            for (std::size_t r = 0; r < n; ++r) {
                const float v = dense[r * f + j];
                EXPECT_EQ(v <= root.threshold, v <= oracle.lo) << "trial " << trial << " row " << r;
            }
        }
    }
    EXPECT_GT(checked_partitions, 50);
}

TEST(Training, SeparableToyReachesPerfectAuc) {
    std::vector<float> x(100);
    std::vector<int> y(100);
    for (int i = 0; i < 100; ++i) {
        x[static_cast<std::size_t>(i)] = static_cast<float>(i - 50) / 50.0f;
        y[static_cast<std::size_t>(i)] = i >= 50 ? 1 : 0;
    }
    TrainConfig c = TrainConfig{};
    c.n_estimators = 50;
    c.min_child_samples = 5;
    c.early_stopping_patience = 0;
    c.scale_pos_weight = 1.0;
    const auto X = SparseMatrix::from_dense(x, 100, 1);
    const auto model = train(X, y, c);
    EXPECT_EQ(model.best_iteration, 50);
    EXPECT_DOUBLE_EQ(roc_auc(y, predict_proba(model, X)), 1.0);
}

TEST(Training, RejectsBadInputs) {
    const auto X = SparseMatrix::from_dense(std::vector<float>{1, 2, 3}, 3, 1);
    EXPECT_THROW(train(X, std::vector<int>{1, 1, 1}, plain_config()), DataError);
    EXPECT_THROW(train(X, std::vector<int>{1, 0}, plain_config()), DataError);
    auto bad = X;
    bad.values[1] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_THROW(train(bad, std::vector<int>{1, 0, 1}, plain_config()), DataError);
    TrainConfig c = plain_config();
    c.num_leaves = 1;
    EXPECT_THROW(train(X, std::vector<int>{1, 0, 1}, c), ConfigError);
}

TEST(Training, LeafConstraintsHold) {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto X = random_sparse(rng, 300, 6, 0.7);
        std::vector<int> y(300);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = X.at(i, 0) + X.at(i, 1) > 0.3f || rng.bernoulli(0.1) ? 1 : 0;
        TrainConfig c = plain_config();
        c.n_estimators = 5;
        c.num_leaves = static_cast<int>(rng.integer(2, 12));
        c.max_depth = static_cast<int>(rng.integer(1, 4));
        c.min_child_samples = static_cast<int>(rng.integer(5, 40));
        const auto model = train(X, y, c);
        for (const auto& tree : model.trees) {
            EXPECT_LE(tree.leaf_count(), static_cast<std::size_t>(c.num_leaves));
            EXPECT_LE(tree.depth(), c.max_depth);
            std::map<int, int> rows_per_leaf;
            for (std::uint64_t r = 0; r < X.n_rows; ++r) ++rows_per_leaf[tree.leaf_index(X.row(r))];
            for (const auto& [leaf, count] : rows_per_leaf) EXPECT_GE(count, c.min_child_samples);
        }
    }
}

TEST(Training, LossIsMonotoneWithoutSubsampling) {
    Rng rng(31);
    const auto X = random_sparse(rng, 400, 5, 0.8);
    std::vector<int> y(400);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = X.at(i, 2) > 0.2f ? 1 : (rng.bernoulli(0.05) ? 1 : 0);
    TrainConfig c = TrainConfig{};
    c.n_estimators = 60;
    c.min_child_samples = 10;
    c.feature_fraction = 1.0;
    c.bagging_fraction = 1.0;
    c.early_stopping_patience = 0;
    c.scale_pos_weight = 3.0;
    c.learning_rate = 0.05;
    TrainingTrace trace;
    train(X, y, c, std::nullopt, &trace);
    ASSERT_EQ(trace.rounds.size(), 60U);
    for (std::size_t i = 1; i < trace.rounds.size(); ++i) {
        EXPECT_LE(trace.rounds[i].train_loss, trace.rounds[i - 1].train_loss + 1e-12) << "round " << i;
    }
}

TEST(Training, DeterministicForSameSeed) {
    Rng rng(4);
    const auto X = random_sparse(rng, 500, 20, 0.3);
    std::vector<int> y(500);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = X.at(i, 3) > 0.1f ? 1 : 0;
    TrainConfig c = TrainConfig{};
    c.n_estimators = 30;
    c.min_child_samples = 10;
    c.seed = 9;
    const auto a = train(X, y, c);
    const auto b = train(X, y, c);
    EXPECT_EQ(a, b);
    EXPECT_EQ(model_to_string(a), model_to_string(b));
    c.seed = 10;
    const auto other = train(X, y, c);
    EXPECT_NE(model_to_string(a), model_to_string(other));
}

TEST(Training, IntegerWeightEqualsReplication) {
    Rng rng(12);
    const std::size_t n = 40;
    std::vector<float> dense(n * 3);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 3; ++j) dense[i * 3 + j] = static_cast<float>(rng.integer(0, 5));
        y[i] = dense[i * 3] + dense[i * 3 + 1] > 6 ? 1 : (rng.bernoulli(0.1) ? 1 : 0);
    }
    std::vector<float> dup_dense;
    std::vector<int> dup_y;
    for (std::size_t i = 0; i < n; ++i) {
        const int copies = y[i] == 1 ? 2 : 1;
        for (int k = 0; k < copies; ++k) {
            dup_dense.insert(dup_dense.end(), dense.begin() + static_cast<std::ptrdiff_t>(i * 3),
                             dense.begin() + static_cast<std::ptrdiff_t>(i * 3 + 3));
            dup_y.push_back(y[i]);
        }
    }
    TrainConfig c = plain_config();
    c.num_leaves = 4;
    c.lambda_l2 = 0.5;
    c.scale_pos_weight = 2.0;
    const auto X = SparseMatrix::from_dense(dense, n, 3);
    const auto weighted = train(X, y, c);
    c.scale_pos_weight = 1.0;
    const auto replicated = train(SparseMatrix::from_dense(dup_dense, dup_y.size(), 3), dup_y, c);

    const auto pw = predict_proba(weighted, X);
    const auto pr = predict_proba(replicated, X);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(pw[i], pr[i], 1e-9);
}

TEST(Training, EarlyStoppingKeepsBestIteration) {
    Rng rng(21);
    const auto X = random_sparse(rng, 600, 8, 0.5);
    std::vector<int> y(600);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.bernoulli(0.3) ? 1 : 0;  // pure noise
    const auto Xv = random_sparse(rng, 200, 8, 0.5);
    std::vector<int> yv(200);
    for (auto& v : yv) v = rng.bernoulli(0.3) ? 1 : 0;
    yv[0] = 0;
    yv[1] = 1;
    TrainConfig c = plain_config();
    c.n_estimators = 500;
    c.early_stopping_patience = 15;
    TrainingTrace trace;
    const auto model = train(X, y, c, ValidationSet{Xv, yv}, &trace);
    ASSERT_LT(trace.rounds.size(), 500U);
    EXPECT_EQ(model.trees.size(), static_cast<std::size_t>(model.best_iteration));
    EXPECT_EQ(trace.rounds.size(), static_cast<std::size_t>(model.best_iteration + 15));
    double best = -1.0;
    int best_round = 0;
    for (const auto& r : trace.rounds) {
        if (r.valid_auc > best) {
            best = r.valid_auc;
            best_round = r.iteration;
        }
    }
    EXPECT_EQ(best_round, model.best_iteration);
}

TEST(Prediction, ZeroTreesGivesHalfAndSingleLeafGivesSigmoid) {
    GbdtModel m;
    m.n_features = 2;
    m.learning_rate = 1.0;
    const auto X = SparseMatrix::from_dense(std::vector<float>{1, 0, 0, 3}, 2, 2);
    for (double p : predict_proba(m, X)) EXPECT_DOUBLE_EQ(p, 0.5);
    Tree leaf;
    leaf.nodes.push_back(TreeNode{});
    leaf.nodes[0].leaf_value = 0.7;
    m.trees.push_back(leaf);
    m.best_iteration = 1;
    for (double p : predict_proba(m, X)) EXPECT_DOUBLE_EQ(p, 1.0 / (1.0 + std::exp(-0.7)));
    EXPECT_THROW(predict_proba(m, SparseMatrix::empty(1, 3)), DataError);
}

TEST(Prediction, MatchesIndependentTreeWalker) {
    Rng rng(77);
    const auto X = random_sparse(rng, 200, 6, 0.4);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = X.at(i, 1) - X.at(i, 4) > 0.0f ? 1 : 0;
    TrainConfig c = plain_config();
    c.n_estimators = 15;
    c.bagging_fraction = 0.7;
    c.feature_fraction = 0.6;
    const auto model = train(X, y, c);
    const auto dense = X.to_dense();
    const auto probs = predict_proba(model, X);
    for (std::uint64_t r = 0; r < X.n_rows; ++r) {
        std::vector<float> row(dense.begin() + static_cast<std::ptrdiff_t>(r * 6),
                               dense.begin() + static_cast<std::ptrdiff_t>(r * 6 + 6));
        double s = model.base_score;
        for (int t = 0; t < model.best_iteration; ++t) s += model.learning_rate * walk(model.trees[static_cast<std::size_t>(t)], row);
        EXPECT_EQ(probs[r], sigmoid(s));
    }
}

TEST(Importance, EmptyAndSingleSplit) {
    GbdtModel m;
    m.n_features = 5;
    Tree leaf;
    leaf.nodes.push_back(TreeNode{});
    m.trees.push_back(leaf);
    m.best_iteration = 1;
    for (double v : feature_importance(m)) EXPECT_EQ(v, 0.0);

    Tree split;
    split.nodes.resize(3);
    split.nodes[0].feature = 3;
    split.nodes[0].left = 1;
    split.nodes[0].right = 2;
    split.nodes[0].gain = 2.5;
    m.trees.push_back(split);
    m.best_iteration = 2;
    const auto imp = feature_importance(m);
    EXPECT_EQ(imp, (std::vector<double>{0, 0, 0, 2.5, 0}));
}

TEST(ModelIo, RoundTripIsBitExact) {
    Rng rng(3);
    const auto X = random_sparse(rng, 150, 7, 0.5);
    std::vector<int> y(150);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = X.at(i, 0) > 0.0f ? 1 : 0;
    TrainConfig c = plain_config();
    c.learning_rate = 0.0054 * 7;
    const auto model = train(X, y, c);
    TempDir dir("model_io");
    save_model(dir / "m.json", model);
    const auto loaded = load_model(dir / "m.json");
    EXPECT_EQ(loaded, model);
    const auto a = predict_proba(model, X);
    const auto b = predict_proba(loaded, X);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(std::memcmp(&a[i], &b[i], sizeof(double)), 0);
}

TEST(ModelIo, TruncatedAndVersionMismatch) {
    Rng rng(6);
    const auto X = random_sparse(rng, 60, 3, 0.6);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 2 == 0 ? 1 : 0;
    const auto text = model_to_string(train(X, y, plain_config()));
    TempDir dir("model_bad");
    {
        std::ofstream(dir / "trunc.json") << text.substr(0, text.size() / 2);
    }
    EXPECT_THROW(load_model(dir / "trunc.json"), FormatError);

    auto j = nlohmann::json::parse(text);
    j["version"] = kModelFormatVersion + 1;
    {
        std::ofstream(dir / "v2.json") << j.dump();
    }
    EXPECT_THROW(load_model(dir / "v2.json"), UnsupportedVersionError);

    j = nlohmann::json::parse(text);
    j["trees"][0][0]["left"] = 0;
    EXPECT_THROW(model_from_json(j), FormatError);
}

TEST(Config, JsonRoundTripAndStrictKeys) {
    TrainConfig c;
    c.seed = 42;
    c.max_depth = 7;
    EXPECT_EQ(TrainConfig::from_json(c.to_json()), c);
    EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"num_leafs", 3}}), ConfigError);
    EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"learning_rate", 0.0}}), ConfigError);
    EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"feature_fraction", 1.5}}), ConfigError);
    EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"early_stopping_patience", -1}}), ConfigError);
    const auto defaults = TrainConfig::from_json(nlohmann::json::object());
    EXPECT_EQ(defaults.n_estimators, 4000);
    EXPECT_DOUBLE_EQ(defaults.learning_rate, 0.0054);
    EXPECT_EQ(defaults.num_leaves, 118);
    EXPECT_EQ(defaults.min_child_samples, 211);
    EXPECT_DOUBLE_EQ(defaults.scale_pos_weight, 20.87);
}
