#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doseguard/corpus.hpp"
#include "doseguard/cv.hpp"
#include "doseguard/errors.hpp"
#include "doseguard/experiments.hpp"
#include "doseguard/features.hpp"
#include "doseguard/metrics.hpp"
#include "doseguard/tfidf.hpp"
#include "support.hpp"

using namespace doseguard;
using doseguard::testing::random_sparse;

namespace {

FeatureRegistry registry_of(std::initializer_list<std::pair<FeatureCategory, int>> blocks) {
    FeatureRegistry reg;
    for (const auto& [cat, width] : blocks) {
        for (int j = 0; j < width; ++j) {
            reg.entries.push_back({std::string(category_name(cat)) + "_" + std::to_string(j), cat});
        }
    }
    return reg;
}

GbdtModel stump(std::uint64_t n_features, int feature, double gain) {
    GbdtModel m;
    m.n_features = n_features;
    m.learning_rate = 0.1;
    Tree t;
    t.nodes.resize(3);
    t.nodes[0].feature = feature;
    t.nodes[0].left = 1;
    t.nodes[0].right = 2;
    t.nodes[0].gain = gain;
    m.trees.push_back(t);
    m.best_iteration = 1;
    return m;
}

TrainConfig quick_config() {
    TrainConfig c;
    c.n_estimators = 60;
    c.learning_rate = 0.1;
    c.num_leaves = 8;
    c.max_depth = 4;
    c.min_child_samples = 5;
    c.scale_pos_weight = 1.0;
    c.early_stopping_patience = 20;
    return c;
}

}  // namespace

TEST(Importance, SingleWordSplitIsAllText) {
    const auto reg = registry_of({{FeatureCategory::medical, 2}, {FeatureCategory::word, 3}});
    const std::vector<GbdtModel> models{stump(5, 3, 7.5)};
    const auto report = aggregate_importance(models, reg);
    ASSERT_EQ(report.groups.size(), 2U);
    for (const auto& g : report.groups) {
        if (g.key == "text") {
            EXPECT_DOUBLE_EQ(g.total_pct, 100.0);
            EXPECT_DOUBLE_EQ(g.total_gain, 7.5);
            EXPECT_DOUBLE_EQ(g.avg_gain, 2.5);
        } else {
            EXPECT_EQ(g.total_pct, 0.0);
        }
    }
    EXPECT_EQ(report.ranking().front(), 3U);
}

TEST(Importance, AggregateIsMeanAndSharesSumTo100) {
    Rng rng(10);
    const auto reg = registry_of({{FeatureCategory::medical, 4},
                                  {FeatureCategory::word, 6},
                                  {FeatureCategory::char_ngram, 5},
                                  {FeatureCategory::embedding, 7},
                                  {FeatureCategory::transformer_score, 2}});
    const auto X = random_sparse(rng, 400, 24, 0.6);
    std::vector<int> y(400);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = X.at(i, 5) + X.at(i, 17) + X.at(i, 1) > 0.2f ? 1 : 0;
    auto c = quick_config();
    const auto v = train(X, y, c);
    c.seed = 99;
    const auto w = train(X, y, c);
    const std::vector<GbdtModel> models{v, w};
    const auto report = aggregate_importance(models, reg);
    const auto iv = feature_importance(v);
    const auto iw = feature_importance(w);
    for (std::size_t j = 0; j < iv.size(); ++j) EXPECT_EQ(report.per_feature[j], (iv[j] + iw[j]) / 2.0);
    double total = 0.0;
    for (const auto& g : report.groups) total += g.total_pct;
    EXPECT_NEAR(total, 100.0, 1e-9);
    EXPECT_EQ(report.groups.size(), 4U);

    const auto ranking = report.ranking();
    for (std::size_t i = 1; i < ranking.size(); ++i) {
        const double a = report.per_feature[ranking[i - 1]];
        const double b = report.per_feature[ranking[i]];
        EXPECT_TRUE(a > b || (a == b && ranking[i - 1] < ranking[i]));
    }
    const std::vector<GbdtModel> same{v, v, v};
    for (const auto& g : aggregate_importance(same, reg).groups) EXPECT_EQ(g.std_pct, 0.0);
    EXPECT_THROW(aggregate_importance(models, registry_of({{FeatureCategory::word, 3}})), DataError);
    EXPECT_NE(report.markdown().find("| "), std::string::npos);
}

TEST(Importance, PlantedKeywordRanksInTopFive) {
    Rng rng(21);
    const std::vector<std::string> filler{"patient", "trial", "visit", "drug", "study", "safety", "blood",
                                          "arm", "placebo", "week", "clinic", "sample", "review", "site"};
    std::vector<ConcatenatedDoc> docs;
    std::vector<int> y;
    for (int i = 0; i < 600; ++i) {
        const int label = rng.bernoulli(0.1) ? 1 : 0;
        std::string t;
        for (int k = 0; k < 30; ++k) t += filler[rng.below(filler.size())] + " ";
        if (label == 1) t += "overdose ";
        docs.push_back({"d" + std::to_string(i), t, label});
        y.push_back(label);
    }
    const auto model = fit_word_tfidf(docs);
    const auto X = transform_tfidf(model, docs);
    TrainConfig c = quick_config();
    c.early_stopping_patience = 0;
    const auto gbdt = train(X, y, c);
    const auto imp = feature_importance(gbdt);
    std::vector<std::uint32_t> order(imp.size());
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return imp[a] > imp[b]; });
    const auto col = model.column_of("overdose");
    ASSERT_GE(col, 0);
    EXPECT_NE(std::find(order.begin(), order.begin() + 5, static_cast<std::uint32_t>(col)), order.begin() + 5);
}

TEST(TopK, SelectionRulesAndNesting) {
    const std::vector<std::uint32_t> ranking{7, 2, 9, 0, 4, 1, 3, 5, 6, 8};
    EXPECT_EQ(select_top_k(ranking, 3), (std::vector<std::uint32_t>{2, 7, 9}));
    const auto five = select_top_k(ranking, 5);
    const auto eight = select_top_k(ranking, 8);
    EXPECT_TRUE(std::includes(eight.begin(), eight.end(), five.begin(), five.end()));
    EXPECT_THROW(select_top_k(ranking, 0), ConfigError);
    EXPECT_THROW(select_top_k(ranking, -2), ConfigError);
    EXPECT_THROW(select_top_k(ranking, 11), ConfigError);
}

TEST(TopK, FullWidthEqualsBaseline) {
    Rng rng(30);
    const auto reg = registry_of({{FeatureCategory::medical, 3}, {FeatureCategory::word, 9}});
    const auto X = random_sparse(rng, 300, 12, 0.5);
    std::vector<int> y(300);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = X.at(i, 4) - X.at(i, 0) > 0.0f ? 1 : 0;
    const auto plan = make_folds(y, 3, 2);
    const std::vector<int> ks{2, 6, 12};
    const auto table = topk_experiment(X, y, reg, ks, quick_config(), plan);
    ASSERT_EQ(table.rows.size(), 3U);
    EXPECT_EQ(table.rows[2].per_fold_auc, table.baseline.per_fold_auc);
    EXPECT_EQ(table.rows[2].oof_auc, table.baseline.oof_auc);
    EXPECT_DOUBLE_EQ(table.rows[2].pct_of_baseline, 100.0);
    EXPECT_TRUE(std::includes(table.rows[1].selected.begin(), table.rows[1].selected.end(),
                              table.rows[0].selected.begin(), table.rows[0].selected.end()));
    EXPECT_EQ(table.rows[0].n_features, 2U);
    EXPECT_NE(table.csv().find("k,"), std::string::npos);
}

TEST(Ablation, NullCategoryBarelyMatters) {
    Rng rng(12);
    const std::size_t n = 600;
    const auto informative = random_sparse(rng, n, 6, 0.7);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = informative.at(i, 0) + informative.at(i, 3) > 0.4f ? 1 : (rng.bernoulli(0.05) ? 1 : 0);
    }
    // An embedding block that is identically zero can never be split on.
    const auto assembled = assemble_features(
        {FeatureBlock{FeatureCategory::word, informative, {}},
         FeatureBlock{FeatureCategory::embedding, SparseMatrix::empty(n, 4), {}}});
    const auto plan = make_folds(y, 5, 4);
    const auto table = run_ablation(assembled.matrix, y, assembled.registry, {"embedding"}, quick_config(), plan);
    ASSERT_EQ(table.rows.size(), 1U);
    EXPECT_EQ(table.baseline.configuration, "All Features");
    EXPECT_EQ(table.rows[0].configuration, "w/o Sentence Embeddings");
    EXPECT_EQ(table.rows[0].n_features, 6U);
    EXPECT_LE(std::abs(table.rows[0].mean_auc - table.baseline.mean_auc), 0.01);
    EXPECT_DOUBLE_EQ(table.rows[0].delta_pct,
                     100.0 * (table.baseline.mean_auc - table.rows[0].mean_auc) / table.baseline.mean_auc);

    EXPECT_THROW(run_ablation(assembled.matrix, y, assembled.registry, {"medical"}, quick_config(), plan),
                 DataError);
    const auto text_only = registry_of({{FeatureCategory::word, 10}});
    EXPECT_THROW(run_ablation(assembled.matrix, y, text_only, {"text"}, quick_config(), plan), DataError);
    EXPECT_THROW(find_group("images"), ConfigError);
}

TEST(Dynamics, IterationStatistics) {
    std::vector<GbdtModel> models(5);
    const int iters[] = {2114, 2500, 2682, 2800, 3310};
    for (std::size_t i = 0; i < 5; ++i) models[i].best_iteration = iters[i];
    const std::vector<double> aucs{0.869, 0.88, 0.894, 0.87, 0.89};
    const auto d = training_dynamics(models, aucs);
    EXPECT_DOUBLE_EQ(d.mean_iteration, 2681.2);
    EXPECT_EQ(d.min_iteration, 2114);
    EXPECT_EQ(d.max_iteration, 3310);
    EXPECT_DOUBLE_EQ(d.min_auc, 0.869);
    EXPECT_DOUBLE_EQ(d.max_auc, 0.894);

    const std::vector<GbdtModel> same(4, models[0]);
    EXPECT_EQ(training_dynamics(same).std_iteration, 0.0);
}
