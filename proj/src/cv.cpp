#include "doseguard/cv.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/metrics.hpp"
#include "doseguard/rng.hpp"

namespace doseguard {

std::vector<std::size_t> FoldPlan::held_out(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) rows.push_back(i);
    }
    return rows;
}

std::vector<std::size_t> FoldPlan::training(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) rows.push_back(i);
    }
    return rows;
}

nlohmann::ordered_json FoldPlan::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["k"] = k;
    j["seed"] = seed;
    j["assignment"] = assignment;
    return j;
}

FoldPlan FoldPlan::from_json(const nlohmann::json& j) {
    FoldPlan p;
    try {
        p.k = j.at("k").get<int>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.assignment = j.at("assignment").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("malformed fold plan: {}", e.what()));
    }
    if (p.k < 2) throw FormatError("fold plan needs k >= 2");
    for (int a : p.assignment) {
        if (a < 0 || a >= p.k) throw FormatError("fold plan assignment out of range");
    }
    return p;
}

FoldPlan make_folds(std::span<const int> y, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError(fmt::format("number of folds must be at least 2 (got {})", k));
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1) {
            pos.push_back(i);
        } else if (y[i] == 0) {
            neg.push_back(i);
        } else {
            throw DataError(fmt::format("label at row {} is not 0 or 1", i));
        }
    }
    const auto uk = static_cast<std::size_t>(k);
    if (pos.size() < uk || neg.size() < uk) {
        throw DataError(fmt::format("stratified {}-fold split needs at least {} rows of each class "
                                    "(have {} positive, {} negative)",
                                    k, k, pos.size(), neg.size()));
    }
    Rng rng = Rng::stream(seed, 3);
    rng.shuffle(std::span<std::size_t>(pos));
    rng.shuffle(std::span<std::size_t>(neg));

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.assign(y.size(), 0);
    for (std::size_t i = 0; i < pos.size(); ++i) plan.assignment[pos[i]] = static_cast<int>(i % uk);
    const std::size_t offset = pos.size() % uk;
    for (std::size_t i = 0; i < neg.size(); ++i) plan.assignment[neg[i]] = static_cast<int>((offset + i) % uk);
    return plan;
}

double CvResult::mean_auc() const { return mean(oof.per_fold_auc); }
double CvResult::std_auc() const { return stddev(oof.per_fold_auc); }
double CvResult::oof_auc(std::span<const int> y) const { return roc_auc(y, oof.probs); }

namespace {

struct FoldOutcome {
    GbdtModel model;
    TrainingTrace trace;
    std::vector<std::size_t> rows;
    std::vector<double> probs;
    double auc = 0.0;
};

FoldOutcome run_fold(const SparseMatrix& X, std::span<const int> y, const TrainConfig& config, const FoldPlan& plan,
                     int fold, bool keep_trace) {
    FoldOutcome out;
    const auto train_rows = plan.training(fold);
    out.rows = plan.held_out(fold);
    const SparseMatrix X_train = X.select_rows(train_rows);
    const SparseMatrix X_valid = X.select_rows(out.rows);
    std::vector<int> y_train;
    std::vector<int> y_valid;
    y_train.reserve(train_rows.size());
    y_valid.reserve(out.rows.size());
    for (auto r : train_rows) y_train.push_back(y[r]);
    for (auto r : out.rows) y_valid.push_back(y[r]);

    out.model = train(X_train, y_train, config, ValidationSet{X_valid, y_valid}, keep_trace ? &out.trace : nullptr);
    out.probs = predict_proba(out.model, X_valid);
    out.auc = roc_auc(y_valid, out.probs);
    return out;
}

}  // namespace

CvResult cv_train(const SparseMatrix& X, std::span<const int> y, const TrainConfig& config, const FoldPlan& plan,
                  const CvOptions& options) {
    if (plan.assignment.size() != X.n_rows || y.size() != X.n_rows) {
        throw DataError(fmt::format("fold plan covers {} rows, labels {}, matrix {}", plan.assignment.size(),
                                    y.size(), X.n_rows));
    }
    config.validate();

    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(plan.k));
    std::vector<std::exception_ptr> errors(outcomes.size());
    const auto work = [&](int fold) {
        try {
            outcomes[static_cast<std::size_t>(fold)] = run_fold(X, y, config, plan, fold, options.keep_traces);
        } catch (...) {
            errors[static_cast<std::size_t>(fold)] = std::current_exception();
        }
    };

    const int threads = std::clamp(options.threads, 1, plan.k);
    if (threads == 1) {
        for (int f = 0; f < plan.k; ++f) work(f);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (int f = t; f < plan.k; f += threads) work(f);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (std::size_t f = 0; f < errors.size(); ++f) {
        if (!errors[f]) continue;
        try {
            std::rethrow_exception(errors[f]);
        } catch (const DataError& e) {
            throw DataError(fmt::format("fold {}: {}", f, e.what()));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("fold {}: {}", f, e.what()));
        } catch (const std::exception& e) {
            throw TrainingError(fmt::format("fold {}: {}", f, e.what()));
        }
    }

    CvResult result;
    result.oof.plan = plan;
    result.oof.probs.assign(X.n_rows, 0.0);
    for (auto& o : outcomes) {
        for (std::size_t i = 0; i < o.rows.size(); ++i) result.oof.probs[o.rows[i]] = o.probs[i];
        result.oof.per_fold_auc.push_back(o.auc);
        result.models.push_back(std::move(o.model));
        if (options.keep_traces) result.traces.push_back(std::move(o.trace));
    }
    return result;
}

std::vector<double> ensemble_predict(std::span<const GbdtModel> models, const SparseMatrix& X) {
    if (models.empty()) throw DataError("ensemble needs at least one model");
    std::vector<double> first = predict_proba(models[0], X);
    if (models.size() == 1) return first;
    // Accumulating offsets from the first model keeps an ensemble of identical
    // models exactly equal to a single one.
    std::vector<double> offset(first.size(), 0.0);
    for (std::size_t m = 1; m < models.size(); ++m) {
        const auto p = predict_proba(models[m], X);
        for (std::size_t i = 0; i < p.size(); ++i) offset[i] += p[i] - first[i];
    }
    const auto k = static_cast<double>(models.size());
    for (std::size_t i = 0; i < first.size(); ++i) first[i] += offset[i] / k;
    return first;
}

double scale_pos_weight_from(std::span<const int> y) {
    const auto pos = std::count(y.begin(), y.end(), 1);
    const auto neg = static_cast<std::ptrdiff_t>(y.size()) - pos;
    if (pos == 0 || neg == 0) throw DataError("scale_pos_weight needs both classes present");
    return static_cast<double>(neg) / static_cast<double>(pos);
}

}  // namespace doseguard
