#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "doseguard/cv.hpp"
#include "doseguard/gbdt.hpp"
#include "doseguard/rng.hpp"

namespace doseguard {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Bounds of the searched hyperparameters. Everything else is copied from the
/// base config of a search.
struct SearchSpace {
    Range learning_rate{0.005, 0.05};  // sampled log-uniformly
    Range num_leaves{31, 256};
    Range max_depth{4, 10};
    Range min_child_samples{20, 300};
    Range lambda_l1{0.0, 5.0};
    Range lambda_l2{0.0, 5.0};
    Range feature_fraction{0.6, 0.9};
    Range bagging_fraction{0.6, 0.9};

    /// Names of the fields of `c` that fall outside the bounds.
    std::vector<std::string> violations(const TrainConfig& c) const;
};

struct TrialRecord {
    int trial_id = 0;
    TrainConfig config;
    bool ok = true;
    std::string error;  // set for failed trials
    double mean_auc = 0.0;
    double std_auc = 0.0;
    std::vector<double> per_fold_auc;
    double wall_time = 0.0;  // seconds

    nlohmann::ordered_json to_json() const;
    static TrialRecord from_json(const nlohmann::json& j);
};

/// Deterministic part of a trial (everything except wall_time).
bool same_outcome(const TrialRecord& a, const TrialRecord& b);

enum class SamplerKind { random, tpe };
SamplerKind parse_sampler(const std::string& name);

struct TpeSettings {
    double gamma = 0.25;
    int n_startup = 10;
    int n_candidates = 24;
};

/// Per-fold AUCs of one configuration.
using Objective = std::function<std::vector<double>(const TrainConfig&)>;

/// Cross-validated objective over a fixed fold plan.
Objective cv_objective(const SparseMatrix& X, std::span<const int> y, const FoldPlan& plan, CvOptions options = {});

TrainConfig sample_random(const SearchSpace& space, const TrainConfig& base, Rng& rng);
/// One TPE proposal from the successful trials in `history`; falls back to
/// random sampling while fewer than settings.n_startup trials succeeded.
TrainConfig sample_tpe(const SearchSpace& space, const TrainConfig& base, const std::vector<TrialRecord>& history,
                       const TpeSettings& settings, Rng& rng);

struct SearchOptions {
    int n_trials = 50;
    SamplerKind sampler = SamplerKind::tpe;
    std::uint64_t seed = 0;
    TrainConfig base;
    TpeSettings tpe;
    /// Trials already in this JSONL file are kept and the search continues
    /// after them; every finished trial is appended.
    std::optional<std::filesystem::path> history_path;
};

struct SearchResult {
    std::vector<TrialRecord> history;
    std::optional<TrialRecord> best;  // empty when every trial failed
};

SearchResult run_search(const Objective& objective, const SearchSpace& space, const SearchOptions& options);

std::vector<TrialRecord> load_history(const std::filesystem::path& path);

/// Evaluates one configuration. Values outside `space` are allowed and are
/// listed in `warnings`.
TrialRecord replay_config(const TrainConfig& config, const Objective& objective, const SearchSpace& space,
                          std::vector<std::string>* warnings = nullptr);

}  // namespace doseguard
