#include "doseguard/tune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/metrics.hpp"
#include "doseguard/rng.hpp"

namespace doseguard {

namespace {

enum class Scale { linear, log, integer };

struct Param {
    const char* name;
    Range range;
    Scale scale;
    double TrainConfig::* real = nullptr;
    int TrainConfig::* whole = nullptr;
};

std::vector<Param> params_of(const SearchSpace& s) {
    return {
        {"learning_rate", s.learning_rate, Scale::log, &TrainConfig::learning_rate, nullptr},
        {"num_leaves", s.num_leaves, Scale::integer, nullptr, &TrainConfig::num_leaves},
        {"max_depth", s.max_depth, Scale::integer, nullptr, &TrainConfig::max_depth},
        {"min_child_samples", s.min_child_samples, Scale::integer, nullptr, &TrainConfig::min_child_samples},
        {"lambda_l1", s.lambda_l1, Scale::linear, &TrainConfig::lambda_l1, nullptr},
        {"lambda_l2", s.lambda_l2, Scale::linear, &TrainConfig::lambda_l2, nullptr},
        {"feature_fraction", s.feature_fraction, Scale::linear, &TrainConfig::feature_fraction, nullptr},
        {"bagging_fraction", s.bagging_fraction, Scale::linear, &TrainConfig::bagging_fraction, nullptr},
    };
}

/// Bounds in the space where sampling happens.
Range internal_range(const Param& p) {
    if (p.scale == Scale::log) return {std::log(p.range.lo), std::log(p.range.hi)};
    if (p.scale == Scale::integer) return {p.range.lo - 0.5, p.range.hi + 0.5};
    return p.range;
}

double to_internal(const Param& p, const TrainConfig& c) {
    if (p.whole) return static_cast<double>(c.*(p.whole));
    return p.scale == Scale::log ? std::log(c.*(p.real)) : c.*(p.real);
}

void assign(const Param& p, TrainConfig& c, double internal) {
    if (p.scale == Scale::integer) {
        const double v = std::clamp(std::round(internal), p.range.lo, p.range.hi);
        c.*(p.whole) = static_cast<int>(v);
    } else if (p.scale == Scale::log) {
        c.*(p.real) = std::clamp(std::exp(internal), p.range.lo, p.range.hi);
    } else {
        c.*(p.real) = std::clamp(internal, p.range.lo, p.range.hi);
    }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Mixture of Gaussians truncated to [lo, hi] with equal weights.
struct Parzen {
    std::vector<double> mu;
    std::vector<double> sigma;
    double lo = 0.0;
    double hi = 1.0;

    Parzen(std::vector<double> points, Range r) : lo(r.lo), hi(r.hi) {
        std::sort(points.begin(), points.end());
        const double width = hi - lo;
        const double prior_mu = 0.5 * (lo + hi);
        mu = points;
        const std::size_t n = points.size();
        const double min_sigma = width / std::min(100.0, static_cast<double>(n) + 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double left = i == 0 ? points[i] - lo : points[i] - points[i - 1];
            const double right = i + 1 == n ? hi - points[i] : points[i + 1] - points[i];
            sigma.push_back(std::clamp(std::max(left, right), min_sigma, width));
        }
        mu.push_back(prior_mu);
        sigma.push_back(width);
    }

    double log_density(double x) const {
        double total = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const double s = sigma[i];
            const double mass = normal_cdf((hi - mu[i]) / s) - normal_cdf((lo - mu[i]) / s);
            const double z = (x - mu[i]) / s;
            total += std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi) * std::max(mass, 1e-12));
        }
        return std::log(std::max(total / static_cast<double>(mu.size()), 1e-300));
    }

    double sample(Rng& rng) const {
        const std::size_t c = rng.below(mu.size());
        for (int attempt = 0; attempt < 100; ++attempt) {
            const double x = mu[c] + sigma[c] * rng.normal();
            if (x >= lo && x <= hi) return x;
        }
        return std::clamp(mu[c], lo, hi);
    }
};

}  // namespace

std::vector<std::string> SearchSpace::violations(const TrainConfig& c) const {
    std::vector<std::string> out;
    for (const auto& p : params_of(*this)) {
        const double v = p.whole ? static_cast<double>(c.*(p.whole)) : c.*(p.real);
        if (v < p.range.lo || v > p.range.hi) out.emplace_back(p.name);
    }
    return out;
}

nlohmann::ordered_json TrialRecord::to_json() const {
    nlohmann::ordered_json j;
    j["trial_id"] = trial_id;
    j["status"] = ok ? "ok" : "failed";
    if (!ok) j["error"] = error;
    j["config"] = config.to_json();
    j["mean_auc"] = ok ? nlohmann::ordered_json(mean_auc) : nlohmann::ordered_json(nullptr);
    j["std_auc"] = ok ? nlohmann::ordered_json(std_auc) : nlohmann::ordered_json(nullptr);
    j["per_fold_auc"] = per_fold_auc;
    j["wall_time"] = wall_time;
    return j;
}

TrialRecord TrialRecord::from_json(const nlohmann::json& j) {
    TrialRecord r;
    try {
        r.trial_id = j.at("trial_id").get<int>();
        r.ok = j.at("status").get<std::string>() == "ok";
        if (!r.ok) r.error = j.value("error", std::string{});
        r.config = TrainConfig::from_json(j.at("config"));
        if (r.ok) {
            r.mean_auc = j.at("mean_auc").get<double>();
            r.std_auc = j.at("std_auc").get<double>();
        }
        r.per_fold_auc = j.at("per_fold_auc").get<std::vector<double>>();
        r.wall_time = j.value("wall_time", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("malformed trial record: {}", e.what()));
    } catch (const ConfigError& e) {
        throw FormatError(fmt::format("malformed trial config: {}", e.what()));
    }
    return r;
}

bool same_outcome(const TrialRecord& a, const TrialRecord& b) {
    return a.trial_id == b.trial_id && a.config == b.config && a.ok == b.ok && a.error == b.error &&
           a.mean_auc == b.mean_auc && a.std_auc == b.std_auc && a.per_fold_auc == b.per_fold_auc;
}

SamplerKind parse_sampler(const std::string& name) {
    if (name == "tpe") return SamplerKind::tpe;
    if (name == "random") return SamplerKind::random;
    throw ConfigError(fmt::format("unknown sampler '{}' (expected tpe or random)", name));
}

Objective cv_objective(const SparseMatrix& X, std::span<const int> y, const FoldPlan& plan, CvOptions options) {
    return [&X, y, &plan, options](const TrainConfig& config) {
        return cv_train(X, y, config, plan, options).oof.per_fold_auc;
    };
}

TrainConfig sample_random(const SearchSpace& space, const TrainConfig& base, Rng& rng) {
    TrainConfig c = base;
    for (const auto& p : params_of(space)) {
        const Range r = internal_range(p);
        assign(p, c, rng.uniform(r.lo, r.hi));
    }
    return c;
}

TrainConfig sample_tpe(const SearchSpace& space, const TrainConfig& base, const std::vector<TrialRecord>& history,
                       const TpeSettings& settings, Rng& rng) {
    std::vector<const TrialRecord*> done;
    for (const auto& t : history) {
        if (t.ok && std::isfinite(t.mean_auc)) done.push_back(&t);
    }
    if (static_cast<int>(done.size()) < std::max(settings.n_startup, 2)) return sample_random(space, base, rng);

    std::stable_sort(done.begin(), done.end(),
                     [](const TrialRecord* a, const TrialRecord* b) { return a->mean_auc > b->mean_auc; });
    const auto n_good = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(settings.gamma * static_cast<double>(done.size()))), 1, done.size() - 1);

    TrainConfig c = base;
    for (const auto& p : params_of(space)) {
        const Range r = internal_range(p);
        std::vector<double> good;
        std::vector<double> bad;
        for (std::size_t i = 0; i < done.size(); ++i) {
            const double v = std::clamp(to_internal(p, done[i]->config), r.lo, r.hi);
            (i < n_good ? good : bad).push_back(v);
        }
        const Parzen l(good, r);
        const Parzen g(bad, r);
        double best_x = 0.0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < settings.n_candidates; ++k) {
            const double x = l.sample(rng);
            const double score = l.log_density(x) - g.log_density(x);
            if (score > best_score) {
                best_score = score;
                best_x = x;
            }
        }
        assign(p, c, best_x);
    }
    return c;
}

std::vector<TrialRecord> load_history(const std::filesystem::path& path) {
    std::vector<TrialRecord> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(TrialRecord::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error&) {
            throw FormatError(fmt::format("{}:{}: malformed history line", path.string(), line_no));
        }
        if (out.back().trial_id != static_cast<int>(out.size()) - 1) {
            throw FormatError(fmt::format("{}:{}: trial ids must be consecutive from 0", path.string(), line_no));
        }
    }
    return out;
}

namespace {

TrialRecord evaluate(int trial_id, const TrainConfig& config, const Objective& objective) {
    TrialRecord rec;
    rec.trial_id = trial_id;
    rec.config = config;
    const auto start = std::chrono::steady_clock::now();
    try {
        rec.per_fold_auc = objective(config);
        if (rec.per_fold_auc.empty()) throw TrainingError("objective returned no fold scores");
        rec.mean_auc = mean(rec.per_fold_auc);
        rec.std_auc = stddev(rec.per_fold_auc);
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
        rec.per_fold_auc.clear();
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

}  // namespace

SearchResult run_search(const Objective& objective, const SearchSpace& space, const SearchOptions& options) {
    if (options.n_trials < 1) throw ConfigError("n_trials must be at least 1");
    SearchResult result;
    std::ofstream sink;
    if (options.history_path) {
        result.history = load_history(*options.history_path);
        if (static_cast<int>(result.history.size()) > options.n_trials) result.history.resize(options.n_trials);
        sink.open(*options.history_path, std::ios::app);
        if (!sink) throw Error(fmt::format("cannot append to {}", options.history_path->string()));
    }

    for (int id = static_cast<int>(result.history.size()); id < options.n_trials; ++id) {
        Rng rng = Rng::stream(options.seed, 0x7E57'0000ULL + static_cast<std::uint64_t>(id));
        const TrainConfig config = options.sampler == SamplerKind::random
                                       ? sample_random(space, options.base, rng)
                                       : sample_tpe(space, options.base, result.history, options.tpe, rng);
        result.history.push_back(evaluate(id, config, objective));
        if (sink.is_open()) {
            sink << result.history.back().to_json().dump() << '\n';
            sink.flush();
        }
    }

    for (const auto& t : result.history) {
        if (t.ok && (!result.best || t.mean_auc > result.best->mean_auc)) result.best = t;
    }
    return result;
}

TrialRecord replay_config(const TrainConfig& config, const Objective& objective, const SearchSpace& space,
                          std::vector<std::string>* warnings) {
    config.validate();
    if (warnings) {
        for (const auto& name : space.violations(config)) {
            warnings->push_back(fmt::format("{} is outside the search space", name));
        }
    }
    return evaluate(0, config, objective);
}

}  // namespace doseguard
