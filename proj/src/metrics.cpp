#include "doseguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "doseguard/errors.hpp"

namespace doseguard {

namespace {

void check_aligned(std::span<const int> y, std::size_t n) {
    if (y.size() != n) throw DataError(fmt::format("{} labels but {} scores", y.size(), n));
}

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool has_both_classes(std::span<const int> y) {
    bool pos = false;
    bool neg = false;
    for (int v : y) (v == 1 ? pos : neg) = true;
    return pos && neg;
}

}  // namespace

double roc_auc(std::span<const int> y, std::span<const double> scores) {
    check_aligned(y, scores.size());
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the rank sum of positives, kept in integers so ties stay exact.
    std::int64_t twice_rank_sum = 0;
    std::int64_t n_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::int64_t pos_in_group = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            pos_in_group += y[order[j]] == 1 ? 1 : 0;
            ++j;
        }
        // Ranks i+1..j share the average rank (i+1+j)/2.
        twice_rank_sum += pos_in_group * static_cast<std::int64_t>(i + 1 + j);
        n_pos += pos_in_group;
        i = j;
    }
    const auto n_neg = static_cast<std::int64_t>(y.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("ROC-AUC needs both classes present");
    const std::int64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    return static_cast<double>(twice_u) / static_cast<double>(2 * n_pos * n_neg);
}

EvalReport report_from_confusion(const Confusion& c, double threshold, double auc) {
    EvalReport r;
    r.confusion = c;
    r.threshold = threshold;
    r.roc_auc = auc;
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.recall = ratio(c.tp, c.tp + c.fn);
    r.specificity = ratio(c.tn, c.tn + c.fp);
    r.balanced_accuracy = (r.recall + r.specificity) / 2.0;
    r.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return r;
}

EvalReport confusion_at(std::span<const int> y, std::span<const double> probs, double threshold) {
    check_aligned(y, probs.size());
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError(fmt::format("threshold {} outside [0, 1]", threshold));
    }
    Confusion c;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool flagged = probs[i] >= threshold;
        if (y[i] == 1) {
            (flagged ? c.tp : c.fn) += 1;
        } else {
            (flagged ? c.fp : c.tn) += 1;
        }
    }
    const double auc = has_both_classes(y) ? roc_auc(y, probs) : std::numeric_limits<double>::quiet_NaN();
    return report_from_confusion(c, threshold, auc);
}

ThresholdChoice optimize_threshold(std::span<const int> y, std::span<const double> probs) {
    check_aligned(y, probs.size());
    const double auc = roc_auc(y, probs);  // also enforces both classes

    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(probs[i]);
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());

    std::vector<double> candidates(probs.begin(), probs.end());
    candidates.push_back(0.0);
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const auto count_at_least = [](const std::vector<double>& sorted, double t) {
        return static_cast<std::uint64_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
    };

    ThresholdChoice best;
    double best_f1 = -1.0;
    for (double t : candidates) {
        Confusion c;
        c.tp = count_at_least(pos, t);
        c.fn = pos.size() - c.tp;
        c.fp = count_at_least(neg, t);
        c.tn = neg.size() - c.fp;
        const double f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
        if (f1 > best_f1) {
            best_f1 = f1;
            best.threshold = t;
            best.report = report_from_confusion(c, t, auc);
        }
    }
    return best;
}

std::vector<EvalReport> threshold_sweep(std::span<const int> y, std::span<const double> probs,
                                        std::span<const double> thresholds) {
    std::vector<EvalReport> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) out.push_back(confusion_at(y, probs, t));
    return out;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["threshold"] = threshold;
    if (std::isnan(roc_auc)) {
        j["roc_auc"] = nullptr;
    } else {
        j["roc_auc"] = roc_auc;
    }
    j["f1"] = f1;
    j["precision"] = precision;
    j["recall"] = recall;
    j["balanced_accuracy"] = balanced_accuracy;
    j["specificity"] = specificity;
    j["confusion"] = {{"tn", confusion.tn}, {"fp", confusion.fp}, {"fn", confusion.fn}, {"tp", confusion.tp}};
    return j;
}

std::string sweep_csv(const std::vector<EvalReport>& reports) {
    std::string out = "threshold,tn,fp,fn,tp,precision,recall,f1,specificity,balanced_accuracy,auc\n";
    for (const auto& r : reports) {
        out += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", r.threshold,
                           r.confusion.tn, r.confusion.fp, r.confusion.fn, r.confusion.tp, r.precision,
                           r.recall, r.f1, r.specificity, r.balanced_accuracy,
                           std::isnan(r.roc_auc) ? std::string("") : fmt::format("{:.6f}", r.roc_auc));
    }
    return out;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double offset = 0.0;
    for (double x : xs) offset += x - xs[0];
    return xs[0] + offset / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace doseguard
