#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace doseguard {

/// Mann-Whitney AUC with average ranks for ties. Throws DataError when only
/// one class is present.
double roc_auc(std::span<const int> y, std::span<const double> scores);

struct Confusion {
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tp = 0;
    bool operator==(const Confusion&) const = default;
};

/// Threshold metrics. Ratios with a zero denominator are reported as 0.
struct EvalReport {
    double roc_auc = 0.0;  // NaN when the labels hold a single class
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double balanced_accuracy = 0.0;
    double specificity = 0.0;
    Confusion confusion;
    double threshold = 0.5;

    nlohmann::ordered_json to_json() const;
};

EvalReport report_from_confusion(const Confusion& c, double threshold, double auc);

/// Predicts positive iff prob >= threshold.
EvalReport confusion_at(std::span<const int> y, std::span<const double> probs, double threshold);

struct ThresholdChoice {
    double threshold = 0.5;
    EvalReport report;
};

/// Exhaustive F1 scan over every distinct probability plus 0 and 1; the
/// smallest maximizing threshold wins.
ThresholdChoice optimize_threshold(std::span<const int> y, std::span<const double> probs);

std::vector<EvalReport> threshold_sweep(std::span<const int> y, std::span<const double> probs,
                                        std::span<const double> thresholds);

/// CSV with header threshold,tn,fp,fn,tp,precision,recall,f1,specificity,balanced_accuracy,auc
std::string sweep_csv(const std::vector<EvalReport>& reports);

double mean(std::span<const double> xs);
/// Population standard deviation (divides by n).
double stddev(std::span<const double> xs);

}  // namespace doseguard
