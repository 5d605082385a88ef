#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "dpkit/labelmodel.hpp"

namespace dpkit::metrics {

struct MetricsReport {
    double accuracy = 0.0;
    std::optional<double> auc;           // binary only
    std::optional<double> fpr_at_50tpr;  // binary only
    std::optional<double> fnr_at_50tnr;  // binary only
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    std::size_t n_test = 0;
    std::size_t labeled_used = 0;
};

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

double accuracy(std::span<const int> predicted, std::span<const int> gold);

// Rank statistic: P(random positive outscores random negative), ties count 1/2.
// gold uses 1 for positive, 0 for negative.
double auc(std::span<const double> scores, std::span<const int> gold);

// Highest distinct-score threshold with TPR >= target (score >= t is
// positive); returns the FPR there.
double fpr_at_tpr(std::span<const double> scores, std::span<const int> gold, double tpr_target = 0.5);

// Lowest distinct-score threshold with TNR >= target (score <= t is
// negative); returns the FNR there.
double fnr_at_tnr(std::span<const double> scores, std::span<const int> gold, double tnr_target = 0.5);

// Per-class P/R/F1 averaged with gold class frequencies as weights.
PRF weighted_prf(std::span<const int> predicted, std::span<const int> gold, int num_classes);

Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

// Full report for model output against gold; the binary fields use P(class 1) as score.
MetricsReport evaluate(const ProbabilisticLabels& predictions, std::span<const int> gold, std::size_t labeled_used);

// JSON object with reals rounded to 6 decimals; binary-only fields omitted when absent.
std::string report_to_json(const MetricsReport& report, int indent = 2);

}  // namespace dpkit::metrics
