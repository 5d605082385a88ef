#include "dpkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "json.hpp"

#include "dpkit/common.hpp"
#include "dpkit/io.hpp"

namespace dpkit::metrics {

namespace {

struct Counts {
    std::size_t pos = 0;
    std::size_t neg = 0;
};

Counts binary_counts(std::span<const double> scores, std::span<const int> gold) {
    if (scores.size() != gold.size()) throw ValidationError("scores and gold differ in length");
    Counts c;
    for (int g : gold) {
        if (g == 1) {
            ++c.pos;
        } else if (g == 0) {
            ++c.neg;
        } else {
            throw ValidationError("binary gold labels must be 0 or 1");
        }
    }
    if (c.pos == 0 || c.neg == 0) throw ValidationError("both classes must be present");
    return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    return idx;
}

}  // namespace

double accuracy(std::span<const int> predicted, std::span<const int> gold) {
    if (predicted.size() != gold.size()) throw ValidationError("predicted and gold differ in length");
    if (gold.empty()) throw ValidationError("accuracy of an empty set is undefined");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) hit += predicted[i] == gold[i];
    return static_cast<double>(hit) / static_cast<double>(gold.size());
}

double auc(std::span<const double> scores, std::span<const int> gold) {
    const Counts c = binary_counts(scores, gold);
    // Mann-Whitney U with mid-ranks for ties.
    const auto idx = order_by_score(scores);
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t q = i; q < j; ++q) {
            if (gold[idx[q]] == 1) pos_rank_sum += mid_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(c.pos), n = static_cast<double>(c.neg);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double fpr_at_tpr(std::span<const double> scores, std::span<const int> gold, double tpr_target) {
    const Counts c = binary_counts(scores, gold);
    auto idx = order_by_score(scores);
    std::reverse(idx.begin(), idx.end());
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < idx.size()) {
        const double t = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == t) {
            (gold[idx[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        if (static_cast<double>(tp) / static_cast<double>(c.pos) >= tpr_target) {
            return static_cast<double>(fp) / static_cast<double>(c.neg);
        }
    }
    return 1.0;
}

double fnr_at_tnr(std::span<const double> scores, std::span<const int> gold, double tnr_target) {
    const Counts c = binary_counts(scores, gold);
    const auto idx = order_by_score(scores);
    std::size_t tn = 0, fn = 0, i = 0;
    while (i < idx.size()) {
        const double t = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == t) {
            (gold[idx[i]] == 0 ? tn : fn) += 1;
            ++i;
        }
        if (static_cast<double>(tn) / static_cast<double>(c.neg) >= tnr_target) {
            return static_cast<double>(fn) / static_cast<double>(c.pos);
        }
    }
    return 1.0;
}

PRF weighted_prf(std::span<const int> predicted, std::span<const int> gold, int num_classes) {
    if (predicted.size() != gold.size()) throw ValidationError("predicted and gold differ in length");
    if (gold.empty()) throw ValidationError("weighted_prf of an empty set is undefined");
    std::vector<std::size_t> tp(num_classes, 0), pred_n(num_classes, 0), gold_n(num_classes, 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] < 0 || gold[i] >= num_classes) throw ValidationError("gold label outside [0, K)");
        ++gold_n[gold[i]];
        if (predicted[i] >= 0 && predicted[i] < num_classes) ++pred_n[predicted[i]];
        if (predicted[i] == gold[i]) ++tp[gold[i]];
    }
    PRF out;
    const double n = static_cast<double>(gold.size());
    for (int c = 0; c < num_classes; ++c) {
        const double p = pred_n[c] ? static_cast<double>(tp[c]) / static_cast<double>(pred_n[c]) : 0.0;
        const double r = gold_n[c] ? static_cast<double>(tp[c]) / static_cast<double>(gold_n[c]) : 0.0;
        const double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        const double w = static_cast<double>(gold_n[c]) / n;
        out.precision += w * p;
        out.recall += w * r;
        out.f1 += w * f;
    }
    return out;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) throw ValidationError("wilson interval needs at least one trial");
    if (successes > trials) throw ValidationError("successes exceed trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    Interval iv{std::max(0.0, center - half), std::min(1.0, center + half)};
    if (successes == 0) iv.lo = 0.0;
    if (successes == trials) iv.hi = 1.0;
    return iv;
}

MetricsReport evaluate(const ProbabilisticLabels& predictions, std::span<const int> gold, std::size_t labeled_used) {
    if (predictions.size() != gold.size()) throw ValidationError("prediction count does not match gold");
    MetricsReport r;
    r.n_test = gold.size();
    r.labeled_used = labeled_used;
    r.accuracy = accuracy(predictions.predicted, gold);
    const PRF prf = weighted_prf(predictions.predicted, gold, predictions.num_classes);
    r.weighted_precision = prf.precision;
    r.weighted_recall = prf.recall;
    r.weighted_f1 = prf.f1;
    if (predictions.num_classes == 2) {
        std::vector<double> scores(gold.size());
        for (std::size_t i = 0; i < gold.size(); ++i) scores[i] = predictions.row(i)[1];
        const bool both = std::count(gold.begin(), gold.end(), 1) > 0 && std::count(gold.begin(), gold.end(), 0) > 0;
        if (both) {
            r.auc = auc(scores, gold);
            r.fpr_at_50tpr = fpr_at_tpr(scores, gold, 0.5);
            r.fnr_at_50tnr = fnr_at_tnr(scores, gold, 0.5);
        }
    }
    return r;
}

std::string report_to_json(const MetricsReport& report, int indent) {
    nlohmann::ordered_json j;
    j["labeled_used"] = report.labeled_used;
    j["n_test"] = report.n_test;
    j["accuracy"] = io::round_to(report.accuracy);
    if (report.auc) j["auc"] = io::round_to(*report.auc);
    if (report.fpr_at_50tpr) j["fpr_at_50tpr"] = io::round_to(*report.fpr_at_50tpr);
    if (report.fnr_at_50tnr) j["fnr_at_50tnr"] = io::round_to(*report.fnr_at_50tnr);
    j["weighted_precision"] = io::round_to(report.weighted_precision);
    j["weighted_recall"] = io::round_to(report.weighted_recall);
    j["weighted_f1"] = io::round_to(report.weighted_f1);
    return j.dump(indent);
}

}  // namespace dpkit::metrics
