#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpkit/labeling.hpp"

namespace dpkit {

// Per-LF accuracy alpha (P(vote correct | votes)) and propensity beta
// (P(votes)) of the independent-LF generative model.
struct LabelModelParams {
    std::vector<double> alpha;
    std::vector<double> beta;
    int num_classes = 2;

    std::size_t size() const noexcept { return alpha.size(); }
    // alpha in [0, 1] is accepted here so degenerate hand-built models can be
    // evaluated; fitted models always have alpha strictly inside (0, 1).
    void validate() const;
};

struct FitConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double alpha_init = 0.7;
    double convergence_tol = 1e-6;  // stop when an epoch moves the log-likelihood by less

    void validate() const;
};

struct FittedLabelModel {
    LabelModelParams params;
    std::vector<double> weights;  // alpha_j / sum(alpha)
    double initial_log_likelihood = 0.0;
    double final_log_likelihood = 0.0;
    std::size_t epochs_run = 0;
    std::vector<std::size_t> uncovered_lfs;  // all-abstain columns, alpha left at alpha_init
};

// n x K class probabilities with argmax (lowest id on ties) and confidence.
struct ProbabilisticLabels {
    int num_classes = 2;
    std::vector<double> probs;  // row-major n x K
    std::vector<int> predicted;
    std::vector<double> confidence;

    std::size_t size() const noexcept { return predicted.size(); }
    std::span<const double> row(std::size_t i) const {
        return {probs.data() + i * static_cast<std::size_t>(num_classes), static_cast<std::size_t>(num_classes)};
    }

    // Builds predicted/confidence from a row-major probability buffer.
    static ProbabilisticLabels from_probs(std::vector<double> probs, int num_classes);
    static ProbabilisticLabels one_hot(std::span<const int> labels, int num_classes);
};

inline constexpr double kLikelihoodFloor = 1e-12;

// Binary only: sum over Y in {class 0, class 1} of the joint density, with a
// uniform class prior.
double marginal_likelihood(const LabelModelParams& params, std::span<const int> vote_row);

// Sum of log row likelihoods (each floored at kLikelihoodFloor). For K > 2
// the generalized model spreads each LF's error mass uniformly over the K-1
// wrong classes; at K = 2 it coincides with the binary model.
double log_likelihood(const LabelModelParams& params, const VoteMatrix& votes);

// d log_likelihood / d logit(alpha_j).
std::vector<double> gradient(const LabelModelParams& params, const VoteMatrix& votes);

// Coverage in closed form, alpha by mini-batch gradient ascent on logit(alpha).
// Step size decays as lr / (1 + epoch / 20); the best epoch is returned.
FittedLabelModel fit(const VoteMatrix& votes, const FitConfig& config = {});

std::vector<double> normalized_weights(std::span<const double> alpha);

// Weighted plurality over class scores; exact tie or all-abstain -> kAbstain.
int weighted_vote(std::span<const double> weights, std::span<const int> vote_row, int num_classes);

// Softmax over per-class summed weights.
ProbabilisticLabels soft_vote(std::span<const double> weights, const VoteMatrix& votes);
ProbabilisticLabels predict_proba(const FittedLabelModel& model, const VoteMatrix& votes);
ProbabilisticLabels majority_vote_labels(const VoteMatrix& votes);

// (max - 1/K) / (1 - 1/K); equals 2 (max - 1/2) for K = 2.
double confidence(std::span<const double> prob_row);

// True when the highest probability is shared by two or more classes.
bool top_tied(std::span<const double> prob_row);

struct SampledVotes {
    VoteMatrix votes;
    std::vector<int> latent;
};

SampledVotes sample_votes(const LabelModelParams& params, std::size_t n, std::uint64_t seed);

std::string model_to_json(const FittedLabelModel& model);
FittedLabelModel parse_model_json(std::string_view contents);

// "doc_id,p_class_0..p_class_{K-1},predicted,confidence"
std::string labels_to_csv(const ProbabilisticLabels& labels, std::span<const std::string> doc_ids);
ProbabilisticLabels parse_labels_csv(std::string_view contents, std::vector<std::string>* doc_ids = nullptr);

}  // namespace dpkit
