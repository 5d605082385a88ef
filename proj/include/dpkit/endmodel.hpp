#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpkit/corpus.hpp"
#include "dpkit/labelmodel.hpp"

namespace dpkit {

// Sparse row; indices strictly increasing. Unit L2 norm unless empty.
struct FeatureVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
    std::size_t dimension = 0;

    std::size_t nnz() const noexcept { return indices.size(); }
};

class TfidfVectorizer {
public:
    // idf(t) = ln((1 + n) / (1 + df(t))) + 1; with max_features the vocabulary
    // keeps the highest-df tokens (ties by token order).
    static TfidfVectorizer fit(const Corpus& corpus, std::optional<std::size_t> max_features = std::nullopt);

    FeatureVector transform(std::string_view text) const;
    std::vector<FeatureVector> transform(const Corpus& corpus) const;

    std::size_t dimension() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::vector<double>& idf() const noexcept { return idf_; }
    std::optional<std::uint32_t> index_of(const std::string& token) const;
    std::optional<double> idf_of(const std::string& token) const;

    // FNV-1a over the vocabulary and idf text, hex encoded.
    std::string vocabulary_hash() const;

    std::string to_json() const;
    static TfidfVectorizer from_json(std::string_view contents);

private:
    std::vector<std::string> tokens_;  // column order
    std::vector<double> idf_;
    std::map<std::string, std::uint32_t> index_;
};

enum class NoiseMode { filter, weight };

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double l2_penalty = 1e-4;
    std::uint64_t seed = 0;
    NoiseMode noise_mode = NoiseMode::weight;
    double filter_threshold = 0.6;

    void validate() const;
};

// Multinomial logistic regression: K x d weights and K biases.
class LinearModel {
public:
    LinearModel() = default;
    LinearModel(int num_classes, std::size_t dimension);

    int num_classes() const noexcept { return num_classes_; }
    std::size_t dimension() const noexcept { return dimension_; }

    double& weight(int c, std::size_t f) { return weights_[static_cast<std::size_t>(c) * dimension_ + f]; }
    double weight(int c, std::size_t f) const { return weights_[static_cast<std::size_t>(c) * dimension_ + f]; }
    double& bias(int c) { return biases_[c]; }
    double bias(int c) const { return biases_[c]; }
    std::vector<double>& weights() noexcept { return weights_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::vector<double>& biases() noexcept { return biases_; }
    const std::vector<double>& biases() const noexcept { return biases_; }

    void scores(const FeatureVector& x, std::span<double> out) const;
    std::vector<double> predict_row(const FeatureVector& x) const;
    ProbabilisticLabels predict_proba(std::span<const FeatureVector> features) const;

    std::string to_json(const TfidfVectorizer& vectorizer, const TrainConfig& config) const;
    // Restores the model and, when present, the embedded vectorizer.
    static LinearModel from_json(std::string_view contents, TfidfVectorizer* vectorizer = nullptr);

private:
    int num_classes_ = 2;
    std::size_t dimension_ = 0;
    std::vector<double> weights_;
    std::vector<double> biases_;
};

// Objective: sum_i w_i * CE(targets_i, softmax(x_i)) / |rows| + l2/2 * ||W||^2
// (biases unpenalized). Gradient is written into grad_w / grad_b.
double objective(const LinearModel& model, std::span<const FeatureVector> features,
                 const ProbabilisticLabels& targets, std::span<const double> row_weights,
                 std::span<const std::size_t> rows, double l2_penalty, std::vector<double>* grad_w = nullptr,
                 std::vector<double>* grad_b = nullptr);

struct TrainResult {
    LinearModel model;
    std::vector<double> epoch_loss;  // objective over the training rows after each epoch
    std::size_t rows_used = 0;
};

// Noise-aware training: filter drops rows below the confidence threshold,
// weight scales each row's loss by its confidence.
TrainResult train_detailed(std::span<const FeatureVector> features, const ProbabilisticLabels& labels,
                           const TrainConfig& config, bool record_loss = true);
LinearModel train(std::span<const FeatureVector> features, const ProbabilisticLabels& labels,
                  const TrainConfig& config);

// "doc_id,index,value" triplets.
std::string features_to_csv(std::span<const FeatureVector> features, std::span<const std::string> doc_ids);

}  // namespace dpkit
