#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpkit/corpus.hpp"
#include "dpkit/endmodel.hpp"
#include "dpkit/labeling.hpp"
#include "dpkit/labelmodel.hpp"
#include "dpkit/metrics.hpp"

namespace dpkit::experiment {

// Simulated annotator over a training corpus. Every label handed to a learner
// goes through here and is counted.
class GoldOracle {
public:
    explicit GoldOracle(const Corpus& corpus);

    int reveal(std::size_t index);
    std::size_t reads() const noexcept { return reads_; }
    std::size_t size() const noexcept { return gold_.size(); }
    int num_classes() const noexcept { return num_classes_; }

    // per_class items of each class, uniform without replacement, sorted by
    // index. Counts one read per returned item.
    std::vector<std::pair<std::size_t, int>> balanced_sample(std::size_t per_class, Rng& rng);

private:
    std::vector<int> gold_;
    int num_classes_;
    std::size_t reads_ = 0;
};

struct LabeledPool {
    std::vector<std::pair<std::size_t, int>> items;  // (corpus index, label)
};

struct UnlabeledPool {
    std::vector<std::size_t> indices;  // ascending
};

struct Pools {
    LabeledPool labeled;
    UnlabeledPool unlabeled;
};

enum class Acquisition { entropy, least_confidence };

struct ALConfig {
    std::size_t seed_size = 20;
    std::size_t query_size = 1;
    std::size_t iterations = 1000;
    Acquisition acquisition = Acquisition::entropy;
    std::uint64_t seed = 0;
};

struct SSLConfig {
    std::size_t seed_size = 1000;
    std::size_t batch_size = 10;
    std::size_t iterations = 25;
    std::optional<double> cutoff;  // keep only max-probability > cutoff
    std::uint64_t seed = 0;
};

struct TrajectoryPoint {
    std::size_t iteration = 0;
    std::size_t labeled_count = 0;
    metrics::MetricsReport metrics;
    metrics::Interval accuracy_wilson;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    std::vector<std::pair<std::size_t, int>> added;  // (corpus index, label) in order of addition
    bool stopped_early = false;
    std::string stop_reason;
};

enum class Aggregator { weighted, majority };

// Train texts (golds stripped) and test set, featurized with a TF-IDF
// vectorizer fitted on the train texts.
struct Dataset {
    Corpus train_texts;
    Corpus test;
    TfidfVectorizer vectorizer;
    std::vector<FeatureVector> train_features;
    std::vector<FeatureVector> test_features;
    std::vector<int> test_gold;

    static Dataset prepare(const Corpus& train, const Corpus& test,
                           std::optional<std::size_t> max_features = std::nullopt);
};

struct ExperimentConfig {
    FitConfig fit;
    TrainConfig train;
    ALConfig al;
    SSLConfig ssl;
    Aggregator aggregator = Aggregator::weighted;

    // Per-stage seeds derived from one global seed by fixed offsets.
    void apply_global_seed(std::uint64_t seed);
};

struct RegimeOutcome {
    metrics::MetricsReport report;
    std::optional<Trajectory> trajectory;
};

Pools seed_sample(GoldOracle& oracle, std::size_t size, std::uint64_t seed);

double entropy(std::span<const double> prob_row);
std::size_t acquire_entropy(const ProbabilisticLabels& probs);
std::size_t acquire_least_confidence(const ProbabilisticLabels& probs);
// The `count` best rows under the acquisition rule, best first; ties by lower row.
std::vector<std::size_t> acquire(const ProbabilisticLabels& probs, std::size_t count, Acquisition rule);

Trajectory run_active_learning(const Dataset& data, GoldOracle& oracle, const ALConfig& config,
                               const TrainConfig& train_config);
Trajectory run_self_training(const Dataset& data, GoldOracle& oracle, const SSLConfig& config,
                             const TrainConfig& train_config);

// Weak labels -> end model -> test metrics. Never touches training golds.
metrics::MetricsReport run_weak_supervision(const Dataset& data, std::span<const KeywordLF> lfs,
                                            const FitConfig& fit_config, const TrainConfig& train_config,
                                            Aggregator aggregator = Aggregator::weighted);
metrics::MetricsReport run_full_supervision(const Dataset& data, GoldOracle& oracle, const TrainConfig& train_config);

// Shared last stage: train on the given label rows and score the test set.
metrics::MetricsReport train_and_evaluate(const Dataset& data, const ProbabilisticLabels& labels,
                                          const TrainConfig& train_config, std::size_t labeled_used);

inline const std::vector<std::string>& regime_names() {
    static const std::vector<std::string> names = {"weak", "majority", "full", "active", "semi"};
    return names;
}

RegimeOutcome run_regime(const std::string& regime, const Dataset& data, GoldOracle& oracle,
                         std::span<const KeywordLF> lfs, const ExperimentConfig& config);

std::map<std::string, RegimeOutcome> compare(const Dataset& data, const Corpus& train_with_gold,
                                             std::span<const KeywordLF> lfs, const ExperimentConfig& config);

// iteration,labeled_count,accuracy,accuracy_wilson_lo,accuracy_wilson_hi,auc,fpr_at_50tpr,fnr_at_50tnr,
// weighted_precision,weighted_recall,weighted_f1
std::string trajectory_to_csv(const Trajectory& trajectory);
std::string comparison_to_json(const std::map<std::string, RegimeOutcome>& outcomes);

}  // namespace dpkit::experiment
