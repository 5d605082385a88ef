#include "dpkit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "dpkit/io.hpp"

namespace dpkit::experiment {

GoldOracle::GoldOracle(const Corpus& corpus) : num_classes_(corpus.num_classes()) {
    gold_.reserve(corpus.size());
    for (const auto& d : corpus.documents()) {
        if (!d.gold) throw ValidationError("oracle needs a gold label for document " + d.id);
        gold_.push_back(*d.gold);
    }
}

int GoldOracle::reveal(std::size_t index) {
    ++reads_;
    return gold_.at(index);
}

std::vector<std::pair<std::size_t, int>> GoldOracle::balanced_sample(std::size_t per_class, Rng& rng) {
    std::vector<std::pair<std::size_t, int>> out;
    for (int c = 0; c < num_classes_; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < gold_.size(); ++i) {
            if (gold_[i] == c) members.push_back(i);
        }
        if (members.size() < per_class) {
            throw ValidationError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                  " documents, seed needs " + std::to_string(per_class));
        }
        rng.shuffle(std::span(members));
        for (std::size_t q = 0; q < per_class; ++q) out.emplace_back(members[q], c);
    }
    std::sort(out.begin(), out.end());
    reads_ += out.size();
    return out;
}

Dataset Dataset::prepare(const Corpus& train, const Corpus& test, std::optional<std::size_t> max_features) {
    if (!test.all_gold()) throw ValidationError("every test document needs a gold label");
    if (train.class_names() != test.class_names()) throw ValidationError("train and test class names differ");
    Dataset d{train.without_gold(), test, {}, {}, {}, {}};
    d.vectorizer = TfidfVectorizer::fit(d.train_texts, max_features);
    d.train_features = d.vectorizer.transform(d.train_texts);
    d.test_features = d.vectorizer.transform(d.test);
    for (const auto& doc : d.test.documents()) d.test_gold.push_back(*doc.gold);
    return d;
}

void ExperimentConfig::apply_global_seed(std::uint64_t seed) {
    fit.seed = derive_seed(seed, 1);
    train.seed = derive_seed(seed, 2);
    al.seed = derive_seed(seed, 3);
    ssl.seed = derive_seed(seed, 4);
}

Pools seed_sample(GoldOracle& oracle, std::size_t size, std::uint64_t seed) {
    const auto k = static_cast<std::size_t>(oracle.num_classes());
    const std::size_t per_class = size / k;
    if (per_class == 0) throw ValidationError("seed size must be at least the number of classes");
    Rng rng(seed);
    Pools pools;
    pools.labeled.items = oracle.balanced_sample(per_class, rng);
    std::vector<bool> taken(oracle.size(), false);
    for (const auto& [i, y] : pools.labeled.items) taken[i] = true;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        if (!taken[i]) pools.unlabeled.indices.push_back(i);
    }
    return pools;
}

double entropy(std::span<const double> prob_row) {
    double h = 0.0;
    for (double p : prob_row) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

std::vector<std::size_t> acquire(const ProbabilisticLabels& probs, std::size_t count, Acquisition rule) {
    const std::size_t n = probs.size();
    if (n == 0) throw ValidationError("cannot acquire from an empty pool");
    // Larger key = more informative. With two classes entropy is a decreasing
    // function of the top probability; ranking by that directly avoids ties
    // that rounding creates where entropy is flat (near p = 0.5).
    const bool by_top = rule == Acquisition::least_confidence || probs.num_classes == 2;
    std::vector<double> key(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = probs.row(i);
        key[i] = by_top ? -*std::max_element(r.begin(), r.end()) : entropy(r);
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    count = std::min(count, n);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                      [&](std::size_t a, std::size_t b) { return key[a] > key[b] || (key[a] == key[b] && a < b); });
    idx.resize(count);
    return idx;
}

std::size_t acquire_entropy(const ProbabilisticLabels& probs) {
    return acquire(probs, 1, Acquisition::entropy).front();
}

std::size_t acquire_least_confidence(const ProbabilisticLabels& probs) {
    return acquire(probs, 1, Acquisition::least_confidence).front();
}

namespace {

void require_gold_free(const Dataset& data, const GoldOracle& oracle) {
    if (data.train_texts.any_gold()) throw ValidationError("training texts must not carry gold labels");
    if (oracle.size() != data.train_texts.size()) throw ValidationError("oracle does not match the training set");
}

LinearModel fit_on_labeled(const Dataset& data, const LabeledPool& pool, const TrainConfig& config) {
    std::vector<FeatureVector> x;
    std::vector<int> y;
    x.reserve(pool.items.size());
    for (const auto& [i, label] : pool.items) {
        x.push_back(data.train_features[i]);
        y.push_back(label);
    }
    return train(x, ProbabilisticLabels::one_hot(y, data.train_texts.num_classes()), config);
}

std::vector<FeatureVector> gather(const Dataset& data, const UnlabeledPool& pool) {
    std::vector<FeatureVector> x;
    x.reserve(pool.indices.size());
    for (std::size_t i : pool.indices) x.push_back(data.train_features[i]);
    return x;
}

TrajectoryPoint make_point(const Dataset& data, const LinearModel& model, std::size_t iteration,
                           std::size_t labeled_count, std::size_t labeled_used) {
    TrajectoryPoint pt;
    pt.iteration = iteration;
    pt.labeled_count = labeled_count;
    pt.metrics = metrics::evaluate(model.predict_proba(data.test_features), data.test_gold, labeled_used);
    const auto hits = static_cast<std::size_t>(std::llround(pt.metrics.accuracy * static_cast<double>(data.test_gold.size())));
    pt.accuracy_wilson = metrics::wilson_interval(hits, data.test_gold.size());
    return pt;
}

// Removes the given pool positions (any order) from the unlabeled pool and
// returns the corresponding corpus indices in the order given.
std::vector<std::size_t> take_positions(UnlabeledPool& pool, std::span<const std::size_t> positions) {
    std::vector<std::size_t> taken;
    std::vector<bool> drop(pool.indices.size(), false);
    for (std::size_t p : positions) {
        taken.push_back(pool.indices[p]);
        drop[p] = true;
    }
    std::vector<std::size_t> rest;
    rest.reserve(pool.indices.size() - positions.size());
    for (std::size_t p = 0; p < pool.indices.size(); ++p) {
        if (!drop[p]) rest.push_back(pool.indices[p]);
    }
    pool.indices = std::move(rest);
    return taken;
}

}  // namespace

Trajectory run_active_learning(const Dataset& data, GoldOracle& oracle, const ALConfig& config,
                               const TrainConfig& train_config) {
    require_gold_free(data, oracle);
    if (config.query_size == 0) throw ValidationError("query_size must be at least 1");
    if (config.seed_size < static_cast<std::size_t>(oracle.num_classes())) {
        throw ValidationError("seed_size must be at least the number of classes");
    }
    Pools pools = seed_sample(oracle, config.seed_size, config.seed);
    Trajectory traj;
    const std::size_t possible = pools.unlabeled.indices.size() / config.query_size;
    const std::size_t iterations = std::min(config.iterations, possible);
    if (iterations < config.iterations) {
        traj.stopped_early = true;
        traj.stop_reason = "unlabeled pool exhausted";
    }

    LinearModel model = fit_on_labeled(data, pools.labeled, train_config);
    traj.points.push_back(make_point(data, model, 0, pools.labeled.items.size(), pools.labeled.items.size()));
    for (std::size_t t = 1; t <= iterations; ++t) {
        const auto probs = model.predict_proba(gather(data, pools.unlabeled));
        const auto picks = acquire(probs, config.query_size, config.acquisition);
        for (std::size_t i : take_positions(pools.unlabeled, picks)) {
            const int y = oracle.reveal(i);
            pools.labeled.items.emplace_back(i, y);
            traj.added.emplace_back(i, y);
        }
        model = fit_on_labeled(data, pools.labeled, train_config);
        traj.points.push_back(make_point(data, model, t, pools.labeled.items.size(), pools.labeled.items.size()));
    }
    return traj;
}

Trajectory run_self_training(const Dataset& data, GoldOracle& oracle, const SSLConfig& config,
                             const TrainConfig& train_config) {
    require_gold_free(data, oracle);
    if (config.batch_size == 0) throw ValidationError("batch_size must be at least 1");
    Pools pools = seed_sample(oracle, config.seed_size, config.seed);
    const std::size_t gold_labels = pools.labeled.items.size();
    Trajectory traj;
    LinearModel model = fit_on_labeled(data, pools.labeled, train_config);
    traj.points.push_back(make_point(data, model, 0, pools.labeled.items.size(), gold_labels));
    for (std::size_t t = 1; t <= config.iterations; ++t) {
        if (pools.unlabeled.indices.empty()) {
            traj.stopped_early = true;
            traj.stop_reason = "unlabeled pool exhausted";
            break;
        }
        const auto probs = model.predict_proba(gather(data, pools.unlabeled));
        std::vector<std::size_t> candidates;
        std::vector<double> top(probs.size());
        for (std::size_t p = 0; p < probs.size(); ++p) {
            const auto r = probs.row(p);
            top[p] = *std::max_element(r.begin(), r.end());
            if (!config.cutoff || top[p] > *config.cutoff) candidates.push_back(p);
        }
        const std::size_t count = std::min(config.batch_size, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count), candidates.end(),
                          [&](std::size_t a, std::size_t b) { return top[a] > top[b] || (top[a] == top[b] && a < b); });
        candidates.resize(count);
        if (candidates.empty()) {
            traj.stopped_early = true;
            traj.stop_reason = "no prediction passed the cutoff";
            break;
        }
        std::vector<int> pseudo;
        for (std::size_t p : candidates) pseudo.push_back(probs.predicted[p]);
        const auto taken = take_positions(pools.unlabeled, candidates);
        for (std::size_t q = 0; q < taken.size(); ++q) {
            pools.labeled.items.emplace_back(taken[q], pseudo[q]);
            traj.added.emplace_back(taken[q], pseudo[q]);
        }
        model = fit_on_labeled(data, pools.labeled, train_config);
        traj.points.push_back(make_point(data, model, t, pools.labeled.items.size(), gold_labels));
    }
    return traj;
}

metrics::MetricsReport train_and_evaluate(const Dataset& data, const ProbabilisticLabels& labels,
                                          const TrainConfig& train_config, std::size_t labeled_used) {
    const LinearModel model = train(data.train_features, labels, train_config);
    return metrics::evaluate(model.predict_proba(data.test_features), data.test_gold, labeled_used);
}

metrics::MetricsReport run_weak_supervision(const Dataset& data, std::span<const KeywordLF> lfs,
                                            const FitConfig& fit_config, const TrainConfig& train_config,
                                            Aggregator aggregator) {
    if (lfs.empty()) throw ValidationError("weak supervision needs at least one labeling function");
    if (data.train_texts.any_gold()) throw ValidationError("training texts must not carry gold labels");
    const VoteMatrix votes = apply_lfs(lfs, data.train_texts);
    const ProbabilisticLabels labels = aggregator == Aggregator::weighted
                                           ? predict_proba(fit(votes, fit_config), votes)
                                           : majority_vote_labels(votes);
    return train_and_evaluate(data, labels, train_config, 0);
}

metrics::MetricsReport run_full_supervision(const Dataset& data, GoldOracle& oracle, const TrainConfig& train_config) {
    require_gold_free(data, oracle);
    std::vector<int> gold(oracle.size());
    for (std::size_t i = 0; i < gold.size(); ++i) gold[i] = oracle.reveal(i);
    const auto labels = ProbabilisticLabels::one_hot(gold, data.train_texts.num_classes());
    return train_and_evaluate(data, labels, train_config, gold.size());
}

RegimeOutcome run_regime(const std::string& regime, const Dataset& data, GoldOracle& oracle,
                         std::span<const KeywordLF> lfs, const ExperimentConfig& config) {
    RegimeOutcome out;
    if (regime == "weak") {
        out.report = run_weak_supervision(data, lfs, config.fit, config.train, Aggregator::weighted);
    } else if (regime == "majority") {
        out.report = run_weak_supervision(data, lfs, config.fit, config.train, Aggregator::majority);
    } else if (regime == "full") {
        out.report = run_full_supervision(data, oracle, config.train);
    } else if (regime == "active") {
        out.trajectory = run_active_learning(data, oracle, config.al, config.train);
        out.report = out.trajectory->points.back().metrics;
    } else if (regime == "semi") {
        out.trajectory = run_self_training(data, oracle, config.ssl, config.train);
        out.report = out.trajectory->points.back().metrics;
    } else {
        throw ValidationError("unknown regime '" + regime + "'");
    }
    return out;
}

std::map<std::string, RegimeOutcome> compare(const Dataset& data, const Corpus& train_with_gold,
                                             std::span<const KeywordLF> lfs, const ExperimentConfig& config) {
    std::map<std::string, RegimeOutcome> out;
    for (const auto& name : regime_names()) {
        GoldOracle oracle(train_with_gold);
        out[name] = run_regime(name, data, oracle, lfs, config);
    }
    return out;
}

std::string trajectory_to_csv(const Trajectory& trajectory) {
    std::string out =
        "iteration,labeled_count,accuracy,accuracy_wilson_lo,accuracy_wilson_hi,auc,fpr_at_50tpr,fnr_at_50tnr,"
        "weighted_precision,weighted_recall,weighted_f1\n";
    auto opt = [](const std::optional<double>& v) { return v ? io::format_fixed(*v) : std::string(); };
    for (const auto& pt : trajectory.points) {
        const auto& m = pt.metrics;
        out += std::to_string(pt.iteration) + "," + std::to_string(pt.labeled_count) + "," +
               io::format_fixed(m.accuracy) + "," + io::format_fixed(pt.accuracy_wilson.lo) + "," +
               io::format_fixed(pt.accuracy_wilson.hi) + "," + opt(m.auc) + "," + opt(m.fpr_at_50tpr) + "," +
               opt(m.fnr_at_50tnr) + "," + io::format_fixed(m.weighted_precision) + "," +
               io::format_fixed(m.weighted_recall) + "," + io::format_fixed(m.weighted_f1) + "\n";
    }
    return out;
}

std::string comparison_to_json(const std::map<std::string, RegimeOutcome>& outcomes) {
    nlohmann::ordered_json j;
    for (const auto& name : regime_names()) {
        auto it = outcomes.find(name);
        if (it == outcomes.end()) continue;
        auto entry = nlohmann::ordered_json::parse(metrics::report_to_json(it->second.report, -1));
        if (it->second.trajectory) {
            entry["iterations_run"] = it->second.trajectory->points.size() - 1;
            entry["stopped_early"] = it->second.trajectory->stopped_early;
        }
        j[name] = std::move(entry);
    }
    return j.dump(2) + "\n";
}

}  // namespace dpkit::experiment
