#include "dpkit/endmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "dpkit/io.hpp"

namespace dpkit {

using nlohmann::json;

TfidfVectorizer TfidfVectorizer::fit(const Corpus& corpus, std::optional<std::size_t> max_features) {
    if (corpus.empty()) throw ValidationError("cannot fit TF-IDF on an empty corpus");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus.documents()) {
        auto toks = tokenize(doc.text);
        std::sort(toks.begin(), toks.end());
        toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
        for (auto& t : toks) ++df[t];
    }
    std::vector<std::pair<std::string, std::size_t>> entries(df.begin(), df.end());
    if (max_features && *max_features < entries.size()) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        entries.resize(*max_features);
        std::sort(entries.begin(), entries.end());
    }
    TfidfVectorizer v;
    const double n = static_cast<double>(corpus.size());
    for (const auto& [tok, count] : entries) {
        v.index_[tok] = static_cast<std::uint32_t>(v.tokens_.size());
        v.tokens_.push_back(tok);
        v.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return v;
}

FeatureVector TfidfVectorizer::transform(std::string_view text) const {
    std::map<std::uint32_t, double> counts;
    for (const auto& tok : tokenize(text)) {
        auto it = index_.find(tok);
        if (it != index_.end()) counts[it->second] += 1.0;
    }
    FeatureVector fv;
    fv.dimension = tokens_.size();
    double norm = 0.0;
    for (const auto& [idx, c] : counts) {
        fv.indices.push_back(idx);
        fv.values.push_back(c * idf_[idx]);
        norm += fv.values.back() * fv.values.back();
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& x : fv.values) x /= norm;
    }
    return fv;
}

std::vector<FeatureVector> TfidfVectorizer::transform(const Corpus& corpus) const {
    std::vector<FeatureVector> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus.documents()) out.push_back(transform(doc.text));
    return out;
}

std::optional<std::uint32_t> TfidfVectorizer::index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<double> TfidfVectorizer::idf_of(const std::string& token) const {
    auto idx = index_of(token);
    if (!idx) return std::nullopt;
    return idf_[*idx];
}

std::string TfidfVectorizer::vocabulary_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        mix(tokens_[i]);
        mix("\t");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", idf_[i]);
        mix(buf);
        mix("\n");
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string TfidfVectorizer::to_json() const {
    json j;
    j["tokens"] = tokens_;
    j["idf"] = idf_;
    return j.dump();
}

TfidfVectorizer TfidfVectorizer::from_json(std::string_view contents) {
    TfidfVectorizer v;
    try {
        const json j = json::parse(contents);
        v.tokens_ = j.at("tokens").get<std::vector<std::string>>();
        v.idf_ = j.at("idf").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("vectorizer: ") + e.what(), 0);
    }
    if (v.tokens_.size() != v.idf_.size()) throw ValidationError("vectorizer tokens/idf length mismatch");
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!(v.idf_[i] > 0.0)) throw ValidationError("vectorizer idf must be positive");
        if (!v.index_.emplace(v.tokens_[i], static_cast<std::uint32_t>(i)).second) {
            throw ValidationError("duplicate vectorizer token '" + v.tokens_[i] + "'");
        }
    }
    return v;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (!(l2_penalty >= 0.0)) throw ValidationError("l2_penalty must be non-negative");
    // Thresholds above 1 are accepted; they reject every row at train time.
    if (!(filter_threshold >= 0.0)) throw ValidationError("filter threshold must be non-negative");
}

LinearModel::LinearModel(int num_classes, std::size_t dimension)
    : num_classes_(num_classes),
      dimension_(dimension),
      weights_(static_cast<std::size_t>(num_classes) * dimension, 0.0),
      biases_(num_classes, 0.0) {
    if (num_classes < 2) throw ValidationError("linear model needs at least 2 classes");
}

void LinearModel::scores(const FeatureVector& x, std::span<double> out) const {
    for (int c = 0; c < num_classes_; ++c) {
        const double* w = weights_.data() + static_cast<std::size_t>(c) * dimension_;
        double s = biases_[c];
        for (std::size_t k = 0; k < x.nnz(); ++k) s += w[x.indices[k]] * x.values[k];
        out[c] = s;
    }
}

namespace {

void softmax_inplace(std::span<double> s) {
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (auto& v : s) z += (v = std::exp(v - mx));
    for (auto& v : s) v /= z;
}

}  // namespace

std::vector<double> LinearModel::predict_row(const FeatureVector& x) const {
    if (x.dimension != dimension_ && x.nnz() > 0) throw ValidationError("feature dimension mismatch");
    std::vector<double> p(num_classes_);
    scores(x, p);
    softmax_inplace(p);
    return p;
}

ProbabilisticLabels LinearModel::predict_proba(std::span<const FeatureVector> features) const {
    std::vector<double> probs;
    probs.reserve(features.size() * static_cast<std::size_t>(num_classes_));
    for (const auto& x : features) {
        auto p = predict_row(x);
        probs.insert(probs.end(), p.begin(), p.end());
    }
    return ProbabilisticLabels::from_probs(std::move(probs), num_classes_);
}

std::string LinearModel::to_json(const TfidfVectorizer& vectorizer, const TrainConfig& config) const {
    json j;
    j["num_classes"] = num_classes_;
    j["dimension"] = dimension_;
    json w = json::array();
    for (int c = 0; c < num_classes_; ++c) {
        w.push_back(std::vector<double>(weights_.begin() + static_cast<std::ptrdiff_t>(c * dimension_),
                                        weights_.begin() + static_cast<std::ptrdiff_t>((c + 1) * dimension_)));
    }
    j["weights"] = std::move(w);
    j["biases"] = biases_;
    j["vocabulary_hash"] = vectorizer.vocabulary_hash();
    j["vectorizer"] = json::parse(vectorizer.to_json());
    j["config"] = {{"learning_rate", config.learning_rate},
                   {"epochs", config.epochs},
                   {"batch_size", config.batch_size},
                   {"l2_penalty", config.l2_penalty},
                   {"seed", config.seed},
                   {"noise_mode", config.noise_mode == NoiseMode::filter ? "filter" : "weight"},
                   {"filter_threshold", config.filter_threshold}};
    return j.dump() + "\n";
}

LinearModel LinearModel::from_json(std::string_view contents, TfidfVectorizer* vectorizer) {
    try {
        const json j = json::parse(contents);
        LinearModel m(j.at("num_classes").get<int>(), j.at("dimension").get<std::size_t>());
        const auto& w = j.at("weights");
        if (w.size() != static_cast<std::size_t>(m.num_classes_)) throw ValidationError("weights row count mismatch");
        for (int c = 0; c < m.num_classes_; ++c) {
            auto row = w[c].get<std::vector<double>>();
            if (row.size() != m.dimension_) throw ValidationError("weights column count mismatch");
            std::copy(row.begin(), row.end(), m.weights_.begin() + static_cast<std::ptrdiff_t>(c * m.dimension_));
        }
        m.biases_ = j.at("biases").get<std::vector<double>>();
        if (m.biases_.size() != static_cast<std::size_t>(m.num_classes_)) throw ValidationError("bias count mismatch");
        if (vectorizer) {
            *vectorizer = TfidfVectorizer::from_json(j.at("vectorizer").dump());
            if (vectorizer->vocabulary_hash() != j.at("vocabulary_hash").get<std::string>()) {
                throw ValidationError("model vocabulary hash does not match its vectorizer");
            }
            if (vectorizer->dimension() != m.dimension_) throw ValidationError("vectorizer dimension mismatch");
        }
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what(), 0);
    }
}

double objective(const LinearModel& model, std::span<const FeatureVector> features,
                 const ProbabilisticLabels& targets, std::span<const double> row_weights,
                 std::span<const std::size_t> rows, double l2_penalty, std::vector<double>* grad_w,
                 std::vector<double>* grad_b) {
    const int k = model.num_classes();
    const std::size_t d = model.dimension();
    if (grad_w) grad_w->assign(model.weights().size(), 0.0);
    if (grad_b) grad_b->assign(k, 0.0);
    std::vector<double> p(k);
    double loss = 0.0;
    const double inv = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
    for (std::size_t i : rows) {
        const auto& x = features[i];
        model.scores(x, p);
        const double mx = *std::max_element(p.begin(), p.end());
        double z = 0.0;
        for (double s : p) z += std::exp(s - mx);
        const double log_z = mx + std::log(z);
        const auto t = targets.row(i);
        const double w = row_weights[i];
        for (int c = 0; c < k; ++c) {
            const double log_p = p[c] - log_z;
            if (t[c] > 0.0) loss -= w * inv * t[c] * log_p;
            p[c] = std::exp(log_p);
        }
        for (int c = 0; c < k; ++c) {
            // Targets sum to 1, so d CE / d score_c = p_c - t_c.
            const double r = w * inv * (p[c] - t[c]);
            if (grad_b) (*grad_b)[c] += r;
            if (grad_w) {
                for (std::size_t q = 0; q < x.nnz(); ++q) (*grad_w)[c * d + x.indices[q]] += r * x.values[q];
            }
        }
    }
    double sq = 0.0;
    for (double w : model.weights()) sq += w * w;
    loss += 0.5 * l2_penalty * sq;
    if (grad_w) {
        for (std::size_t q = 0; q < grad_w->size(); ++q) (*grad_w)[q] += l2_penalty * model.weights()[q];
    }
    return loss;
}

TrainResult train_detailed(std::span<const FeatureVector> features, const ProbabilisticLabels& labels,
                           const TrainConfig& config, bool record_loss) {
    config.validate();
    const std::size_t n = features.size();
    if (n == 0) throw ValidationError("cannot train on zero rows");
    if (labels.size() != n) throw ValidationError("label count does not match feature count");
    const std::size_t d = features[0].dimension;
    for (const auto& x : features) {
        if (x.dimension != d) throw ValidationError("inconsistent feature dimensions");
    }
    const int k = labels.num_classes;

    std::vector<double> row_weight(n, 1.0);
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < n; ++i) {
        if (config.noise_mode == NoiseMode::filter) {
            if (labels.confidence[i] >= config.filter_threshold) used.push_back(i);
        } else {
            row_weight[i] = labels.confidence[i];
            used.push_back(i);
        }
    }
    if (used.empty()) throw Error("no confident samples");

    TrainResult result{LinearModel(k, d), {}, used.size()};
    LinearModel& model = result.model;
    Rng rng(config.seed);
    std::vector<double> resid;
    std::vector<double> p(k);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span(used));
        for (std::size_t start = 0; start < used.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, used.size() - start);
            const double scale = config.learning_rate / static_cast<double>(len);
            // Residuals at the pre-step weights, then shrink, then the sparse step.
            resid.assign(len * static_cast<std::size_t>(k), 0.0);
            for (std::size_t b = 0; b < len; ++b) {
                const std::size_t i = used[start + b];
                model.scores(features[i], p);
                softmax_inplace(p);
                const auto t = labels.row(i);
                for (int c = 0; c < k; ++c) resid[b * k + c] = row_weight[i] * (p[c] - t[c]);
            }
            if (config.l2_penalty > 0.0) {
                const double shrink = 1.0 - config.learning_rate * config.l2_penalty;
                for (auto& w : model.weights()) w *= shrink;
            }
            for (std::size_t b = 0; b < len; ++b) {
                const auto& x = features[used[start + b]];
                for (int c = 0; c < k; ++c) {
                    const double r = scale * resid[b * k + c];
                    if (r == 0.0) continue;
                    model.bias(c) -= r;
                    for (std::size_t q = 0; q < x.nnz(); ++q) model.weight(c, x.indices[q]) -= r * x.values[q];
                }
            }
        }
        if (record_loss) {
            std::vector<std::size_t> sorted_used = used;
            std::sort(sorted_used.begin(), sorted_used.end());
            result.epoch_loss.push_back(
                objective(model, features, labels, row_weight, sorted_used, config.l2_penalty));
        }
    }
    return result;
}

LinearModel train(std::span<const FeatureVector> features, const ProbabilisticLabels& labels,
                  const TrainConfig& config) {
    return train_detailed(features, labels, config, false).model;
}

std::string features_to_csv(std::span<const FeatureVector> features, std::span<const std::string> doc_ids) {
    if (features.size() != doc_ids.size()) throw ValidationError("doc_ids length does not match features");
    std::string out = "doc_id,index,value\n";
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (std::size_t q = 0; q < features[i].nnz(); ++q) {
            out += io::csv_escape(doc_ids[i]) + "," + std::to_string(features[i].indices[q]) + "," +
                   io::format_fixed(features[i].values[q]) + "\n";
        }
    }
    return out;
}

}  // namespace dpkit
