#include "dpkit/labelmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "dpkit/io.hpp"

namespace dpkit {

using nlohmann::json;

namespace {

constexpr double kLogitClamp = 30.0;
constexpr double kStepDecayEpochs = 20.0;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double safe_log(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

// Per-row quantities shared by the likelihood and its gradient.
struct RowTerms {
    double log_likelihood = 0.0;
    bool floored = false;
    std::vector<double> posterior;  // P(Y = y | row), length K
};

RowTerms row_terms(const LabelModelParams& p, std::span<const int> row, std::vector<double>& log_py) {
    const int k = p.num_classes;
    const double wrong_share = 1.0 / static_cast<double>(k - 1);
    double log_cov = 0.0;
    std::fill(log_py.begin(), log_py.end(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) {
        const int v = row[j];
        if (v == kAbstain) {
            log_cov += safe_log(1.0 - p.beta[j]);
            continue;
        }
        log_cov += safe_log(p.beta[j]);
        const double log_right = safe_log(p.alpha[j]);
        const double log_wrong = safe_log((1.0 - p.alpha[j]) * wrong_share);
        for (int y = 0; y < k; ++y) log_py[y] += (y == v) ? log_right : log_wrong;
    }
    RowTerms t;
    t.posterior.assign(k, 0.0);
    const double mx = *std::max_element(log_py.begin(), log_py.end());
    double log_mix = -std::numeric_limits<double>::infinity();
    if (std::isfinite(mx)) {
        double s = 0.0;
        for (int y = 0; y < k; ++y) s += std::exp(log_py[y] - mx);
        log_mix = mx + std::log(s);
        for (int y = 0; y < k; ++y) t.posterior[y] = std::exp(log_py[y] - log_mix);
    }
    const double log_marginal = log_cov - std::log(static_cast<double>(k)) + log_mix;
    static const double log_floor = std::log(kLikelihoodFloor);
    if (!(log_marginal >= log_floor)) {
        t.log_likelihood = log_floor;
        t.floored = true;
    } else {
        t.log_likelihood = log_marginal;
    }
    return t;
}

void check_shape(const LabelModelParams& params, const VoteMatrix& votes) {
    if (params.size() != votes.cols()) throw ValidationError("parameter count does not match LF count");
    if (params.num_classes != votes.num_classes()) throw ValidationError("class count mismatch");
}

// Adds the gradient of the listed rows' log-likelihood into grad.
void accumulate_gradient(const LabelModelParams& params, const VoteMatrix& votes,
                         std::span<const std::size_t> rows, std::vector<double>& grad) {
    std::vector<double> log_py(params.num_classes);
    for (std::size_t i : rows) {
        const auto row = votes.row(i);
        const RowTerms t = row_terms(params, row, log_py);
        if (t.floored) continue;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] == kAbstain) continue;
            // d/dlogit of log(alpha) is (1 - alpha); of log((1 - alpha)/(K-1)) is -alpha.
            grad[j] += t.posterior[row[j]] - params.alpha[j];
        }
    }
}

}  // namespace

void LabelModelParams::validate() const {
    if (num_classes < 2) throw ValidationError("label model needs at least 2 classes");
    if (alpha.size() != beta.size()) throw ValidationError("alpha and beta lengths differ");
    for (double a : alpha) {
        if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
    }
    for (double b : beta) {
        if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("beta must lie in [0, 1]");
    }
}

void FitConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (!(alpha_init > 0.5 && alpha_init < 1.0)) throw ValidationError("alpha_init must lie in (0.5, 1)");
    if (!(convergence_tol >= 0.0)) throw ValidationError("convergence_tol must be non-negative");
}

ProbabilisticLabels ProbabilisticLabels::from_probs(std::vector<double> probs, int num_classes) {
    const auto k = static_cast<std::size_t>(num_classes);
    if (num_classes < 2 || probs.size() % k != 0) throw ValidationError("probability buffer is not n x K");
    ProbabilisticLabels out;
    out.num_classes = num_classes;
    out.probs = std::move(probs);
    const std::size_t n = out.probs.size() / k;
    out.predicted.resize(n);
    out.confidence.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = out.row(i);
        out.predicted[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
        out.confidence[i] = dpkit::confidence(r);
    }
    return out;
}

ProbabilisticLabels ProbabilisticLabels::one_hot(std::span<const int> labels, int num_classes) {
    std::vector<double> probs(labels.size() * static_cast<std::size_t>(num_classes), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) throw ValidationError("label outside [0, K)");
        probs[i * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    return from_probs(std::move(probs), num_classes);
}

double marginal_likelihood(const LabelModelParams& params, std::span<const int> vote_row) {
    if (params.num_classes != 2) throw ValidationError("marginal_likelihood is defined for binary models only");
    if (vote_row.size() != params.size()) throw ValidationError("vote row length does not match parameter count");
    double coverage = 1.0;
    double p_y[2] = {1.0, 1.0};
    for (std::size_t j = 0; j < vote_row.size(); ++j) {
        const int v = vote_row[j];
        if (v == kAbstain) {
            coverage *= 1.0 - params.beta[j];
            continue;
        }
        if (v != 0 && v != 1) throw ValidationError("binary vote must be 0, 1 or abstain");
        coverage *= params.beta[j];
        for (int y = 0; y < 2; ++y) p_y[y] *= (v == y) ? params.alpha[j] : 1.0 - params.alpha[j];
    }
    return 0.5 * coverage * (p_y[0] + p_y[1]);
}

double log_likelihood(const LabelModelParams& params, const VoteMatrix& votes) {
    check_shape(params, votes);
    std::vector<double> log_py(params.num_classes);
    double total = 0.0;
    for (std::size_t i = 0; i < votes.rows(); ++i) total += row_terms(params, votes.row(i), log_py).log_likelihood;
    return total;
}

std::vector<double> gradient(const LabelModelParams& params, const VoteMatrix& votes) {
    check_shape(params, votes);
    std::vector<std::size_t> rows(votes.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<double> grad(params.size(), 0.0);
    accumulate_gradient(params, votes, rows, grad);
    return grad;
}

std::vector<double> normalized_weights(std::span<const double> alpha) {
    const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    std::vector<double> w(alpha.begin(), alpha.end());
    if (total > 0.0) {
        for (auto& x : w) x /= total;
    }
    return w;
}

FittedLabelModel fit(const VoteMatrix& votes, const FitConfig& config) {
    config.validate();
    const std::size_t n = votes.rows(), m = votes.cols();
    if (m == 0) throw ValidationError("cannot fit a label model with zero labeling functions");
    if (n == 0) throw ValidationError("cannot fit a label model on zero documents");

    FittedLabelModel out;
    LabelModelParams& p = out.params;
    p.num_classes = votes.num_classes();
    p.alpha.assign(m, config.alpha_init);
    p.beta.assign(m, 0.0);
    std::vector<std::size_t> covered(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (votes.at(i, j) != kAbstain) ++covered[j];
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        p.beta[j] = static_cast<double>(covered[j]) / static_cast<double>(n);
        if (covered[j] == 0) out.uncovered_lfs.push_back(j);
    }

    std::vector<double> theta(m, logit(config.alpha_init));
    out.initial_log_likelihood = log_likelihood(p, votes);
    double best = out.initial_log_likelihood;
    std::vector<double> best_theta = theta;

    Rng rng(config.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(m);
    double previous = best;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        // Decaying step so minibatch noise dies out instead of leaving the
        // iterate jittering around the optimum.
        const double step = config.learning_rate / (1.0 + static_cast<double>(epoch) / kStepDecayEpochs);
        rng.shuffle(std::span(order));
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, n - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            accumulate_gradient(p, votes, std::span(order).subspan(start, len), grad);
            // Batch sum: the minibatch share of the summed log-likelihood.
            for (std::size_t j = 0; j < m; ++j) {
                theta[j] = std::clamp(theta[j] + step * grad[j], -kLogitClamp, kLogitClamp);
                p.alpha[j] = sigmoid(theta[j]);
            }
        }
        ++out.epochs_run;
        const double ll = log_likelihood(p, votes);
        if (ll > best) {
            best = ll;
            best_theta = theta;
        }
        if (std::abs(ll - previous) < config.convergence_tol) break;
        previous = ll;
    }
    for (std::size_t j = 0; j < m; ++j) p.alpha[j] = sigmoid(best_theta[j]);
    out.final_log_likelihood = best;
    out.weights = normalized_weights(p.alpha);
    return out;
}

int weighted_vote(std::span<const double> weights, std::span<const int> vote_row, int num_classes) {
    if (weights.size() != vote_row.size()) throw ValidationError("weights and votes differ in length");
    std::vector<double> score(num_classes, 0.0);
    for (std::size_t j = 0; j < vote_row.size(); ++j) {
        if (vote_row[j] != kAbstain) score[vote_row[j]] += weights[j];
    }
    const auto best = std::max_element(score.begin(), score.end());
    if (std::count(score.begin(), score.end(), *best) > 1) return kAbstain;
    return static_cast<int>(best - score.begin());
}

ProbabilisticLabels soft_vote(std::span<const double> weights, const VoteMatrix& votes) {
    if (weights.size() != votes.cols()) throw ValidationError("weights length does not match LF count");
    const int k = votes.num_classes();
    std::vector<double> probs(votes.rows() * static_cast<std::size_t>(k));
    std::vector<double> score(k);
    for (std::size_t i = 0; i < votes.rows(); ++i) {
        std::fill(score.begin(), score.end(), 0.0);
        const auto row = votes.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] != kAbstain) score[row[j]] += weights[j];
        }
        const double mx = *std::max_element(score.begin(), score.end());
        double z = 0.0;
        for (auto& s : score) z += (s = std::exp(s - mx));
        for (int c = 0; c < k; ++c) probs[i * k + c] = score[c] / z;
    }
    return ProbabilisticLabels::from_probs(std::move(probs), k);
}

ProbabilisticLabels predict_proba(const FittedLabelModel& model, const VoteMatrix& votes) {
    return soft_vote(model.weights, votes);
}

ProbabilisticLabels majority_vote_labels(const VoteMatrix& votes) {
    const std::size_t m = votes.cols();
    std::vector<double> w(m, m ? 1.0 / static_cast<double>(m) : 0.0);
    return soft_vote(w, votes);
}

double confidence(std::span<const double> prob_row) {
    const double k = static_cast<double>(prob_row.size());
    const double mx = *std::max_element(prob_row.begin(), prob_row.end());
    const double c = prob_row.size() == 2 ? 2.0 * (mx - 0.5) : (mx - 1.0 / k) / (1.0 - 1.0 / k);
    return std::clamp(c, 0.0, 1.0);
}

bool top_tied(std::span<const double> prob_row) {
    const double mx = *std::max_element(prob_row.begin(), prob_row.end());
    return std::count(prob_row.begin(), prob_row.end(), mx) > 1;
}

SampledVotes sample_votes(const LabelModelParams& params, std::size_t n, std::uint64_t seed) {
    params.validate();
    if (params.num_classes != 2) throw ValidationError("sample_votes supports binary models only");
    const std::size_t m = params.size();
    Rng rng(seed);
    std::vector<int> votes(n * m, kAbstain);
    std::vector<int> latent(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng.below(2));
        latent[i] = y;
        for (std::size_t j = 0; j < m; ++j) {
            if (!rng.bernoulli(params.beta[j])) continue;
            votes[i * m + j] = rng.bernoulli(params.alpha[j]) ? y : 1 - y;
        }
    }
    return {VoteMatrix(std::move(votes), n, m, 2), std::move(latent)};
}

std::string model_to_json(const FittedLabelModel& model) {
    json j;
    j["num_classes"] = model.params.num_classes;
    j["alpha"] = model.params.alpha;
    j["beta"] = model.params.beta;
    j["weights"] = model.weights;
    j["initial_log_likelihood"] = model.initial_log_likelihood;
    j["final_log_likelihood"] = model.final_log_likelihood;
    j["epochs_run"] = model.epochs_run;
    j["uncovered_lfs"] = model.uncovered_lfs;
    return j.dump(2) + "\n";
}

FittedLabelModel parse_model_json(std::string_view contents) {
    FittedLabelModel m;
    try {
        const json j = json::parse(contents);
        m.params.num_classes = j.at("num_classes").get<int>();
        m.params.alpha = j.at("alpha").get<std::vector<double>>();
        m.params.beta = j.at("beta").get<std::vector<double>>();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.final_log_likelihood = j.at("final_log_likelihood").get<double>();
        m.epochs_run = j.at("epochs_run").get<std::size_t>();
        if (j.contains("initial_log_likelihood")) m.initial_log_likelihood = j["initial_log_likelihood"].get<double>();
        if (j.contains("uncovered_lfs")) m.uncovered_lfs = j["uncovered_lfs"].get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("label model file: ") + e.what(), 0);
    }
    m.params.validate();
    if (m.weights.size() != m.params.size()) throw ValidationError("label model weights length mismatch");
    return m;
}

std::string labels_to_csv(const ProbabilisticLabels& labels, std::span<const std::string> doc_ids) {
    if (doc_ids.size() != labels.size()) throw ValidationError("doc_ids length does not match labels");
    std::string out = "doc_id";
    for (int c = 0; c < labels.num_classes; ++c) out += ",p_class_" + std::to_string(c);
    out += ",predicted,confidence\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += io::csv_escape(doc_ids[i]);
        for (double p : labels.row(i)) out += "," + io::format_fixed(p);
        out += "," + std::to_string(labels.predicted[i]) + "," + io::format_fixed(labels.confidence[i]) + "\n";
    }
    return out;
}

ProbabilisticLabels parse_labels_csv(std::string_view contents, std::vector<std::string>* doc_ids) {
    const auto lines = io::split_lines(contents);
    if (lines.empty()) throw ParseError("empty labels file", 0);
    const auto header = io::csv_split(lines[0]);
    if (header.size() < 5 || header[0] != "doc_id") throw ParseError("bad labels header", 1);
    const int k = static_cast<int>(header.size()) - 3;
    std::vector<double> probs;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto f = io::csv_split(lines[li]);
        if (f.size() != header.size()) throw ParseError("wrong number of label fields", li + 1);
        if (doc_ids) doc_ids->push_back(f[0]);
        double total = 0.0;
        const std::size_t base = probs.size();
        for (int c = 0; c < k; ++c) {
            try {
                probs.push_back(std::stod(f[1 + c]));
            } catch (const std::exception&) {
                throw ParseError("bad probability '" + f[1 + c] + "'", li + 1);
            }
            if (!(probs.back() >= 0.0)) throw ParseError("negative probability", li + 1);
            total += probs.back();
        }
        if (!(total > 0.0)) throw ParseError("probability row sums to zero", li + 1);
        // Fixed-point text loses the last digits; restore exact normalization.
        for (int c = 0; c < k; ++c) probs[base + c] /= total;
    }
    return ProbabilisticLabels::from_probs(std::move(probs), k);
}

}  // namespace dpkit
