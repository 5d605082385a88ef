// Python bindings. Everything crosses the boundary as plain lists, tuples and
// dicts; vote matrices are lists of rows with -1 for abstain.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpkit/corpus.hpp"
#include "dpkit/experiment.hpp"
#include "dpkit/labeling.hpp"
#include "dpkit/labelmodel.hpp"
#include "dpkit/metrics.hpp"

namespace py = pybind11;
using namespace dpkit;
namespace ex = dpkit::experiment;

namespace {

using Rows = std::vector<std::vector<int>>;
using DocTuple = std::tuple<std::string, std::string, std::optional<int>>;

VoteMatrix to_matrix(const Rows& rows, int k) {
    const std::size_t m = rows.empty() ? 0 : rows.front().size();
    std::vector<int> flat;
    flat.reserve(rows.size() * m);
    for (const auto& r : rows) {
        if (r.size() != m) throw ValidationError("ragged vote matrix");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return VoteMatrix(std::move(flat), rows.size(), m, k);
}

Rows from_matrix(const VoteMatrix& v) {
    Rows out(v.rows());
    for (std::size_t i = 0; i < v.rows(); ++i) out[i].assign(v.row(i).begin(), v.row(i).end());
    return out;
}

std::vector<std::vector<double>> prob_rows(const ProbabilisticLabels& p) {
    std::vector<std::vector<double>> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i].assign(p.row(i).begin(), p.row(i).end());
    return out;
}

Corpus to_corpus(const std::vector<DocTuple>& docs, const std::vector<std::string>& classes) {
    std::vector<Document> out;
    out.reserve(docs.size());
    for (const auto& [id, text, label] : docs) out.push_back({id, text, label});
    return Corpus(std::move(out), classes);
}

std::vector<KeywordLF> to_lfs(const std::vector<std::pair<std::string, int>>& lfs) {
    std::vector<KeywordLF> out;
    for (const auto& [kw, c] : lfs) out.push_back(KeywordLF::make(kw, c));
    return out;
}

py::object json_loads(const std::string& s) { return py::module_::import("json").attr("loads")(s); }

}  // namespace

PYBIND11_MODULE(dpkit, m) {
    m.doc() = "Weak supervision with keyword labeling functions";
    m.attr("ABSTAIN") = kAbstain;

    static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            py::set_error(validation_error, e.what());
        }
    });

    m.def("tokenize", [](const std::string& s) { return tokenize(s); });

    m.def(
        "synthetic",
        [](int k, std::size_t per_class, std::size_t pool, std::size_t noise, std::uint64_t seed, double flip) {
            SynthSpec spec = default_synth_spec(k, per_class, pool, noise, seed);
            spec.keyword_flip_prob = flip;
            const Corpus c = generate_synthetic(spec);
            std::vector<DocTuple> docs;
            for (const auto& d : c.documents()) docs.emplace_back(d.id, d.text, d.gold);
            return py::make_tuple(docs, c.class_names(), spec.keyword_pools);
        },
        py::arg("num_classes") = 2, py::arg("docs_per_class") = 100, py::arg("pool_size") = 20,
        py::arg("noise_vocab") = 200, py::arg("seed") = 0, py::arg("flip_prob") = 0.0,
        "Returns (docs, class_names, keyword_pools); docs are (id, text, label) tuples.");

    m.def(
        "apply_lfs",
        [](const std::vector<std::string>& texts, const std::vector<std::pair<std::string, int>>& lfs, int k) {
            std::vector<Document> docs;
            for (std::size_t i = 0; i < texts.size(); ++i) docs.push_back({std::to_string(i), texts[i], std::nullopt});
            std::vector<std::string> names;
            for (int c = 0; c < k; ++c) names.push_back("class_" + std::to_string(c));
            const auto l = to_lfs(lfs);
            for (const auto& lf : l) {
                if (lf.class_id < 0 || lf.class_id >= k) throw ValidationError("LF class outside [0, K)");
            }
            return from_matrix(apply_lfs(l, Corpus(std::move(docs), names)));
        },
        py::arg("texts"), py::arg("lfs"), py::arg("num_classes") = 2,
        "Vote matrix for (keyword, class) LFs over raw texts.");

    m.def(
        "fit_label_model",
        [](const Rows& votes, int k, double lr, std::size_t epochs, std::size_t batch, std::uint64_t seed,
           double alpha_init, double tol) {
            FitConfig cfg{lr, epochs, batch, seed, alpha_init, tol};
            const auto fm = fit(to_matrix(votes, k), cfg);
            py::dict d;
            d["alpha"] = fm.params.alpha;
            d["beta"] = fm.params.beta;
            d["weights"] = fm.weights;
            d["initial_log_likelihood"] = fm.initial_log_likelihood;
            d["final_log_likelihood"] = fm.final_log_likelihood;
            d["epochs_run"] = fm.epochs_run;
            d["uncovered_lfs"] = fm.uncovered_lfs;
            return d;
        },
        py::arg("votes"), py::arg("num_classes") = 2, py::arg("learning_rate") = 0.01, py::arg("epochs") = 100,
        py::arg("batch_size") = 64, py::arg("seed") = 0, py::arg("alpha_init") = 0.7,
        py::arg("convergence_tol") = 1e-6);

    m.def(
        "log_likelihood",
        [](const std::vector<double>& alpha, const std::vector<double>& beta, const Rows& votes, int k) {
            return log_likelihood(LabelModelParams{alpha, beta, k}, to_matrix(votes, k));
        },
        py::arg("alpha"), py::arg("beta"), py::arg("votes"), py::arg("num_classes") = 2);

    m.def(
        "soft_vote",
        [](const std::vector<double>& weights, const Rows& votes, int k) {
            return prob_rows(soft_vote(weights, to_matrix(votes, k)));
        },
        py::arg("weights"), py::arg("votes"), py::arg("num_classes") = 2,
        "Softmax over per-class summed weights.");

    m.def(
        "majority_vote",
        [](const Rows& votes, int k) { return prob_rows(majority_vote_labels(to_matrix(votes, k))); },
        py::arg("votes"), py::arg("num_classes") = 2);

    m.def("confidence", [](const std::vector<double>& row) { return confidence(row); });

    m.def(
        "sample_votes",
        [](const std::vector<double>& alpha, const std::vector<double>& beta, std::size_t n, std::uint64_t seed,
           int k) {
            const auto s = sample_votes(LabelModelParams{alpha, beta, k}, n, seed);
            return py::make_tuple(from_matrix(s.votes), s.latent);
        },
        py::arg("alpha"), py::arg("beta"), py::arg("n"), py::arg("seed") = 0, py::arg("num_classes") = 2,
        "Draws (votes, latent labels) from the generative model.");

    m.def("accuracy", [](const std::vector<int>& p, const std::vector<int>& g) { return metrics::accuracy(p, g); });
    m.def("auc", [](const std::vector<double>& s, const std::vector<int>& g) { return metrics::auc(s, g); });
    m.def(
        "wilson_interval",
        [](std::size_t k, std::size_t n, double z) {
            const auto iv = metrics::wilson_interval(k, n, z);
            return py::make_tuple(iv.lo, iv.hi);
        },
        py::arg("successes"), py::arg("trials"), py::arg("z") = 1.96);

    m.def(
        "compare",
        [](const std::vector<DocTuple>& train, const std::vector<DocTuple>& test,
           const std::vector<std::string>& classes, const std::vector<std::pair<std::string, int>>& lfs,
           std::uint64_t seed, std::size_t al_iterations, std::size_t ssl_seed_size, std::size_t epochs) {
            const Corpus tr = to_corpus(train, classes), te = to_corpus(test, classes);
            const auto data = ex::Dataset::prepare(tr, te);
            ex::ExperimentConfig cfg;
            cfg.al.iterations = al_iterations;
            cfg.ssl.seed_size = ssl_seed_size;
            cfg.train.epochs = epochs;
            cfg.apply_global_seed(seed);
            const auto out = ex::compare(data, tr, to_lfs(lfs), cfg);
            return json_loads(ex::comparison_to_json(out));
        },
        py::arg("train"), py::arg("test"), py::arg("class_names"), py::arg("lfs"), py::arg("seed") = 0,
        py::arg("al_iterations") = 1000, py::arg("ssl_seed_size") = 1000, py::arg("epochs") = 200,
        "Runs weak, majority, full, active and semi on one split; returns the report dict.");
}
