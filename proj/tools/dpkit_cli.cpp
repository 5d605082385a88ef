// dpkit command-line front end. Every command reads plain files and writes
// plain CSV/JSON; all randomness comes from --seed.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpkit/corpus.hpp"
#include "dpkit/endmodel.hpp"
#include "dpkit/experiment.hpp"
#include "dpkit/io.hpp"
#include "dpkit/labeling.hpp"
#include "dpkit/labelmodel.hpp"
#include "dpkit/metrics.hpp"

namespace fs = std::filesystem;
using namespace dpkit;
namespace ex = dpkit::experiment;

namespace {

// A path to a JSON list, or an inline comma-separated list.
std::vector<std::string> resolve_classes(const std::string& spec) {
    if (fs::is_regular_file(spec)) return load_class_names(spec);
    std::vector<std::string> names;
    std::string cur;
    for (char c : spec + ",") {
        if (c != ',') {
            cur += c;
            continue;
        }
        if (cur.empty()) throw ValidationError("empty class name in --classes");
        names.push_back(cur);
        cur.clear();
    }
    if (names.size() < 2) throw ValidationError("need at least two classes (a JSON file or a,b,...)");
    return names;
}

Corpus load_nonempty(const std::string& path, const std::vector<std::string>& classes) {
    Corpus c = load_jsonl(path, classes);
    if (c.empty()) throw ValidationError("corpus is empty: " + path);
    return c;
}

std::vector<std::string> doc_ids(const Corpus& c) {
    std::vector<std::string> ids;
    ids.reserve(c.size());
    for (const auto& d : c.documents()) ids.push_back(d.id);
    return ids;
}

void write(const fs::path& path, const std::string& contents) {
    io::write_file_atomic(path, contents);
    std::cout << "wrote " << path.string() << "\n";
}

struct FitOpts {
    FitConfig cfg;
    void add(CLI::App* app) {
        app->add_option("--lm-lr", cfg.learning_rate, "label-model learning rate")->capture_default_str();
        app->add_option("--lm-epochs", cfg.epochs, "label-model epochs")->capture_default_str();
        app->add_option("--lm-batch-size", cfg.batch_size, "label-model batch size")->capture_default_str();
        app->add_option("--lm-alpha-init", cfg.alpha_init, "initial LF accuracy")->capture_default_str();
        app->add_option("--lm-tol", cfg.convergence_tol, "stop when an epoch changes the LL by less")
            ->capture_default_str();
    }
};

struct TrainOpts {
    TrainConfig cfg;
    std::string noise = "weight";
    std::optional<std::size_t> max_features;
    void add(CLI::App* app, bool with_vocab = true) {
        app->add_option("--lr", cfg.learning_rate, "end-model learning rate")->capture_default_str();
        app->add_option("--epochs", cfg.epochs, "end-model epochs")->capture_default_str();
        app->add_option("--batch-size", cfg.batch_size, "end-model batch size")->capture_default_str();
        app->add_option("--l2", cfg.l2_penalty, "L2 penalty")->capture_default_str();
        app->add_option("--noise-mode", noise, "how label confidence enters training")
            ->check(CLI::IsMember({"weight", "filter"}))
            ->capture_default_str();
        app->add_option("--filter-threshold", cfg.filter_threshold, "min confidence kept in filter mode")
            ->capture_default_str();
        if (with_vocab) app->add_option("--max-features", max_features, "cap on the TF-IDF vocabulary");
    }
    TrainConfig get() const {
        TrainConfig t = cfg;
        t.noise_mode = noise == "filter" ? NoiseMode::filter : NoiseMode::weight;
        t.validate();
        return t;
    }
};

struct ALOpts {
    ex::ALConfig cfg;
    std::string rule = "entropy";
    void add(CLI::App* app) {
        app->add_option("--al-seed-size", cfg.seed_size, "initial labeled sample")->capture_default_str();
        app->add_option("--al-query-size", cfg.query_size, "labels bought per iteration")->capture_default_str();
        app->add_option("--al-iterations", cfg.iterations, "acquisition rounds")->capture_default_str();
        app->add_option("--al-acquisition", rule, "ranking rule")
            ->check(CLI::IsMember({"entropy", "least_confidence"}))
            ->capture_default_str();
    }
    ex::ALConfig get() const {
        ex::ALConfig c = cfg;
        c.acquisition = rule == "least_confidence" ? ex::Acquisition::least_confidence : ex::Acquisition::entropy;
        return c;
    }
};

struct SSLOpts {
    ex::SSLConfig cfg;
    std::optional<double> cutoff;
    void add(CLI::App* app) {
        app->add_option("--ssl-seed-size", cfg.seed_size, "gold-labeled seed")->capture_default_str();
        app->add_option("--ssl-batch-size", cfg.batch_size, "pseudo-labels added per iteration")
            ->capture_default_str();
        app->add_option("--ssl-iterations", cfg.iterations, "self-training rounds")->capture_default_str();
        app->add_option("--ssl-cutoff", cutoff, "only pseudo-label rows with max probability above this");
    }
    ex::SSLConfig get() const {
        ex::SSLConfig c = cfg;
        c.cutoff = cutoff;
        return c;
    }
};

// Reorders label rows to match the corpus by doc id.
ProbabilisticLabels align_labels(const ProbabilisticLabels& labels, const std::vector<std::string>& label_ids,
                                 const Corpus& corpus) {
    if (labels.num_classes != corpus.num_classes()) throw ValidationError("labels and corpus disagree on K");
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < label_ids.size(); ++i) {
        if (!at.emplace(label_ids[i], i).second) throw ValidationError("duplicate doc_id in labels: " + label_ids[i]);
    }
    std::vector<double> probs;
    probs.reserve(corpus.size() * static_cast<std::size_t>(labels.num_classes));
    for (const auto& d : corpus.documents()) {
        auto it = at.find(d.id);
        if (it == at.end()) throw ValidationError("no label row for doc_id: " + d.id);
        auto row = labels.row(it->second);
        probs.insert(probs.end(), row.begin(), row.end());
    }
    return ProbabilisticLabels::from_probs(std::move(probs), labels.num_classes);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dpkit: weak supervision with keyword labeling functions"};
    app.set_config("--config", "", "key = value file; options of a command go under [command]");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string classes_spec;
    std::string out_dir = ".";
    auto common = [&](CLI::App* sub, bool classes = true) {
        sub->fallthrough();
        sub->add_option("--seed", seed, "global seed")->capture_default_str();
        sub->add_option("--out-dir", out_dir, "where artifacts go")->capture_default_str();
        if (classes) sub->add_option("--classes", classes_spec, "class names: JSON list file or a,b,...")->required();
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted class keywords");
    common(synth, false);
    int synth_k = 2;
    std::size_t per_class = 100, pool = 20, noise_vocab = 200, kw_per_doc = 5, noise_per_doc = 10;
    std::optional<std::size_t> lfs_per_class;
    double flip = 0.0;
    synth->add_option("--num-classes", synth_k)->capture_default_str();
    synth->add_option("--docs-per-class", per_class)->capture_default_str();
    synth->add_option("--pool-size", pool, "planted keywords per class")->capture_default_str();
    synth->add_option("--noise-vocab", noise_vocab)->capture_default_str();
    synth->add_option("--keywords-per-doc", kw_per_doc)->capture_default_str();
    synth->add_option("--noise-per-doc", noise_per_doc)->capture_default_str();
    synth->add_option("--flip", flip, "chance a keyword slot draws from another class")->capture_default_str();
    synth->add_option("--lfs-per-class", lfs_per_class, "planted keywords written as LFs (default: all)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a JSONL corpus and optionally split it");
    common(ingest);
    std::string input;
    double test_fraction = 0.0;
    ingest->add_option("--input", input, "JSONL corpus")->required();
    ingest->add_option("--test-fraction", test_fraction, "held-out share; 0 keeps one file")->capture_default_str();

    // induce
    auto* induce = app.add_subcommand("induce", "derive keyword LFs from frequent unigrams");
    common(induce);
    std::string corpus_path, mode = "lexicon", lexicon_path, embeddings_path, stopwords_path;
    double percentile = kDefaultPercentile, pos_t = kDefaultLexiconPositive, neg_t = kDefaultLexiconNegative,
           sim_t = kDefaultSimilarityThreshold;
    induce->add_option("--corpus", corpus_path, "JSONL corpus")->required();
    induce->add_option("--mode", mode)->check(CLI::IsMember({"lexicon", "similarity"}))->capture_default_str();
    induce->add_option("--lexicon", lexicon_path, "TSV token<TAB>score");
    induce->add_option("--embeddings", embeddings_path, "text embeddings, one token per line");
    induce->add_option("--stopwords", stopwords_path, "one word per line (default: built-in list)");
    induce->add_option("--percentile", percentile, "df percentile a candidate must reach")->capture_default_str();
    induce->add_option("--pos-threshold", pos_t)->capture_default_str();
    induce->add_option("--neg-threshold", neg_t)->capture_default_str();
    induce->add_option("--sim-threshold", sim_t)->capture_default_str();

    // label
    auto* label = app.add_subcommand("label", "apply LFs, fit the label model, write probabilistic labels");
    common(label);
    std::string lfs_path, aggregator = "weighted";
    FitOpts fit_opts;
    label->add_option("--corpus", corpus_path, "JSONL corpus")->required();
    label->add_option("--lfs", lfs_path, "LF JSON")->required();
    label->add_option("--aggregator", aggregator)
        ->check(CLI::IsMember({"weighted", "majority"}))
        ->capture_default_str();
    fit_opts.add(label);

    // train
    auto* train = app.add_subcommand("train", "fit the end model on (probabilistic) labels");
    common(train);
    std::string labels_path, features_out;
    TrainOpts train_opts;
    train->add_option("--corpus", corpus_path, "JSONL corpus the labels refer to")->required();
    train->add_option("--labels", labels_path, "labels CSV")->required();
    train->add_option("--features-out", features_out, "also write TF-IDF triplets here");
    train_opts.add(train);

    // eval
    auto* eval = app.add_subcommand("eval", "score a trained model on a gold test set");
    common(eval);
    std::string model_path;
    std::size_t labeled_used = 0;
    eval->add_option("--model", model_path, "end-model JSON from train")->required();
    eval->add_option("--test", corpus_path, "JSONL test corpus with gold labels")->required();
    eval->add_option("--labeled-used", labeled_used, "recorded in the report")->capture_default_str();

    // al, ssl, compare share train/test inputs
    std::string train_path, test_path;
    auto data_opts = [&](CLI::App* sub) {
        sub->add_option("--train", train_path, "JSONL train corpus with gold (read through the oracle)")
            ->required();
        sub->add_option("--test", test_path, "JSONL test corpus with gold")->required();
    };
    ALOpts al_opts;
    SSLOpts ssl_opts;

    auto* al = app.add_subcommand("al", "pool-based active learning with a simulated annotator");
    common(al);
    data_opts(al);
    al_opts.add(al);
    train_opts.add(al);

    auto* ssl = app.add_subcommand("ssl", "self-training from a gold seed");
    common(ssl);
    data_opts(ssl);
    ssl_opts.add(ssl);
    train_opts.add(ssl);

    auto* cmp = app.add_subcommand("compare", "run weak, majority, full, active and semi on one split");
    common(cmp);
    data_opts(cmp);
    cmp->add_option("--lfs", lfs_path, "LF JSON")->required();
    fit_opts.add(cmp);
    al_opts.add(cmp);
    ssl_opts.add(cmp);
    train_opts.add(cmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        const fs::path out(out_dir);
        ex::ExperimentConfig cfg;
        cfg.fit = fit_opts.cfg;
        cfg.fit.validate();
        cfg.train = train_opts.get();
        cfg.al = al_opts.get();
        cfg.ssl = ssl_opts.get();
        cfg.aggregator = aggregator == "majority" ? ex::Aggregator::majority : ex::Aggregator::weighted;
        cfg.apply_global_seed(seed);

        if (*synth) {
            SynthSpec spec = default_synth_spec(synth_k, per_class, pool, noise_vocab, seed);
            spec.keywords_per_doc = kw_per_doc;
            spec.noise_words_per_doc = noise_per_doc;
            spec.keyword_flip_prob = flip;
            const Corpus corpus = generate_synthetic(spec);
            std::vector<KeywordLF> lfs;
            const std::size_t take = lfs_per_class ? std::min(*lfs_per_class, pool) : pool;
            for (int c = 0; c < synth_k; ++c) {
                for (std::size_t j = 0; j < take; ++j) lfs.push_back(KeywordLF::make(spec.keyword_pools[c][j], c));
            }
            // Class names sit on their own axes; keywords lean 0.894 toward their class, noise is orthogonal.
            std::string emb;
            const auto dim = static_cast<std::size_t>(synth_k) + 1;
            auto vec = [&](const std::string& tok, std::size_t axis, double tilt) {
                emb += tok;
                for (std::size_t d = 0; d < dim; ++d) {
                    emb += " " + io::format_fixed(d == axis ? 1.0 : (d == dim - 1 ? tilt : 0.0), 3);
                }
                emb += "\n";
            };
            for (int c = 0; c < synth_k; ++c) vec(corpus.class_names()[c], static_cast<std::size_t>(c), 0.0);
            for (int c = 0; c < synth_k; ++c) {
                for (const auto& w : spec.keyword_pools[c]) vec(w, static_cast<std::size_t>(c), 0.5);
            }
            for (const auto& w : spec.noise_words) vec(w, dim - 1, 0.0);
            write(out / "corpus.jsonl", to_jsonl(corpus));
            write(out / "classes.json", class_names_json(corpus.class_names()));
            write(out / "lfs.json", lfs_to_json(lfs));
            write(out / "embeddings.txt", emb);
            if (synth_k == 2) {
                std::string lex = "# token\tscore\n";
                for (int c = 0; c < 2; ++c) {
                    for (const auto& w : spec.keyword_pools[c]) lex += w + (c == 1 ? "\t1.0\n" : "\t-1.0\n");
                }
                write(out / "lexicon.tsv", lex);
            }
            return 0;
        }

        const std::vector<std::string> classes = resolve_classes(classes_spec);

        if (*ingest) {
            const Corpus corpus = load_nonempty(input, classes);
            std::cout << "documents: " << corpus.size() << "\n";
            write(out / "classes.json", class_names_json(classes));
            if (test_fraction <= 0.0) {
                write(out / "corpus.jsonl", to_jsonl(corpus));
                return 0;
            }
            auto [tr, te] = split(corpus, test_fraction, derive_seed(seed, 0));
            write(out / "train.jsonl", to_jsonl(tr));
            write(out / "test.jsonl", to_jsonl(te));
            return 0;
        }

        if (*induce) {
            const Corpus corpus = load_nonempty(corpus_path, classes);
            const std::set<std::string> stop =
                stopwords_path.empty() ? default_stopwords() : load_stopwords(stopwords_path);
            const auto freq = extract_frequent_unigrams(corpus, percentile, stop);
            std::vector<std::string> candidates;
            for (const auto& t : freq) candidates.push_back(t.token);
            std::vector<KeywordLF> lfs;
            if (mode == "lexicon") {
                if (lexicon_path.empty()) throw ValidationError("--lexicon is required in lexicon mode");
                if (corpus.num_classes() != 2) throw ValidationError("lexicon mode is binary only");
                lfs = assign_by_lexicon(candidates, load_lexicon(lexicon_path), pos_t, neg_t);
            } else {
                if (embeddings_path.empty()) throw ValidationError("--embeddings is required in similarity mode");
                lfs = assign_by_similarity(candidates, classes, load_embeddings(embeddings_path), sim_t);
            }
            nlohmann::ordered_json rep;
            rep["mode"] = mode;
            rep["candidates"] = candidates.size();
            rep["kept"] = lfs.size();
            std::vector<std::size_t> per(classes.size(), 0);
            for (const auto& lf : lfs) ++per[static_cast<std::size_t>(lf.class_id)];
            for (std::size_t c = 0; c < classes.size(); ++c) rep["per_class"][classes[c]] = per[c];
            write(out / "induce_report.json", rep.dump(2) + "\n");
            if (lfs.empty()) throw Error("no labeling functions survived induction");
            write(out / "lfs.json", lfs_to_json(lfs));
            return 0;
        }

        if (*label) {
            const Corpus corpus = load_nonempty(corpus_path, classes);
            const auto lfs = load_lfs(lfs_path, corpus.num_classes());
            if (lfs.empty()) throw ValidationError("LF set is empty: " + lfs_path);
            const VoteMatrix votes = apply_lfs(lfs, corpus);
            ProbabilisticLabels labels;
            if (cfg.aggregator == ex::Aggregator::majority) {
                labels = majority_vote_labels(votes);
            } else {
                const FittedLabelModel model = fit(votes, cfg.fit);
                labels = predict_proba(model, votes);
                write(out / "model.json", model_to_json(model));
            }
            write(out / "votes.csv", votes_to_csv(votes));
            write(out / "labels.csv", labels_to_csv(labels, doc_ids(corpus)));
            return 0;
        }

        if (*train) {
            const Corpus corpus = load_nonempty(corpus_path, classes);
            std::vector<std::string> ids;
            const auto raw = parse_labels_csv(io::read_file(labels_path), &ids);
            const auto labels = align_labels(raw, ids, corpus);
            const auto vec = TfidfVectorizer::fit(corpus, train_opts.max_features);
            const auto feats = vec.transform(corpus);
            const LinearModel model = dpkit::train(feats, labels, cfg.train);
            write(out / "end_model.json", model.to_json(vec, cfg.train));
            if (!features_out.empty()) write(features_out, features_to_csv(feats, doc_ids(corpus)));
            return 0;
        }

        if (*eval) {
            const Corpus test = load_nonempty(corpus_path, classes);
            if (!test.all_gold()) throw ValidationError("every test document needs a gold label");
            TfidfVectorizer vec;
            const LinearModel model = LinearModel::from_json(io::read_file(model_path), &vec);
            if (model.num_classes() != test.num_classes()) throw ValidationError("model and test disagree on K");
            const auto preds = model.predict_proba(vec.transform(test));
            std::vector<int> gold;
            for (const auto& d : test.documents()) gold.push_back(*d.gold);
            write(out / "eval_report.json", metrics::report_to_json(metrics::evaluate(preds, gold, labeled_used)) + "\n");
            write(out / "predictions.csv", labels_to_csv(preds, doc_ids(test)));
            return 0;
        }

        const Corpus tr = load_nonempty(train_path, classes);
        const Corpus te = load_nonempty(test_path, classes);
        if (!tr.all_gold()) throw ValidationError("every train document needs a gold label for the oracle");
        const ex::Dataset data = ex::Dataset::prepare(tr, te, train_opts.max_features);

        if (*al || *ssl) {
            ex::GoldOracle oracle(tr);
            const ex::Trajectory t = *al ? ex::run_active_learning(data, oracle, cfg.al, cfg.train)
                                         : ex::run_self_training(data, oracle, cfg.ssl, cfg.train);
            const std::string name = *al ? "active" : "semi";
            write(out / ("trajectory_" + name + ".csv"), ex::trajectory_to_csv(t));
            write(out / (name + "_report.json"), metrics::report_to_json(t.points.back().metrics) + "\n");
            if (t.stopped_early) std::cout << "stopped early: " << t.stop_reason << "\n";
            return 0;
        }

        // compare
        const auto lfs = load_lfs(lfs_path, tr.num_classes());
        if (lfs.empty()) throw ValidationError("LF set is empty: " + lfs_path);
        const auto outcomes = ex::compare(data, tr, lfs, cfg);
        write(out / "comparison.json", ex::comparison_to_json(outcomes));
        for (const char* name : {"active", "semi"}) {
            write(out / (std::string("trajectory_") + name + ".csv"), ex::trajectory_to_csv(*outcomes.at(name).trajectory));
        }
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
