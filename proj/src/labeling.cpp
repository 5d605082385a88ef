#include "dpkit/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "dpkit/io.hpp"

namespace dpkit {

using nlohmann::json;

KeywordLF KeywordLF::make(std::string keyword, int class_id) {
    std::string name = "kw:" + keyword;
    return {std::move(keyword), class_id, std::move(name)};
}

VoteMatrix::VoteMatrix(std::size_t rows, std::size_t cols, int num_classes)
    : VoteMatrix(std::vector<int>(rows * cols, kAbstain), rows, cols, num_classes) {}

VoteMatrix::VoteMatrix(std::vector<int> votes, std::size_t rows, std::size_t cols, int num_classes,
                       std::vector<std::string> lf_names, std::vector<std::string> doc_ids)
    : rows_(rows),
      cols_(cols),
      num_classes_(num_classes),
      votes_(std::move(votes)),
      lf_names_(std::move(lf_names)),
      doc_ids_(std::move(doc_ids)) {
    if (num_classes < 2) throw ValidationError("vote matrix needs at least 2 classes");
    if (votes_.size() != rows * cols) throw ValidationError("vote buffer size does not match dimensions");
    if (!lf_names_.empty() && lf_names_.size() != cols) throw ValidationError("lf_names length != columns");
    if (!doc_ids_.empty() && doc_ids_.size() != rows) throw ValidationError("doc_ids length != rows");
    for (int v : votes_) {
        if (v != kAbstain && (v < 0 || v >= num_classes)) {
            throw ValidationError("vote " + std::to_string(v) + " outside [0, K)");
        }
    }
    if (lf_names_.empty()) {
        for (std::size_t j = 0; j < cols; ++j) lf_names_.push_back("lf" + std::to_string(j));
    }
    if (doc_ids_.empty()) {
        for (std::size_t i = 0; i < rows; ++i) doc_ids_.push_back(std::to_string(i));
    }
}

void VoteMatrix::set(std::size_t i, std::size_t j, int vote) {
    if (vote != kAbstain && (vote < 0 || vote >= num_classes_)) {
        throw ValidationError("vote " + std::to_string(vote) + " outside [0, K)");
    }
    votes_.at(i * cols_ + j) = vote;
}

VoteMatrix VoteMatrix::select_rows(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size() * cols_);
    std::vector<std::string> ids;
    for (std::size_t i : indices) {
        auto r = row(i);
        out.insert(out.end(), r.begin(), r.end());
        if (!doc_ids_.empty()) ids.push_back(doc_ids_[i]);
    }
    return VoteMatrix(std::move(out), indices.size(), cols_, num_classes_, lf_names_, std::move(ids));
}

void EmbeddingTable::add(std::string token, std::vector<double> vector) {
    if (dimension_ == 0) dimension_ = vector.size();
    if (vector.size() != dimension_ || dimension_ == 0) {
        throw ValidationError("embedding for '" + token + "' has dimension " + std::to_string(vector.size()) +
                              ", expected " + std::to_string(dimension_));
    }
    for (double x : vector) {
        if (!std::isfinite(x)) throw ValidationError("non-finite embedding entry for '" + token + "'");
    }
    table_[std::move(token)] = std::move(vector);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
    auto it = table_.find(token);
    return it == table_.end() ? nullptr : &it->second;
}

std::vector<TokenFrequency> extract_frequent_unigrams(const Corpus& corpus, double percentile,
                                                      const std::set<std::string>& stopwords) {
    if (corpus.empty()) throw ValidationError("cannot extract unigrams from an empty corpus");
    if (!(percentile >= 0.0 && percentile <= 100.0)) throw ValidationError("percentile must lie in [0, 100]");

    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus.documents()) {
        auto tokens = tokenize(doc.text);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (auto& t : tokens) {
            if (!stopwords.count(t)) ++df[t];
        }
    }
    if (df.empty()) return {};

    std::vector<std::size_t> counts;
    counts.reserve(df.size());
    for (const auto& [tok, c] : df) counts.push_back(c);
    std::sort(counts.begin(), counts.end());
    // Nearest rank: ceil(p/100 * N), at least 1.
    auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(counts.size())));
    rank = std::clamp<std::size_t>(rank, 1, counts.size());
    const std::size_t cut = counts[rank - 1];

    std::vector<TokenFrequency> out;
    for (const auto& [tok, c] : df) {
        if (c >= cut) out.push_back({tok, c});
    }
    std::stable_sort(out.begin(), out.end(), [](const TokenFrequency& a, const TokenFrequency& b) {
        return a.document_frequency > b.document_frequency;
    });
    return out;
}

std::vector<KeywordLF> assign_by_lexicon(std::span<const std::string> candidates, const Lexicon& lexicon,
                                         double pos_threshold, double neg_threshold) {
    if (!(pos_threshold > neg_threshold)) throw ValidationError("positive threshold must exceed negative threshold");
    std::vector<KeywordLF> out;
    for (const auto& cand : candidates) {
        auto it = lexicon.find(cand);
        if (it == lexicon.end()) continue;
        if (it->second >= pos_threshold) {
            out.push_back(KeywordLF::make(cand, 1));
        } else if (it->second <= neg_threshold) {
            out.push_back(KeywordLF::make(cand, 0));
        }
    }
    return out;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<KeywordLF> assign_by_similarity(std::span<const std::string> candidates,
                                            std::span<const std::string> class_names, const EmbeddingTable& table,
                                            double threshold) {
    std::vector<const std::vector<double>*> class_vecs;
    for (const auto& name : class_names) {
        const auto* v = table.find(name);
        if (!v) throw ValidationError("class name '" + name + "' has no embedding");
        class_vecs.push_back(v);
    }
    std::vector<KeywordLF> out;
    for (const auto& cand : candidates) {
        const auto* v = table.find(cand);
        if (!v) continue;
        int best = 0;
        double best_sim = cosine(*v, *class_vecs[0]);
        for (std::size_t c = 1; c < class_vecs.size(); ++c) {
            const double s = cosine(*v, *class_vecs[c]);
            if (s > best_sim) {
                best_sim = s;
                best = static_cast<int>(c);
            }
        }
        if (best_sim >= threshold) out.push_back(KeywordLF::make(cand, best));
    }
    return out;
}

VoteMatrix apply_lfs(std::span<const KeywordLF> lfs, const Corpus& corpus) {
    const int k = corpus.num_classes();
    std::vector<std::string> names;
    for (const auto& lf : lfs) {
        if (lf.class_id < 0 || lf.class_id >= k) {
            throw ValidationError("LF " + lf.name + " votes class " + std::to_string(lf.class_id) + " outside [0, K)");
        }
        names.push_back(lf.name);
    }
    std::vector<std::string> ids;
    std::vector<int> votes(corpus.size() * lfs.size(), kAbstain);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        ids.push_back(corpus[i].id);
        const auto tokens = tokenize(corpus[i].text);
        const std::unordered_set<std::string> present(tokens.begin(), tokens.end());
        for (std::size_t j = 0; j < lfs.size(); ++j) {
            if (present.count(lfs[j].keyword)) votes[i * lfs.size() + j] = lfs[j].class_id;
        }
    }
    return VoteMatrix(std::move(votes), corpus.size(), lfs.size(), k, std::move(names), std::move(ids));
}

LFDiagnostics diagnostics(const VoteMatrix& votes, std::optional<std::span<const int>> gold) {
    const std::size_t n = votes.rows(), m = votes.cols();
    if (gold && gold->size() != n) throw ValidationError("gold length does not match vote matrix rows");
    LFDiagnostics d;
    d.coverage.assign(m, 0.0);
    d.polarity.assign(m, kAbstain);
    d.accuracy.assign(m, std::nullopt);
    std::vector<std::size_t> covered(m, 0), correct(m, 0);
    std::vector<std::vector<std::size_t>> class_counts(m, std::vector<std::size_t>(votes.num_classes(), 0));
    std::size_t overlap_rows = 0, conflict_rows = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t nonabstain = 0;
        int first = kAbstain;
        bool conflict = false;
        for (std::size_t j = 0; j < m; ++j) {
            const int v = votes.at(i, j);
            if (v == kAbstain) continue;
            ++nonabstain;
            ++covered[j];
            ++class_counts[j][v];
            if (gold && (*gold)[i] == v) ++correct[j];
            if (first == kAbstain) {
                first = v;
            } else if (v != first) {
                conflict = true;
            }
        }
        if (nonabstain >= 2) ++overlap_rows;
        if (conflict) ++conflict_rows;
    }
    for (std::size_t j = 0; j < m; ++j) {
        d.coverage[j] = n ? static_cast<double>(covered[j]) / static_cast<double>(n) : 0.0;
        if (covered[j] > 0) {
            auto it = std::max_element(class_counts[j].begin(), class_counts[j].end());
            d.polarity[j] = static_cast<int>(it - class_counts[j].begin());
            if (gold) d.accuracy[j] = static_cast<double>(correct[j]) / static_cast<double>(covered[j]);
        }
    }
    if (n) {
        d.overlap = static_cast<double>(overlap_rows) / static_cast<double>(n);
        d.conflict = static_cast<double>(conflict_rows) / static_cast<double>(n);
    }
    return d;
}

const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words = {
        "a",       "about",   "above",  "after",  "again", "all",     "also",    "am",     "an",      "and",
        "any",     "are",     "as",     "at",     "be",    "because", "been",    "before", "being",   "below",
        "between", "both",    "but",    "by",     "can",   "could",   "did",     "do",     "does",    "doing",
        "down",    "during",  "each",   "even",   "few",   "for",     "from",    "further", "had",    "has",
        "have",    "having",  "he",     "her",    "here",  "hers",    "herself", "him",    "himself", "his",
        "how",     "i",       "if",     "in",     "into",  "is",      "it",      "it's",   "its",     "itself",
        "just",    "me",      "more",   "most",   "my",    "myself",  "of",      "off",    "on",      "once",
        "only",    "or",      "other",  "our",    "ours",  "ourselves", "out",   "over",   "own",     "same",
        "she",     "should",  "so",     "some",   "such",  "than",    "that",    "the",    "their",   "theirs",
        "them",    "themselves", "then", "there", "these", "they",    "this",    "those",  "through", "to",
        "too",     "under",   "until",  "up",     "very",  "was",     "we",      "were",   "what",    "when",
        "where",   "which",   "while",  "who",    "whom",  "why",     "will",    "with",   "would",   "you",
        "your",    "yours",   "yourself", "yourselves", "br", "s",    "t",
    };
    return words;
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::set<std::string> out;
    for (auto& line : io::split_lines(io::read_file(path))) {
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t");
        out.insert(line.substr(b, e - b + 1));
    }
    return out;
}

Lexicon parse_lexicon(std::string_view contents) {
    Lexicon lex;
    std::size_t line_no = 0;
    for (const auto& line : io::split_lines(contents)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("lexicon line needs token<TAB>score", line_no);
        const std::string token = line.substr(0, tab);
        // VADER-style files carry extra columns after the score; only the first is read.
        std::string score_field = line.substr(tab + 1);
        if (auto t2 = score_field.find('\t'); t2 != std::string::npos) score_field.resize(t2);
        double score = 0.0;
        try {
            std::size_t used = 0;
            score = std::stod(score_field, &used);
            if (used != score_field.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("bad lexicon score '" + score_field + "'", line_no);
        }
        if (token.empty()) throw ParseError("empty lexicon token", line_no);
        if (!lex.emplace(token, score).second) throw ParseError("duplicate lexicon token '" + token + "'", line_no);
    }
    return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
    return parse_lexicon(io::read_file(path));
}

EmbeddingTable parse_embeddings(std::string_view contents) {
    EmbeddingTable table;
    std::size_t line_no = 0;
    for (const auto& line : io::split_lines(contents)) {
        ++line_no;
        std::istringstream ss(line);
        std::string token;
        if (!(ss >> token)) continue;
        std::vector<double> vec;
        std::string field;
        while (ss >> field) {
            try {
                std::size_t used = 0;
                vec.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError("bad embedding value '" + field + "'", line_no);
            }
        }
        try {
            table.add(std::move(token), std::move(vec));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    return parse_embeddings(io::read_file(path));
}

std::vector<KeywordLF> parse_lfs_json(std::string_view contents, int num_classes) {
    json j;
    try {
        j = json::parse(contents);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("LF file: ") + e.what(), 0);
    }
    if (!j.is_array()) throw ValidationError("LF file must be a JSON list");
    std::vector<KeywordLF> lfs;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("keyword") || !item["keyword"].is_string() ||
            !item.contains("class") || !item["class"].is_number_integer()) {
            throw ValidationError("LF entries need a string 'keyword' and integer 'class'");
        }
        auto lf = KeywordLF::make(item["keyword"].get<std::string>(), item["class"].get<int>());
        if (item.contains("name") && item["name"].is_string()) lf.name = item["name"].get<std::string>();
        if (lf.class_id < 0 || lf.class_id >= num_classes) {
            throw ValidationError("LF " + lf.name + " votes class " + std::to_string(lf.class_id) + " outside [0, K)");
        }
        const auto toks = tokenize(lf.keyword);
        if (toks.size() != 1 || toks[0] != lf.keyword) {
            throw ValidationError("LF keyword '" + lf.keyword + "' is not a single token");
        }
        lfs.push_back(std::move(lf));
    }
    return lfs;
}

std::vector<KeywordLF> load_lfs(const std::filesystem::path& path, int num_classes) {
    return parse_lfs_json(io::read_file(path), num_classes);
}

std::string lfs_to_json(std::span<const KeywordLF> lfs) {
    json j = json::array();
    for (const auto& lf : lfs) j.push_back({{"keyword", lf.keyword}, {"class", lf.class_id}, {"name", lf.name}});
    return j.dump(2) + "\n";
}

std::string votes_to_csv(const VoteMatrix& votes) {
    std::string out = "doc_id";
    for (const auto& name : votes.lf_names()) out += "," + io::csv_escape(name);
    out += '\n';
    for (std::size_t i = 0; i < votes.rows(); ++i) {
        out += io::csv_escape(votes.doc_ids()[i]);
        for (std::size_t j = 0; j < votes.cols(); ++j) {
            out += ',';
            if (const int v = votes.at(i, j); v != kAbstain) out += std::to_string(v);
        }
        out += '\n';
    }
    return out;
}

VoteMatrix parse_votes_csv(std::string_view contents, int num_classes) {
    const auto lines = io::split_lines(contents);
    if (lines.empty()) throw ParseError("empty vote file", 0);
    auto header = io::csv_split(lines[0]);
    if (header.empty() || header[0] != "doc_id") throw ParseError("vote file header must start with doc_id", 1);
    std::vector<std::string> names(header.begin() + 1, header.end());
    const std::size_t m = names.size();
    std::vector<int> votes;
    std::vector<std::string> ids;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        auto fields = io::csv_split(lines[li]);
        if (fields.size() != m + 1) throw ParseError("wrong number of vote fields", li + 1);
        ids.push_back(fields[0]);
        for (std::size_t j = 0; j < m; ++j) {
            if (fields[j + 1].empty()) {
                votes.push_back(kAbstain);
                continue;
            }
            try {
                std::size_t used = 0;
                const int v = std::stoi(fields[j + 1], &used);
                if (used != fields[j + 1].size() || v < 0 || v >= num_classes) throw std::out_of_range("vote");
                votes.push_back(v);
            } catch (const std::exception&) {
                throw ParseError("bad vote '" + fields[j + 1] + "'", li + 1);
            }
        }
    }
    const std::size_t n = ids.size();
    return VoteMatrix(std::move(votes), n, m, num_classes, std::move(names), std::move(ids));
}

}  // namespace dpkit
