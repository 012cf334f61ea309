#pragma once

#include "clozeqa/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clozeqa {

inline bool ascii_alnum(unsigned char c) {
    return c < 0x80 && std::isalnum(c);
}

// Lowercase, split on maximal runs of non-alphanumeric bytes, drop empties.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (ascii_alnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct Vocab {
    std::vector<std::string> tokens;           // id -> token, ordered by (count desc, token asc)
    std::vector<std::int64_t> counts;          // id -> corpus frequency
    std::unordered_map<std::string, int> ids;  // token -> id
    int min_count = 2;

    std::size_t size() const { return tokens.size(); }

    int id_of(const std::string& token) const {
        auto it = ids.find(token);
        return it == ids.end() ? -1 : it->second;
    }
};

inline Vocab build_vocab(const std::vector<std::vector<std::string>>& sentences, int min_count) {
    std::unordered_map<std::string, std::int64_t> freq;
    for (const auto& sent : sentences) {
        for (const auto& tok : sent) ++freq[tok];
    }
    std::vector<std::pair<std::string, std::int64_t>> kept;
    for (const auto& [tok, n] : freq) {
        if (n >= min_count) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocab v;
    v.min_count = min_count;
    v.tokens.reserve(kept.size());
    v.counts.reserve(kept.size());
    for (const auto& [tok, n] : kept) {
        v.ids.emplace(tok, static_cast<int>(v.tokens.size()));
        v.tokens.push_back(tok);
        v.counts.push_back(n);
    }
    return v;
}

struct EmbeddingTable {
    int dimension = 0;
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;
    std::vector<double> values;  // row-major |tokens| x dimension

    std::size_t size() const { return tokens.size(); }

    std::span<const double> row(int id) const {
        return {values.data() + static_cast<std::size_t>(id) * dimension,
                static_cast<std::size_t>(dimension)};
    }

    const double* find(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? nullptr
                                 : values.data() + static_cast<std::size_t>(it->second) * dimension;
    }

    void add(const std::string& token, std::span<const double> vec) {
        if (static_cast<int>(vec.size()) != dimension) {
            throw std::invalid_argument("embedding dimension mismatch for token '" + token + "'");
        }
        if (index.contains(token)) {
            throw std::invalid_argument("duplicate token '" + token + "'");
        }
        index.emplace(token, static_cast<int>(tokens.size()));
        tokens.push_back(token);
        values.insert(values.end(), vec.begin(), vec.end());
    }
};

struct Encoded {
    std::vector<double> vec;
    bool all_oov = false;
};

// Mean of in-vocabulary token vectors, L2-normalized unless zero.
// All-OOV text encodes to the zero vector with the flag set.
inline Encoded encode_text(const EmbeddingTable& table, std::string_view text) {
    if (table.dimension <= 0) throw std::invalid_argument("encode_text: empty embedding table");
    Encoded out;
    out.vec.assign(static_cast<std::size_t>(table.dimension), 0.0);
    int hits = 0;
    for (const auto& tok : tokenize(text)) {
        if (const double* v = table.find(tok)) {
            for (int d = 0; d < table.dimension; ++d) out.vec[d] += v[d];
            ++hits;
        }
    }
    if (hits == 0) {
        out.all_oov = true;
        return out;
    }
    double norm2 = 0.0;
    for (double& x : out.vec) {
        x /= hits;
        norm2 += x * x;
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : out.vec) x *= inv;
    }
    return out;
}

inline double distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw std::invalid_argument("distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling
// ---------------------------------------------------------------------------

struct SkipgramConfig {
    int dimension = 100;
    int window = 4;
    int negatives = 5;
    int epochs = 15;
    double learning_rate = 0.025;
    double learning_rate_floor = 1e-4;  // linear decay target
    int min_count = 2;
    std::uint64_t seed = 1;
};

// Center (input) and context (output) matrices during training.
struct SkipgramModel {
    int dimension = 0;
    std::size_t vocab_size = 0;
    std::vector<double> input;   // vocab x dim
    std::vector<double> output;  // vocab x dim

    std::span<const double> input_row(int id) const {
        return {input.data() + static_cast<std::size_t>(id) * dimension,
                static_cast<std::size_t>(dimension)};
    }
    std::span<const double> output_row(int id) const {
        return {output.data() + static_cast<std::size_t>(id) * dimension,
                static_cast<std::size_t>(dimension)};
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)) without overflow; -log sigmoid(x) == softplus(-x).
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Negative-sampling loss of one (center, context, negatives) example:
//   L = -log s(u_ctx . v_c) - sum_i log s(-u_neg_i . v_c)
// Repeated negative rows contribute once per occurrence.
inline double sgns_loss(const SkipgramModel& m, int center, int context,
                        std::span<const int> negatives) {
    const auto vc = m.input_row(center);
    double loss = softplus(-dot(m.output_row(context), vc));
    for (int neg : negatives) {
        loss += softplus(dot(m.output_row(neg), vc));
    }
    return loss;
}

// Analytic gradient of sgns_loss at the current parameters.
// grad_center receives dL/d input[center] (dim entries). grad_rows receives
// (1 + |negatives|) x dim entries: row 0 for output[context], row 1+i for
// output[negatives[i]]. Duplicate rows are not merged; contributions add.
inline double sgns_loss_and_grad(const SkipgramModel& m, int center, int context,
                                 std::span<const int> negatives,
                                 std::vector<double>& grad_center,
                                 std::vector<double>& grad_rows) {
    const int dim = m.dimension;
    const auto vc = m.input_row(center);
    grad_center.assign(static_cast<std::size_t>(dim), 0.0);
    grad_rows.assign(static_cast<std::size_t>(dim) * (1 + negatives.size()), 0.0);

    const auto uo = m.output_row(context);
    const double g_pos = sigmoid(dot(uo, vc)) - 1.0;  // d(-log s(x))/dx at x = u.v
    double loss = softplus(-dot(uo, vc));
    for (int d = 0; d < dim; ++d) {
        grad_rows[d] = g_pos * vc[d];
        grad_center[d] += g_pos * uo[d];
    }
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        const auto un = m.output_row(negatives[i]);
        const double x = dot(un, vc);
        const double g_neg = sigmoid(x);
        loss += softplus(x);
        double* gr = grad_rows.data() + (i + 1) * dim;
        for (int d = 0; d < dim; ++d) {
            gr[d] = g_neg * vc[d];
            grad_center[d] += g_neg * un[d];
        }
    }
    return loss;
}

// Cumulative unigram^0.75 distribution for negative sampling.
class UnigramSampler {
public:
    explicit UnigramSampler(const std::vector<std::int64_t>& counts) {
        cumulative_.reserve(counts.size());
        double total = 0.0;
        for (std::int64_t c : counts) {
            total += std::pow(static_cast<double>(c), 0.75);
            cumulative_.push_back(total);
        }
    }

    int draw(Rng& rng) const {
        const double r = rng.real() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
        if (it == cumulative_.end()) --it;
        return static_cast<int>(it - cumulative_.begin());
    }

private:
    std::vector<double> cumulative_;
};

struct SkipgramResult {
    EmbeddingTable table;
    std::vector<double> epoch_loss;  // mean per-pair loss for each epoch
};

// Plain single-threaded SGD skip-gram trainer over short texts (one sentence
// per title). Deterministic for a fixed seed.
inline SkipgramResult train_skipgram(const std::vector<std::string>& titles,
                                     const SkipgramConfig& cfg) {
    if (cfg.dimension <= 0) throw std::invalid_argument("train_skipgram: dimension must be positive");
    if (cfg.window <= 0 || cfg.negatives < 0 || cfg.epochs <= 0 || cfg.min_count < 1 ||
        cfg.learning_rate <= 0.0) {
        throw std::invalid_argument("train_skipgram: invalid configuration");
    }

    std::vector<std::vector<std::string>> sentences;
    sentences.reserve(titles.size());
    for (const auto& t : titles) sentences.push_back(tokenize(t));

    const Vocab vocab = build_vocab(sentences, cfg.min_count);

    std::vector<std::vector<int>> encoded;
    encoded.reserve(sentences.size());
    std::size_t total_positions = 0;
    bool trainable = false;
    for (const auto& sent : sentences) {
        std::vector<int> ids;
        for (const auto& tok : sent) {
            const int id = vocab.id_of(tok);
            if (id >= 0) ids.push_back(id);
        }
        if (ids.size() >= 2) trainable = true;
        total_positions += ids.size();
        encoded.push_back(std::move(ids));
    }
    if (vocab.size() == 0 || !trainable) {
        throw std::runtime_error("train_skipgram: corpus has no title with two in-vocabulary tokens");
    }

    const int dim = cfg.dimension;
    SkipgramModel model;
    model.dimension = dim;
    model.vocab_size = vocab.size();
    model.input.resize(vocab.size() * static_cast<std::size_t>(dim));
    model.output.assign(vocab.size() * static_cast<std::size_t>(dim), 0.0);

    Rng rng = Rng::derive(cfg.seed, "skipgram");
    const double half = 0.5 / dim;
    for (double& x : model.input) x = rng.real_in(-half, half);

    const UnigramSampler sampler(vocab.counts);
    const double lr0 = cfg.learning_rate;
    const double lr_min = std::min(cfg.learning_rate_floor, lr0);
    const double total_steps = static_cast<double>(total_positions) * cfg.epochs;

    std::vector<double> grad_center;
    std::vector<double> grad_rows;
    std::vector<int> negatives;
    std::vector<double> epoch_loss;
    std::size_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t pairs = 0;
        for (const auto& ids : encoded) {
            const int n = static_cast<int>(ids.size());
            for (int i = 0; i < n; ++i) {
                const double lr =
                    std::max(lr_min, lr0 - (lr0 - lr_min) * (static_cast<double>(step) / total_steps));
                ++step;
                const int lo = std::max(0, i - cfg.window);
                const int hi = std::min(n - 1, i + cfg.window);
                for (int j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    negatives.clear();
                    for (int s = 0; s < cfg.negatives; ++s) {
                        const int neg = sampler.draw(rng);
                        if (neg == ids[j]) continue;  // never contrast a word with itself
                        negatives.push_back(neg);
                    }
                    loss_sum += sgns_loss_and_grad(model, ids[i], ids[j], negatives,
                                                   grad_center, grad_rows);
                    ++pairs;
                    double* vc = model.input.data() + static_cast<std::size_t>(ids[i]) * dim;
                    for (int d = 0; d < dim; ++d) vc[d] -= lr * grad_center[d];
                    double* uo = model.output.data() + static_cast<std::size_t>(ids[j]) * dim;
                    for (int d = 0; d < dim; ++d) uo[d] -= lr * grad_rows[d];
                    for (std::size_t s = 0; s < negatives.size(); ++s) {
                        double* un = model.output.data() +
                                     static_cast<std::size_t>(negatives[s]) * dim;
                        const double* gr = grad_rows.data() + (s + 1) * dim;
                        for (int d = 0; d < dim; ++d) un[d] -= lr * gr[d];
                    }
                }
            }
        }
        epoch_loss.push_back(pairs > 0 ? loss_sum / static_cast<double>(pairs) : 0.0);
    }

    SkipgramResult result;
    result.table.dimension = dim;
    result.table.tokens = vocab.tokens;
    result.table.index = vocab.ids;
    result.table.values = std::move(model.input);
    result.epoch_loss = std::move(epoch_loss);
    return result;
}

// ---------------------------------------------------------------------------
// Embedding text file: "<token_count> <dimension>" header, then one token and
// <dimension> decimal reals per line.
// ---------------------------------------------------------------------------

inline EmbeddingTable load_embeddings(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("embedding file: missing header");
    std::istringstream header(line);
    std::int64_t count = -1;
    int dim = -1;
    if (!(header >> count >> dim) || count < 0 || dim <= 0) {
        throw std::runtime_error("embedding file: malformed header '" + line + "'");
    }

    EmbeddingTable table;
    table.dimension = dim;
    table.tokens.reserve(static_cast<std::size_t>(count));
    table.values.reserve(static_cast<std::size_t>(count) * dim);

    std::vector<double> vec(static_cast<std::size_t>(dim));
    std::int64_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        std::istringstream ls(line);
        std::string token;
        if (!(ls >> token)) {
            throw std::runtime_error("embedding file: row " + std::to_string(row) + " is malformed");
        }
        for (int d = 0; d < dim; ++d) {
            if (!(ls >> vec[d])) {
                throw std::runtime_error("embedding file: row " + std::to_string(row) +
                                         " has fewer than " + std::to_string(dim) + " values");
            }
        }
        double extra;
        if (ls >> extra) {
            throw std::runtime_error("embedding file: row " + std::to_string(row) +
                                     " has more than " + std::to_string(dim) + " values");
        }
        if (table.index.contains(token)) {
            throw std::runtime_error("embedding file: duplicate token '" + token + "'");
        }
        table.add(token, vec);
    }
    if (row != count) {
        throw std::runtime_error("embedding file: header declares " + std::to_string(count) +
                                 " tokens but " + std::to_string(row) + " rows found");
    }
    return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    return load_embeddings(in);
}

inline void save_embeddings(std::ostream& out, const EmbeddingTable& table) {
    out << table.size() << ' ' << table.dimension << '\n';
    char buf[40];
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.tokens[i];
        const auto row = table.row(static_cast<int>(i));
        for (double x : row) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << ' ' << buf;
        }
        out << '\n';
    }
}

inline void save_embeddings(const std::string& path, const EmbeddingTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embedding file: " + path);
    save_embeddings(out, table);
}

}  // namespace clozeqa
