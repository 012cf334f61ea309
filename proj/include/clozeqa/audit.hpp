#pragma once

#include "clozeqa/clozegen.hpp"
#include "clozeqa/embeddings.hpp"
#include "clozeqa/geometry.hpp"
#include "clozeqa/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace clozeqa {

// ---------------------------------------------------------------------------
// Distributional statistics
// ---------------------------------------------------------------------------

struct SkewEntry {
    std::string token;
    double log_odds = 0.0;  // smoothed log-odds, positive = correct-leaning
    std::int64_t count_correct = 0;
    std::int64_t count_incorrect = 0;
};

struct SkewTable {
    std::vector<SkewEntry> entries;  // sorted by |log_odds| desc, token asc
    double js_divergence = 0.0;      // between the two smoothed distributions
    std::int64_t total_correct = 0;
    std::int64_t total_incorrect = 0;
    std::int64_t vocab_size = 0;
};

// Laplace-smoothed per-token log-odds between correct-choice and
// incorrect-choice token counts:
//   s(t) = log((c_corr+1)/(N_corr+V)) - log((c_inc+1)/(N_inc+V))
inline SkewTable choice_frequency_skew(const std::vector<ClozeQuestion>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("choice_frequency_skew: empty dataset");
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;  // token -> (corr, inc)
    std::int64_t n_corr = 0;
    std::int64_t n_inc = 0;
    for (const auto& q : dataset) {
        for (std::size_t i = 0; i < q.choices.size(); ++i) {
            const bool correct = static_cast<int>(i) == q.answer_index;
            for (const auto& tok : tokenize(q.choices[i])) {
                auto& c = counts[tok];
                if (correct) {
                    ++c.first;
                    ++n_corr;
                } else {
                    ++c.second;
                    ++n_inc;
                }
            }
        }
    }
    SkewTable table;
    table.total_correct = n_corr;
    table.total_incorrect = n_inc;
    table.vocab_size = static_cast<std::int64_t>(counts.size());
    const double v = static_cast<double>(counts.size());
    double js = 0.0;
    for (const auto& [tok, c] : counts) {
        const double p = (static_cast<double>(c.first) + 1.0) / (static_cast<double>(n_corr) + v);
        const double q = (static_cast<double>(c.second) + 1.0) / (static_cast<double>(n_inc) + v);
        const double m = 0.5 * (p + q);
        js += 0.5 * p * std::log(p / m) + 0.5 * q * std::log(q / m);
        table.entries.push_back({tok, std::log(p) - std::log(q), c.first, c.second});
    }
    table.js_divergence = js;
    std::sort(table.entries.begin(), table.entries.end(), [](const SkewEntry& a, const SkewEntry& b) {
        const double ma = std::fabs(a.log_odds);
        const double mb = std::fabs(b.log_odds);
        if (ma != mb) return ma > mb;
        return a.token < b.token;
    });
    return table;
}

struct PositionHistogram {
    std::vector<std::int64_t> counts;
    double chi_square = 0.0;  // against the uniform distribution
};

inline PositionHistogram answer_position_histogram(const std::vector<ClozeQuestion>& dataset) {
    PositionHistogram h;
    if (dataset.empty()) return h;
    const std::size_t nchoices = dataset.front().choices.size();
    h.counts.assign(nchoices, 0);
    for (const auto& q : dataset) {
        if (q.choices.size() != nchoices) {
            throw std::invalid_argument("answer_position_histogram: mixed nchoices in dataset");
        }
        if (q.answer_index < 0 || q.answer_index >= static_cast<int>(nchoices)) {
            throw std::invalid_argument("answer_position_histogram: answer_index out of range");
        }
        ++h.counts[static_cast<std::size_t>(q.answer_index)];
    }
    const double expected = static_cast<double>(dataset.size()) / static_cast<double>(nchoices);
    for (std::int64_t c : h.counts) {
        const double d = static_cast<double>(c) - expected;
        h.chi_square += d * d / expected;
    }
    return h;
}

struct ClusterCoverage {
    std::vector<std::int64_t> histogram;  // distractor picks per cluster
    double normalized_entropy = 0.0;      // Shannon entropy / log(k), in [0,1]
};

inline ClusterCoverage cluster_coverage(const std::vector<ClozeQuestion>& dataset,
                                        const ClusterModel& model, const EmbeddingTable& table) {
    ClusterCoverage cov;
    cov.histogram.assign(static_cast<std::size_t>(model.k), 0);
    std::unordered_map<std::string, int> cache;
    for (const auto& q : dataset) {
        for (std::size_t i = 0; i < q.choices.size(); ++i) {
            if (static_cast<int>(i) == q.answer_index) continue;
            auto it = cache.find(q.choices[i]);
            if (it == cache.end()) {
                it = cache.emplace(q.choices[i],
                                   kmeans_assign(model, encode_text(table, q.choices[i]).vec))
                         .first;
            }
            ++cov.histogram[static_cast<std::size_t>(it->second)];
        }
    }
    std::int64_t total = 0;
    for (std::int64_t c : cov.histogram) total += c;
    if (total == 0) return cov;
    if (model.k <= 1) {
        cov.normalized_entropy = 1.0;
        return cov;
    }
    double h = 0.0;
    for (std::int64_t c : cov.histogram) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    cov.normalized_entropy = h / std::log(static_cast<double>(model.k));
    return cov;
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

struct ProbeConfig {
    double learning_rate = 5e-4;
    int max_epochs = 200;
    int patience = 20;
    int batch_size = 64;
    int top_tokens = 512;  // F most frequent train-choice tokens as indicators
    std::uint64_t seed = 1;

    void validate() const {
        if (learning_rate <= 0 || max_epochs <= 0 || patience <= 0 || batch_size <= 0 ||
            top_tokens <= 0) {
            throw std::invalid_argument("probe: all configuration values must be positive");
        }
    }
};

struct ProbeResult {
    double accuracy = 0.0;
    std::int64_t evaluated = 0;
    std::int64_t skipped = 0;
};

namespace detail {

inline int argmax_lowest(const std::vector<double>& scores) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
        if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

}  // namespace detail

// Choice-only linear probe: each choice is featurized as the pooled embedding
// concatenated with top-F token-presence indicators; one weight vector scores
// all choices, softmax + cross-entropy, plain minibatch SGD, early stopping
// on validation accuracy. Never reads question or context.
inline double run_probe_choice_only(const std::vector<ClozeQuestion>& train,
                                    const std::vector<ClozeQuestion>& val,
                                    const EmbeddingTable& table, const ProbeConfig& cfg) {
    cfg.validate();
    if (train.empty() || val.empty()) {
        throw std::invalid_argument("choice-only probe: both splits must be non-empty");
    }
    bool separable_input = false;
    for (const auto& q : train) {
        for (std::size_t i = 1; i < q.choices.size(); ++i) {
            if (q.choices[i] != q.choices[0]) {
                separable_input = true;
                break;
            }
        }
        if (separable_input) break;
    }
    if (!separable_input) {
        throw std::invalid_argument("choice-only probe: degenerate training data (identical choices)");
    }

    // Indicator vocabulary: top-F tokens over train choices, count desc then
    // token asc for determinism.
    std::unordered_map<std::string, std::int64_t> freq;
    for (const auto& q : train) {
        for (const auto& c : q.choices) {
            for (const auto& tok : tokenize(c)) ++freq[tok];
        }
    }
    std::vector<std::pair<std::string, std::int64_t>> ordered(freq.begin(), freq.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const int f = std::min<int>(cfg.top_tokens, static_cast<int>(ordered.size()));
    std::unordered_map<std::string, int> indicator;
    for (int i = 0; i < f; ++i) indicator.emplace(ordered[static_cast<std::size_t>(i)].first, i);

    const int dim = table.dimension + f;
    auto featurize = [&](const std::vector<ClozeQuestion>& qs) {
        // flattened |qs| x nchoices x dim
        std::vector<double> feats;
        feats.reserve(qs.size() * 4 * static_cast<std::size_t>(dim));
        for (const auto& q : qs) {
            for (const auto& c : q.choices) {
                const Encoded e = encode_text(table, c);
                feats.insert(feats.end(), e.vec.begin(), e.vec.end());
                std::vector<double> ind(static_cast<std::size_t>(f), 0.0);
                for (const auto& tok : tokenize(c)) {
                    auto it = indicator.find(tok);
                    if (it != indicator.end()) ind[static_cast<std::size_t>(it->second)] = 1.0;
                }
                feats.insert(feats.end(), ind.begin(), ind.end());
            }
        }
        return feats;
    };
    const std::vector<double> train_feats = featurize(train);
    const std::vector<double> val_feats = featurize(val);

    std::vector<double> w(static_cast<std::size_t>(dim), 0.0);
    auto scores_of = [&](const std::vector<double>& feats, std::size_t qi, std::size_t nchoices,
                         std::vector<double>& out) {
        out.resize(nchoices);
        for (std::size_t c = 0; c < nchoices; ++c) {
            const double* x = feats.data() + (qi * nchoices + c) * static_cast<std::size_t>(dim);
            double s = 0.0;
            for (int d = 0; d < dim; ++d) s += w[static_cast<std::size_t>(d)] * x[d];
            out[c] = s;
        }
    };
    auto val_accuracy = [&]() {
        std::int64_t correct = 0;
        std::vector<double> scores;
        for (std::size_t qi = 0; qi < val.size(); ++qi) {
            scores_of(val_feats, qi, val[qi].choices.size(), scores);
            if (detail::argmax_lowest(scores) == val[qi].answer_index) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(val.size());
    };

    Rng rng = Rng::derive(cfg.seed, "choice-only-probe");
    double best = val_accuracy();
    int since_best = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(static_cast<std::size_t>(dim));
    std::vector<double> scores;
    std::vector<double> probs;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t bi = b; bi < end; ++bi) {
                const std::size_t qi = order[bi];
                const std::size_t nchoices = train[qi].choices.size();
                scores_of(train_feats, qi, nchoices, scores);
                double mx = scores[0];
                for (double s : scores) mx = std::max(mx, s);
                probs.resize(nchoices);
                double z = 0.0;
                for (std::size_t c = 0; c < nchoices; ++c) {
                    probs[c] = std::exp(scores[c] - mx);
                    z += probs[c];
                }
                for (std::size_t c = 0; c < nchoices; ++c) {
                    const double coeff =
                        probs[c] / z - (static_cast<int>(c) == train[qi].answer_index ? 1.0 : 0.0);
                    const double* x = train_feats.data() + (qi * nchoices + c) * static_cast<std::size_t>(dim);
                    for (int d = 0; d < dim; ++d) grad[static_cast<std::size_t>(d)] += coeff * x[d];
                }
            }
            const double scale = cfg.learning_rate / static_cast<double>(end - b);
            for (int d = 0; d < dim; ++d) w[static_cast<std::size_t>(d)] -= scale * grad[static_cast<std::size_t>(d)];
        }
        const double acc = val_accuracy();
        if (acc > best) {
            best = acc;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return best;
}

// Training-free hasty student: score each choice by proximity to the mean
// encoding of the visible question titles.
inline ProbeResult run_probe_hasty(const std::vector<ClozeQuestion>& val, const EmbeddingTable& table) {
    ProbeResult result;
    std::int64_t correct = 0;
    for (const auto& q : val) {
        std::vector<double> mean(static_cast<std::size_t>(table.dimension), 0.0);
        int visible = 0;
        for (const auto& t : q.question) {
            if (t == kPlaceholder) continue;
            const Encoded e = encode_text(table, t);
            for (int d = 0; d < table.dimension; ++d) mean[static_cast<std::size_t>(d)] += e.vec[static_cast<std::size_t>(d)];
            ++visible;
        }
        if (visible == 0) {
            ++result.skipped;
            continue;
        }
        for (double& x : mean) x /= visible;
        std::vector<double> scores;
        scores.reserve(q.choices.size());
        for (const auto& c : q.choices) {
            scores.push_back(-distance(encode_text(table, c).vec, mean));
        }
        if (detail::argmax_lowest(scores) == q.answer_index) ++correct;
        ++result.evaluated;
    }
    if (result.evaluated > 0) {
        result.accuracy = static_cast<double>(correct) / static_cast<double>(result.evaluated);
    }
    return result;
}

// Context probe: score each choice against the masked step's description.
// Questions without a description at that position are skipped and counted.
inline ProbeResult run_probe_context(const std::vector<ClozeQuestion>& val, const EmbeddingTable& table) {
    ProbeResult result;
    std::int64_t correct = 0;
    for (const auto& q : val) {
        const auto parts = parse_qid(q.qid);
        if (!parts) {
            ++result.skipped;
            continue;
        }
        const std::size_t pos = static_cast<std::size_t>(parts->start + q.placeholder_index);
        if (pos >= q.context.size() || q.context[pos].text.empty()) {
            ++result.skipped;
            continue;
        }
        const Encoded target = encode_text(table, q.context[pos].text);
        std::vector<double> scores;
        scores.reserve(q.choices.size());
        for (const auto& c : q.choices) {
            scores.push_back(-distance(encode_text(table, c).vec, target.vec));
        }
        if (detail::argmax_lowest(scores) == q.answer_index) ++correct;
        ++result.evaluated;
    }
    if (result.evaluated > 0) {
        result.accuracy = static_cast<double>(correct) / static_cast<double>(result.evaluated);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct AuditReport {
    std::string dataset_path;
    std::int64_t record_count = 0;
    std::uint64_t probe_seed = 0;
    int nchoices = 4;
    std::map<std::string, double> probe_accuracy;  // name -> accuracy(val)
    std::int64_t hasty_skipped = 0;
    std::int64_t context_skipped = 0;
    std::int64_t context_evaluated = 0;
    std::vector<std::int64_t> position_histogram;
    double position_chi_square = 0.0;
    double skew_js_divergence = 0.0;
    std::vector<SkewEntry> top_skew;  // capped slice of the full table
    std::optional<ClusterCoverage> coverage;
};

// Runs every statistic and probe over one dataset file's records. The cluster
// model is optional; coverage is reported only when it is supplied.
inline AuditReport build_report(const std::vector<ClozeQuestion>& dataset, const EmbeddingTable& table,
                                const ProbeConfig& cfg, const ClusterModel* model,
                                const std::string& dataset_path, std::size_t top_skew_entries = 50) {
    if (dataset.empty()) throw std::invalid_argument("audit: empty dataset");
    std::vector<ClozeQuestion> train;
    std::vector<ClozeQuestion> val;
    for (const auto& q : dataset) {
        (q.split == Split::train ? train : val).push_back(q);
    }
    if (train.empty() || val.empty()) {
        throw std::runtime_error("audit: dataset must contain both train and val records");
    }
    std::unordered_map<std::string, int> split_of;
    for (const auto& q : train) split_of.emplace(q.procedure_id, 0);
    for (const auto& q : val) {
        auto it = split_of.find(q.procedure_id);
        if (it != split_of.end() && it->second == 0) {
            throw std::runtime_error("audit: splits share procedure '" + q.procedure_id + "'");
        }
    }

    AuditReport report;
    report.dataset_path = dataset_path;
    report.record_count = static_cast<std::int64_t>(dataset.size());
    report.probe_seed = cfg.seed;
    report.nchoices = static_cast<int>(dataset.front().choices.size());

    const auto pos = answer_position_histogram(dataset);
    report.position_histogram = pos.counts;
    report.position_chi_square = pos.chi_square;

    SkewTable skew = choice_frequency_skew(dataset);
    report.skew_js_divergence = skew.js_divergence;
    if (skew.entries.size() > top_skew_entries) skew.entries.resize(top_skew_entries);
    report.top_skew = std::move(skew.entries);

    report.probe_accuracy["choice_only"] = run_probe_choice_only(train, val, table, cfg);
    const ProbeResult hasty = run_probe_hasty(val, table);
    report.probe_accuracy["hasty"] = hasty.accuracy;
    report.hasty_skipped = hasty.skipped;
    const ProbeResult ctx = run_probe_context(val, table);
    report.probe_accuracy["context"] = ctx.accuracy;
    report.context_skipped = ctx.skipped;
    report.context_evaluated = ctx.evaluated;

    if (model) report.coverage = cluster_coverage(dataset, *model, table);
    return report;
}

struct ComparisonRow {
    std::string name;
    double before = 0.0;
    double after = 0.0;
    double delta = 0.0;
};

struct ReportComparison {
    std::vector<ComparisonRow> probes;
    std::vector<ComparisonRow> statistics;
};

inline ReportComparison compare_reports(const AuditReport& before, const AuditReport& after) {
    std::vector<std::string> before_keys;
    std::vector<std::string> after_keys;
    for (const auto& [k, v] : before.probe_accuracy) before_keys.push_back(k);
    for (const auto& [k, v] : after.probe_accuracy) after_keys.push_back(k);
    if (before_keys != after_keys) {
        throw std::runtime_error("compare_reports: probe sets differ between reports");
    }
    ReportComparison cmp;
    const double chance = 1.0 / static_cast<double>(before.nchoices);
    cmp.probes.push_back({"chance", chance, chance, 0.0});
    for (const auto& [name, acc] : before.probe_accuracy) {
        const double a = after.probe_accuracy.at(name);
        cmp.probes.push_back({name, acc, a, a - acc});
    }
    cmp.statistics.push_back({"position_chi_square", before.position_chi_square,
                              after.position_chi_square,
                              after.position_chi_square - before.position_chi_square});
    cmp.statistics.push_back({"skew_js_divergence", before.skew_js_divergence, after.skew_js_divergence,
                              after.skew_js_divergence - before.skew_js_divergence});
    if (before.coverage && after.coverage) {
        cmp.statistics.push_back({"coverage_entropy", before.coverage->normalized_entropy,
                                  after.coverage->normalized_entropy,
                                  after.coverage->normalized_entropy - before.coverage->normalized_entropy});
    }
    return cmp;
}

// ---------------------------------------------------------------------------
// Rendering and serialization
// ---------------------------------------------------------------------------

inline std::string render_report_text(const AuditReport& r) {
    std::ostringstream out;
    out << "dataset: " << r.dataset_path << " (" << r.record_count << " records, probe seed "
        << r.probe_seed << ")\n";
    char buf[64];
    out << "probe accuracy (val):\n";
    std::snprintf(buf, sizeof(buf), "  %-22s %7.4f\n", "chance",
                  1.0 / static_cast<double>(r.nchoices));
    out << buf;
    for (const auto& [name, acc] : r.probe_accuracy) {
        std::snprintf(buf, sizeof(buf), "  %-22s %7.4f\n", name.c_str(), acc);
        out << buf;
    }
    out << "answer positions:";
    for (std::int64_t c : r.position_histogram) out << ' ' << c;
    std::snprintf(buf, sizeof(buf), " (chi^2 %.4f)\n", r.position_chi_square);
    out << buf;
    std::snprintf(buf, sizeof(buf), "token skew JS divergence: %.6f\n", r.skew_js_divergence);
    out << buf;
    if (!r.top_skew.empty()) {
        out << "top skewed tokens:";
        const std::size_t n = std::min<std::size_t>(8, r.top_skew.size());
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), " %s(%+.2f)", r.top_skew[i].token.c_str(),
                          r.top_skew[i].log_odds);
            out << buf;
        }
        out << '\n';
    }
    if (r.coverage) {
        std::snprintf(buf, sizeof(buf), "cluster coverage entropy: %.4f\n",
                      r.coverage->normalized_entropy);
        out << buf;
    }
    return out.str();
}

inline std::string render_comparison_text(const ReportComparison& cmp) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-24s %10s %10s %10s\n", "probe", "before", "after", "delta");
    out << buf;
    for (const auto& row : cmp.probes) {
        std::snprintf(buf, sizeof(buf), "%-24s %10.4f %10.4f %+10.4f\n", row.name.c_str(), row.before,
                      row.after, row.delta);
        out << buf;
    }
    for (const auto& row : cmp.statistics) {
        std::snprintf(buf, sizeof(buf), "%-24s %10.4f %10.4f %+10.4f\n", row.name.c_str(), row.before,
                      row.after, row.delta);
        out << buf;
    }
    return out.str();
}

inline nlohmann::json to_json(const AuditReport& r) {
    nlohmann::json probes = nlohmann::json::object();
    for (const auto& [name, acc] : r.probe_accuracy) probes[name] = acc;
    nlohmann::json skew = nlohmann::json::array();
    for (const auto& e : r.top_skew) {
        skew.push_back({{"token", e.token},
                        {"log_odds", e.log_odds},
                        {"count_correct", e.count_correct},
                        {"count_incorrect", e.count_incorrect}});
    }
    nlohmann::json j{{"dataset", {{"path", r.dataset_path}, {"records", r.record_count}, {"probe_seed", r.probe_seed}}},
                     {"nchoices", r.nchoices},
                     {"probes", std::move(probes)},
                     {"hasty_skipped", r.hasty_skipped},
                     {"context_skipped", r.context_skipped},
                     {"context_evaluated", r.context_evaluated},
                     {"position_histogram", r.position_histogram},
                     {"position_chi_square", r.position_chi_square},
                     {"skew_js_divergence", r.skew_js_divergence},
                     {"top_skew", std::move(skew)}};
    if (r.coverage) {
        j["cluster_coverage"] = {{"histogram", r.coverage->histogram},
                                 {"normalized_entropy", r.coverage->normalized_entropy}};
    }
    return j;
}

inline AuditReport report_from_json(const nlohmann::json& j) {
    AuditReport r;
    r.dataset_path = j.at("dataset").at("path").get<std::string>();
    r.record_count = j.at("dataset").at("records").get<std::int64_t>();
    r.probe_seed = j.at("dataset").at("probe_seed").get<std::uint64_t>();
    r.nchoices = j.at("nchoices").get<int>();
    for (const auto& [name, acc] : j.at("probes").items()) {
        r.probe_accuracy[name] = acc.get<double>();
    }
    r.hasty_skipped = j.value("hasty_skipped", std::int64_t{0});
    r.context_skipped = j.value("context_skipped", std::int64_t{0});
    r.context_evaluated = j.value("context_evaluated", std::int64_t{0});
    r.position_histogram = j.at("position_histogram").get<std::vector<std::int64_t>>();
    r.position_chi_square = j.at("position_chi_square").get<double>();
    r.skew_js_divergence = j.at("skew_js_divergence").get<double>();
    for (const auto& e : j.at("top_skew")) {
        r.top_skew.push_back({e.at("token").get<std::string>(), e.at("log_odds").get<double>(),
                              e.at("count_correct").get<std::int64_t>(),
                              e.at("count_incorrect").get<std::int64_t>()});
    }
    if (j.contains("cluster_coverage")) {
        ClusterCoverage cov;
        cov.histogram = j.at("cluster_coverage").at("histogram").get<std::vector<std::int64_t>>();
        cov.normalized_entropy = j.at("cluster_coverage").at("normalized_entropy").get<double>();
        r.coverage = std::move(cov);
    }
    return r;
}

inline void write_audit_report(const std::string& path, const AuditReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report file: " + path);
    out << to_json(r).dump(2) << '\n';
}

inline AuditReport load_audit_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report file: " + path);
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

}  // namespace clozeqa
