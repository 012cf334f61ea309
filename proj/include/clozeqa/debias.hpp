#pragma once

#include "clozeqa/clozegen.hpp"
#include "clozeqa/geometry.hpp"
#include "clozeqa/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace clozeqa {

struct DebiasConfig {
    std::optional<int> budget;      // beta; computed from demand when unset
    std::optional<int> n_clusters;  // default max(2, floor(sqrt(U)))
    int nchoices = 4;
    int knn_k = 100;
    int min_steps = 6;
    int max_resamples = 100;  // bounded stand-in for Algorithm 1's unbounded retry
    int kmeans_max_iters = 100;
    std::uint64_t seed = 1;
};

struct BudgetLedger {
    int beta = 0;
    std::int64_t demand = 0;
    bool feasibility_warning = false;         // beta * k < demand
    std::vector<int> remaining;               // per cluster, never negative
    std::vector<std::int64_t> picks;          // per cluster, for reporting
    std::vector<std::int64_t> overflow;       // budget-ignoring picks per cluster
    std::int64_t overflow_count = 0;
};

// Every cluster gets beta; unset beta defaults to ceil(1.2 * demand / k),
// which is feasible under a perfectly balanced pick distribution.
inline BudgetLedger build_budget(const ClusterModel& model, const DebiasConfig& cfg,
                                 std::int64_t demand) {
    if (cfg.budget && *cfg.budget <= 0) {
        throw std::invalid_argument("build_budget: budget must be positive");
    }
    BudgetLedger ledger;
    ledger.demand = demand;
    if (cfg.budget) {
        ledger.beta = *cfg.budget;
    } else {
        ledger.beta = static_cast<int>(
            std::ceil(1.2 * static_cast<double>(demand) / static_cast<double>(model.k)));
        if (ledger.beta < 1) ledger.beta = 1;
    }
    ledger.feasibility_warning =
        static_cast<std::int64_t>(ledger.beta) * model.k < demand;
    ledger.remaining.assign(static_cast<std::size_t>(model.k), ledger.beta);
    ledger.picks.assign(static_cast<std::size_t>(model.k), 0);
    ledger.overflow.assign(static_cast<std::size_t>(model.k), 0);
    return ledger;
}

// Raised when a question's eligible set stays too small after the expand-k
// retry; the caller reports and skips that question.
struct SampleSkipped : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rewrites one question's distractors under the cluster budgets. The pool
// must contain every step title of both splits (Algorithm 1's step_titles),
// with the cluster model fitted on it.
inline ClozeQuestion debias_sample(const ClozeQuestion& q, const PointSet& pool,
                                   const ClusterModel& model, BudgetLedger& ledger,
                                   const DebiasConfig& cfg, Rng& rng) {
    if (static_cast<int>(q.choices.size()) != cfg.nchoices) {
        throw std::runtime_error("debias_sample: choice count mismatch in '" + q.qid + "'");
    }
    if (q.answer_index < 0 || q.answer_index >= static_cast<int>(q.choices.size())) {
        throw std::runtime_error("debias_sample: invalid answer_index in '" + q.qid + "'");
    }
    const std::string& correct = q.choices[static_cast<std::size_t>(q.answer_index)];
    const int query_id = pool.find(correct);
    if (query_id < 0) {
        throw std::runtime_error("debias_sample: correct answer '" + correct + "' missing from title pool");
    }
    const auto query = pool.vec(query_id);

    auto eligible_for = [&](int k) {
        const int kk = std::min(k, static_cast<int>(pool.size()));
        std::vector<int> kept = adaptive_filter(knn_query(pool, query, kk));
        std::erase_if(kept, [&](int id) { return pool.titles[static_cast<std::size_t>(id)] == correct; });
        return kept;
    };
    std::vector<int> eligible = eligible_for(cfg.knn_k);
    const int need = cfg.nchoices - 1;
    if (static_cast<int>(eligible.size()) < need) eligible = eligible_for(cfg.knn_k * 2);
    if (static_cast<int>(eligible.size()) < need) {
        throw SampleSkipped("debias_sample: eligible set below nchoices-1 for '" + q.qid + "'");
    }

    auto cluster_of = [&](int id) { return model.assignment[static_cast<std::size_t>(id)]; };

    std::vector<int> chosen;
    chosen.reserve(static_cast<std::size_t>(need));
    for (int pick = 0; pick < need; ++pick) {
        std::vector<int> candidates;
        candidates.reserve(eligible.size());
        for (int id : eligible) {
            if (std::find(chosen.begin(), chosen.end(), id) == chosen.end()) candidates.push_back(id);
        }
        int selected = -1;
        bool overflowed = false;
        // One initial draw plus up to max_resamples budget-blocked redraws.
        for (int attempt = 0; attempt <= cfg.max_resamples; ++attempt) {
            const int id = candidates[rng.index(candidates.size())];
            if (ledger.remaining[static_cast<std::size_t>(cluster_of(id))] > 0) {
                selected = id;
                break;
            }
        }
        if (selected < 0) {
            // Retries exhausted: deterministic fallback to the candidate whose
            // cluster holds the most remaining budget.
            int best_budget = 0;
            for (int id : candidates) {
                best_budget = std::max(best_budget, ledger.remaining[static_cast<std::size_t>(cluster_of(id))]);
            }
            if (best_budget > 0) {
                for (int id : candidates) {
                    const int c = cluster_of(id);
                    if (ledger.remaining[static_cast<std::size_t>(c)] != best_budget) continue;
                    if (selected < 0 || c < cluster_of(selected) ||
                        (c == cluster_of(selected) && id < selected)) {
                        selected = id;
                    }
                }
            } else {
                // Every eligible cluster exhausted: budget-ignoring pick.
                selected = candidates[rng.index(candidates.size())];
                overflowed = true;
            }
        }
        const int c = cluster_of(selected);
        if (overflowed) {
            ++ledger.overflow[static_cast<std::size_t>(c)];
            ++ledger.overflow_count;
        } else {
            --ledger.remaining[static_cast<std::size_t>(c)];
        }
        ++ledger.picks[static_cast<std::size_t>(c)];
        chosen.push_back(selected);
    }

    ClozeQuestion out = q;
    out.choices.clear();
    out.choices.reserve(static_cast<std::size_t>(cfg.nchoices));
    for (int i = 0, d = 0; i < cfg.nchoices; ++i) {
        if (i == q.answer_index) {
            out.choices.push_back(correct);
        } else {
            out.choices.push_back(pool.titles[static_cast<std::size_t>(chosen[static_cast<std::size_t>(d++)])]);
        }
    }
    return out;
}

struct SplitDebiasStats {
    std::int64_t input_questions = 0;
    std::int64_t dropped_min_steps = 0;
    std::int64_t skipped_sampling = 0;
    std::int64_t output_questions = 0;
    std::int64_t demand = 0;
    int beta = 0;
    bool feasibility_warning = false;
    std::int64_t overflow_count = 0;
    std::vector<std::int64_t> picks;     // per cluster
    std::vector<std::int64_t> overflow;  // per cluster
};

struct DebiasReport {
    std::int64_t pool_size = 0;  // unique titles across both splits
    int n_clusters = 0;
    SplitDebiasStats train;
    SplitDebiasStats val;
};

struct DebiasOutcome {
    std::vector<ClozeQuestion> train;
    std::vector<ClozeQuestion> val;
    DebiasReport report;
    ClusterModel model;  // shared over both splits; reusable for coverage audits
};

// Algorithm wiring: drop short-procedure questions, build one title pool and
// cluster model over both splits, then rewrite each split under its own
// demand-sized ledger.
inline DebiasOutcome debias_dataset(const std::vector<ClozeQuestion>& train,
                                    const std::vector<ClozeQuestion>& val,
                                    const EmbeddingTable& table, const DebiasConfig& cfg) {
    if (cfg.nchoices < 2) throw std::invalid_argument("debias: nchoices must be >= 2");
    if (cfg.max_resamples < 1) throw std::invalid_argument("debias: max_resamples must be >= 1");
    if (cfg.min_steps < 0) throw std::invalid_argument("debias: min_steps must be >= 0");

    std::vector<std::string> titles;
    for (const auto* split : {&train, &val}) {
        for (const auto& q : *split) {
            for (const auto& t : q.question) {
                if (t != kPlaceholder) titles.push_back(t);
            }
            for (const auto& c : q.choices) titles.push_back(c);
        }
    }
    PointSet pool = build_point_set(titles, table);
    if (pool.size() < 2) throw std::runtime_error("debias: need at least two distinct titles");

    int k = cfg.n_clusters ? *cfg.n_clusters
                           : std::max(2, static_cast<int>(std::floor(std::sqrt(static_cast<double>(pool.size())))));
    if (cfg.n_clusters && (*cfg.n_clusters < 2 || *cfg.n_clusters > static_cast<int>(pool.size()))) {
        throw std::invalid_argument("debias: n_clusters out of range");
    }
    k = std::min(k, static_cast<int>(pool.size()));

    KMeansResult km = kmeans_fit(pool, k, cfg.kmeans_max_iters, splitmix64(cfg.seed ^ hash_tag("debias-kmeans")));

    DebiasOutcome outcome;
    outcome.report.pool_size = static_cast<std::int64_t>(pool.size());
    outcome.report.n_clusters = k;

    auto run_split = [&](const std::vector<ClozeQuestion>& in, std::vector<ClozeQuestion>& out,
                         SplitDebiasStats& stats, const char* tag) {
        stats.input_questions = static_cast<std::int64_t>(in.size());
        std::vector<const ClozeQuestion*> survivors;
        for (const auto& q : in) {
            if (static_cast<int>(q.context.size()) < cfg.min_steps) {
                ++stats.dropped_min_steps;
            } else {
                survivors.push_back(&q);
            }
        }
        stats.demand = static_cast<std::int64_t>(survivors.size()) * (cfg.nchoices - 1);
        BudgetLedger ledger = build_budget(km.model, cfg, stats.demand);
        stats.beta = ledger.beta;
        stats.feasibility_warning = ledger.feasibility_warning;
        Rng rng = Rng::derive(cfg.seed, std::string("debias#") + tag);
        for (const ClozeQuestion* q : survivors) {
            try {
                out.push_back(debias_sample(*q, pool, km.model, ledger, cfg, rng));
            } catch (const SampleSkipped&) {
                ++stats.skipped_sampling;
            }
        }
        stats.output_questions = static_cast<std::int64_t>(out.size());
        stats.overflow_count = ledger.overflow_count;
        stats.picks = std::move(ledger.picks);
        stats.overflow = std::move(ledger.overflow);
    };

    run_split(train, outcome.train, outcome.report.train, "train");
    run_split(val, outcome.val, outcome.report.val, "val");

    if (outcome.train.empty() && outcome.val.empty()) {
        throw std::runtime_error("debias: no questions survived");
    }
    outcome.model = std::move(km.model);
    return outcome;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SplitDebiasStats& s) {
    return {{"input_questions", s.input_questions},
            {"dropped_min_steps", s.dropped_min_steps},
            {"skipped_sampling", s.skipped_sampling},
            {"output_questions", s.output_questions},
            {"demand", s.demand},
            {"beta", s.beta},
            {"feasibility_warning", s.feasibility_warning},
            {"overflow_count", s.overflow_count},
            {"picks_per_cluster", s.picks},
            {"overflow_per_cluster", s.overflow}};
}

inline nlohmann::json to_json(const DebiasReport& r) {
    return {{"pool_size", r.pool_size},
            {"n_clusters", r.n_clusters},
            {"train", to_json(r.train)},
            {"val", to_json(r.val)}};
}

inline void write_debias_report(const std::string& path, const DebiasReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report file: " + path);
    out << to_json(r).dump(2) << '\n';
}

inline std::string summarize(const DebiasReport& r) {
    auto line = [](const char* name, const SplitDebiasStats& s) {
        std::string msg = std::string(name) + ": " + std::to_string(s.input_questions) + " in, " +
                          std::to_string(s.output_questions) + " out, " +
                          std::to_string(s.dropped_min_steps) + " dropped (min_steps), " +
                          std::to_string(s.skipped_sampling) + " skipped, beta=" + std::to_string(s.beta) +
                          ", overflow=" + std::to_string(s.overflow_count);
        if (s.feasibility_warning) msg += " [warning: beta*k < demand]";
        return msg;
    };
    return "pool=" + std::to_string(r.pool_size) + " titles, clusters=" + std::to_string(r.n_clusters) +
           "\n" + line("train", r.train) + "\n" + line("val", r.val) + "\n";
}

}  // namespace clozeqa
