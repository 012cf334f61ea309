#pragma once

#include "clozeqa/corpus.hpp"
#include "clozeqa/geometry.hpp"
#include "clozeqa/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace clozeqa {

inline constexpr const char* kPlaceholder = "@placeholder";

struct GenerationConfig {
    int window = 4;  // candidate list size
    int nchoices = 4;
    int knn_k = 100;
    int questions_per_procedure = 2;
    std::uint64_t seed = 1;

    void validate() const {
        if (window < 2) throw std::invalid_argument("generation: window must be >= 2");
        if (nchoices < 2) throw std::invalid_argument("generation: nchoices must be >= 2");
        if (knn_k < nchoices) throw std::invalid_argument("generation: knn_k must be >= nchoices");
        if (questions_per_procedure < 1) {
            throw std::invalid_argument("generation: questions_per_procedure must be >= 1");
        }
    }
};

struct ContextStep {
    std::string text;
    std::vector<std::string> images;
};

struct ClozeQuestion {
    std::string qid;  // "<procedure_id>#<start>#<missing_offset>"
    std::string procedure_id;
    Split split = Split::train;
    std::vector<ContextStep> context;   // every step, titles withheld
    std::vector<std::string> question;  // window titles, one replaced by the placeholder
    int placeholder_index = -1;
    std::vector<std::string> choices;
    int answer_index = -1;
};

inline std::string make_qid(const std::string& procedure_id, int start, int missing_offset) {
    return procedure_id + "#" + std::to_string(start) + "#" + std::to_string(missing_offset);
}

struct QidParts {
    std::string procedure_id;
    int start = -1;
    int missing_offset = -1;
};

inline std::optional<QidParts> parse_qid(const std::string& qid) {
    const auto last = qid.rfind('#');
    if (last == std::string::npos || last == 0) return std::nullopt;
    const auto mid = qid.rfind('#', last - 1);
    if (mid == std::string::npos || mid == 0) return std::nullopt;
    QidParts parts;
    parts.procedure_id = qid.substr(0, mid);
    try {
        std::size_t used = 0;
        const std::string s1 = qid.substr(mid + 1, last - mid - 1);
        parts.start = std::stoi(s1, &used);
        if (used != s1.size()) return std::nullopt;
        const std::string s2 = qid.substr(last + 1);
        parts.missing_offset = std::stoi(s2, &used);
        if (used != s2.size()) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (parts.start < 0 || parts.missing_offset < 0) return std::nullopt;
    return parts;
}

struct WindowPick {
    int start;
    int missing_offset;
};

// Up to questions_per_procedure distinct window starts, uniform without
// replacement over [0, |steps| - window]; one uniform missing offset each.
// Too few steps -> empty (the procedure is skipped).
inline std::vector<WindowPick> select_windows(const Procedure& proc, const GenerationConfig& cfg,
                                              Rng& rng) {
    const int n = static_cast<int>(proc.steps.size());
    if (n < cfg.window) return {};
    const std::size_t n_starts = static_cast<std::size_t>(n - cfg.window + 1);
    const auto starts = rng.sample_without_replacement(
        n_starts, static_cast<std::size_t>(cfg.questions_per_procedure));
    std::vector<WindowPick> picks;
    picks.reserve(starts.size());
    for (std::size_t s : starts) {
        picks.push_back({static_cast<int>(s), static_cast<int>(rng.index(static_cast<std::size_t>(cfg.window)))});
    }
    std::sort(picks.begin(), picks.end(),
              [](const WindowPick& a, const WindowPick& b) { return a.start < b.start; });
    return picks;
}

// The biased RecipeQA-style distractor sampler: kNN around the correct
// answer, keep the far side of the neighborhood, sample without replacement.
// `pool` must not contain the correct title itself.
inline std::vector<int> sample_distractors_biased(std::span<const double> correct_embedding,
                                                  const PointSet& pool, const GenerationConfig& cfg,
                                                  Rng& rng) {
    const int need = cfg.nchoices - 1;
    if (static_cast<int>(pool.size()) < need) {
        throw std::runtime_error("sample_distractors_biased: pool smaller than nchoices-1");
    }
    auto kept_for = [&](int k) {
        const int kk = std::min(k, static_cast<int>(pool.size()));
        return adaptive_filter(knn_query(pool, correct_embedding, kk));
    };
    std::vector<int> kept = kept_for(cfg.knn_k);
    if (static_cast<int>(kept.size()) < need) {
        kept = kept_for(cfg.knn_k * 2);  // expand the neighborhood once
    }

    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(need));
    const auto order = rng.sample_without_replacement(kept.size(), static_cast<std::size_t>(need));
    for (std::size_t i : order) out.push_back(kept[i]);
    if (static_cast<int>(out.size()) < need) {
        // Still short: fill uniformly from pool titles not yet chosen.
        std::vector<int> remaining;
        remaining.reserve(pool.size());
        for (int id = 0; id < static_cast<int>(pool.size()); ++id) {
            if (std::find(out.begin(), out.end(), id) == out.end()) remaining.push_back(id);
        }
        const auto fill =
            rng.sample_without_replacement(remaining.size(), static_cast<std::size_t>(need) - out.size());
        for (std::size_t i : fill) out.push_back(remaining[i]);
    }
    return out;
}

// Inserts the correct title at a uniform position among the distractors.
inline std::pair<std::vector<std::string>, int> assemble_choices(const std::string& correct,
                                                                 const std::vector<std::string>& distractors,
                                                                 Rng& rng) {
    for (std::size_t i = 0; i < distractors.size(); ++i) {
        if (distractors[i] == correct) {
            throw std::invalid_argument("assemble_choices: distractor equals the correct title");
        }
        for (std::size_t j = i + 1; j < distractors.size(); ++j) {
            if (distractors[i] == distractors[j]) {
                throw std::invalid_argument("assemble_choices: duplicate distractor '" + distractors[i] + "'");
            }
        }
    }
    const int nchoices = static_cast<int>(distractors.size()) + 1;
    const int answer_index = static_cast<int>(rng.index(static_cast<std::size_t>(nchoices)));
    std::vector<std::string> choices;
    choices.reserve(static_cast<std::size_t>(nchoices));
    choices.insert(choices.end(), distractors.begin(), distractors.begin() + answer_index);
    choices.push_back(correct);
    choices.insert(choices.end(), distractors.begin() + answer_index, distractors.end());
    return {std::move(choices), answer_index};
}

struct GenerationOutcome {
    std::vector<ClozeQuestion> questions;
    std::int64_t skipped_procedures = 0;  // too short or unusable titles
    std::int64_t skipped_questions = 0;   // distractor sampling failures
};

// Full biased generation over a filtered corpus. Question randomness is
// derived from (seed, qid), so output is independent of evaluation order.
inline GenerationOutcome generate_dataset(const std::vector<Procedure>& corpus,
                                          const EmbeddingTable& table, const GenerationConfig& cfg) {
    cfg.validate();
    GenerationOutcome outcome;

    PointSet pools[2];
    for (const auto& proc : corpus) {
        const int s = proc.split == Split::train ? 0 : 1;
        for (const auto& step : proc.steps) {
            const std::string t = normalize_title(step.title);
            if (t.empty()) continue;
            if (pools[s].index.contains(t)) {
                ++pools[s].multiplicity[pools[s].index.at(t)];
            } else {
                pools[s].add(t, encode_text(table, t).vec);
            }
        }
    }

    for (const auto& proc : corpus) {
        std::vector<std::string> titles;
        titles.reserve(proc.steps.size());
        bool usable = true;
        for (const auto& step : proc.steps) {
            titles.push_back(normalize_title(step.title));
            if (titles.back().empty()) usable = false;
        }
        if (!usable || static_cast<int>(proc.steps.size()) < cfg.window) {
            ++outcome.skipped_procedures;
            continue;
        }

        Rng window_rng = Rng::derive(cfg.seed, proc.id + "#windows");
        const auto windows = select_windows(proc, cfg, window_rng);
        const PointSet& pool = pools[proc.split == Split::train ? 0 : 1];

        for (const auto& w : windows) {
            const std::string qid = make_qid(proc.id, w.start, w.missing_offset);
            Rng rng = Rng::derive(cfg.seed, qid);
            const std::string& correct = titles[static_cast<std::size_t>(w.start + w.missing_offset)];
            const PointSet reduced = pool.without(correct);
            std::vector<int> ids;
            try {
                ids = sample_distractors_biased(encode_text(table, correct).vec, reduced, cfg, rng);
            } catch (const std::runtime_error&) {
                ++outcome.skipped_questions;
                continue;
            }
            std::vector<std::string> distractors;
            distractors.reserve(ids.size());
            for (int id : ids) distractors.push_back(reduced.titles[static_cast<std::size_t>(id)]);

            ClozeQuestion q;
            q.qid = qid;
            q.procedure_id = proc.id;
            q.split = proc.split;
            for (const auto& step : proc.steps) q.context.push_back({step.text, step.images});
            for (int j = 0; j < cfg.window; ++j) {
                q.question.push_back(j == w.missing_offset ? kPlaceholder
                                                           : titles[static_cast<std::size_t>(w.start + j)]);
            }
            q.placeholder_index = w.missing_offset;
            auto [choices, answer_index] = assemble_choices(correct, distractors, rng);
            q.choices = std::move(choices);
            q.answer_index = answer_index;
            outcome.questions.push_back(std::move(q));
        }
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

// Machine-readable violation tokens; empty means the record is well-formed.
inline std::vector<std::string> validate_question(
    const ClozeQuestion& q, const std::unordered_map<std::string, const Procedure*>& corpus_by_id,
    int nchoices = 4) {
    std::vector<std::string> v;

    const auto parts = parse_qid(q.qid);
    if (!parts || parts->procedure_id != q.procedure_id) v.push_back("bad_qid");

    int placeholder_count = 0;
    for (const auto& t : q.question) {
        if (t == kPlaceholder) ++placeholder_count;
    }
    if (placeholder_count != 1) v.push_back("placeholder_count");
    if (q.placeholder_index < 0 || q.placeholder_index >= static_cast<int>(q.question.size()) ||
        q.question[static_cast<std::size_t>(q.placeholder_index)] != kPlaceholder) {
        v.push_back("placeholder_index");
    }
    if (static_cast<int>(q.choices.size()) != nchoices) v.push_back("choices_length");
    bool dup = false;
    for (std::size_t i = 0; i < q.choices.size() && !dup; ++i) {
        for (std::size_t j = i + 1; j < q.choices.size(); ++j) {
            if (q.choices[i] == q.choices[j]) {
                dup = true;
                break;
            }
        }
    }
    if (dup) v.push_back("duplicate_choice");
    if (q.answer_index < 0 || q.answer_index >= static_cast<int>(q.choices.size())) {
        v.push_back("answer_index_range");
    }
    for (const auto& t : q.question) {
        if (t == kPlaceholder) continue;
        if (t.empty() || normalize_title(t) != t) {
            v.push_back("numbering_indicator");
            break;
        }
    }
    for (const auto& t : q.choices) {
        if (t.empty() || normalize_title(t) != t) {
            v.push_back("numbering_indicator_choice");
            break;
        }
    }

    const auto it = corpus_by_id.find(q.procedure_id);
    if (it == corpus_by_id.end()) {
        v.push_back("unknown_procedure");
        return v;
    }
    const Procedure& proc = *it->second;
    if (proc.split != q.split) v.push_back("split_mismatch");
    if (q.context.size() != proc.steps.size()) v.push_back("context_length");
    if (parts) {
        const int start = parts->start;
        const int window = static_cast<int>(q.question.size());
        if (start + window > static_cast<int>(proc.steps.size())) {
            v.push_back("window_range");
        } else {
            for (int j = 0; j < window; ++j) {
                const std::string expect = normalize_title(proc.steps[static_cast<std::size_t>(start + j)].title);
                if (j == q.placeholder_index) {
                    if (q.answer_index >= 0 && q.answer_index < static_cast<int>(q.choices.size()) &&
                        q.choices[static_cast<std::size_t>(q.answer_index)] != expect) {
                        v.push_back("answer_mismatch");
                    }
                } else if (q.question[static_cast<std::size_t>(j)] != expect) {
                    v.push_back("window_mismatch");
                    break;
                }
            }
        }
        if (parts->missing_offset != q.placeholder_index) v.push_back("offset_mismatch");
    }
    return v;
}

inline std::unordered_map<std::string, const Procedure*> index_corpus(
    const std::vector<Procedure>& procs) {
    std::unordered_map<std::string, const Procedure*> by_id;
    for (const auto& p : procs) by_id.emplace(p.id, &p);
    return by_id;
}

// ---------------------------------------------------------------------------
// Dataset file: one question record per line, nlohmann-sorted keys.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ClozeQuestion& q) {
    nlohmann::json context = nlohmann::json::array();
    for (const auto& s : q.context) context.push_back({{"text", s.text}, {"images", s.images}});
    return {{"qid", q.qid},
            {"procedure_id", q.procedure_id},
            {"split", to_string(q.split)},
            {"context", std::move(context)},
            {"question", q.question},
            {"placeholder_index", q.placeholder_index},
            {"choices", q.choices},
            {"answer_index", q.answer_index}};
}

inline ClozeQuestion question_from_json(const nlohmann::json& j, std::int64_t line) {
    try {
        ClozeQuestion q;
        q.qid = j.at("qid").get<std::string>();
        q.procedure_id = j.at("procedure_id").get<std::string>();
        q.split = parse_split(j.at("split").get<std::string>());
        for (const auto& cj : j.at("context")) {
            ContextStep s;
            s.text = cj.at("text").get<std::string>();
            for (const auto& img : cj.value("images", nlohmann::json::array())) {
                s.images.push_back(img.get<std::string>());
            }
            q.context.push_back(std::move(s));
        }
        q.question = j.at("question").get<std::vector<std::string>>();
        q.placeholder_index = j.at("placeholder_index").get<int>();
        q.choices = j.at("choices").get<std::vector<std::string>>();
        q.answer_index = j.at("answer_index").get<int>();
        return q;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("dataset line " + std::to_string(line) + ": " + e.what());
    }
}

inline std::vector<ClozeQuestion> read_dataset(std::istream& in) {
    std::vector<ClozeQuestion> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw std::runtime_error("dataset line " + std::to_string(line_no) + ": malformed JSON record");
        }
        out.push_back(question_from_json(j, line_no));
    }
    return out;
}

inline std::vector<ClozeQuestion> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    return read_dataset(in);
}

inline void write_dataset(std::ostream& out, const std::vector<ClozeQuestion>& questions) {
    for (const auto& q : questions) out << to_json(q).dump() << '\n';
}

inline void write_dataset(const std::string& path, const std::vector<ClozeQuestion>& questions) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    write_dataset(out, questions);
}

}  // namespace clozeqa
