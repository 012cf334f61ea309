#pragma once

#include "clozeqa/embeddings.hpp"

#include <json.hpp>

#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace clozeqa {

enum class Split { train, val };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    throw std::runtime_error("invalid split value '" + std::string(s) + "'");
}

struct Step {
    std::string title;
    std::string text;
    std::vector<std::string> images;  // opaque references, never dereferenced
};

struct Procedure {
    std::string id;
    std::string category;
    std::string title;
    std::vector<Step> steps;
    Split split = Split::train;
};

struct FilterConfig {
    int min_steps = 3;
    int max_steps = 25;
    double min_ascii_ratio = 0.9;
    bool require_text = true;
    bool require_images = true;
};

struct SplitStats {
    std::int64_t n_projects = 0;
    double avg_steps = 0.0;
    double avg_tokens_titles = 0.0;        // step-title tokens per project
    double avg_tokens_descriptions = 0.0;  // description tokens per project
    double avg_images = 0.0;
};

struct CorpusStats {
    SplitStats train;
    SplitStats val;
};

struct Rejection {
    std::string id;
    std::string reason;  // one of: step_count, no_text, no_images, ascii_ratio
};

struct FilterOutcome {
    std::vector<Procedure> kept;
    std::vector<Rejection> rejections;
};

namespace detail {

inline bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Length of a leading step-number pattern in an already lowercased,
// whitespace-collapsed string; 0 when the prefix is content. The pattern is
// optional "step", digits, optional one separator among ":.)-", ending at a
// word boundary — so "2x4" and "3.5" survive.
inline std::size_t numbering_prefix_len(const std::string& s) {
    std::size_t i = 0;
    if (s.rfind("step", 0) == 0) {
        std::size_t j = 4;
        if (j < s.size() && s[j] == ' ') ++j;
        if (j < s.size() && digit(s[j])) i = j;
    }
    if (i == 0 && (s.empty() || !digit(s[0]))) return 0;
    std::size_t d = i;
    while (d < s.size() && digit(s[d])) ++d;
    std::size_t p = d;
    if (p < s.size() && s[p] == ' ') ++p;
    if (p < s.size() && (s[p] == ':' || s[p] == '.' || s[p] == ')' || s[p] == '-')) {
        const std::size_t q = p + 1;
        if (q == s.size()) return q;
        if (s[q] == ' ') return q + 1;
    }
    if (d == s.size()) return d;
    if (s[d] == ' ') return d + 1;
    return 0;
}

}  // namespace detail

// Lowercase; drop non-ASCII bytes; strip leading step-number patterns;
// collapse whitespace. Idempotent; may return "".
inline std::string normalize_title(std::string_view raw) {
    std::string s;
    s.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (c >= 0x80) continue;  // drop non-ASCII
        if (std::isspace(c) || c < 0x20) {
            pending_space = true;
            continue;
        }
        if (pending_space && !s.empty()) s.push_back(' ');
        pending_space = false;
        s.push_back(static_cast<char>(std::tolower(c)));
    }
    // Repeated stripping keeps the result stable under re-normalization.
    for (std::size_t n = detail::numbering_prefix_len(s); n > 0; n = detail::numbering_prefix_len(s)) {
        s.erase(0, n);
    }
    return s;
}

namespace detail {

inline std::string require_string(const nlohmann::json& j, const char* field, std::int64_t line) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) {
        throw std::runtime_error("corpus line " + std::to_string(line) + ": missing or non-string '" +
                                 field + "' field");
    }
    return it->get<std::string>();
}

}  // namespace detail

// One JSON record per non-empty line: id, category, title, split, steps.
// Unknown fields are ignored. File order and step order are preserved.
inline std::vector<Procedure> parse_corpus(std::istream& in) {
    std::vector<Procedure> procs;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) + ": malformed JSON record");
        }
        Procedure p;
        p.id = detail::require_string(j, "id", line_no);
        if (p.id.empty()) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) + ": empty id");
        }
        if (!seen_ids.insert(p.id).second) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) + ": duplicate procedure id '" +
                                     p.id + "'");
        }
        p.category = j.value("category", std::string{});
        p.title = j.value("title", std::string{});
        try {
            p.split = parse_split(detail::require_string(j, "split", line_no));
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        auto steps_it = j.find("steps");
        if (steps_it == j.end() || !steps_it->is_array()) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                     ": missing or non-array 'steps' field");
        }
        for (const auto& sj : *steps_it) {
            if (!sj.is_object()) {
                throw std::runtime_error("corpus line " + std::to_string(line_no) + ": step is not an object");
            }
            Step step;
            step.title = detail::require_string(sj, "title", line_no);
            step.text = sj.value("text", std::string{});
            if (auto imgs = sj.find("images"); imgs != sj.end()) {
                if (!imgs->is_array()) {
                    throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                             ": step 'images' is not an array");
                }
                for (const auto& img : *imgs) {
                    if (!img.is_string()) {
                        throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                                 ": image reference is not a string");
                    }
                    step.images.push_back(img.get<std::string>());
                }
            }
            p.steps.push_back(std::move(step));
        }
        procs.push_back(std::move(p));
    }
    return procs;
}

inline std::vector<Procedure> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    return parse_corpus(in);
}

inline nlohmann::json to_json(const Procedure& p) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : p.steps) {
        steps.push_back({{"title", s.title}, {"text", s.text}, {"images", s.images}});
    }
    return {{"id", p.id},
            {"category", p.category},
            {"title", p.title},
            {"split", to_string(p.split)},
            {"steps", std::move(steps)}};
}

inline void write_corpus(std::ostream& out, const std::vector<Procedure>& procs) {
    for (const auto& p : procs) out << to_json(p).dump() << '\n';
}

inline void write_corpus(const std::string& path, const std::vector<Procedure>& procs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    write_corpus(out, procs);
}

namespace detail {

inline double ascii_ratio(const Procedure& p) {
    std::int64_t total = 0;
    std::int64_t ascii = 0;
    auto count = [&](std::string_view s) {
        total += static_cast<std::int64_t>(s.size());
        for (unsigned char c : s) {
            if (c < 0x80) ++ascii;
        }
    };
    count(p.title);
    for (const auto& s : p.steps) {
        count(s.title);
        count(s.text);
    }
    return total == 0 ? 1.0 : static_cast<double>(ascii) / static_cast<double>(total);
}

}  // namespace detail

// Keeps procedures passing every enabled predicate; one rejection record per
// dropped procedure, tagged with the first failing predicate.
inline FilterOutcome filter_corpus(const std::vector<Procedure>& procs, const FilterConfig& cfg) {
    if (cfg.min_steps < 1 || cfg.min_steps > cfg.max_steps) {
        throw std::invalid_argument("filter_corpus: require 1 <= min_steps <= max_steps");
    }
    FilterOutcome out;
    for (const auto& p : procs) {
        const int n = static_cast<int>(p.steps.size());
        if (n < cfg.min_steps || n > cfg.max_steps) {
            out.rejections.push_back({p.id, "step_count"});
            continue;
        }
        if (cfg.require_text) {
            bool all_text = true;
            for (const auto& s : p.steps) {
                if (s.text.empty()) {
                    all_text = false;
                    break;
                }
            }
            if (!all_text) {
                out.rejections.push_back({p.id, "no_text"});
                continue;
            }
        }
        if (cfg.require_images) {
            bool any_image = false;
            for (const auto& s : p.steps) {
                if (!s.images.empty()) {
                    any_image = true;
                    break;
                }
            }
            if (!any_image) {
                out.rejections.push_back({p.id, "no_images"});
                continue;
            }
        }
        if (detail::ascii_ratio(p) < cfg.min_ascii_ratio) {
            out.rejections.push_back({p.id, "ascii_ratio"});
            continue;
        }
        out.kept.push_back(p);
    }
    return out;
}

inline CorpusStats corpus_stats(const std::vector<Procedure>& procs) {
    if (procs.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
    CorpusStats stats;
    std::int64_t steps[2] = {0, 0};
    std::int64_t title_tokens[2] = {0, 0};
    std::int64_t descr_tokens[2] = {0, 0};
    std::int64_t images[2] = {0, 0};
    std::int64_t projects[2] = {0, 0};
    for (const auto& p : procs) {
        const int s = p.split == Split::train ? 0 : 1;
        ++projects[s];
        steps[s] += static_cast<std::int64_t>(p.steps.size());
        for (const auto& step : p.steps) {
            title_tokens[s] += static_cast<std::int64_t>(tokenize(step.title).size());
            descr_tokens[s] += static_cast<std::int64_t>(tokenize(step.text).size());
            images[s] += static_cast<std::int64_t>(step.images.size());
        }
    }
    auto fill = [&](SplitStats& out, int s) {
        out.n_projects = projects[s];
        if (projects[s] == 0) return;
        const double n = static_cast<double>(projects[s]);
        out.avg_steps = static_cast<double>(steps[s]) / n;
        out.avg_tokens_titles = static_cast<double>(title_tokens[s]) / n;
        out.avg_tokens_descriptions = static_cast<double>(descr_tokens[s]) / n;
        out.avg_images = static_cast<double>(images[s]) / n;
    };
    fill(stats.train, 0);
    fill(stats.val, 1);
    return stats;
}

}  // namespace clozeqa
