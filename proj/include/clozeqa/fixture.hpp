#pragma once

#include "clozeqa/corpus.hpp"
#include "clozeqa/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace clozeqa {

// Synthetic How-To corpus with the positional regularities the real corpora
// exhibit: first-step titles share one marker token ("gather"), last-step
// titles share another ("enjoy"), and a slice of middle titles reuses common
// phrasings verbatim across projects. Full ASCII; every procedure passes the
// default corpus filter.
struct FixtureConfig {
    int n_procedures = 600;
    double val_fraction = 0.15;
    double common_middle_fraction = 0.4;  // middle steps drawn from shared phrasings
    std::uint64_t seed = 1;
};

namespace fixture_detail {

struct Topic {
    const char* name;
    std::array<const char*, 4> nouns;
};

inline constexpr std::array<Topic, 8> kTopics{{
    {"shelf", {"shelf", "plank", "bracket", "panel"}},
    {"birdhouse", {"birdhouse", "perch", "roof piece", "nest box"}},
    {"ornament", {"ornament", "bauble", "ribbon loop", "topper"}},
    {"wreath", {"wreath", "bow", "pinecone", "twig bundle"}},
    {"bench", {"bench", "seat slat", "leg frame", "armrest"}},
    {"frame", {"frame", "mat board", "corner joint", "molding"}},
    {"lantern", {"lantern", "handle", "candle cup", "vent cap"}},
    {"planter", {"planter", "drain hole", "liner", "rim band"}},
}};

inline constexpr std::array<const char*, 12> kVerbs{"cut",   "sand", "drill", "paint",
                                                    "attach", "measure", "clamp", "screw",
                                                    "trim",  "align", "mark",  "stain"};

inline constexpr std::array<const char*, 8> kQualifiers{
    "carefully", "evenly", "firmly", "twice", "gently", "flush", "square", "smooth"};

// Middle-step phrasings repeated verbatim across projects; the choice bias
// the generator leaks rides on these and on the markers.
inline constexpr std::array<const char*, 32> kCommonMiddles{
    "sand the surface",      "apply the glue",        "check the fit",
    "measure everything twice", "drill the pilot holes", "clamp the pieces together",
    "apply the first coat",  "let it dry overnight",  "mark the cut lines",
    "trim the excess",       "smooth the edges",      "tighten all the screws",
    "wipe off the dust",     "test the alignment",    "apply the second coat",
    "fill the gaps",         "tape the edges",        "prime the surface",
    "set the spacing",       "square the corners",    "seal the finish",
    "buff the surface",      "drill the mounting holes", "glue the joints",
    "press the parts together", "touch up the paint", "check the level",
    "remove the clamps",     "clean the work area",   "dry fit the parts",
    "countersink the screws", "label the pieces"};

inline constexpr std::array<const char*, 4> kFirstMarkerForms{
    "gather the materials", "gather your tools", "gather the supplies", "gather everything you need"};

inline constexpr std::array<const char*, 4> kLastMarkerForms{
    "enjoy", "enjoy the result", "enjoy your work", "enjoy the finished piece"};

inline std::string title_case(const std::string& s) {
    std::string out = s;
    bool up = true;
    for (char& c : out) {
        if (c == ' ') {
            up = true;
        } else if (up) {
            c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            up = false;
        }
    }
    return out;
}

}  // namespace fixture_detail

inline std::vector<Procedure> pipeline_fixture(const FixtureConfig& cfg) {
    using namespace fixture_detail;
    Rng rng = Rng::derive(cfg.seed, "fixture");
    std::vector<Procedure> procs;
    procs.reserve(static_cast<std::size_t>(cfg.n_procedures));

    // Short procedures dominate, mirroring how marker titles end up as a
    // sizable share of window answers.
    const std::array<int, 7> lengths{6, 7, 8, 9, 10, 11, 12};
    const std::array<int, 7> weights{22, 20, 16, 12, 11, 10, 9};
    int weight_total = 0;
    for (int w : weights) weight_total += w;

    for (int pi = 0; pi < cfg.n_procedures; ++pi) {
        const Topic& topic = kTopics[rng.index(kTopics.size())];
        Procedure p;
        p.id = "proc-" + std::to_string(10000 + pi);
        p.category = topic.name;
        p.title = "how to make a " + std::string(topic.nouns[0]);
        p.split = rng.bernoulli(cfg.val_fraction) ? Split::val : Split::train;

        int n_steps = lengths.back();
        {
            int roll = static_cast<int>(rng.index(static_cast<std::size_t>(weight_total)));
            for (std::size_t li = 0; li < lengths.size(); ++li) {
                roll -= weights[li];
                if (roll < 0) {
                    n_steps = lengths[li];
                    break;
                }
            }
        }

        auto decorate = [&](std::string title) {
            // Raw corpus texture: occasional step numbering and Title Case,
            // both removed by normalization downstream.
            if (rng.bernoulli(0.5)) title = title_case(title);
            if (rng.bernoulli(0.3)) {
                title = "Step " + std::to_string(static_cast<int>(p.steps.size()) + 1) + ": " + title;
            }
            return title;
        };
        auto make_step = [&](const std::string& base_title) {
            Step s;
            const std::string noun = topic.nouns[rng.index(topic.nouns.size())];
            s.title = decorate(base_title);
            s.text = "in this step we " + base_title + " so the " + noun +
                     " comes together; work slowly and keep the " +
                     std::string(topic.nouns[0]) + " steady.";
            const int n_imgs = rng.int_in(1, 3);
            for (int ii = 0; ii < n_imgs; ++ii) {
                s.images.push_back("img://" + p.id + "/" + std::to_string(p.steps.size()) + "/" +
                                   std::to_string(ii) + ".jpg");
            }
            return s;
        };

        // First step: marker family, sometimes tied to the topic noun so the
        // marker titles sit inside the topic neighborhoods.
        {
            std::string t = kFirstMarkerForms[rng.index(kFirstMarkerForms.size())];
            if (rng.bernoulli(0.5)) {
                t = "gather the " + std::string(topic.nouns[rng.index(topic.nouns.size())]) + " parts";
            }
            p.steps.push_back(make_step(t));
        }
        for (int si = 1; si < n_steps - 1; ++si) {
            std::string t;
            if (rng.bernoulli(cfg.common_middle_fraction)) {
                t = kCommonMiddles[rng.index(kCommonMiddles.size())];
            } else {
                t = std::string(kVerbs[rng.index(kVerbs.size())]) + " the " +
                    std::string(topic.nouns[rng.index(topic.nouns.size())]);
                if (rng.bernoulli(0.1)) {
                    t += " " + std::string(kQualifiers[rng.index(kQualifiers.size())]);
                }
            }
            p.steps.push_back(make_step(t));
        }
        {
            std::string t = kLastMarkerForms[rng.index(kLastMarkerForms.size())];
            if (rng.bernoulli(0.5)) {
                t = "enjoy your new " + std::string(topic.nouns[rng.index(topic.nouns.size())]);
            }
            p.steps.push_back(make_step(t));
        }
        procs.push_back(std::move(p));
    }
    return procs;
}

}  // namespace clozeqa
