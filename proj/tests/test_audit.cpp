#include "clozeqa/audit.hpp"

#include "clozeqa/fixture.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace clozeqa;
using test_util::make_table;

namespace {

ClozeQuestion simple_question(const std::string& qid, std::vector<std::string> choices,
                              int answer_index, Split split = Split::val) {
    ClozeQuestion q;
    q.qid = qid;
    const auto parts = parse_qid(qid);
    q.procedure_id = parts ? parts->procedure_id : qid;
    q.split = split;
    q.context = {{"ctx0", {}}, {"ctx1", {}}, {"ctx2", {}}, {"ctx3", {}}};
    q.question = {"one", kPlaceholder, "two", "three"};
    q.placeholder_index = 1;
    q.choices = std::move(choices);
    q.answer_index = answer_index;
    return q;
}

}  // namespace

TEST_CASE("choice_frequency_skew ranks giveaway tokens") {
    SECTION("a marker token only in correct choices tops the table") {
        std::vector<ClozeQuestion> ds;
        for (int i = 0; i < 10; ++i) {
            ds.push_back(simple_question("p" + std::to_string(i) + "#0#1",
                                         {"enjoy the result", "cut wood", "sand wood", "glue wood"},
                                         0));
        }
        const auto table = choice_frequency_skew(ds);
        REQUIRE_FALSE(table.entries.empty());
        CHECK(table.entries.front().token == "enjoy");
        CHECK(table.entries.front().log_odds > 0.0);

        // Independent recount: "enjoy" appears 10 times among 30 correct
        // tokens, never among 60 incorrect; vocabulary is 7 distinct tokens
        // (enjoy, the, result, cut, sand, glue, wood).
        const double expect = std::log((10.0 + 1.0) / (30.0 + 7.0)) - std::log((0.0 + 1.0) / (60.0 + 7.0));
        CHECK(table.entries.front().count_correct == 10);
        CHECK(table.entries.front().count_incorrect == 0);
        CHECK(table.vocab_size == 7);
        CHECK(table.entries.front().log_odds == Catch::Approx(expect).margin(1e-12));
        CHECK(table.js_divergence > 0.0);
    }
    SECTION("identical correct and incorrect multisets have zero divergence") {
        std::vector<ClozeQuestion> ds;
        // answers rotate so each string is correct once and incorrect three
        // times out of four questions, with token multisets matching.
        const std::vector<std::string> base{"alpha", "beta", "gamma", "delta"};
        for (int i = 0; i < 4; ++i) {
            ds.push_back(simple_question("p" + std::to_string(i) + "#0#1", base, i));
            ds.push_back(simple_question("q" + std::to_string(i) + "#0#1", base, i));
            ds.push_back(simple_question("r" + std::to_string(i) + "#0#1", base, i));
        }
        const auto table = choice_frequency_skew(ds);
        CHECK(table.js_divergence == Catch::Approx(0.0).margin(1e-12));
        for (const auto& e : table.entries) {
            CHECK(e.log_odds == Catch::Approx(0.0).margin(1e-9));
        }
    }
    SECTION("swapping roles flips the sign of every entry") {
        // Two-choice questions make flipping answer_index an exact
        // correct/incorrect role swap.
        std::vector<ClozeQuestion> ds;
        for (int i = 0; i < 6; ++i) {
            ds.push_back(simple_question("p" + std::to_string(i) + "#0#1",
                                         {"enjoy it today", "cut the wood"}, i % 3 == 0 ? 0 : 1));
        }
        auto swapped = ds;
        for (auto& q : swapped) q.answer_index = 1 - q.answer_index;
        const auto a = choice_frequency_skew(ds);
        const auto b = choice_frequency_skew(swapped);
        for (const auto& ea : a.entries) {
            const auto it = std::find_if(b.entries.begin(), b.entries.end(),
                                         [&](const SkewEntry& eb) { return eb.token == ea.token; });
            REQUIRE(it != b.entries.end());
            CHECK(ea.log_odds == Catch::Approx(-it->log_odds).margin(1e-9));
        }
    }
    SECTION("empty dataset is an error") {
        CHECK_THROWS_AS(choice_frequency_skew({}), std::invalid_argument);
    }
}

TEST_CASE("answer_position_histogram computes chi-square against uniform") {
    SECTION("all answers at index zero") {
        std::vector<ClozeQuestion> ds;
        for (int i = 0; i < 100; ++i) {
            ds.push_back(simple_question("p" + std::to_string(i) + "#0#1",
                                         {"a", "b", "c", "d"}, 0));
        }
        const auto h = answer_position_histogram(ds);
        CHECK(h.counts == std::vector<std::int64_t>{100, 0, 0, 0});
        CHECK(h.chi_square == Catch::Approx(300.0));
    }
    SECTION("exactly uniform") {
        std::vector<ClozeQuestion> ds;
        for (int i = 0; i < 100; ++i) {
            ds.push_back(simple_question("p" + std::to_string(i) + "#0#1",
                                         {"a", "b", "c", "d"}, i % 4));
        }
        const auto h = answer_position_histogram(ds);
        CHECK(h.counts == std::vector<std::int64_t>{25, 25, 25, 25});
        CHECK(h.chi_square == Catch::Approx(0.0));
    }
    SECTION("near-uniform 26/24/25/25") {
        std::vector<ClozeQuestion> ds;
        auto add = [&](int idx, int n) {
            for (int i = 0; i < n; ++i) {
                ds.push_back(simple_question("p" + std::to_string(ds.size()) + "#0#1",
                                             {"a", "b", "c", "d"}, idx));
            }
        };
        add(0, 26);
        add(1, 24);
        add(2, 25);
        add(3, 25);
        const auto h = answer_position_histogram(ds);
        CHECK(h.chi_square == Catch::Approx(0.08));
    }
    SECTION("mixed choice counts are rejected") {
        std::vector<ClozeQuestion> ds{simple_question("p0#0#1", {"a", "b", "c", "d"}, 0),
                                      simple_question("p1#0#1", {"a", "b"}, 0)};
        CHECK_THROWS_AS(answer_position_histogram(ds), std::invalid_argument);
    }
}

TEST_CASE("cluster_coverage computes normalized entropy") {
    // Three well-separated token clusters; centroids on the axes.
    const auto table = make_table({
        {"r1", {1.0, 0.0, 0.0}},
        {"r2", {0.98, 0.199, 0.0}},
        {"g1", {0.0, 1.0, 0.0}},
        {"g2", {0.0, 0.98, 0.199}},
        {"b1", {0.0, 0.0, 1.0}},
        {"b2", {0.199, 0.0, 0.98}},
    });
    ClusterModel model;
    model.k = 3;
    model.dimension = 3;
    model.centroids = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    auto with_distractors = [](std::vector<std::string> distractors) {
        std::vector<std::string> choices{"correct"};
        choices.insert(choices.end(), distractors.begin(), distractors.end());
        return simple_question("p0#0#1", std::move(choices), 0);
    };

    SECTION("uniform picks give entropy one") {
        std::vector<ClozeQuestion> ds;
        for (int i = 0; i < 10; ++i) ds.push_back(with_distractors({"r1", "g1", "b1"}));
        const auto cov = cluster_coverage(ds, model, table);
        CHECK(cov.histogram == std::vector<std::int64_t>{10, 10, 10});
        CHECK(cov.normalized_entropy == Catch::Approx(1.0));
    }
    SECTION("degenerate picks give entropy zero") {
        std::vector<ClozeQuestion> ds;
        for (int i = 0; i < 10; ++i) ds.push_back(with_distractors({"r1", "r2", "r1 r2"}));
        const auto cov = cluster_coverage(ds, model, table);
        CHECK(cov.histogram == std::vector<std::int64_t>{30, 0, 0});
        CHECK(cov.normalized_entropy == Catch::Approx(0.0));
    }
    SECTION("two-to-one split over two clusters") {
        ClusterModel two;
        two.k = 2;
        two.dimension = 3;
        two.centroids = {1, 0, 0, 0, 1, 0};
        std::vector<ClozeQuestion> ds;
        for (int i = 0; i < 10; ++i) ds.push_back(with_distractors({"r1", "r2", "g1"}));
        const auto cov = cluster_coverage(ds, two, table);
        CHECK(cov.histogram == std::vector<std::int64_t>{20, 10});
        // -(2/3 log 2/3 + 1/3 log 1/3) / log 2
        CHECK(cov.normalized_entropy == Catch::Approx(0.9182958340544896).margin(1e-12));
    }
}

namespace {

// Fixture with a marker token in every correct choice and never elsewhere;
// a linear probe must separate it.
struct SeparableData {
    EmbeddingTable table = make_table({
        {"win", {1.0, 0.0}},
        {"lose", {0.0, 1.0}},
        {"filler", {0.7071, 0.7071}},
    });
    std::vector<ClozeQuestion> train;
    std::vector<ClozeQuestion> val;

    SeparableData() {
        Rng rng(8);
        for (int i = 0; i < 400; ++i) {
            const int answer = static_cast<int>(rng.index(4));
            std::vector<std::string> choices;
            for (int c = 0; c < 4; ++c) {
                std::string t = c == answer ? "win filler" : "lose filler";
                t += " x" + std::to_string(c) + std::to_string(i % 7);  // mild noise tokens
                choices.push_back(t);
            }
            auto q = simple_question("p" + std::to_string(i) + "#0#1", choices, answer,
                                     i % 2 == 0 ? Split::val : Split::train);
            (q.split == Split::train ? train : val).push_back(std::move(q));
        }
    }
};

}  // namespace

TEST_CASE("choice-only probe separates a marker fixture and stays honest on null data") {
    SeparableData data;
    ProbeConfig cfg;
    cfg.seed = 3;
    SECTION("marker fixture is nearly solved") {
        const double acc = run_probe_choice_only(data.train, data.val, data.table, cfg);
        CHECK(acc >= 0.95);
    }
    SECTION("null fixture stays near chance over five seeds") {
        // Distractors replaced by other questions' answers: no signal left.
        auto all = data.train;
        all.insert(all.end(), data.val.begin(), data.val.end());
        const auto null_all = test_util::make_null_dataset(all, 99);
        std::vector<ClozeQuestion> null_train;
        std::vector<ClozeQuestion> null_val;
        for (const auto& q : null_all) {
            (q.split == Split::train ? null_train : null_val).push_back(q);
        }
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            ProbeConfig c = cfg;
            c.seed = seed;
            const double acc = run_probe_choice_only(null_train, null_val, data.table, c);
            INFO("seed " << seed);
            // 200 val questions: a slightly wider band than the full-scale
            // acceptance check absorbs the small-sample noise.
            CHECK(acc >= 0.25 - 0.08);
            CHECK(acc <= 0.25 + 0.08);
        }
    }
    SECTION("empty splits are errors") {
        CHECK_THROWS_AS(run_probe_choice_only({}, data.val, data.table, cfg), std::invalid_argument);
        CHECK_THROWS_AS(run_probe_choice_only(data.train, {}, data.table, cfg), std::invalid_argument);
    }
    SECTION("degenerate identical-choice training data is an error") {
        auto degenerate = data.train;
        for (auto& q : degenerate) {
            q.choices = {"same", "same", "same", "same"};
        }
        CHECK_THROWS_AS(run_probe_choice_only(degenerate, data.val, data.table, cfg),
                        std::invalid_argument);
    }
}

TEST_CASE("hasty probe scores choices against visible titles") {
    const auto table = make_table({
        {"alpha", {1.0, 0.0}},
        {"beta", {0.0, 1.0}},
        {"near", {0.9806, 0.1961}},
    });
    SECTION("choice matching the visible neighborhood wins") {
        auto q = simple_question("p0#0#1", {"near", "beta", "beta x", "beta y"}, 0);
        q.question = {"alpha", kPlaceholder, "alpha", "alpha"};
        const auto r = run_probe_hasty({q}, table);
        CHECK(r.evaluated == 1);
        CHECK(r.accuracy == 1.0);
    }
    SECTION("identical choices tie to index zero") {
        auto q = simple_question("p0#0#1", {"alpha", "alpha", "alpha", "alpha"}, 2);
        q.question = {"alpha", kPlaceholder, "alpha", "alpha"};
        const auto r = run_probe_hasty({q}, table);
        CHECK(r.accuracy == 0.0);  // predicts 0, answer is 2
        auto q0 = q;
        q0.answer_index = 0;
        CHECK(run_probe_hasty({q0}, table).accuracy == 1.0);
    }
    SECTION("single correct question gives accuracy one") {
        auto q = simple_question("p0#0#1", {"alpha", "beta", "beta x", "beta y"}, 0);
        q.question = {"alpha", kPlaceholder, "alpha near", "near"};
        CHECK(run_probe_hasty({q}, table).accuracy == 1.0);
    }
    SECTION("determinism under reordering") {
        SeparableData data;
        const auto a = run_probe_hasty(data.val, data.table);
        auto reversed = data.val;
        std::reverse(reversed.begin(), reversed.end());
        const auto b = run_probe_hasty(reversed, data.table);
        CHECK(a.accuracy == b.accuracy);
    }
}

TEST_CASE("context probe reads the masked step's description") {
    const auto table = make_table({
        {"alpha", {1.0, 0.0}},
        {"beta", {0.0, 1.0}},
    });
    SECTION("choice equal to the description is predicted") {
        auto q = simple_question("p0#1#1", {"alpha", "beta", "beta b", "beta c"}, 0);
        // placeholder source position = start(1) + placeholder_index(1) = 2
        q.context[2].text = "alpha";
        const auto r = run_probe_context({q}, table);
        CHECK(r.evaluated == 1);
        CHECK(r.accuracy == 1.0);
    }
    SECTION("empty descriptions are skipped") {
        auto q = simple_question("p0#1#1", {"alpha", "beta", "beta b", "beta c"}, 0);
        q.context[2].text.clear();
        const auto r = run_probe_context({q}, table);
        CHECK(r.evaluated == 0);
        CHECK(r.skipped == 1);
    }
    SECTION("descriptions repeating the answer make the fixture separable") {
        std::vector<ClozeQuestion> ds;
        Rng rng(12);
        for (int i = 0; i < 50; ++i) {
            const int answer = static_cast<int>(rng.index(4));
            std::vector<std::string> choices;
            for (int c = 0; c < 4; ++c) {
                choices.push_back(c == answer ? "alpha step " + std::to_string(i)
                                              : "beta step " + std::to_string(c) + std::to_string(i));
            }
            auto q = simple_question("p" + std::to_string(i) + "#0#1", choices, answer);
            q.context[1].text = "alpha";  // echoes the correct choice's marker
            ds.push_back(std::move(q));
        }
        const auto r = run_probe_context(ds, table);
        CHECK(r.accuracy >= 0.95);
    }
}

TEST_CASE("build_report and compare_reports") {
    SECTION("delta table reproduces paper-style drops") {
        AuditReport before;
        before.nchoices = 4;
        before.probe_accuracy = {{"choice_only", 0.4073}, {"hasty", 0.4677}};
        AuditReport after = before;
        after.probe_accuracy = {{"choice_only", 0.3223}, {"hasty", 0.3292}};
        const auto cmp = compare_reports(before, after);
        REQUIRE(cmp.probes.size() == 3);  // chance + two probes
        CHECK(cmp.probes[0].name == "chance");
        CHECK(cmp.probes[1].name == "choice_only");
        CHECK(cmp.probes[1].delta == Catch::Approx(-0.0850).margin(1e-9));
    }
    SECTION("identical reports give zero deltas") {
        AuditReport r;
        r.nchoices = 4;
        r.probe_accuracy = {{"choice_only", 0.31}, {"context", 0.5}, {"hasty", 0.4}};
        const auto cmp = compare_reports(r, r);
        for (const auto& row : cmp.probes) CHECK(row.delta == 0.0);
        for (const auto& row : cmp.statistics) CHECK(row.delta == 0.0);
    }
    SECTION("probe-set mismatch is an error") {
        AuditReport before;
        before.probe_accuracy = {{"hasty", 0.4}};
        AuditReport after;
        after.probe_accuracy = {{"hasty", 0.4}, {"choice_only", 0.3}};
        CHECK_THROWS_AS(compare_reports(before, after), std::runtime_error);
    }
    SECTION("full report over a real fixture serializes and round-trips") {
        FixtureConfig fcfg;
        fcfg.n_procedures = 60;
        fcfg.seed = 33;
        const auto procs = pipeline_fixture(fcfg);
        std::vector<std::string> titles;
        for (const auto& p : procs) {
            for (const auto& s : p.steps) titles.push_back(normalize_title(s.title));
        }
        SkipgramConfig scfg;
        scfg.dimension = 24;
        scfg.epochs = 4;
        scfg.seed = 2;
        const auto table = train_skipgram(titles, scfg).table;
        GenerationConfig gcfg;
        gcfg.seed = 5;
        const auto questions = generate_dataset(procs, table, gcfg).questions;
        ProbeConfig pcfg;
        pcfg.max_epochs = 30;
        const auto report = build_report(questions, table, pcfg, nullptr, "fixture.jsonl");
        CHECK(report.probe_accuracy.size() == 3);
        for (const auto& [name, acc] : report.probe_accuracy) {
            CHECK(acc >= 0.0);
            CHECK(acc <= 1.0);
        }
        std::int64_t total = 0;
        for (std::int64_t c : report.position_histogram) total += c;
        CHECK(total == report.record_count);
        CHECK_FALSE(render_report_text(report).empty());

        test_util::TempDir dir("audit");
        write_audit_report(dir.file("r.json"), report);
        const auto back = load_audit_report(dir.file("r.json"));
        CHECK(back.probe_accuracy == report.probe_accuracy);
        CHECK(back.position_histogram == report.position_histogram);
        CHECK(back.record_count == report.record_count);
        const auto cmp = compare_reports(report, back);
        for (const auto& row : cmp.probes) CHECK(row.delta == 0.0);
        CHECK_FALSE(render_comparison_text(cmp).empty());
    }
}
