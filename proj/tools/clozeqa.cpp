// clozeqa — generate textual-cloze QA datasets from How-To corpora, measure
// answer-choice bias with reading-free probes, and rewrite distractors under
// per-cluster budgets to remove it.
//
// Subcommands: fixture, ingest, train-embed, generate, debias, audit, report.
// Stages communicate through files only; every subcommand is deterministic
// for a fixed seed. Diagnostics go to stderr, data to files.

#include "clozeqa/audit.hpp"
#include "clozeqa/clozegen.hpp"
#include "clozeqa/corpus.hpp"
#include "clozeqa/debias.hpp"
#include "clozeqa/embeddings.hpp"
#include "clozeqa/fixture.hpp"
#include "clozeqa/geometry.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using namespace clozeqa;

// Unknown keys or malformed lines in a config file; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::map<const CLI::App*, std::string> g_config_paths;

void configure(CLI::App* cmd) {
    cmd->add_option("--config", g_config_paths[cmd],
                    "flat key=value configuration file; flags take precedence");
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Applies a flat key=value file to one subcommand's options. Keys must name
// existing flags; values never override flags given on the command line.
void apply_config(CLI::App* cmd) {
    const std::string& path = g_config_paths[cmd];
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    const CLI::Option* config_opt = cmd->get_option_no_throw("--config");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string entry = trimmed(line);
        if (entry.empty() || entry[0] == '#') continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config " + path + " line " + std::to_string(line_no) +
                             ": expected key=value");
        }
        const std::string key = trimmed(entry.substr(0, eq));
        const std::string value = trimmed(entry.substr(eq + 1));
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr || opt == config_opt) {
            throw UsageError("config " + path + " line " + std::to_string(line_no) +
                             ": unknown key '" + key + "'");
        }
        if (opt->count() == 0) {
            opt->add_result(value);
            opt->run_callback();
        }
    }
}

int cmd_fixture(const std::string& out, std::uint64_t seed, int procedures, double val_fraction) {
    FixtureConfig cfg;
    cfg.n_procedures = procedures;
    cfg.val_fraction = val_fraction;
    cfg.seed = seed;
    const auto procs = pipeline_fixture(cfg);
    write_corpus(out, procs);
    std::cerr << "fixture: wrote " << procs.size() << " procedures to " << out << "\n";
    return 0;
}

int cmd_ingest(const std::string& input, const std::string& output,
               const std::string& stats_path, const FilterConfig& fcfg) {
    const auto procs = load_corpus(input);
    const auto outcome = filter_corpus(procs, fcfg);
    write_corpus(output, outcome.kept);
    if (outcome.kept.empty()) {
        std::cerr << "ingest: no procedures passed the filter\n";
        return 1;
    }
    const CorpusStats stats = corpus_stats(outcome.kept);
    auto split_json = [](const SplitStats& s) {
        return nlohmann::json{{"n_projects", s.n_projects},
                              {"avg_steps", s.avg_steps},
                              {"avg_tokens_titles", s.avg_tokens_titles},
                              {"avg_tokens_descriptions", s.avg_tokens_descriptions},
                              {"avg_images", s.avg_images}};
    };
    nlohmann::json reject_counts = nlohmann::json::object();
    for (const auto& r : outcome.rejections) {
        reject_counts[r.reason] = reject_counts.value(r.reason, 0) + 1;
    }
    const nlohmann::json j{{"train", split_json(stats.train)},
                           {"val", split_json(stats.val)},
                           {"kept", outcome.kept.size()},
                           {"rejected", outcome.rejections.size()},
                           {"rejections", std::move(reject_counts)}};
    if (!stats_path.empty()) {
        std::ofstream sf(stats_path);
        if (!sf) throw std::runtime_error("cannot write stats file: " + stats_path);
        sf << j.dump(2) << '\n';
    }
    std::cerr << "ingest: kept " << outcome.kept.size() << ", rejected " << outcome.rejections.size()
              << "\n"
              << j.dump(2) << "\n";
    return 0;
}

int cmd_train_embed(const std::string& corpus_path, const std::string& out,
                    const SkipgramConfig& cfg) {
    const auto procs = load_corpus(corpus_path);
    std::vector<std::string> titles;
    for (const auto& p : procs) {
        for (const auto& s : p.steps) {
            std::string t = normalize_title(s.title);
            if (!t.empty()) titles.push_back(std::move(t));
        }
    }
    const auto result = train_skipgram(titles, cfg);
    save_embeddings(out, result.table);
    std::cerr << "train-embed: " << result.table.size() << " tokens, dim " << result.table.dimension
              << ", final epoch loss " << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back())
              << "\n";
    return 0;
}

int cmd_generate(const std::string& corpus_path, const std::string& embeddings_path,
                 const std::string& out, const GenerationConfig& cfg) {
    const auto procs = load_corpus(corpus_path);
    const auto table = load_embeddings(embeddings_path);
    const auto outcome = generate_dataset(procs, table, cfg);
    write_dataset(out, outcome.questions);
    std::cerr << "generate: " << outcome.questions.size() << " questions ("
              << outcome.skipped_procedures << " procedures skipped, " << outcome.skipped_questions
              << " questions skipped)\n";
    return 0;
}

int cmd_debias(const std::string& data_path, const std::string& embeddings_path,
               const std::string& out, const std::string& report_path,
               const std::string& cluster_model_path, const DebiasConfig& cfg) {
    const auto dataset = read_dataset(data_path);
    const auto table = load_embeddings(embeddings_path);
    std::vector<ClozeQuestion> train;
    std::vector<ClozeQuestion> val;
    for (const auto& q : dataset) (q.split == Split::train ? train : val).push_back(q);
    const auto outcome = debias_dataset(train, val, table, cfg);

    std::vector<ClozeQuestion> merged;
    merged.reserve(outcome.train.size() + outcome.val.size());
    merged.insert(merged.end(), outcome.train.begin(), outcome.train.end());
    merged.insert(merged.end(), outcome.val.begin(), outcome.val.end());
    write_dataset(out, merged);
    if (!report_path.empty()) write_debias_report(report_path, outcome.report);
    if (!cluster_model_path.empty()) save_cluster_model(cluster_model_path, outcome.model);
    std::cerr << "debias:\n" << summarize(outcome.report);
    return 0;
}

int cmd_audit(const std::string& data_path, const std::string& embeddings_path,
              const std::string& out, const std::string& clusters_path,
              const std::string& text_path, const ProbeConfig& cfg) {
    const auto dataset = read_dataset(data_path);
    const auto table = load_embeddings(embeddings_path);
    std::optional<ClusterModel> model;
    if (!clusters_path.empty()) model = load_cluster_model(clusters_path);
    const AuditReport report =
        build_report(dataset, table, cfg, model ? &*model : nullptr, data_path);
    write_audit_report(out, report);
    const std::string text = render_report_text(report);
    if (!text_path.empty()) {
        std::ofstream tf(text_path);
        if (!tf) throw std::runtime_error("cannot write text report: " + text_path);
        tf << text;
    }
    std::cerr << text;
    return 0;
}

int cmd_report(const std::string& before_path, const std::string& after_path,
               const std::string& out, const std::string& text_path) {
    const AuditReport before = load_audit_report(before_path);
    const AuditReport after = load_audit_report(after_path);
    const ReportComparison cmp = compare_reports(before, after);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto* group : {&cmp.probes, &cmp.statistics}) {
        for (const auto& row : *group) {
            rows.push_back({{"name", row.name},
                            {"before", row.before},
                            {"after", row.after},
                            {"delta", row.delta}});
        }
    }
    const nlohmann::json j{{"before", before_path}, {"after", after_path}, {"rows", std::move(rows)}};
    std::ofstream of(out);
    if (!of) throw std::runtime_error("cannot write comparison file: " + out);
    of << j.dump(2) << '\n';
    const std::string text = render_comparison_text(cmp);
    if (!text_path.empty()) {
        std::ofstream tf(text_path);
        if (!tf) throw std::runtime_error("cannot write text report: " + text_path);
        tf << text;
    }
    std::cerr << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"textual-cloze dataset generation and bias auditing"};
    app.require_subcommand(1);

    // fixture
    auto* fixture = app.add_subcommand("fixture", "write a seeded synthetic corpus");
    std::string fx_out;
    std::uint64_t fx_seed = 42;
    int fx_procs = 600;
    double fx_val = 0.15;
    fixture->add_option("--out", fx_out, "output corpus file")->required();
    fixture->add_option("--seed", fx_seed, "random seed");
    fixture->add_option("--procedures", fx_procs, "number of procedures")->check(CLI::PositiveNumber);
    fixture->add_option("--val-fraction", fx_val, "validation split fraction");
    configure(fixture);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse, filter and summarize a corpus");
    std::string in_input, in_output, in_stats;
    FilterConfig fcfg;
    ingest->add_option("--input", in_input, "corpus file")->required();
    ingest->add_option("--output", in_output, "filtered corpus file")->required();
    ingest->add_option("--stats", in_stats, "statistics JSON file");
    ingest->add_option("--min-steps", fcfg.min_steps, "minimum steps per procedure");
    ingest->add_option("--max-steps", fcfg.max_steps, "maximum steps per procedure");
    ingest->add_option("--min-ascii-ratio", fcfg.min_ascii_ratio, "minimum ASCII character ratio");
    ingest->add_option("--require-text", fcfg.require_text, "require every step to carry text");
    ingest->add_option("--require-images", fcfg.require_images, "require at least one image");
    configure(ingest);

    // train-embed
    auto* train = app.add_subcommand("train-embed", "train skip-gram embeddings on step titles");
    std::string te_corpus, te_out;
    SkipgramConfig scfg;
    train->add_option("--corpus", te_corpus, "filtered corpus file")->required();
    train->add_option("--out", te_out, "embedding text file")->required();
    train->add_option("--dim", scfg.dimension, "embedding dimension");
    train->add_option("--window", scfg.window, "context window");
    train->add_option("--negatives", scfg.negatives, "negative samples per pair");
    train->add_option("--epochs", scfg.epochs, "training epochs");
    train->add_option("--lr", scfg.learning_rate, "initial learning rate");
    train->add_option("--min-count", scfg.min_count, "minimum token frequency");
    train->add_option("--seed", scfg.seed, "random seed");
    configure(train);

    // generate
    auto* generate = app.add_subcommand("generate", "generate biased textual-cloze questions");
    std::string gen_corpus, gen_embeddings, gen_out;
    GenerationConfig gcfg;
    generate->add_option("--corpus", gen_corpus, "filtered corpus file")->required();
    generate->add_option("--embeddings", gen_embeddings, "embedding text file")->required();
    generate->add_option("--out", gen_out, "dataset file")->required();
    generate->add_option("--window", gcfg.window, "candidate list size");
    generate->add_option("--nchoices", gcfg.nchoices, "choice list size");
    generate->add_option("--knn-k", gcfg.knn_k, "nearest-neighbor count");
    generate->add_option("--per-procedure", gcfg.questions_per_procedure, "questions per procedure");
    generate->add_option("--seed", gcfg.seed, "random seed");
    configure(generate);

    // debias
    auto* debias = app.add_subcommand("debias", "resample distractors under cluster budgets");
    std::string db_data, db_embeddings, db_out, db_report, db_model;
    DebiasConfig dcfg;
    int db_budget = -1;
    int db_clusters = -1;
    debias->add_option("--data", db_data, "biased dataset file")->required();
    debias->add_option("--embeddings", db_embeddings, "embedding text file")->required();
    debias->add_option("--out", db_out, "debiased dataset file")->required();
    debias->add_option("--report", db_report, "debias report JSON file");
    debias->add_option("--cluster-model", db_model, "cluster model output file");
    debias->add_option("--budget", db_budget, "per-cluster budget (default: computed)");
    debias->add_option("--clusters", db_clusters, "cluster count (default: sqrt of pool)");
    debias->add_option("--nchoices", dcfg.nchoices, "choice list size");
    debias->add_option("--knn-k", dcfg.knn_k, "nearest-neighbor count");
    debias->add_option("--min-steps", dcfg.min_steps, "drop questions from shorter procedures");
    debias->add_option("--max-resamples", dcfg.max_resamples, "budget retry bound");
    debias->add_option("--seed", dcfg.seed, "random seed");
    configure(debias);

    // audit
    auto* audit = app.add_subcommand("audit", "probe accuracies and bias statistics");
    std::string au_data, au_embeddings, au_out, au_clusters, au_text;
    ProbeConfig pcfg;
    audit->add_option("--data", au_data, "dataset file")->required();
    audit->add_option("--embeddings", au_embeddings, "embedding text file")->required();
    audit->add_option("--out", au_out, "audit report JSON file")->required();
    audit->add_option("--clusters", au_clusters, "cluster model file for coverage");
    audit->add_option("--text", au_text, "rendered text table file");
    audit->add_option("--lr", pcfg.learning_rate, "probe learning rate");
    audit->add_option("--max-epochs", pcfg.max_epochs, "probe epoch cap");
    audit->add_option("--patience", pcfg.patience, "early-stopping patience");
    audit->add_option("--batch-size", pcfg.batch_size, "probe batch size");
    audit->add_option("--top-tokens", pcfg.top_tokens, "token indicator features");
    audit->add_option("--seed", pcfg.seed, "probe seed");
    configure(audit);

    // report
    auto* report = app.add_subcommand("report", "compare two audit reports");
    std::string rp_before, rp_after, rp_out, rp_text;
    report->add_option("--before", rp_before, "audit report JSON")->required();
    report->add_option("--after", rp_after, "audit report JSON")->required();
    report->add_option("--out", rp_out, "comparison JSON file")->required();
    report->add_option("--text", rp_text, "rendered text table file");
    configure(report);

    try {
        app.parse(argc, argv);
        for (CLI::App* sub : app.get_subcommands()) apply_config(sub);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 2;
    } catch (const UsageError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*fixture) return cmd_fixture(fx_out, fx_seed, fx_procs, fx_val);
        if (*ingest) return cmd_ingest(in_input, in_output, in_stats, fcfg);
        if (*train) return cmd_train_embed(te_corpus, te_out, scfg);
        if (*generate) return cmd_generate(gen_corpus, gen_embeddings, gen_out, gcfg);
        if (*debias) {
            if (db_budget >= 0) dcfg.budget = db_budget;
            if (db_clusters >= 0) dcfg.n_clusters = db_clusters;
            return cmd_debias(db_data, db_embeddings, db_out, db_report, db_model, dcfg);
        }
        if (*audit) return cmd_audit(au_data, au_embeddings, au_out, au_clusters, au_text, pcfg);
        if (*report) return cmd_report(rp_before, rp_after, rp_out, rp_text);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
