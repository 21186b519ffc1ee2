#pragma once

// Subcommand front end. run_cli returns 0 on success, 1 on validation or
// integrity failures, 2 on usage errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "absprobe/cogs.hpp"
#include "absprobe/common.hpp"
#include "absprobe/dataset.hpp"
#include "absprobe/dataset_io.hpp"
#include "absprobe/flt_probe.hpp"
#include "absprobe/logic_probe.hpp"
#include "absprobe/metrics.hpp"
#include "absprobe/mutations.hpp"

namespace absprobe {

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace cli {

inline nlohmann::ordered_json load_json_file(const std::string &path) {
    try {
        return nlohmann::ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
}

/// The flag wins over the config; neither present is a usage error.
inline std::uint64_t resolve_seed(const CLI::Option *flag, std::uint64_t flag_value, const nlohmann::ordered_json &config) {
    if (flag && flag->count() > 0)
        return flag_value;
    if (config.is_object() && config.contains("seed")) {
        try {
            return config.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception &) {
            throw ValidationError("config seed must be a non-negative integer");
        }
    }
    throw UsageError("--seed is required (or set \"seed\" in --config)");
}

inline std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline void emit(const std::string &text, const std::string &path, std::ostream &out) {
    if (path.empty())
        out << text;
    else
        write_text_file(path, text);
}

inline void print_counts(const ProbeDataset &ds, const std::string &dir, std::ostream &out) {
    out << "wrote " << dir << ":";
    for (const auto &name : ds.split_names())
        out << " " << name << "=" << ds.split(name).size();
    out << "\n";
}

struct Options {
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string config, out_dir, out_file, word_list, dataset, split = "test_B";
    std::string sub_probe, op, mutation, input, grammars, predictions, gold, report, mode = "freeze";
    std::string gen_split = "train_A";
    std::string src, tgt, train_src, train_tgt, in_task, cross_task, dev, lf;
    std::vector<std::string> logprobs;
    std::size_t train = 0, dev_count = 0, transfer = 0, test = 0, n_conj = 0, count = 1000, k = 36;
    std::size_t transfer_max = 25, test_min = 60;
    double main = 0, control = 0, contrast_score = 0, full = 0, threshold = 0.9, min_gain = 10.0, ratio = 0.25;
    double redundant_p = 0.5;
    bool contrast = false, summary = false;
};

} // namespace cli

inline int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    using namespace cli;
    Options o;
    CLI::App app{"Abstraction probe toolkit: dataset generation, mutation, conversion, validation and scoring"};
    app.name("absprobe");
    app.require_subcommand(1);

    std::map<std::string, CLI::Option *> seed_flags;
    auto with_seed = [&](CLI::App *sub, const std::string &key) {
        seed_flags[key] = sub->add_option("--seed", o.seed, "Global seed (overrides the config seed)");
    };
    auto with_jobs = [&](CLI::App *sub) {
        sub->add_option("--jobs", o.jobs, "Worker threads; output does not depend on it")->check(CLI::Range(1u, 1024u));
    };
    std::map<std::string, std::string> formats; // per subcommand
    auto with_format = [&](CLI::App *sub, std::vector<std::string> allowed, std::string def) {
        auto &f = formats[sub->get_name()] = std::move(def);
        sub->add_option("--format", f, "Output format")->check(CLI::IsMember(allowed))->capture_default_str();
    };

    // gen grammar / gen logic
    auto *gen = app.add_subcommand("gen", "Generate a probe suite");
    gen->require_subcommand(1);
    auto *gen_grammar = gen->add_subcommand("grammar", "Formal-language translation probe");
    gen_grammar->add_option("--config", o.config, "JSON config")->check(CLI::ExistingFile);
    with_seed(gen_grammar, "gen grammar");
    gen_grammar->add_option("--sub-probe", o.sub_probe, "com | mod")->check(CLI::IsMember({"com", "mod"}));
    gen_grammar->add_option("--train", o.train, "train_A size");
    gen_grammar->add_option("--dev", o.dev_count, "dev_A size");
    gen_grammar->add_option("--transfer", o.transfer, "transfer_B size");
    gen_grammar->add_option("--test", o.test, "test_B size");
    gen_grammar->add_option("--n-conjunctions", o.n_conj, "Conjunction terminals after resampling");
    gen_grammar->add_option("--word-list", o.word_list, "Word list, one word per line")->check(CLI::ExistingFile);
    gen_grammar->add_option("--out", o.out_dir, "Output directory")->required();
    with_jobs(gen_grammar);

    auto *gen_logic = gen->add_subcommand("logic", "Operation probe");
    gen_logic->add_option("--config", o.config, "JSON config")->check(CLI::ExistingFile);
    with_seed(gen_logic, "gen logic");
    gen_logic->add_option("--op", o.op, "Probed operator (a1 | b2 | c3 | d4)");
    gen_logic->add_option("--train", o.train, "train_A size");
    gen_logic->add_option("--dev", o.dev_count, "dev_A size");
    gen_logic->add_option("--transfer", o.transfer, "transfer_B size before the supplement");
    gen_logic->add_option("--test", o.test, "test_B size");
    gen_logic->add_option("--out", o.out_dir, "Output directory")->required();
    with_jobs(gen_logic);

    auto *mutate = app.add_subcommand("mutate", "Generate from, or rewrite into, a mutated grammar");
    mutate->add_option("--mutation", o.mutation, "original | coarse | localreverse | nest | reverse | redundant")
        ->required();
    with_seed(mutate, "mutate");
    mutate->add_option("--input", o.input, "Rewrite the targets of an existing dataset instead of sampling")
        ->check(CLI::ExistingDirectory);
    mutate->add_option("--count", o.count, "Examples to sample")->capture_default_str();
    mutate->add_option("--split", o.gen_split, "Split name for sampled examples")->capture_default_str();
    mutate->add_option("--redundant-p", o.redundant_p, "Adjective probability for redundant")->capture_default_str();
    mutate->add_option("--out", o.out_dir, "Output directory")->required();
    with_jobs(mutate);

    auto *multi = app.add_subcommand("multigrammar", "Mixed corpus with grammar-name prefixes");
    multi->add_option("--grammars", o.grammars, "Comma list name:count, e.g. original:1000,coarse:1000")->required();
    with_seed(multi, "multigrammar");
    multi->add_option("--split", o.gen_split, "Split name")->capture_default_str();
    multi->add_option("--out", o.out_dir, "Output directory")->required();
    with_jobs(multi);

    auto *cogs = app.add_subcommand("convert-cogs", "Convert COGS logical forms to the chain target format");
    auto *cogs_in = cogs->add_option("--input", o.input, "COGS TSV (source, logical_form, generalization_type)")
                        ->check(CLI::ExistingFile);
    cogs->add_option("--lf", o.lf, "Convert a single logical form")->excludes(cogs_in);
    cogs->add_option("--out", o.out_file, "Output TSV (source, target, generalization_type); default stdout");
    with_seed(cogs, "convert-cogs");

    auto *fuzzy = app.add_subcommand("fuzzy-split", "Length-based splits of a parallel corpus");
    fuzzy->add_option("--src", o.src, "Probe-task source file")->required()->check(CLI::ExistingFile);
    fuzzy->add_option("--tgt", o.tgt, "Probe-task target file")->required()->check(CLI::ExistingFile);
    auto *train_src = fuzzy->add_option("--train-src", o.train_src, "Aiming-task source file")->check(CLI::ExistingFile);
    auto *train_tgt = fuzzy->add_option("--train-tgt", o.train_tgt, "Aiming-task target file")->check(CLI::ExistingFile);
    train_src->needs(train_tgt);
    train_tgt->needs(train_src);
    fuzzy->add_option("--transfer-max", o.transfer_max, "Max source tokens for transfer_B")->capture_default_str();
    fuzzy->add_option("--test-min", o.test_min, "Min source tokens for test_B")->capture_default_str();
    fuzzy->add_flag("--contrast", o.contrast, "Add contrast_C with reversed target word order");
    with_seed(fuzzy, "fuzzy-split");
    fuzzy->add_option("--out", o.out_dir, "Output directory")->required();

    auto *stats = app.add_subcommand("stats", "Per-split statistics");
    stats->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    with_format(stats, {"json", "csv"}, "json");
    with_seed(stats, "stats");

    auto *check = app.add_subcommand("check", "Verify files against the manifest and the dataset constraints");
    check->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    with_seed(check, "check");

    auto *eval = app.add_subcommand("eval", "Score predictions");
    eval->require_subcommand(1);
    std::vector<CLI::App *> eval_subs;
    for (const char *name : {"em", "bleu"}) {
        auto *sub = eval->add_subcommand(name, std::string(name) == "em" ? "Exact match accuracy" : "Corpus BLEU");
        sub->add_option("--predictions", o.predictions, "Predictions JSONL {id, prediction}")
            ->required()
            ->check(CLI::ExistingFile);
        auto *ds_opt = sub->add_option("--dataset", o.dataset, "Dataset directory")->check(CLI::ExistingDirectory);
        auto *gold_opt = sub->add_option("--gold", o.gold, "Gold examples JSONL")->check(CLI::ExistingFile);
        ds_opt->excludes(gold_opt);
        sub->add_option("--split", o.split, "Split to score against")->capture_default_str();
        with_format(sub, {"json", "csv"}, "json");
        with_seed(sub, std::string("eval ") + name);
        eval_subs.push_back(sub);
    }

    auto *dpc = app.add_subcommand("dpc", "Per-head DPC report from log-prob records");
    dpc->add_option("--logprobs", o.logprobs, "Log-prob JSONL files")->required()->check(CLI::ExistingFile);
    dpc->add_option("--out", o.out_file, "Report path; default stdout");
    dpc->add_flag("--summary", o.summary, "Print a human-readable summary");
    with_format(dpc, {"csv", "json"}, "csv");
    with_seed(dpc, "dpc");

    auto *heads = app.add_subcommand("heads", "Top-k heads as a freeze or prune config");
    heads->add_option("--report", o.report, "DPC CSV report")->required()->check(CLI::ExistingFile);
    heads->add_option("--k", o.k, "Number of heads")->capture_default_str();
    heads->add_option("--mode", o.mode, "freeze | prune")->check(CLI::IsMember({"freeze", "prune"}))->capture_default_str();
    heads->add_option("--out", o.out_file, "Config path; default stdout");
    with_seed(heads, "heads");

    auto *moa_cmd = app.add_subcommand("moa", "Metric of abstraction");
    moa_cmd->add_option("--main", o.main, "score(A => B)")->required();
    moa_cmd->add_option("--control", o.control, "score(direct B)")->required();
    moa_cmd->add_option("--contrast", o.contrast_score, "score(C => B)")->required();
    moa_cmd->add_option("--full", o.full, "score on the unrestricted set")->required();
    with_format(moa_cmd, {"text", "json", "csv"}, "text");
    with_seed(moa_cmd, "moa");

    auto *curve = app.add_subcommand("curve", "Learning-curve phase analysis or checkpoint selection");
    auto *in_task = curve->add_option("--in-task", o.in_task, "In-task curve CSV")->check(CLI::ExistingFile);
    auto *cross = curve->add_option("--cross-task", o.cross_task, "Cross-task curve CSV")->check(CLI::ExistingFile);
    auto *dev = curve->add_option("--dev", o.dev, "Dev curve CSV; prints the selected checkpoint")->check(CLI::ExistingFile);
    in_task->needs(cross);
    cross->needs(in_task);
    dev->excludes(in_task);
    curve->add_option("--threshold", o.threshold, "Relative performance threshold")->capture_default_str();
    with_format(curve, {"json", "csv"}, "json");
    with_seed(curve, "curve");

    auto *verdict = app.add_subcommand("verdict", "Expectation verdicts from three scores");
    verdict->add_option("--main", o.main, "score(A => B)")->required();
    verdict->add_option("--control", o.control, "score(direct B)")->required();
    verdict->add_option("--contrast", o.contrast_score, "score(C => B)")->required();
    verdict->add_option("--min-gain", o.min_gain, "Expectation 1 threshold")->capture_default_str();
    verdict->add_option("--ratio", o.ratio, "Expectation 2 contrast ratio")->capture_default_str();
    with_format(verdict, {"json", "csv"}, "json");
    with_seed(verdict, "verdict");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error: " << e.what() << "\n\n";
        err << (e.get_name() == "RequiredError" || app.get_subcommands().empty() ? app.help()
                                                                                 : app.get_subcommands().front()->help());
        return 2;
    }

    try {
        if (gen_grammar->parsed()) {
            nlohmann::ordered_json cj = o.config.empty() ? nlohmann::ordered_json::object() : load_json_file(o.config);
            auto cfg = ProbeSuiteConfig::from_json(cj);
            cfg.seed = resolve_seed(seed_flags["gen grammar"], o.seed, cj);
            if (!o.sub_probe.empty())
                cfg.sub_probe = o.sub_probe;
            if (o.train)
                cfg.train_count = o.train;
            if (o.dev_count)
                cfg.dev_count = o.dev_count;
            if (o.transfer)
                cfg.transfer_count = o.transfer;
            if (o.test)
                cfg.test_count = o.test;
            if (o.n_conj)
                cfg.n_conjunctions = o.n_conj;
            cfg.jobs = o.jobs;
            const auto words = o.word_list.empty() ? default_word_list() : load_word_list(o.word_list);
            const auto suite = generate_probe_suite(cfg, words);
            write_dataset(suite.dataset, o.out_dir);
            write_text_file(std::filesystem::path(o.out_dir) / "terminal_map.json",
                            to_json(suite.terminal_map).dump(2) + "\n");
            print_counts(suite.dataset, o.out_dir, out);
            return 0;
        }
        if (gen_logic->parsed()) {
            nlohmann::ordered_json cj = o.config.empty() ? nlohmann::ordered_json::object() : load_json_file(o.config);
            auto cfg = LogicSuiteConfig::from_json(cj);
            cfg.seed = resolve_seed(seed_flags["gen logic"], o.seed, cj);
            if (!o.op.empty())
                cfg.probed_op = o.op;
            if (o.train)
                cfg.train_count = o.train;
            if (o.dev_count)
                cfg.dev_count = o.dev_count;
            if (o.transfer)
                cfg.transfer_count = o.transfer;
            if (o.test)
                cfg.test_count = o.test;
            cfg.jobs = o.jobs;
            const auto ds = build_logic_suite(cfg);
            write_dataset(ds, o.out_dir);
            print_counts(ds, o.out_dir, out);
            return 0;
        }
        if (mutate->parsed()) {
            MutationKind kind;
            try {
                kind = parse_mutation_name(o.mutation);
            } catch (const ProbeError &e) {
                throw UsageError(e.what());
            }
            ProbeDataset ds;
            if (!o.input.empty()) {
                if (kind == MutationKind::redundant)
                    throw UsageError("redundant changes the source grammar; sample with --seed instead of --input");
                const auto in = read_dataset(o.input);
                if (in.probe != "grammar")
                    throw ValidationError("mutate --input needs a grammar-probe dataset");
                ds = in;
                ds.grammar_tag = mutation_grammar_tag(kind);
                ds.config = {{"probe", "grammar"}, {"mutation", o.mutation}, {"source_config", in.config}};
                for (auto &[name, v] : ds.splits)
                    for (auto &e : v) {
                        e.target = apply_string_mutation(kind, e.target);
                        e.grammar_tag = ds.grammar_tag;
                    }
            } else {
                const auto seed = resolve_seed(seed_flags["mutate"], o.seed, {});
                if (!one_of(kSplitNames, o.gen_split))
                    throw UsageError("unknown split '" + o.gen_split + "'");
                const ProbeSuiteConfig defaults;
                const auto base = build_default_grammar_pair(defaults.grammar_options());
                GrammarMutation m{kind, {}};
                m.redundant.probability = o.redundant_p;
                const auto pair = apply_mutation(base, m);
                SampleConstraints c;
                c.max_recursion = defaults.train_max_recursion;
                ds.probe = "grammar";
                ds.sub_probe = "none";
                ds.grammar_tag = mutation_grammar_tag(kind);
                ds.seed = seed;
                ds.config = {{"probe", "grammar"}, {"mutation", o.mutation}, {"seed", seed},
                             {"count", o.count},   {"split", o.gen_split}};
                if (kind == MutationKind::redundant)
                    ds.config["redundant_p"] = o.redundant_p;
                auto &v = ds.splits[o.gen_split];
                v = parallel_map<ProbeExample>(o.count, o.jobs, [&](std::size_t i) {
                    const auto d = sample_derivation(pair.source, derive_seed(seed, "mutate", i), c);
                    auto ex = detail::grammar_example(pair, pair, d, o.gen_split, "none");
                    ex.grammar_tag = ds.grammar_tag;
                    ex.id = example_id("grammar", "none", o.gen_split, i);
                    return ex;
                });
            }
            write_dataset(ds, o.out_dir);
            print_counts(ds, o.out_dir, out);
            return 0;
        }
        if (multi->parsed()) {
            const auto seed = resolve_seed(seed_flags["multigrammar"], o.seed, {});
            std::vector<MultigrammarEntry> entries;
            std::stringstream ss(o.grammars);
            std::string item;
            while (std::getline(ss, item, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw UsageError("--grammars entries must be name:count, got '" + item + "'");
                try {
                    entries.push_back({item.substr(0, colon), static_cast<std::size_t>(std::stoul(item.substr(colon + 1)))});
                } catch (const std::logic_error &) {
                    throw UsageError("bad count in '" + item + "'");
                }
            }
            const ProbeSuiteConfig defaults;
            SampleConstraints c;
            c.max_recursion = defaults.train_max_recursion;
            auto ds = build_multigrammar_corpus(build_default_grammar_pair(defaults.grammar_options()), entries, seed, c,
                                                o.jobs, o.gen_split);
            ds.config = {{"probe", "grammar"}, {"seed", seed}, {"grammars", o.grammars}, {"split", o.gen_split}};
            write_dataset(ds, o.out_dir);
            print_counts(ds, o.out_dir, out);
            return 0;
        }
        if (cogs->parsed()) {
            if (!o.lf.empty()) {
                out << convert_cogs_logical_form(o.lf) << "\n";
                return 0;
            }
            if (o.input.empty())
                throw UsageError("convert-cogs needs --input or --lf");
            const auto imp = import_cogs_tsv_file(o.input);
            std::string text;
            for (const auto &r : imp.rows)
                text += r.source + "\t" + r.target + "\t" + r.generalization_type + "\n";
            emit(text, o.out_file, out);
            for (const auto &[line, msg] : imp.failures)
                err << o.input << ":" << line << ": " << msg << "\n";
            if (!o.out_file.empty())
                out << "converted " << imp.rows.size() << " rows, " << imp.failures.size() << " failures\n";
            return imp.failures.empty() ? 0 : 1;
        }
        if (fuzzy->parsed()) {
            FuzzyOptions opt;
            opt.transfer_max_len = o.transfer_max;
            opt.test_min_len = o.test_min;
            opt.contrast = o.contrast;
            opt.seed = seed_flags["fuzzy-split"]->count() ? o.seed : 0;
            const auto probe = read_parallel_corpus(o.src, o.tgt);
            std::optional<ParallelCorpus> train;
            if (!o.train_src.empty())
                train = read_parallel_corpus(o.train_src, o.train_tgt);
            const auto r = fuzzy_split(probe, opt, train ? &*train : nullptr);
            write_dataset(r.dataset, o.out_dir);
            std::string listing;
            for (auto i : r.unassigned)
                listing += std::to_string(i + 1) + "\n";
            write_text_file(std::filesystem::path(o.out_dir) / "unassigned.txt", listing);
            print_counts(r.dataset, o.out_dir, out);
            out << "unassigned: " << r.unassigned.size() << " lines (listed in unassigned.txt), empty: "
                << r.empty_lines.size() << "\n";
            return 0;
        }
        if (stats->parsed()) {
            const auto ds = read_dataset(o.dataset);
            out << (formats["stats"] == "csv" ? stats_to_csv(ds) : stats_to_json(ds).dump(2) + "\n");
            return 0;
        }
        if (check->parsed()) {
            ProbeDataset ds;
            try {
                ds = read_dataset(o.dataset);
            } catch (const IntegrityError &e) {
                out << "integrity: " << e.what() << "\n";
                return 1;
            }
            const auto findings = validate_dataset(ds);
            for (const auto &f : findings)
                out << format_finding(f) << "\n";
            if (!findings.empty()) {
                out << findings.size() << " findings\n";
                return 1;
            }
            out << "ok: " << ds.size() << " examples, no findings\n";
            return 0;
        }
        for (auto *sub : eval_subs) {
            if (!sub->parsed())
                continue;
            std::vector<ProbeExample> golds;
            if (!o.gold.empty()) {
                std::ifstream in(o.gold, std::ios::binary);
                golds = examples_from_jsonl(in, o.gold);
            } else if (!o.dataset.empty()) {
                golds = read_dataset(o.dataset).split(o.split);
            } else {
                throw UsageError("eval needs --dataset or --gold");
            }
            const auto preds = read_predictions_file(o.predictions);
            std::map<std::string, std::string> gold_map;
            for (const auto &g : golds)
                gold_map[g.id] = g.target;
            const auto em = exact_match(preds, gold_map);
            nlohmann::ordered_json j;
            if (sub->get_name() == "em") {
                j["metric"] = "exact_match";
                j["score"] = em.accuracy;
                j["correct"] = em.correct;
                j["total"] = em.total;
            } else {
                std::map<std::string, std::string> pm;
                for (const auto &p : preds)
                    pm[p.id] = p.prediction;
                std::vector<std::string> hyps, refs;
                for (const auto &g : golds) {
                    auto it = pm.find(g.id);
                    hyps.push_back(it == pm.end() ? std::string() : it->second);
                    refs.push_back(g.target);
                }
                const auto b = bleu(hyps, refs);
                j["metric"] = "bleu";
                j["score"] = b.score;
                j["brevity_penalty"] = b.brevity_penalty;
                j["total"] = golds.size();
            }
            j["missing"] = em.missing_ids.size();
            if (formats[sub->get_name()] == "csv")
                out << "metric,score,total,missing\n"
                    << j["metric"].get<std::string>() << "," << format_double(j["score"].get<double>()) << ","
                    << j["total"].get<std::size_t>() << "," << em.missing_ids.size() << "\n";
            else
                out << j.dump(2) << "\n";
            for (const auto &id : em.missing_ids)
                err << "missing prediction for " << id << "\n";
            return 0;
        }
        if (dpc->parsed()) {
            std::vector<LogProbRecord> records;
            for (const auto &path : o.logprobs) {
                auto r = read_logprobs_file(path);
                records.insert(records.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
            }
            const auto rep = dpc_report(records);
            std::string text;
            if (formats["dpc"] == "csv") {
                text = dpc_csv(rep);
            } else {
                auto arr = nlohmann::ordered_json::array();
                for (const auto &row : rep.rows)
                    arr.push_back({{"head", to_string(row.head)},
                                   {"delta_test", row.delta_test},
                                   {"delta_transfer", row.delta_transfer},
                                   {"dpc", row.dpc},
                                   {"rank", row.rank}});
                text = arr.dump(2) + "\n";
            }
            emit(text, o.out_file, out);
            if (o.summary)
                out << dpc_summary(rep);
            return 0;
        }
        if (heads->parsed()) {
            std::ifstream in(o.report, std::ios::binary);
            const auto rep = read_dpc_csv(in);
            emit(heads_config(select_top_heads(rep, o.k), o.mode).dump(2) + "\n", o.out_file, out);
            return 0;
        }
        if (moa_cmd->parsed()) {
            const MoaInputs in{o.main, o.control, o.contrast_score, o.full};
            const double v = moa(in);
            if (formats["moa"] == "json") {
                nlohmann::ordered_json j;
                j["score_main"] = in.score_main;
                j["score_control"] = in.score_control;
                j["score_contrast"] = in.score_contrast;
                j["score_full"] = in.score_full;
                j["score_a"] = in.score_main - std::max(in.score_control, in.score_contrast);
                j["moa"] = v;
                out << j.dump(2) << "\n";
            } else if (formats["moa"] == "csv") {
                out << "moa\n" << format_double(v) << "\n";
            } else {
                out << fmt("%.2f", v) << "\n";
            }
            return 0;
        }
        if (curve->parsed()) {
            nlohmann::ordered_json j;
            if (!o.dev.empty()) {
                j["checkpoint"] = select_checkpoint(read_curve_file(o.dev));
            } else if (!o.in_task.empty()) {
                const auto a =
                    analyze_learning_curves(read_curve_file(o.in_task), read_curve_file(o.cross_task), o.threshold);
                j["step_in_task"] = a.step_in_task;
                j["step_cross_task"] = a.step_cross_task;
                j["phase_difference"] = a.phase_difference;
            } else {
                throw UsageError("curve needs --in-task/--cross-task or --dev");
            }
            if (formats["curve"] == "csv") {
                std::string head, row;
                for (const auto &[k, v] : j.items()) {
                    head += (head.empty() ? "" : ",") + k;
                    row += (row.empty() ? "" : ",") + v.dump();
                }
                out << head << "\n" << row << "\n";
            } else {
                out << j.dump(2) << "\n";
            }
            return 0;
        }
        if (verdict->parsed()) {
            const auto v = expectation_verdict(o.main, o.control, o.contrast_score, {o.min_gain, o.ratio});
            if (formats["verdict"] == "csv")
                out << "delta_main,delta_contrast,expectation1,expectation2\n"
                    << format_double(v.delta_main) << "," << format_double(v.delta_contrast) << ","
                    << to_string(v.expectation1) << "," << to_string(v.expectation2) << "\n";
            else
                out << to_json(v).dump(2) << "\n";
            return 0;
        }
        err << app.help();
        return 2;
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    std::vector<const char *> argv{"absprobe"};
    for (const auto &a : args)
        argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace absprobe
