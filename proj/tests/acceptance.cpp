// Acceptance checks. One PASS/FAIL line per criterion, failures listed below
// it. Exit status is nonzero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "absprobe/absprobe.hpp"
#include "fixtures.hpp"

using namespace absprobe;

namespace {

class Criterion {
  public:
    void expect(bool ok, const std::string &what) {
        ++checks_;
        if (!ok)
            failures_.push_back(what);
    }
    void near(double got, double want, double tol, const std::string &what) {
        expect(std::fabs(got - want) <= tol, what + ": got " + format_double(got) + ", want " + format_double(want) +
                                                 " +/- " + format_double(tol));
    }
    void equal(const std::string &got, const std::string &want, const std::string &what) {
        expect(got == want, what + ": got \"" + got + "\", want \"" + want + "\"");
    }
    const std::vector<std::string> &failures() const { return failures_; }
    std::size_t checks() const { return checks_; }

  private:
    std::vector<std::string> failures_;
    std::size_t checks_ = 0;
};

int n_failed = 0;

void run(const std::string &name, double budget_s, const std::function<void(Criterion &)> &body) {
    Criterion c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception &e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs < budget_s, "runtime " + format_double(secs) + " s exceeds " + format_double(budget_s) + " s");
    const bool ok = c.failures().empty();
    n_failed += !ok;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2f s", secs);
    std::cout << (ok ? "PASS " : "FAIL ") << name << " (" << c.checks() << " checks, " << timing << ")\n";
    for (const auto &f : c.failures())
        std::cout << "    - " << f << "\n";
    std::cout.flush();
}

int run_binary(const std::string &args) {
    const std::string cmd = std::string(ABSPROBE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool same_tree(const fs::path &a, const fs::path &b, std::string &why) {
    std::size_t n = 0;
    for (const auto &e : fs::directory_iterator(a)) {
        ++n;
        const auto other = b / e.path().filename();
        if (!fs::exists(other) || read_text_file(e.path()) != read_text_file(other)) {
            why = e.path().filename().string();
            return false;
        }
    }
    if (n != static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{}))) {
        why = "file sets differ";
        return false;
    }
    return true;
}

void golden(Criterion &c) {
    for (std::size_t i = 0; i < 3; ++i)
        c.equal(convert_cogs_logical_form(fixtures::kCogsRows[i].lf), fixtures::kCogsRows[i].target,
                "COGS row " + std::to_string(i + 1));

    for (const auto &f : {fixtures::com_train(), fixtures::mod_train(), fixtures::com_transfer(),
                          fixtures::com_test(), fixtures::mod_transfer(), fixtures::mod_test()}) {
        c.equal(source_string(f.pair, f.derivation), f.source, "source");
        const auto t = map_derivation_to_target(f.pair, f.derivation);
        c.equal(t, f.target, "target of " + f.source);
        c.expect(t == f.display || omit_none(t) == f.display, "display form of " + f.source);
    }

    const auto m = fixtures::mutation_base();
    c.equal(source_string(m.pair, m.derivation), m.source, "mutation base source");
    c.equal(coarse_string(m.target), fixtures::kCoarse, "Coarse (string)");
    c.equal(omit_none(local_reverse_string(m.target)), fixtures::kLocalR, "LocalR (string)");
    c.equal(omit_none(nested_string(m.target)), fixtures::kNested, "Nested (string)");
    c.equal(map_derivation_to_target(coarse_target(m.pair), m.derivation), fixtures::kCoarse, "Coarse (grammar)");
    c.equal(omit_none(map_derivation_to_target(local_reverse_target(m.pair), m.derivation)), fixtures::kLocalR,
            "LocalR (grammar)");
    c.equal(omit_none(map_derivation_to_target(nested_target(m.pair), m.derivation)), fixtures::kNested,
            "Nested (grammar)");

    const auto ct = fixtures::com_train();
    c.equal(reverse_string(ct.display), ct.contrast, "Com contrast (string)");
    c.equal(omit_none(map_derivation_to_target(reverse_target(ct.pair), ct.derivation)), ct.contrast,
            "Com contrast (grammar)");
    const auto mt = fixtures::mod_train();
    c.equal(reverse_string(mt.target), mt.contrast, "Mod contrast (string)");
    c.equal(map_derivation_to_target(reverse_target(mt.pair), mt.derivation), mt.contrast, "Mod contrast (grammar)");

    const auto rp = fixtures::redundant_pair();
    const auto rd = fixtures::redundant_derivation(rp, true);
    c.equal(source_string(rp, rd), fixtures::kRedundantSource, "Redundant source");
    c.equal(map_derivation_to_target(rp, rd), fixtures::kRedundantTarget, "Redundant target");

    const char *names[] = {"train", "transfer", "test"};
    int i = 0;
    for (const auto &row : {fixtures::kLogicTrain, fixtures::kLogicTransfer, fixtures::kLogicTest}) {
        c.expect(evaluate_expression(row.expression) == row.task,
                 std::string("logic ") + names[i] + " row task label");
        ++i;
    }
    c.expect(!evaluate_expression(fixtures::kLogicTrain.expression, BindingKind::contrast),
             "logic train row contrast label");
}

void moa_table(Criterion &c) {
    const struct {
        MoaInputs in;
        double want;
    } rows[] = {{{88.2, 23.1, 15.4, 95.7}, 0.68},
                {{48.2, 1.9, 2.6, 93.2}, 0.49},
                {{35.1, 24.0, 26.2, 41.9}, 0.21},
                {{21.0, 16.4, 11.6, 42.2}, 0.11}};
    for (const auto &r : rows)
        c.near(moa(r.in), r.want, 0.005, "MoA(" + format_double(r.in.score_main) + ")");
}

void deltas(Criterion &c) {
    const struct {
        const char *label;
        double main, control, contrast, want_main, want_contrast;
        Outcome e1, e2;
    } rows[] = {
        {"T5 probe avg", 71.9, 18.7, 16.0, 53.2, -2.7, Outcome::pass, Outcome::pass},
        {"GPT2 probe avg", 47.9, 8.0, 8.1, 39.8, 0.1, Outcome::pass, Outcome::pass},
        {"T5 fuzzy avg", 6.7, 4.7, 5.8, 2.0, 1.1, Outcome::fail, Outcome::fail},
        {"GPT2 fuzzy avg", 6.8, 5.1, 4.7, 1.7, -0.4, Outcome::fail, Outcome::pass},
    };
    for (const auto &r : rows) {
        const auto v = expectation_verdict(r.main, r.control, r.contrast);
        c.near(v.delta_main, r.want_main, 0.05, std::string(r.label) + " delta(A=>B)");
        c.near(v.delta_contrast, r.want_contrast, 0.05, std::string(r.label) + " delta(C=>B)");
        c.expect(v.expectation1 == r.e1, std::string(r.label) + " expectation1 is " + to_string(v.expectation1));
        if (r.e1 == Outcome::pass)
            c.expect(v.expectation2 == r.e2, std::string(r.label) + " expectation2 is " + to_string(v.expectation2));
    }
}

void properties(Criterion &c) {
    const auto pair = build_default_grammar_pair();
    const auto reversed = reverse_target(pair);
    std::size_t bad_involution = 0, bad_law = 0;
    std::string why;
    for (std::size_t i = 0; i < 10000; ++i) {
        const auto d = sample_derivation(pair.source, derive_seed(101, "acceptance", i));
        const auto t = map_derivation_to_target(pair, d);
        if (reverse_string(reverse_string(t)) != t || map_derivation_to_target(reversed, d) != reverse_string(t))
            ++bad_involution;
        if (!fixtures::concatenation_law_holds(pair, d, &why))
            ++bad_law;
    }
    c.expect(bad_involution == 0, std::to_string(bad_involution) + " of 10000 targets break reversal involution");
    c.expect(bad_law == 0, std::to_string(bad_law) + " of 10000 derivations break the concatenation law: " + why);

    for (const std::string sub : {"com", "mod"}) {
        ProbeSuiteConfig cfg;
        cfg.sub_probe = sub;
        cfg.jobs = 8;
        const auto suite = generate_probe_suite(cfg);
        std::vector<ProbeExample> a, b;
        for (const char *s : {"train_A", "dev_A"})
            a.insert(a.end(), suite.dataset.split(s).begin(), suite.dataset.split(s).end());
        for (const char *s : {"transfer_B", "test_B"})
            b.insert(b.end(), suite.dataset.split(s).begin(), suite.dataset.split(s).end());
        const auto r = check_terminal_disjointness(a, b, default_exemptions(suite.original));
        c.expect(r.ok(), sub + ": " + std::to_string(r.shared.size()) + " terminals shared between A and B");
        const auto findings = validate_dataset(suite.dataset);
        c.expect(findings.empty(), sub + ": " + std::to_string(findings.size()) + " validation findings");
    }

    for (const std::string op : {"a1", "b2", "c3", "d4"}) {
        LogicSuiteConfig cfg;
        cfg.probed_op = op;
        cfg.jobs = 8;
        const auto ds = build_logic_suite(cfg);
        for (const auto &name : ds.split_names()) {
            const auto &v = ds.split(name);
            std::size_t n_true = 0, n_false = 0, wrong_ops = 0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                (v[i].target == "True" ? n_true : n_false)++;
                const bool supplement = name == "transfer_B" && i >= cfg.transfer_count;
                if (!supplement && parse_expression(v[i].source).n_operators() != 8)
                    ++wrong_ops;
            }
            c.expect((n_true > n_false ? n_true - n_false : n_false - n_true) <= 1,
                     op + " " + name + ": " + std::to_string(n_true) + " True vs " + std::to_string(n_false) +
                         " False");
            c.expect(wrong_ops == 0, op + " " + name + ": " + std::to_string(wrong_ops) + " expressions without 8 operators");
        }
        c.expect(validate_dataset(ds).empty(), op + ": validation findings");
    }

    std::size_t disagree = 0;
    for (std::uint64_t s = 0; s < 100000; ++s) {
        const auto sketch = s % 2 ? Sketch::tree : Sketch::chain;
        const auto e = sample_expression(sketch, 3 + s % 7, derive_seed(7, "postfix", s));
        const auto text = render_expression(e);
        if (evaluate_expression(e) != fixtures::postfix_eval(text, false) ||
            evaluate_expression(e, BindingKind::contrast) != fixtures::postfix_eval(text, true))
            ++disagree;
    }
    c.expect(disagree == 0, std::to_string(disagree) + " of 100000 expressions disagree with the postfix evaluator");

    c.near(perplexity({"a", "baseline", "test_B", {0.0, 0.0, 0.0}, 3}), 1.0, 1e-12, "PPL all-certain");
    c.near(perplexity({"a", "baseline", "test_B", {std::log(0.5), std::log(0.5)}, 2}), 2.0, 1e-12, "PPL coin");
    c.near(perplexity({"a", "baseline", "test_B", {std::log(0.1), std::log(0.4), std::log(0.25)}, 3}), 4.6416, 1e-3,
           "PPL mixed");
    std::vector<LogProbRecord> same;
    for (const std::string cond : {"baseline", "prune:enc.L0.H0"})
        for (const std::string set : {"test_B", "transfer_B"})
            same.push_back(fixtures::ppl_record("x", cond, set, {3.0, 1.5}));
    c.near(dpc_report(same).rows.at(0).dpc, 0.0, 1e-12, "DPC identical");
    const auto one = dpc_report({fixtures::ppl_record("t", "baseline", "test_B", {10}),
                                 fixtures::ppl_record("u", "baseline", "transfer_B", {5}),
                                 fixtures::ppl_record("t", "prune:enc.L2.H3", "test_B", {30}),
                                 fixtures::ppl_record("u", "prune:enc.L2.H3", "transfer_B", {7})});
    c.near(one.rows.at(0).dpc, 18.0, 1e-9, "DPC single head");
}

void scale(Criterion &c) {
    const auto root = fs::temp_directory_path() / ("absprobe-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    struct Job {
        std::string name, args;
        std::vector<std::pair<std::string, std::size_t>> counts;
    };
    const std::vector<Job> jobs = {
        {"grammar-com", "gen grammar --seed 0 --sub-probe com",
         {{"train_A", 34175}, {"dev_A", 1000}, {"transfer_B", 24155}, {"test_B", 1002}}},
        {"grammar-mod", "gen grammar --seed 0 --sub-probe mod",
         {{"train_A", 34175}, {"dev_A", 1000}, {"transfer_B", 24155}, {"test_B", 1002}}},
        {"logic-a1", "gen logic --seed 0 --op a1", {{"train_A", 100000}, {"transfer_B", 20100}, {"test_B", 1000}}},
    };
    for (const auto &j : jobs) {
        const auto one = root / (j.name + "-j1"), eight = root / (j.name + "-j8");
        c.expect(run_binary(j.args + " --jobs 1 --out " + one.string()) == 0, j.name + " --jobs 1 failed");
        c.expect(run_binary(j.args + " --jobs 8 --out " + eight.string()) == 0, j.name + " --jobs 8 failed");
        std::string why;
        c.expect(same_tree(one, eight, why), j.name + ": --jobs 1 and --jobs 8 differ in " + why);
        const auto ds = read_dataset(one);
        for (const auto &[split, n] : j.counts)
            c.expect(ds.split(split).size() == n, j.name + " " + split + " has " +
                                                      std::to_string(ds.split(split).size()) + ", want " +
                                                      std::to_string(n));
        if (j.name == "grammar-com") {
            const auto s = split_stats(ds.split("train_A"));
            c.near(s.avg_source_len, 16.8, 0.2 * 16.8, "train_A average source length");
            c.near(s.avg_target_len, 29.9, 0.2 * 29.9, "train_A average target length");
        }
    }
    fs::remove_all(root);
}

void head_selection(Criterion &c) {
    auto records = fixtures::synthetic_dpc_records();
    const auto first = select_top_heads(dpc_report(records), 36);
    c.expect(first.size() == 36, "top-k returned " + std::to_string(first.size()) + " heads");
    const auto rows = dpc_report(records).rows;
    c.expect(rows.at(35).dpc == rows.at(36).dpc, "fixture has no tie across the top-36 cut");
    std::mt19937_64 rng(5);
    for (int run = 0; run < 5; ++run) {
        std::shuffle(records.begin(), records.end(), rng);
        const auto again = select_top_heads(dpc_report(records), 36);
        c.expect(again == first, "top-36 changed after shuffling input, run " + std::to_string(run));
        c.equal(heads_config(again, "freeze").dump(), heads_config(first, "freeze").dump(), "heads config");
    }
    const auto ids = all_head_ids();
    std::vector<HeadId> want;
    for (std::size_t k = 0; k < ids.size() && want.size() < 36; ++k)
        if (k % 9 == 8)
            want.push_back(ids[k]);
    c.expect(first == want, "top-36 is not the first 36 heads of the highest tie group in head order");
}

} // namespace

int main() {
    run("golden worked examples", 1.0, golden);
    run("MoA table", 1.0, moa_table);
    run("delta-transfer and verdicts", 1.0, deltas);
    run("property suite", 120.0, properties);
    run("scale check", 300.0, scale);
    run("head-selection determinism", 60.0, head_selection);
    std::cout << (n_failed ? std::to_string(n_failed) + " of 6 criteria failed\n" : "all 6 criteria passed\n");
    return n_failed ? 1 : 0;
}
