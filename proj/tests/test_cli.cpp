#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>

#include "absprobe/absprobe.hpp"
#include "fixtures.hpp"

using namespace absprobe;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the installed binary; stderr is discarded unless merged.
Run run_binary(const std::string &args, bool merge_stderr = false) {
    const std::string cmd = std::string(ABSPROBE_CLI_PATH) + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
    Run r;
    FILE *p = ::popen(cmd.c_str(), "r");
    if (!p)
        return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0)
        r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

Run run(const std::vector<std::string> &args) {
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    return r;
}

class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        path_ = fs::temp_directory_path() / ("absprobe-cli-" + tag + "-" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string operator/(const std::string &name) const { return (path_ / name).string(); }
    const fs::path &path() const { return path_; }

  private:
    fs::path path_;
};

std::vector<std::string> gen_grammar_args(const std::string &out, const std::string &jobs = "1") {
    return {"gen",  "grammar", "--seed",       "17", "--train", "300", "--dev", "20", "--transfer",
            "120", "--test",   "40",           "--jobs", jobs, "--out", out};
}

std::string join_args(const std::vector<std::string> &args) {
    std::string s;
    for (const auto &a : args)
        s += (s.empty() ? "" : " ") + a;
    return s;
}

} // namespace

TEST(CliProcess, ExitCodes) {
    EXPECT_EQ(run_binary("").code, 2);
    EXPECT_EQ(run_binary("frobnicate").code, 2);
    EXPECT_EQ(run_binary("moa --main 1").code, 2);
    EXPECT_EQ(run_binary("--help").code, 0);
    TempDir dir("codes");
    const auto r = run_binary("gen grammar --train 10 --out " + (dir / "x"), true);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("--seed is required"), std::string::npos) << r.out;
}

TEST(CliProcess, Moa) {
    const auto r = run_binary("moa --main 88.2 --control 23.1 --contrast 15.4 --full 95.7");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "0.68\n");
}

TEST(CliProcess, GenJobsInvariant) {
    TempDir dir("jobs");
    ASSERT_EQ(run_binary(join_args(gen_grammar_args(dir / "j1", "1"))).code, 0);
    ASSERT_EQ(run_binary(join_args(gen_grammar_args(dir / "j4", "4"))).code, 0);
    std::size_t files = 0;
    for (const auto &e : fs::directory_iterator(dir.path() / "j1")) {
        ++files;
        EXPECT_EQ(read_text_file(e.path()), read_text_file(dir.path() / "j4" / e.path().filename()))
            << e.path().filename();
    }
    EXPECT_EQ(files, 8u);
}

TEST(Cli, MoaFormats) {
    auto r = run({"moa", "--main", "88.2", "--control", "23.1", "--contrast", "15.4", "--full", "95.7", "--format",
                  "json"});
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["moa"].get<double>(), 65.1 / 95.7, 1e-12);
    EXPECT_NEAR(j["score_a"].get<double>(), 65.1, 1e-9);
    r = run({"moa", "--main", "1", "--control", "0", "--contrast", "0", "--full", "0"});
    EXPECT_EQ(r.code, 1);
}

TEST(Cli, GenGrammarWritesSuite) {
    TempDir dir("gen");
    const auto out = dir / "suite";
    auto r = run(gen_grammar_args(out));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out, "wrote " + out + ": train_A=300 dev_A=20 transfer_B=120 test_B=40 contrast_C=300\n");
    for (const char *f : {"train_A.jsonl", "dev_A.jsonl", "transfer_B.jsonl", "test_B.jsonl", "contrast_C.jsonl",
                          "manifest.json", "config.json", "terminal_map.json"})
        EXPECT_TRUE(fs::exists(dir.path() / "suite" / f)) << f;

    r = run({"check", "--dataset", out});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "ok: 780 examples, no findings\n");

    r = run({"stats", "--dataset", out, "--format", "csv"});
    ASSERT_EQ(r.code, 0);
    const auto ds = read_dataset(out);
    EXPECT_EQ(r.out, stats_to_csv(ds));
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "split,count,avg_src_len,avg_tgt_len,n_true,n_false");
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6);

    r = run({"stats", "--dataset", out});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["test_B"]["count"], 40);
}

TEST(Cli, SeedFromConfig) {
    TempDir dir("cfg");
    ProbeSuiteConfig c;
    c.seed = 17;
    c.train_count = 300;
    c.dev_count = 20;
    c.transfer_count = 120;
    c.test_count = 40;
    write_text_file(dir / "cfg.json", c.to_json().dump());
    ASSERT_EQ(run({"gen", "grammar", "--config", dir / "cfg.json", "--out", dir / "a"}).code, 0);
    ASSERT_EQ(run(gen_grammar_args(dir / "b")).code, 0);
    EXPECT_EQ(read_text_file(dir.path() / "a" / "test_B.jsonl"), read_text_file(dir.path() / "b" / "test_B.jsonl"));
    ASSERT_EQ(run({"gen", "grammar", "--config", dir / "cfg.json", "--seed", "18", "--out", dir / "c"}).code, 0);
    EXPECT_NE(read_text_file(dir.path() / "a" / "test_B.jsonl"), read_text_file(dir.path() / "c" / "test_B.jsonl"));
}

TEST(Cli, CheckReportsTampering) {
    TempDir dir("tamper");
    const auto out = dir / "suite";
    ASSERT_EQ(run(gen_grammar_args(out)).code, 0);
    auto lines = read_lines(dir.path() / "suite" / "test_B.jsonl");
    lines.pop_back();
    std::string text;
    for (const auto &l : lines)
        text += l + "\n";
    write_text_file(dir.path() / "suite" / "test_B.jsonl", text);
    const auto r = run_binary("check --dataset " + out);
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.out, "integrity: split test_B: manifest count 40 but file has 39 examples\n");
}

TEST(Cli, CheckReportsFindings) {
    TempDir dir("findings");
    const auto out = dir / "suite";
    ASSERT_EQ(run(gen_grammar_args(out)).code, 0);
    auto ds = read_dataset(out);
    ds.splits["test_B"][0].meta.recursion_depth = 1;
    write_dataset(ds, out);
    const auto r = run({"check", "--dataset", out});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("recursion_bound [test_B grammar-com-test_B-000000]"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("1 findings"), std::string::npos);
}

TEST(Cli, GenLogic) {
    TempDir dir("logic");
    const auto out = dir / "logic";
    auto r = run({"gen", "logic", "--seed", "2", "--op", "d4", "--train", "100", "--dev", "10", "--transfer", "50",
                  "--test", "20", "--out", out});
    ASSERT_EQ(r.code, 0) << r.out;
    const auto ds = read_dataset(out);
    EXPECT_EQ(ds.sub_probe, "joi");
    EXPECT_EQ(run({"check", "--dataset", out}).code, 0);
}

TEST(Cli, MutateInputTwiceRestoresReverse) {
    TempDir dir("mutate");
    ASSERT_EQ(run(gen_grammar_args(dir / "base")).code, 0);
    ASSERT_EQ(run({"mutate", "--mutation", "reverse", "--input", dir / "base", "--out", dir / "r1"}).code, 0);
    ASSERT_EQ(run({"mutate", "--mutation", "reverse", "--input", dir / "r1", "--out", dir / "r2"}).code, 0);
    const auto base = read_dataset(dir / "base");
    const auto r1 = read_dataset(dir / "r1");
    const auto r2 = read_dataset(dir / "r2");
    EXPECT_EQ(r1.grammar_tag, "reverse");
    for (const auto &name : base.split_names())
        for (std::size_t i = 0; i < base.split(name).size(); ++i) {
            EXPECT_EQ(r1.split(name)[i].target, reverse_string(base.split(name)[i].target));
            EXPECT_EQ(r2.split(name)[i].target, base.split(name)[i].target);
        }
    EXPECT_EQ(run({"mutate", "--mutation", "sideways", "--seed", "1", "--out", dir / "x"}).code, 2);
    EXPECT_EQ(run({"mutate", "--mutation", "redundant", "--input", dir / "base", "--out", dir / "x"}).code, 2);
}

TEST(Cli, MutateSample) {
    TempDir dir("msample");
    ASSERT_EQ(run({"mutate", "--mutation", "coarse", "--seed", "4", "--count", "50", "--out", dir / "c"}).code, 0);
    const auto ds = read_dataset(dir / "c");
    ASSERT_EQ(ds.split("train_A").size(), 50u);
    EXPECT_EQ(ds.grammar_tag, "coarse");
    ASSERT_EQ(run({"mutate", "--mutation", "redundant", "--seed", "4", "--count", "50", "--out", dir / "r"}).code, 0);
    EXPECT_EQ(read_dataset(dir / "r").grammar_tag, "redundant");
}

TEST(Cli, Multigrammar) {
    TempDir dir("multi");
    ASSERT_EQ(run({"multigrammar", "--grammars", "original:5,coarse:5,reverse:5", "--seed", "9", "--out", dir / "m"})
                  .code,
              0);
    const auto ds = read_dataset(dir / "m");
    EXPECT_EQ(ds.grammar_tag, "mixed");
    EXPECT_EQ(ds.split("train_A").size(), 15u);
    EXPECT_TRUE(validate_dataset(ds).empty());
    EXPECT_EQ(run({"multigrammar", "--grammars", "original", "--seed", "9", "--out", dir / "x"}).code, 2);
}

TEST(Cli, ConvertCogs) {
    auto r = run({"convert-cogs", "--lf", fixtures::kCogsRows[0].lf});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, std::string(fixtures::kCogsRows[0].target) + "\n");

    TempDir dir("cogs");
    write_text_file(dir / "in.tsv", std::string("A rose was helped by a dog .\t") + fixtures::kCogsRows[0].lf +
                                        "\tin_distribution\nbad row\tnot ( an lf\tx\n");
    r = run({"convert-cogs", "--input", dir / "in.tsv", "--out", dir / "out.tsv"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(read_text_file(dir / "out.tsv"), std::string("A rose was helped by a dog .\t") +
                                                    fixtures::kCogsRows[0].target + "\tin_distribution\n");
}

TEST(Cli, FuzzySplit) {
    TempDir dir("fuzzy");
    write_text_file(dir / "src.txt", "a b\na b c d e f g h\n\n");
    write_text_file(dir / "tgt.txt", "x\ny\nz\n");
    write_text_file(dir / "tsrc.txt", "p q r\n");
    write_text_file(dir / "ttgt.txt", "u v w\n");
    auto r = run({"fuzzy-split", "--src", dir / "src.txt", "--tgt", dir / "tgt.txt", "--train-src", dir / "tsrc.txt",
                  "--train-tgt", dir / "ttgt.txt", "--transfer-max", "3", "--test-min", "6", "--contrast", "--out",
                  dir / "f"});
    ASSERT_EQ(r.code, 0) << r.out;
    const auto ds = read_dataset(dir / "f");
    EXPECT_EQ(ds.split("transfer_B").size(), 1u);
    EXPECT_EQ(ds.split("test_B").size(), 1u);
    EXPECT_EQ(ds.split("contrast_C")[0].target, "w v u");
    EXPECT_NE(r.out.find("empty: 1"), std::string::npos) << r.out;

    r = run({"fuzzy-split", "--src", dir / "src.txt", "--tgt", dir / "tgt.txt", "--contrast", "--out", dir / "g"});
    EXPECT_NE(r.code, 0);
}

TEST(Cli, EvalExactMatchAndBleu) {
    TempDir dir("eval");
    ASSERT_EQ(run(gen_grammar_args(dir / "s")).code, 0);
    const auto ds = read_dataset(dir / "s");
    std::string preds;
    const auto &test = ds.split("test_B");
    for (std::size_t i = 0; i < test.size(); ++i) {
        nlohmann::ordered_json j;
        j["id"] = test[i].id;
        j["prediction"] = i % 2 ? test[i].target : std::string("WRONG");
        preds += j.dump() + "\n";
    }
    write_text_file(dir / "p.jsonl", preds);
    auto r = run({"eval", "em", "--predictions", dir / "p.jsonl", "--dataset", dir / "s"});
    ASSERT_EQ(r.code, 0);
    auto j = nlohmann::json::parse(r.out);
    EXPECT_DOUBLE_EQ(j["score"].get<double>(), 50.0);
    EXPECT_EQ(j["total"], 40);
    EXPECT_EQ(j["missing"], 0);

    r = run({"eval", "bleu", "--predictions", dir / "p.jsonl", "--dataset", dir / "s"});
    ASSERT_EQ(r.code, 0);
    j = nlohmann::json::parse(r.out);
    std::vector<std::string> hyps, refs;
    for (std::size_t i = 0; i < test.size(); ++i) {
        hyps.push_back(i % 2 ? test[i].target : "WRONG");
        refs.push_back(test[i].target);
    }
    EXPECT_DOUBLE_EQ(j["score"].get<double>(), bleu(hyps, refs).score);
}

TEST(Cli, DpcAndHeads) {
    TempDir dir("dpc");
    std::string text;
    for (const auto &r : fixtures::synthetic_dpc_records())
        text += to_json(r).dump() + "\n";
    write_text_file(dir / "lp.jsonl", text);
    auto r = run({"dpc", "--logprobs", dir / "lp.jsonl", "--out", dir / "report.csv"});
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rep = dpc_report(fixtures::synthetic_dpc_records());
    EXPECT_EQ(read_text_file(dir / "report.csv"), dpc_csv(rep));

    r = run({"heads", "--report", dir / "report.csv", "--k", "36", "--mode", "prune"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::ordered_json::parse(r.out), heads_config(select_top_heads(rep, 36), "prune"));
}

TEST(Cli, CurveAndVerdict) {
    TempDir dir("curve");
    write_text_file(dir / "dev.csv", "step,score\n100,10\n200,30\n300,25\n");
    auto r = run({"curve", "--dev", dir / "dev.csv"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["checkpoint"], 200);

    r = run({"verdict", "--main", "88.2", "--control", "23.1", "--contrast", "15.4", "--format", "csv"});
    ASSERT_EQ(r.code, 0);
    const auto v = expectation_verdict(88.2, 23.1, 15.4);
    EXPECT_EQ(r.out, "delta_main,delta_contrast,expectation1,expectation2\n" + format_double(v.delta_main) + "," +
                         format_double(v.delta_contrast) + "," + to_string(v.expectation1) + "," +
                         to_string(v.expectation2) + "\n");
    r = run({"verdict", "--main", "88.2", "--control", "23.1", "--contrast", "15.4"});
    EXPECT_EQ(nlohmann::ordered_json::parse(r.out), to_json(v));
}
