#include <gtest/gtest.h>

#include <cctype>

#include "absprobe/absprobe.hpp"

using namespace absprobe;

namespace {

ProbeSuiteConfig small_config(const std::string &sub) {
    ProbeSuiteConfig c;
    c.seed = 3;
    c.sub_probe = sub;
    c.train_count = 2000;
    c.dev_count = 100;
    c.transfer_count = 800;
    c.test_count = 200;
    return c;
}

const ProbeSuite &com_suite() {
    static const ProbeSuite s = generate_probe_suite(small_config("com"));
    return s;
}

const ProbeSuite &mod_suite() {
    static const ProbeSuite s = generate_probe_suite(small_config("mod"));
    return s;
}

std::set<std::string> class_members(const Pcfg &g, const std::string &id) {
    for (const auto &c : g.classes())
        if (c.id == id)
            return {c.members.begin(), c.members.end()};
    return {};
}

std::string lower(std::string s) {
    for (auto &ch : s)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

// True when a preposition occurs before the main verb of the first clause.
bool subject_has_pp(const ProbeSuite &s, const std::string &source) {
    const auto verbs = class_members(s.original.source, "S_v");
    const auto preps = class_members(s.original.source, "S_prep");
    for (const auto &t : split_tokens(source)) {
        const auto w = lower(t);
        if (verbs.count(w))
            return false;
        if (preps.count(w))
            return true;
    }
    ADD_FAILURE() << "no verb in " << source;
    return false;
}

std::vector<ProbeExample> concat(const ProbeDataset &ds, std::initializer_list<const char *> names) {
    std::vector<ProbeExample> out;
    for (auto n : names)
        out.insert(out.end(), ds.split(n).begin(), ds.split(n).end());
    return out;
}

} // namespace

TEST(Suite, ComCounts) {
    const auto &ds = com_suite().dataset;
    EXPECT_EQ(ds.split("train_A").size(), 2000u);
    EXPECT_EQ(ds.split("dev_A").size(), 100u);
    EXPECT_EQ(ds.split("transfer_B").size(), 800u);
    EXPECT_EQ(ds.split("test_B").size(), 200u);
    EXPECT_EQ(ds.split("contrast_C").size(), 2000u);
    EXPECT_EQ(ds.probe, "grammar");
    EXPECT_EQ(ds.sub_probe, "com");
}

TEST(Suite, ComRecursionBounds) {
    const auto &ds = com_suite().dataset;
    std::set<int> test_depths;
    for (const auto &e : ds.split("transfer_B")) {
        EXPECT_LE(e.meta.recursion_depth, 2);
        EXPECT_FALSE(subject_has_pp(com_suite(), e.source)) << e.source;
    }
    for (const auto &e : ds.split("test_B")) {
        EXPECT_GE(e.meta.recursion_depth, 3);
        EXPECT_LE(e.meta.recursion_depth, 12);
        test_depths.insert(e.meta.recursion_depth);
    }
    EXPECT_EQ(test_depths.size(), 10u);
    for (const auto &e : ds.split("train_A"))
        EXPECT_LE(e.meta.recursion_depth, 12);
}

TEST(Suite, ModConstraints) {
    const auto &s = mod_suite();
    for (const auto &e : s.dataset.split("transfer_B")) {
        EXPECT_EQ(e.meta.recursion_depth, 0);
        EXPECT_FALSE(subject_has_pp(s, e.source)) << e.source;
    }
    for (const auto &e : s.dataset.split("test_B")) {
        EXPECT_EQ(e.meta.recursion_depth, 0);
        EXPECT_TRUE(subject_has_pp(s, e.source)) << e.source;
    }
}

TEST(Suite, ModSamplerFeatures) {
    const auto cfg = small_config("mod");
    const auto sc = split_constraints(cfg);
    const auto pair = build_default_grammar_pair(cfg.grammar_options());
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const auto d = sample_derivation(pair.source, seed, sc.test);
        EXPECT_GE(d.summary.count("pp_subj"), 1);
        EXPECT_EQ(d.summary.count("pp_obj"), 0);
        EXPECT_LE(d.summary.count("pp_nested"), cfg.mod_max_nesting - 1);
        EXPECT_EQ(d.summary.recursion_count, 0);
    }
}

TEST(Suite, DevIsDisjointFromTrain) {
    const auto &ds = com_suite().dataset;
    std::set<std::string> train;
    for (const auto &e : ds.split("train_A"))
        train.insert(e.source);
    std::set<std::string> dev;
    for (const auto &e : ds.split("dev_A")) {
        EXPECT_FALSE(train.count(e.source)) << e.source;
        EXPECT_TRUE(dev.insert(e.source).second) << e.source;
    }
}

TEST(Disjointness, SplitsShareOnlyExemptions) {
    for (const auto *s : {&com_suite(), &mod_suite()}) {
        const auto a = concat(s->dataset, {"train_A", "dev_A"});
        const auto b = concat(s->dataset, {"transfer_B", "test_B"});
        const auto r = check_terminal_disjointness(a, b, default_exemptions(s->original));
        EXPECT_TRUE(r.ok()) << *r.shared.begin();
    }
}

TEST(Disjointness, IdenticalSlices) {
    const auto &s = com_suite();
    const auto &a = s.dataset.split("train_A");
    const auto exempt = default_exemptions(s.original);
    std::set<std::string> want;
    for (const auto &t : slice_vocabulary(a))
        if (!exempt.count(t))
            want.insert(t);
    ASSERT_FALSE(want.empty());
    EXPECT_EQ(check_terminal_disjointness(a, a, exempt).shared, want);
}

TEST(Disjointness, SingleLeak) {
    const auto &s = com_suite();
    const auto a = s.dataset.split("train_A");
    auto b = s.dataset.split("test_B");
    b[5].source += " zzleak";
    auto a2 = a;
    a2[9].target += " zzleak";
    const auto r = check_terminal_disjointness(a2, b, default_exemptions(s.original));
    EXPECT_EQ(r.shared, std::set<std::string>{"zzleak"});
}

TEST(Suite, ValidatesClean) {
    for (const auto *s : {&com_suite(), &mod_suite()})
        for (const auto &f : validate_dataset(s->dataset))
            ADD_FAILURE() << format_finding(f);
}

TEST(Suite, JobsInvariant) {
    auto cfg = small_config("com");
    cfg.train_count = 500;
    cfg.transfer_count = 300;
    cfg.test_count = 100;
    cfg.dev_count = 50;
    cfg.jobs = 1;
    const auto one = generate_probe_suite(cfg).dataset;
    cfg.jobs = 4;
    const auto four = generate_probe_suite(cfg).dataset;
    EXPECT_EQ(one, four);
    EXPECT_EQ(one.config, four.config);
}

TEST(Suite, ContrastReversesTrain) {
    const auto &ds = com_suite().dataset;
    const auto &train = ds.split("train_A");
    const auto &contrast = ds.split("contrast_C");
    ASSERT_EQ(train.size(), contrast.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        EXPECT_EQ(contrast[i].source, train[i].source);
        EXPECT_EQ(contrast[i].target, reverse_string(train[i].target));
        EXPECT_EQ(contrast[i].grammar_tag, "reverse");
    }
}

TEST(Suite, TrainUsesResampledVocabulary) {
    const auto &s = com_suite();
    const auto original = semantic_terminals(s.original);
    for (const auto &t : slice_vocabulary(s.dataset.split("train_A")))
        EXPECT_FALSE(original.count(t) && !default_exemptions(s.original).count(t)) << t;
}

TEST(Suite, PassiveAddsPassiveClauses) {
    auto cfg = small_config("com");
    cfg.passive = true;
    cfg.train_count = 200;
    cfg.dev_count = 10;
    cfg.transfer_count = 400;
    cfg.test_count = 20;
    const auto ds = generate_probe_suite(cfg).dataset;
    std::size_t passive = 0;
    for (const auto &e : ds.split("transfer_B"))
        passive += e.source.find(" was ") != std::string::npos;
    EXPECT_GT(passive, 0u);
    EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(Config, JsonRoundTrip) {
    auto cfg = small_config("mod");
    cfg.passive = true;
    cfg.mod_max_nesting = 3;
    cfg.weights["sentence -> cp_clause conj sentence"] = 4.5;
    const auto j = cfg.to_json();
    const auto back = ProbeSuiteConfig::from_json(j);
    EXPECT_EQ(back.to_json(), j);
    EXPECT_EQ(back.mod_max_nesting, 3);
}

TEST(Config, Rejections) {
    auto j = small_config("com").to_json();
    j["sub_probe"] = "conj";
    EXPECT_THROW(ProbeSuiteConfig::from_json(j), ValidationError);
    j = small_config("com").to_json();
    j["surprise"] = 1;
    EXPECT_THROW(ProbeSuiteConfig::from_json(j), ValidationError);
    j = small_config("com").to_json();
    j["recursion"]["transfer_max"] = 3;
    EXPECT_THROW(ProbeSuiteConfig::from_json(j), ValidationError);
}

TEST(Config, WordListShortfall) {
    WordList tiny{{"alpha", "beta", "gamma"}, "tiny"};
    EXPECT_THROW(generate_probe_suite(small_config("com"), tiny), WordListExhausted);
}
