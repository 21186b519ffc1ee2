#pragma once

// Formal-language translation probe: suite generation (train_A, dev_A,
// transfer_B, test_B, contrast_C) over a resampled grammar pair and the
// original one, plus terminal-disjointness checks.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "absprobe/common.hpp"
#include "absprobe/dataset.hpp"
#include "absprobe/grammar.hpp"
#include "absprobe/grammar_pair.hpp"
#include "absprobe/mutations.hpp"
#include "absprobe/parallel.hpp"

namespace absprobe {

struct ProbeSuiteConfig {
    std::uint64_t seed = 0;
    std::string sub_probe = "com"; // com | mod
    std::size_t train_count = 34175;
    std::size_t dev_count = 1000;
    std::size_t transfer_count = 24155;
    std::size_t test_count = 1002;
    std::size_t n_conjunctions = 32;
    std::size_t max_class_size = 0;
    bool passive = false;
    int train_max_recursion = 12;
    int transfer_max_recursion = 2;
    int test_min_recursion = 3;
    int test_max_recursion = 12;
    int mod_max_nesting = 2; // PP nesting depth on test_B subjects for the mod sub-probe
    std::map<std::string, double> weights = default_weights();
    unsigned jobs = 1; // not part of the config record; output does not depend on it

    /// Source-rule weight overrides used by default. Lowers PP modification
    /// and raises clausal recursion relative to uniform weights.
    static std::map<std::string, double> default_weights() {
        std::map<std::string, double> w;
        for (const std::string np : {"np_subj", "np_obj", "np_pp"}) {
            w[np + " -> det noun prep np_pp"] = 0.25;
            w[np + " -> name prep np_pp"] = 0.25;
        }
        w["sentence -> cp_clause conj sentence"] = 20.0;
        return w;
    }

    void validate() const {
        if (sub_probe != "com" && sub_probe != "mod")
            throw ValidationError("sub_probe must be com or mod, got '" + sub_probe + "'");
        if (train_count == 0 || transfer_count == 0 || test_count == 0)
            throw ValidationError("split counts must be positive");
        if (n_conjunctions < 1)
            throw ValidationError("n_conjunctions must be at least 1");
        if (transfer_max_recursion < 0 || test_min_recursion > test_max_recursion || train_max_recursion < 0)
            throw ValidationError("invalid recursion limits");
        if (sub_probe == "com" && transfer_max_recursion >= test_min_recursion)
            throw ValidationError("transfer_B recursion limit must be below the test_B minimum");
        if (mod_max_nesting < 1)
            throw ValidationError("mod_max_nesting must be at least 1");
    }

    GrammarOptions grammar_options() const {
        GrammarOptions o;
        o.max_class_size = max_class_size;
        o.passive = passive;
        o.max_iterations = std::max({train_max_recursion, test_max_recursion, 1});
        o.weights = weights;
        return o;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["probe"] = "grammar";
        j["seed"] = seed;
        j["sub_probe"] = sub_probe;
        j["counts"] = {{"train_A", train_count}, {"dev_A", dev_count}, {"transfer_B", transfer_count},
                       {"test_B", test_count}};
        j["n_conjunctions"] = n_conjunctions;
        j["max_class_size"] = max_class_size;
        j["passive"] = passive;
        j["recursion"] = {{"train_max", train_max_recursion},
                          {"transfer_max", transfer_max_recursion},
                          {"test_min", test_min_recursion},
                          {"test_max", test_max_recursion}};
        j["mod_max_nesting"] = mod_max_nesting;
        nlohmann::ordered_json w = nlohmann::ordered_json::object();
        for (const auto &[k, v] : weights)
            w[k] = v;
        j["weights"] = w;
        return j;
    }

    /// Missing keys keep their defaults; unknown keys are rejected.
    static ProbeSuiteConfig from_json(const nlohmann::ordered_json &j) {
        if (!j.is_object())
            throw ValidationError("grammar config must be a JSON object");
        ProbeSuiteConfig c;
        try {
            for (const auto &[k, v] : j.items()) {
                if (k == "probe") {
                    if (v != "grammar")
                        throw ValidationError("config probe must be 'grammar'");
                } else if (k == "seed") {
                    c.seed = v.get<std::uint64_t>();
                } else if (k == "sub_probe") {
                    c.sub_probe = v.get<std::string>();
                } else if (k == "counts") {
                    for (const auto &[ck, cv] : v.items()) {
                        const auto n = cv.get<std::size_t>();
                        if (ck == "train_A")
                            c.train_count = n;
                        else if (ck == "dev_A")
                            c.dev_count = n;
                        else if (ck == "transfer_B")
                            c.transfer_count = n;
                        else if (ck == "test_B")
                            c.test_count = n;
                        else
                            throw ValidationError("unknown split in counts: '" + ck + "'");
                    }
                } else if (k == "n_conjunctions") {
                    c.n_conjunctions = v.get<std::size_t>();
                } else if (k == "max_class_size") {
                    c.max_class_size = v.get<std::size_t>();
                } else if (k == "passive") {
                    c.passive = v.get<bool>();
                } else if (k == "recursion") {
                    for (const auto &[rk, rv] : v.items()) {
                        const int n = rv.get<int>();
                        if (rk == "train_max")
                            c.train_max_recursion = n;
                        else if (rk == "transfer_max")
                            c.transfer_max_recursion = n;
                        else if (rk == "test_min")
                            c.test_min_recursion = n;
                        else if (rk == "test_max")
                            c.test_max_recursion = n;
                        else
                            throw ValidationError("unknown recursion key '" + rk + "'");
                    }
                } else if (k == "mod_max_nesting") {
                    c.mod_max_nesting = v.get<int>();
                } else if (k == "weights") {
                    c.weights.clear();
                    for (const auto &[wk, wv] : v.items())
                        c.weights[wk] = wv.get<double>();
                } else {
                    throw ValidationError("unknown grammar config key '" + k + "'");
                }
            }
        } catch (const nlohmann::json::exception &e) {
            throw ValidationError(std::string("malformed grammar config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

/// Sampling constraints per split.
struct SplitConstraints {
    SampleConstraints train;
    SampleConstraints transfer;
    SampleConstraints test;
    bool test_uniform_recursion = false; // draw an exact recursion count uniformly in [test_min, test_max]
};

inline SplitConstraints split_constraints(const ProbeSuiteConfig &c) {
    SplitConstraints s;
    s.train.max_recursion = c.train_max_recursion;
    s.transfer.max_recursion = c.transfer_max_recursion;
    s.transfer.forbidden_features = {"pp_subj"};
    if (c.sub_probe == "com") {
        s.test.min_recursion = c.test_min_recursion;
        s.test.max_recursion = c.test_max_recursion;
        s.test.forbidden_features = {"pp_subj"};
        s.test_uniform_recursion = true;
    } else {
        s.transfer.max_recursion = 0;
        s.test.max_recursion = 0;
        s.test.required_features = {"pp_subj"};
        s.test.forbidden_features = {"pp_obj"};
        s.test.feature_limits = {{"pp_nested", c.mod_max_nesting - 1}};
    }
    return s;
}

struct ProbeSuite {
    ProbeDataset dataset;
    GrammarPair original;
    GrammarPair resampled;
    TerminalMap terminal_map;
};

namespace detail {

inline ProbeExample grammar_example(const GrammarPair &source_pair, const GrammarPair &target_pair,
                                    const Derivation &d, const std::string &split, const std::string &sub) {
    ProbeExample ex;
    ex.split = split;
    ex.probe = "grammar";
    ex.sub_probe = sub;
    ex.grammar_tag = "original";
    ex.source = source_string(source_pair, d);
    ex.target = map_derivation_to_target(target_pair, d);
    ex.meta.recursion_depth = d.summary.recursion_count;
    ex.meta.n_clauses = d.summary.recursion_count + 1;
    return ex;
}

inline std::vector<ProbeExample> sample_split(const GrammarPair &pair, const ProbeSuiteConfig &cfg,
                                              const SampleConstraints &c, const std::string &split,
                                              std::optional<std::pair<int, int>> uniform_recursion = std::nullopt) {
    return parallel_map<ProbeExample>(
        split == "train_A" ? cfg.train_count : split == "transfer_B" ? cfg.transfer_count : cfg.test_count, cfg.jobs,
        [&](std::size_t i) {
            const auto seed = derive_seed(cfg.seed, split, i);
            auto ci = c;
            if (uniform_recursion) {
                Rng rng(seed);
                const int lo = uniform_recursion->first, hi = uniform_recursion->second;
                const int r = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
                ci.min_recursion = r;
                ci.max_recursion = r;
            }
            return grammar_example(pair, pair, sample_derivation(pair.source, mix64(seed), ci), split, cfg.sub_probe);
        });
}

} // namespace detail

/// train_A and dev_A come from the resampled pair, transfer_B and test_B from
/// the original one, contrast_C from the train_A derivations mapped through
/// the reversed target grammar.
inline ProbeSuite generate_probe_suite(const ProbeSuiteConfig &cfg, const WordList &words) {
    cfg.validate();
    ProbeSuite suite;
    suite.original = build_default_grammar_pair(cfg.grammar_options());
    auto [resampled, map] =
        resample_terminals(suite.original, words, derive_seed(cfg.seed, "resample", 0), cfg.n_conjunctions);
    suite.resampled = std::move(resampled);
    suite.terminal_map = std::move(map);
    const auto reversed = reverse_target(suite.resampled);
    const auto sc = split_constraints(cfg);

    auto &ds = suite.dataset;
    ds.probe = "grammar";
    ds.sub_probe = cfg.sub_probe;
    ds.grammar_tag = "original";
    ds.seed = cfg.seed;
    ds.config = cfg.to_json();
    ds.config["word_list_id"] = words.id;

    auto assign_ids = [&](std::vector<ProbeExample> &v, const std::string &split) {
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i].id = example_id("grammar", cfg.sub_probe, split, i);
    };

    // train_A and contrast_C share derivations.
    std::vector<Derivation> train_d = parallel_map<Derivation>(cfg.train_count, cfg.jobs, [&](std::size_t i) {
        return sample_derivation(suite.resampled.source, derive_seed(cfg.seed, "train_A", i), sc.train);
    });
    auto &train = ds.splits["train_A"];
    auto &contrast = ds.splits["contrast_C"];
    train.reserve(train_d.size());
    contrast.reserve(train_d.size());
    for (const auto &d : train_d) {
        train.push_back(detail::grammar_example(suite.resampled, suite.resampled, d, "train_A", cfg.sub_probe));
        auto c = detail::grammar_example(suite.resampled, reversed, d, "contrast_C", cfg.sub_probe);
        c.grammar_tag = "reverse";
        contrast.push_back(std::move(c));
    }
    assign_ids(train, "train_A");
    assign_ids(contrast, "contrast_C");

    if (cfg.dev_count > 0) {
        std::set<std::string> seen;
        for (const auto &e : train)
            seen.insert(e.source);
        auto &dev = ds.splits["dev_A"];
        const std::size_t cap = 50 * cfg.dev_count + 1000;
        const auto got = quota_select<ProbeExample>(
            cfg.dev_count, cap, cfg.jobs,
            [&](std::size_t i) {
                const auto d = sample_derivation(suite.resampled.source, derive_seed(cfg.seed, "dev_A", i), sc.train);
                return detail::grammar_example(suite.resampled, suite.resampled, d, "dev_A", cfg.sub_probe);
            },
            [&](ProbeExample ex, std::size_t) {
                if (!seen.insert(ex.source).second)
                    return false;
                dev.push_back(std::move(ex));
                return true;
            });
        if (got < cfg.dev_count)
            throw ConstraintsUnsatisfiable(static_cast<int>(cap));
        assign_ids(dev, "dev_A");
    }

    ds.splits["transfer_B"] = detail::sample_split(suite.original, cfg, sc.transfer, "transfer_B");
    assign_ids(ds.splits["transfer_B"], "transfer_B");
    ds.splits["test_B"] =
        detail::sample_split(suite.original, cfg, sc.test, "test_B",
                             sc.test_uniform_recursion
                                 ? std::optional<std::pair<int, int>>({cfg.test_min_recursion, cfg.test_max_recursion})
                                 : std::nullopt);
    assign_ids(ds.splits["test_B"], "test_B");
    return suite;
}

inline ProbeSuite generate_probe_suite(const ProbeSuiteConfig &cfg) { return generate_probe_suite(cfg, default_word_list()); }

// ---------------------------------------------------------------------------
// Disjointness

struct DisjointnessReport {
    std::set<std::string> shared; // tokens found in both slices, exemptions excluded
    bool ok() const { return shared.empty(); }
};

inline std::set<std::string> slice_vocabulary(const std::vector<ProbeExample> &slice) {
    std::set<std::string> out;
    for (const auto &e : slice) {
        for (auto &t : split_tokens(e.source))
            out.insert(std::move(t));
        for (auto &t : split_tokens(e.target))
            out.insert(std::move(t));
    }
    return out;
}

inline DisjointnessReport check_terminal_disjointness(const std::vector<ProbeExample> &a,
                                                      const std::vector<ProbeExample> &b,
                                                      const std::set<std::string> &exemptions) {
    const auto va = slice_vocabulary(a);
    const auto vb = slice_vocabulary(b);
    DisjointnessReport r;
    for (const auto &t : va)
        if (vb.count(t) && !exemptions.count(t))
            r.shared.insert(t);
    return r;
}

} // namespace absprobe
