#pragma once

// Dataset files (one JSONL per split + manifest.json + config.json), corpus
// statistics, constraint validation, the fuzzy-grammar split builder and the
// readers for model-runner outputs.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "absprobe/common.hpp"
#include "absprobe/dataset.hpp"
#include "absprobe/flt_probe.hpp"
#include "absprobe/logic_probe.hpp"
#include "absprobe/metrics.hpp"
#include "absprobe/mutations.hpp"

namespace absprobe {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw ProbeError("SHA-256 failed");
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

/// Digest of the compact serialization of a config.
inline std::string config_digest(const nlohmann::ordered_json &config) { return "sha256:" + sha256_hex(config.dump()); }

inline double round1(double x) { return std::round(x * 10.0) / 10.0; }

// ---------------------------------------------------------------------------
// Statistics

struct SplitStats {
    std::size_t count = 0;
    double avg_source_len = 0; // rounded to 1 decimal
    double avg_target_len = 0;
    std::map<std::string, std::size_t> labels;
    std::map<int, std::size_t> recursion_histogram;
};

inline SplitStats split_stats(const std::vector<ProbeExample> &v) {
    SplitStats s;
    s.count = v.size();
    std::size_t src = 0, tgt = 0;
    for (const auto &e : v) {
        src += count_tokens(e.source);
        tgt += count_tokens(e.target);
        if (e.meta.label)
            ++s.labels[*e.meta.label];
        ++s.recursion_histogram[e.meta.recursion_depth];
    }
    if (!v.empty()) {
        s.avg_source_len = round1(static_cast<double>(src) / static_cast<double>(v.size()));
        s.avg_target_len = round1(static_cast<double>(tgt) / static_cast<double>(v.size()));
    }
    return s;
}

inline std::map<std::string, SplitStats> dataset_stats(const ProbeDataset &ds) {
    std::map<std::string, SplitStats> out;
    for (const auto &name : ds.split_names())
        out[name] = split_stats(ds.split(name));
    return out;
}

inline nlohmann::ordered_json stats_to_json(const ProbeDataset &ds) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    const auto stats = dataset_stats(ds);
    for (const auto &name : ds.split_names()) {
        const auto &s = stats.at(name);
        nlohmann::ordered_json sj;
        sj["count"] = s.count;
        sj["avg_src_len"] = s.avg_source_len;
        sj["avg_tgt_len"] = s.avg_target_len;
        nlohmann::ordered_json labels = nlohmann::ordered_json::object();
        for (const auto &[k, n] : s.labels)
            labels[k] = n;
        sj["labels"] = labels;
        nlohmann::ordered_json hist = nlohmann::ordered_json::object();
        for (const auto &[k, n] : s.recursion_histogram)
            hist[std::to_string(k)] = n;
        sj["recursion_histogram"] = hist;
        j[name] = sj;
    }
    return j;
}

inline std::string stats_to_csv(const ProbeDataset &ds) {
    std::string out = "split,count,avg_src_len,avg_tgt_len,n_true,n_false\n";
    const auto stats = dataset_stats(ds);
    for (const auto &name : ds.split_names()) {
        const auto &s = stats.at(name);
        auto label = [&](const char *k) {
            auto it = s.labels.find(k);
            return it == s.labels.end() ? std::size_t{0} : it->second;
        };
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%zu,%.1f,%.1f,%zu,%zu\n", name.c_str(), s.count, s.avg_source_len,
                      s.avg_target_len, label("True"), label("False"));
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest and files

struct SplitSummary {
    std::size_t count = 0;
    double avg_src_len = 0;
    double avg_tgt_len = 0;
    friend bool operator==(const SplitSummary &, const SplitSummary &) = default;
};

struct DatasetManifest {
    std::string probe;
    std::string sub_probe;
    std::string grammar_tag;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::map<std::string, SplitSummary> splits;
    friend bool operator==(const DatasetManifest &, const DatasetManifest &) = default;
};

inline DatasetManifest make_manifest(const ProbeDataset &ds) {
    DatasetManifest m;
    m.probe = ds.probe;
    m.sub_probe = ds.sub_probe;
    m.grammar_tag = ds.grammar_tag;
    m.seed = ds.seed;
    m.config_digest = config_digest(ds.config);
    for (const auto &name : ds.split_names()) {
        const auto s = split_stats(ds.split(name));
        m.splits[name] = {s.count, s.avg_source_len, s.avg_target_len};
    }
    return m;
}

inline nlohmann::ordered_json to_json(const DatasetManifest &m) {
    nlohmann::ordered_json j;
    j["probe"] = m.probe;
    j["sub_probe"] = m.sub_probe;
    j["grammar_tag"] = m.grammar_tag;
    j["seed"] = m.seed;
    j["config_digest"] = m.config_digest;
    nlohmann::ordered_json splits = nlohmann::ordered_json::object();
    for (auto name : kSplitNames) {
        auto it = m.splits.find(std::string(name));
        if (it == m.splits.end())
            continue;
        splits[it->first] = {{"count", it->second.count},
                             {"avg_src_len", it->second.avg_src_len},
                             {"avg_tgt_len", it->second.avg_tgt_len}};
    }
    j["splits"] = splits;
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::ordered_json &j) {
    try {
        DatasetManifest m;
        m.probe = j.at("probe").get<std::string>();
        m.sub_probe = j.at("sub_probe").get<std::string>();
        m.grammar_tag = j.at("grammar_tag").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_digest = j.at("config_digest").get<std::string>();
        for (const auto &[name, s] : j.at("splits").items()) {
            if (!one_of(kSplitNames, name))
                throw IntegrityError("manifest names unknown split '" + name + "'");
            m.splits[name] = {s.at("count").get<std::size_t>(), s.at("avg_src_len").get<double>(),
                              s.at("avg_tgt_len").get<double>()};
        }
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw IntegrityError(std::string("malformed manifest: ") + e.what());
    }
}

inline void write_text_file(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ProbeError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ProbeError("write failed: " + path.string());
}

inline std::string read_text_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string examples_to_jsonl(const std::vector<ProbeExample> &v) {
    std::string out;
    for (const auto &e : v) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

/// Parses JSONL examples; errors name `what` (usually the file) and the line.
inline std::vector<ProbeExample> examples_from_jsonl(std::istream &in, const std::string &what) {
    std::vector<ProbeExample> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        try {
            out.push_back(example_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const nlohmann::json::exception &e) {
            throw IntegrityError(what + ":" + std::to_string(n) + ": invalid JSON: " + e.what());
        } catch (const ProbeError &e) {
            throw IntegrityError(what + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

inline DatasetManifest write_dataset(const ProbeDataset &ds, const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw ProbeError("cannot create directory " + dir.string());
    for (const auto &name : ds.split_names())
        write_text_file(dir / (name + ".jsonl"), examples_to_jsonl(ds.split(name)));
    const auto m = make_manifest(ds);
    write_text_file(dir / "config.json", ds.config.dump(2) + "\n");
    write_text_file(dir / "manifest.json", to_json(m).dump(2) + "\n");
    return m;
}

inline ProbeDataset read_dataset(const fs::path &dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw IntegrityError("manifest missing: " + manifest_path.string());
    DatasetManifest m;
    try {
        m = manifest_from_json(nlohmann::ordered_json::parse(read_text_file(manifest_path)));
    } catch (const nlohmann::json::exception &e) {
        throw IntegrityError(manifest_path.string() + ": invalid JSON: " + e.what());
    }
    ProbeDataset ds;
    ds.probe = m.probe;
    ds.sub_probe = m.sub_probe;
    ds.grammar_tag = m.grammar_tag;
    ds.seed = m.seed;
    const auto config_path = dir / "config.json";
    if (!fs::exists(config_path))
        throw IntegrityError("config missing: " + config_path.string());
    try {
        ds.config = nlohmann::ordered_json::parse(read_text_file(config_path));
    } catch (const nlohmann::json::exception &e) {
        throw IntegrityError(config_path.string() + ": invalid JSON: " + e.what());
    }
    if (config_digest(ds.config) != m.config_digest)
        throw IntegrityError("config digest mismatch: manifest has " + m.config_digest + ", config.json hashes to " +
                             config_digest(ds.config));
    for (const auto &[name, summary] : m.splits) {
        const auto path = dir / (name + ".jsonl");
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IntegrityError("split " + name + ": file missing: " + path.string());
        auto examples = examples_from_jsonl(in, path.string());
        for (std::size_t i = 0; i < examples.size(); ++i)
            if (examples[i].split != name)
                throw IntegrityError(path.string() + ":" + std::to_string(i + 1) + ": example split '" +
                                     examples[i].split + "' in file for split " + name);
        const auto s = split_stats(examples);
        if (s.count != summary.count)
            throw IntegrityError("split " + name + ": manifest count " + std::to_string(summary.count) + " but file has " +
                                 std::to_string(s.count) + " examples");
        if (s.avg_source_len != summary.avg_src_len || s.avg_target_len != summary.avg_tgt_len)
            throw IntegrityError("split " + name + ": average lengths differ from the manifest");
        ds.splits[name] = std::move(examples);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Validation

struct DatasetFinding {
    std::string kind; // duplicate_id | split_mismatch | recursion_bound | disjointness | label_balance | label_mismatch
                      // | operator_exclusion | operator_requirement | operator_count | prefix
    std::string split;
    std::string id;
    std::string message;
};

struct ValidationRules {
    std::map<std::string, std::pair<int, int>> recursion_bounds; // split -> [min, max]
    std::vector<std::string> disjoint_a;                          // splits compared against disjoint_b
    std::vector<std::string> disjoint_b;
    std::set<std::string> exemptions;
    std::set<std::string> balanced_splits; // |#True - #False| <= 1
    bool check_logic_labels = false;       // recompute labels with the default binding
    std::map<std::string, std::string> exclude_op; // split -> operator absent from full-size expressions
    std::map<std::string, std::string> require_op; // split -> operator present in every expression
    std::size_t n_ops = 0;                          // expected operator count, 0 = unchecked
    std::size_t transfer_main_count = 0;            // leading transfer_B examples that are not supplements
    bool require_prefix = false;
};

/// Rules implied by a dataset's own config record.
inline ValidationRules rules_for(const ProbeDataset &ds) {
    ValidationRules r;
    r.require_prefix = ds.grammar_tag == "mixed";
    if (ds.probe == "grammar" && ds.config.contains("recursion")) {
        auto cj = ds.config;
        cj.erase("word_list_id");
        const auto cfg = ProbeSuiteConfig::from_json(cj);
        const auto sc = split_constraints(cfg);
        r.recursion_bounds["train_A"] = {0, *sc.train.max_recursion};
        r.recursion_bounds["dev_A"] = {0, *sc.train.max_recursion};
        r.recursion_bounds["contrast_C"] = {0, *sc.train.max_recursion};
        r.recursion_bounds["transfer_B"] = {sc.transfer.min_recursion, *sc.transfer.max_recursion};
        r.recursion_bounds["test_B"] = {sc.test.min_recursion, *sc.test.max_recursion};
        r.disjoint_a = {"train_A", "dev_A"};
        r.disjoint_b = {"transfer_B", "test_B"};
        r.exemptions = default_exemptions(build_default_grammar_pair(cfg.grammar_options()));
    } else if (ds.probe == "logic" && ds.config.contains("probed_op")) {
        const auto cfg = LogicSuiteConfig::from_json(ds.config);
        r.balanced_splits = {"train_A", "dev_A", "transfer_B", "test_B", "contrast_C"};
        r.check_logic_labels = true;
        r.exclude_op["transfer_B"] = cfg.probed_op;
        r.require_op["test_B"] = cfg.probed_op;
        r.n_ops = cfg.n_ops;
        r.transfer_main_count = cfg.transfer_count;
    }
    return r;
}

inline std::vector<DatasetFinding> validate_dataset(const ProbeDataset &ds, const ValidationRules &rules) {
    std::vector<DatasetFinding> out;
    std::set<std::string> ids;
    for (const auto &name : ds.split_names()) {
        const auto &v = ds.split(name);
        std::size_t n_true = 0, n_false = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto &e = v[i];
            if (!ids.insert(e.id).second)
                out.push_back({"duplicate_id", name, e.id, "duplicate example id"});
            if (e.split != name)
                out.push_back({"split_mismatch", name, e.id, "example carries split '" + e.split + "'"});
            if (auto it = rules.recursion_bounds.find(name); it != rules.recursion_bounds.end()) {
                const auto [lo, hi] = it->second;
                if (e.meta.recursion_depth < lo || e.meta.recursion_depth > hi)
                    out.push_back({"recursion_bound", name, e.id,
                                   "recursion bound violated: depth " + std::to_string(e.meta.recursion_depth) +
                                       " not in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"});
            }
            if (e.prefix) {
                if (!e.source.starts_with(*e.prefix + " "))
                    out.push_back({"prefix", name, e.id, "source does not start with prefix '" + *e.prefix + "'"});
            } else if (rules.require_prefix) {
                out.push_back({"prefix", name, e.id, "missing prefix"});
            }
            if (e.target == "True")
                ++n_true;
            else if (e.target == "False")
                ++n_false;

            const bool logic_checks = rules.check_logic_labels || rules.n_ops || !rules.exclude_op.empty() ||
                                      !rules.require_op.empty();
            if (!logic_checks)
                continue;
            LogicExpression expr;
            try {
                expr = parse_expression(e.source);
            } catch (const ProbeError &ex) {
                out.push_back({"label_mismatch", name, e.id, std::string("unparseable expression: ") + ex.what()});
                continue;
            }
            const bool supplement = name == "transfer_B" && i >= rules.transfer_main_count;
            if (rules.check_logic_labels) {
                const auto kind = name == "contrast_C" ? BindingKind::contrast : BindingKind::task;
                const std::string want = evaluate_expression(expr, kind) ? "True" : "False";
                if (e.target != want || e.meta.label != std::optional<std::string>(e.target))
                    out.push_back({"label_mismatch", name, e.id, "label is " + e.target + ", expression evaluates to " + want});
            }
            if (rules.n_ops && !supplement && expr.n_operators() != rules.n_ops)
                out.push_back({"operator_count", name, e.id,
                               std::to_string(expr.n_operators()) + " operators, expected " + std::to_string(rules.n_ops)});
            if (auto it = rules.exclude_op.find(name); it != rules.exclude_op.end() && !supplement &&
                                                        expr.contains(it->second))
                out.push_back({"operator_exclusion", name, e.id, "contains excluded operator " + it->second});
            if (auto it = rules.require_op.find(name); it != rules.require_op.end() && !expr.contains(it->second))
                out.push_back({"operator_requirement", name, e.id, "lacks required operator " + it->second});
        }
        if (rules.balanced_splits.count(name)) {
            const auto diff = n_true > n_false ? n_true - n_false : n_false - n_true;
            if (diff > 1 || n_true + n_false != v.size())
                out.push_back({"label_balance", name, "",
                               "label imbalance: " + std::to_string(n_true) + " True, " + std::to_string(n_false) +
                                   " False of " + std::to_string(v.size())});
        }
    }
    if (!rules.disjoint_a.empty() && !rules.disjoint_b.empty()) {
        std::vector<ProbeExample> a, b;
        for (const auto &s : rules.disjoint_a)
            a.insert(a.end(), ds.split(s).begin(), ds.split(s).end());
        for (const auto &s : rules.disjoint_b)
            b.insert(b.end(), ds.split(s).begin(), ds.split(s).end());
        for (const auto &t : check_terminal_disjointness(a, b, rules.exemptions).shared)
            out.push_back({"disjointness", "", "", "terminal '" + t + "' shared between A and B splits"});
    }
    return out;
}

inline std::vector<DatasetFinding> validate_dataset(const ProbeDataset &ds) { return validate_dataset(ds, rules_for(ds)); }

inline std::string format_finding(const DatasetFinding &f) {
    std::string s = f.kind;
    if (!f.split.empty())
        s += " [" + f.split + (f.id.empty() ? "" : " " + f.id) + "]";
    return s + ": " + f.message;
}

// ---------------------------------------------------------------------------
// Fuzzy-grammar splits

struct ParallelCorpus {
    std::vector<std::string> sources;
    std::vector<std::string> targets;
};

inline std::vector<std::string> read_lines(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        out.push_back(line);
    }
    return out;
}

inline ParallelCorpus read_parallel_corpus(const fs::path &source_file, const fs::path &target_file) {
    ParallelCorpus c{read_lines(source_file), read_lines(target_file)};
    if (c.sources.size() != c.targets.size())
        throw ValidationError("misaligned corpus: " + std::to_string(c.sources.size()) + " source lines, " +
                              std::to_string(c.targets.size()) + " target lines");
    return c;
}

struct FuzzyOptions {
    std::size_t transfer_max_len = 25; // source tokens
    std::size_t test_min_len = 60;
    bool contrast = false;
    std::uint64_t seed = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["probe"] = "fuzzy";
        j["seed"] = seed;
        j["transfer_max_len"] = transfer_max_len;
        j["test_min_len"] = test_min_len;
        j["contrast"] = contrast;
        return j;
    }
};

struct FuzzySplit {
    ProbeDataset dataset;
    std::vector<std::size_t> unassigned; // probe-corpus lines in neither split (0-based)
    std::vector<std::size_t> empty_lines; // lines skipped because a side is empty
};

inline std::vector<ProbeExample> reverse_pair_targets(std::vector<ProbeExample> v) {
    for (auto &e : v)
        e.target = reverse_string(e.target);
    return v;
}

/// Short probe pairs form transfer_B, long ones test_B. An optional training
/// corpus becomes train_A, and with `contrast` also contrast_C with reversed
/// target word order.
inline FuzzySplit fuzzy_split(const ParallelCorpus &probe, const FuzzyOptions &opt,
                              const ParallelCorpus *train = nullptr) {
    if (probe.sources.size() != probe.targets.size())
        throw ValidationError("misaligned corpus: " + std::to_string(probe.sources.size()) + " source lines, " +
                              std::to_string(probe.targets.size()) + " target lines");
    if (train && train->sources.size() != train->targets.size())
        throw ValidationError("misaligned training corpus");
    if (opt.transfer_max_len >= opt.test_min_len)
        throw ValidationError("transfer_max_len must be below test_min_len");
    if (opt.contrast && !train)
        throw ValidationError("contrast needs a training corpus");

    FuzzySplit r;
    auto &ds = r.dataset;
    ds.probe = "fuzzy";
    ds.sub_probe = "none";
    ds.grammar_tag = "original";
    ds.seed = opt.seed;
    ds.config = opt.to_json();

    auto make = [](const std::string &split, const std::string &src, const std::string &tgt, std::size_t index) {
        ProbeExample e;
        e.id = example_id("fuzzy", "none", split, index);
        e.split = split;
        e.probe = "fuzzy";
        e.sub_probe = "none";
        e.source = normalize_whitespace(src);
        e.target = normalize_whitespace(tgt);
        e.meta.n_clauses = 1;
        return e;
    };

    if (train) {
        auto &a = ds.splits["train_A"];
        for (std::size_t i = 0; i < train->sources.size(); ++i) {
            if (count_tokens(train->sources[i]) == 0 || count_tokens(train->targets[i]) == 0)
                continue;
            a.push_back(make("train_A", train->sources[i], train->targets[i], a.size()));
        }
        if (opt.contrast) {
            auto c = reverse_pair_targets(a);
            for (std::size_t i = 0; i < c.size(); ++i) {
                c[i].split = "contrast_C";
                c[i].grammar_tag = "reverse";
                c[i].id = example_id("fuzzy", "none", "contrast_C", i);
            }
            ds.splits["contrast_C"] = std::move(c);
        }
    }
    auto &transfer = ds.splits["transfer_B"];
    auto &test = ds.splits["test_B"];
    for (std::size_t i = 0; i < probe.sources.size(); ++i) {
        const auto len = count_tokens(probe.sources[i]);
        if (len == 0 || count_tokens(probe.targets[i]) == 0) {
            r.empty_lines.push_back(i);
            continue;
        }
        if (len <= opt.transfer_max_len)
            transfer.push_back(make("transfer_B", probe.sources[i], probe.targets[i], transfer.size()));
        else if (len >= opt.test_min_len)
            test.push_back(make("test_B", probe.sources[i], probe.targets[i], test.size()));
        else
            r.unassigned.push_back(i);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Model-runner wire formats

namespace detail {

template <class F> void for_each_jsonl(std::istream &in, const std::string &what, F &&f) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        try {
            f(nlohmann::ordered_json::parse(line));
        } catch (const nlohmann::json::exception &e) {
            throw ValidationError(what + ":" + std::to_string(n) + ": " + e.what());
        } catch (const ProbeError &e) {
            throw ValidationError(what + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

inline void check_keys(const nlohmann::ordered_json &j, const std::set<std::string> &allowed) {
    if (!j.is_object())
        throw ValidationError("expected a JSON object");
    for (const auto &[k, _] : j.items())
        if (!allowed.count(k))
            throw ValidationError("unknown key '" + k + "'");
}

} // namespace detail

inline std::vector<Prediction> read_predictions(std::istream &in, const std::string &what = "predictions") {
    std::vector<Prediction> out;
    detail::for_each_jsonl(in, what, [&](const nlohmann::ordered_json &j) {
        detail::check_keys(j, {"id", "prediction"});
        out.push_back({j.at("id").get<std::string>(), j.at("prediction").get<std::string>()});
    });
    return out;
}

inline std::vector<Prediction> read_predictions_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read " + path.string());
    return read_predictions(in, path.string());
}

inline nlohmann::ordered_json to_json(const LogProbRecord &r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["condition"] = r.condition;
    j["eval_set"] = r.eval_set;
    j["token_logprobs"] = r.token_logprobs;
    j["n_tokens"] = r.n_tokens;
    return j;
}

inline std::vector<LogProbRecord> read_logprobs(std::istream &in, const std::string &what = "logprobs") {
    std::vector<LogProbRecord> out;
    detail::for_each_jsonl(in, what, [&](const nlohmann::ordered_json &j) {
        detail::check_keys(j, {"id", "condition", "eval_set", "token_logprobs", "n_tokens"});
        LogProbRecord r;
        r.id = j.at("id").get<std::string>();
        r.condition = j.at("condition").get<std::string>();
        r.eval_set = j.at("eval_set").get<std::string>();
        r.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
        r.n_tokens = j.at("n_tokens").get<std::size_t>();
        check_record(r);
        out.push_back(std::move(r));
    });
    return out;
}

inline std::vector<LogProbRecord> read_logprobs_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read " + path.string());
    return read_logprobs(in, path.string());
}

/// CSV with columns step,score; a header line is optional.
inline LearningCurve read_curve_csv(std::istream &in, const std::string &what = "curve") {
    LearningCurve c;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (n == 1 && normalize_whitespace(line) == "step,score")
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw ValidationError(what + ":" + std::to_string(n) + ": expected step,score");
        try {
            std::size_t used = 0;
            const auto step_text = line.substr(0, comma);
            const long long step = std::stoll(step_text, &used);
            if (used != step_text.size())
                throw std::invalid_argument("step");
            const auto score_text = line.substr(comma + 1);
            const double score = std::stod(score_text, &used);
            if (used != score_text.size())
                throw std::invalid_argument("score");
            c.push_back({step, score});
        } catch (const std::logic_error &) {
            throw ValidationError(what + ":" + std::to_string(n) + ": malformed number");
        }
    }
    check_curve(c, what);
    return c;
}

inline LearningCurve read_curve_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read " + path.string());
    return read_curve_csv(in, path.string());
}

} // namespace absprobe
