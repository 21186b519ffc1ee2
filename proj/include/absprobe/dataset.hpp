#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "absprobe/common.hpp"

namespace absprobe {

inline constexpr std::array<std::string_view, 5> kSplitNames = {"train_A", "dev_A", "transfer_B", "test_B",
                                                                 "contrast_C"};
inline constexpr std::array<std::string_view, 3> kProbeKinds = {"grammar", "logic", "fuzzy"};
inline constexpr std::array<std::string_view, 7> kSubProbes = {"com", "mod", "conj", "disc", "alt", "joi", "none"};
inline constexpr std::array<std::string_view, 7> kGrammarTags = {"original", "coarse", "localr", "nested",
                                                                  "reverse", "redundant", "mixed"};

template <std::size_t N> bool one_of(const std::array<std::string_view, N> &set, std::string_view v) {
    return std::find(set.begin(), set.end(), v) != set.end();
}

struct ExampleMeta {
    int recursion_depth = 0; // iterative-rule applications, or tree depth for logic expressions
    int n_clauses = 0;       // clause blocks, or operator count for logic expressions
    std::optional<std::string> label;
    friend bool operator==(const ExampleMeta &, const ExampleMeta &) = default;
};

struct ProbeExample {
    std::string id;
    std::string split;
    std::string probe;
    std::string sub_probe = "none";
    std::string grammar_tag = "original";
    std::string source;
    std::string target;
    std::optional<std::string> prefix;
    ExampleMeta meta;
    friend bool operator==(const ProbeExample &, const ProbeExample &) = default;
};

inline std::string example_id(std::string_view probe, std::string_view sub_probe, std::string_view split,
                              std::size_t index) {
    std::string digits = std::to_string(index);
    if (digits.size() < 6)
        digits.insert(0, 6 - digits.size(), '0');
    return std::string(probe) + "-" + std::string(sub_probe) + "-" + std::string(split) + "-" + digits;
}

inline nlohmann::ordered_json to_json(const ProbeExample &e) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["split"] = e.split;
    j["probe"] = e.probe;
    j["sub_probe"] = e.sub_probe;
    j["grammar_tag"] = e.grammar_tag;
    j["source"] = e.source;
    j["target"] = e.target;
    if (e.prefix)
        j["prefix"] = *e.prefix;
    nlohmann::ordered_json meta;
    meta["recursion_depth"] = e.meta.recursion_depth;
    meta["n_clauses"] = e.meta.n_clauses;
    meta["label"] = e.meta.label ? nlohmann::ordered_json(*e.meta.label) : nlohmann::ordered_json(nullptr);
    j["meta"] = std::move(meta);
    return j;
}

/// Strict decoding: unknown keys, missing keys or out-of-vocabulary enum
/// values raise ValidationError.
inline ProbeExample example_from_json(const nlohmann::ordered_json &j) {
    static const std::array<std::string_view, 9> keys = {"id",          "split",  "probe",  "sub_probe", "grammar_tag",
                                                         "source",      "target", "prefix", "meta"};
    if (!j.is_object())
        throw ValidationError("example is not a JSON object");
    for (const auto &[k, v] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw ValidationError("unexpected key '" + k + "'");
    try {
        ProbeExample e;
        e.id = j.at("id").get<std::string>();
        e.split = j.at("split").get<std::string>();
        e.probe = j.at("probe").get<std::string>();
        e.sub_probe = j.at("sub_probe").get<std::string>();
        e.grammar_tag = j.at("grammar_tag").get<std::string>();
        e.source = j.at("source").get<std::string>();
        e.target = j.at("target").get<std::string>();
        if (j.contains("prefix"))
            e.prefix = j.at("prefix").get<std::string>();
        const auto &m = j.at("meta");
        e.meta.recursion_depth = m.at("recursion_depth").get<int>();
        e.meta.n_clauses = m.at("n_clauses").get<int>();
        if (m.contains("label") && !m.at("label").is_null())
            e.meta.label = m.at("label").get<std::string>();
        if (!one_of(kSplitNames, e.split))
            throw ValidationError("unknown split '" + e.split + "'");
        if (!one_of(kProbeKinds, e.probe))
            throw ValidationError("unknown probe '" + e.probe + "'");
        if (!one_of(kSubProbes, e.sub_probe))
            throw ValidationError("unknown sub_probe '" + e.sub_probe + "'");
        if (!one_of(kGrammarTags, e.grammar_tag))
            throw ValidationError("unknown grammar_tag '" + e.grammar_tag + "'");
        if (e.id.empty() || e.source.empty() || e.target.empty())
            throw ValidationError("id, source and target must be non-empty");
        return e;
    } catch (const nlohmann::json::exception &ex) {
        throw ValidationError(std::string("malformed example: ") + ex.what());
    }
}

/// A probe suite. Splits are kept in canonical order (kSplitNames); absent
/// splits are simply not present in the map.
struct ProbeDataset {
    std::string probe = "grammar";
    std::string sub_probe = "none";
    std::string grammar_tag = "original";
    std::uint64_t seed = 0;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::map<std::string, std::vector<ProbeExample>> splits;

    const std::vector<ProbeExample> &split(const std::string &name) const {
        static const std::vector<ProbeExample> empty;
        auto it = splits.find(name);
        return it == splits.end() ? empty : it->second;
    }

    std::vector<std::string> split_names() const {
        std::vector<std::string> out;
        for (auto name : kSplitNames)
            if (splits.count(std::string(name)))
                out.emplace_back(name);
        return out;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto &[_, v] : splits)
            n += v.size();
        return n;
    }

    friend bool operator==(const ProbeDataset &a, const ProbeDataset &b) {
        return a.probe == b.probe && a.sub_probe == b.sub_probe && a.grammar_tag == b.grammar_tag &&
               a.seed == b.seed && a.config == b.config && a.splits == b.splits;
    }
};

} // namespace absprobe
