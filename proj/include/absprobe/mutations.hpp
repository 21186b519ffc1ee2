#pragma once

// Grammar derivations of a pair (Reverse, Coarse, LocalReverse, Nested on the
// target side; Redundant on the source side), the equivalent string-level
// transforms on chain-format targets, and multi-grammar corpora.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "absprobe/common.hpp"
#include "absprobe/dataset.hpp"
#include "absprobe/grammar.hpp"
#include "absprobe/grammar_pair.hpp"
#include "absprobe/parallel.hpp"

namespace absprobe {

enum class MutationKind { original, coarse, local_reverse, nested, reverse, redundant };

inline std::string mutation_name(MutationKind k) {
    switch (k) {
    case MutationKind::original: return "original";
    case MutationKind::coarse: return "coarse";
    case MutationKind::local_reverse: return "localreverse";
    case MutationKind::nested: return "nest";
    case MutationKind::reverse: return "reverse";
    case MutationKind::redundant: return "redundant";
    }
    return "original";
}

inline std::string mutation_grammar_tag(MutationKind k) {
    switch (k) {
    case MutationKind::original: return "original";
    case MutationKind::coarse: return "coarse";
    case MutationKind::local_reverse: return "localr";
    case MutationKind::nested: return "nested";
    case MutationKind::reverse: return "reverse";
    case MutationKind::redundant: return "redundant";
    }
    return "original";
}

inline MutationKind parse_mutation_name(std::string_view name) {
    for (auto k : {MutationKind::original, MutationKind::coarse, MutationKind::local_reverse, MutationKind::nested,
                   MutationKind::reverse, MutationKind::redundant})
        if (mutation_name(k) == name)
            return k;
    throw ValidationError("unknown mutation name '" + std::string(name) + "'");
}

inline const std::vector<std::string> &default_adjectives() {
    static const std::vector<std::string> adjs = {
        "angry", "odd",   "happy", "small",  "large",  "red",   "blue",  "green",  "tiny",   "quiet", "clever",
        "brave", "calm",  "eager", "fancy",  "gentle", "jolly", "kind",  "lively", "nice",   "proud", "silly",
        "witty", "shiny", "soft",  "loud",   "cold",   "warm",  "young", "old",    "bright", "sleepy"};
    return adjs;
}

struct RedundantParams {
    std::vector<std::string> adjectives = default_adjectives();
    double probability = 0.5; // share of weight moved to the adjective variant of each noun slot
};

struct GrammarMutation {
    MutationKind kind = MutationKind::original;
    RedundantParams redundant;
};

// ---------------------------------------------------------------------------
// String level

inline bool is_paren(std::string_view t) { return t == "(" || t == ")"; }

inline std::string swap_paren(const std::string &t) {
    if (t == "(")
        return ")";
    if (t == ")")
        return "(";
    return t;
}

inline std::vector<std::string> reverse_tokens(std::vector<std::string> tokens) {
    std::reverse(tokens.begin(), tokens.end());
    for (auto &t : tokens)
        t = swap_paren(t);
    return tokens;
}

inline std::string reverse_string(std::string_view target) { return join_tokens(reverse_tokens(split_tokens(target))); }

/// Clause blocks of a chain target and the join tokens between them.
struct ChainParse {
    std::vector<std::vector<std::string>> clauses;
    std::vector<std::string> joins;
};

/// Clause blocks are "HEAD ( ... )" or, in reversed orientation,
/// "( ... ) HEAD"; a single token between blocks is the join.
inline ChainParse parse_chain(std::string_view target) {
    ChainParse out;
    const auto toks = split_tokens(target);
    std::size_t i = 0;
    auto group = [&](std::vector<std::string> &clause) {
        if (i >= toks.size() || toks[i] != "(")
            throw ParseError("expected '('", i);
        int depth = 0;
        do {
            if (toks[i] == "(")
                ++depth;
            else if (toks[i] == ")")
                --depth;
            clause.push_back(toks[i++]);
        } while (depth > 0 && i < toks.size());
        if (depth != 0)
            throw ParseError("unbalanced parentheses", i);
    };
    auto head = [&](std::vector<std::string> &clause) {
        if (i >= toks.size() || is_paren(toks[i]))
            throw ParseError("expected clause head", i);
        clause.push_back(toks[i++]);
    };
    if (toks.empty())
        throw ParseError("empty target", 0);
    for (;;) {
        std::vector<std::string> clause;
        if (toks[i] == "(") {
            group(clause);
            head(clause);
        } else {
            head(clause);
            group(clause);
        }
        out.clauses.push_back(std::move(clause));
        if (i == toks.size())
            break;
        if (is_paren(toks[i]))
            throw ParseError("expected a join token", i);
        out.joins.push_back(toks[i++]);
        if (i == toks.size())
            throw ParseError("join token without following clause", i);
    }
    return out;
}

inline std::string join_chain(const ChainParse &c) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < c.clauses.size(); ++k) {
        if (k)
            out.push_back(c.joins.at(k - 1));
        out.insert(out.end(), c.clauses[k].begin(), c.clauses[k].end());
    }
    return join_tokens(out);
}

inline std::string local_reverse_string(std::string_view target) {
    auto c = parse_chain(target);
    for (auto &clause : c.clauses)
        clause = reverse_tokens(std::move(clause));
    return join_chain(c);
}

/// Keeps each clause's head and an empty argument list.
inline std::string coarse_string(std::string_view target) {
    auto c = parse_chain(target);
    for (auto &clause : c.clauses) {
        if (clause.front() == "(")
            throw ValidationError("coarse_string expects chain orientation");
        clause = {clause.front(), "(", ")"};
    }
    return join_chain(c);
}

/// Splits the inside of "P ( ... )" at depth-one commas.
inline std::vector<std::vector<std::string>> clause_arguments(const std::vector<std::string> &clause) {
    std::vector<std::vector<std::string>> args;
    if (clause.size() < 3 || clause[1] != "(" || clause.back() != ")")
        throw ValidationError("not a chain clause: " + join_tokens(clause));
    std::vector<std::string> cur;
    int depth = 0;
    for (std::size_t i = 2; i + 1 < clause.size(); ++i) {
        const auto &t = clause[i];
        if (t == "(")
            ++depth;
        if (t == ")")
            --depth;
        if (t == "," && depth == 0) {
            args.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        cur.push_back(t);
    }
    if (!cur.empty() || !args.empty())
        args.push_back(std::move(cur));
    return args;
}

/// "P ( A1 , J Q ( ... ) )": every non-final clause keeps only its first
/// argument and opens the next clause inside its own parentheses.
inline std::string nested_string(std::string_view target) {
    const auto c = parse_chain(target);
    std::vector<std::string> out;
    for (std::size_t k = 0; k < c.clauses.size(); ++k) {
        const auto &clause = c.clauses[k];
        if (k + 1 == c.clauses.size()) {
            out.insert(out.end(), clause.begin(), clause.end());
            break;
        }
        const auto args = clause_arguments(clause);
        out.push_back(clause[0]);
        out.push_back("(");
        if (!args.empty()) {
            out.insert(out.end(), args[0].begin(), args[0].end());
            out.push_back(",");
        }
        out.push_back(c.joins[k]);
    }
    for (std::size_t k = 1; k < c.clauses.size(); ++k)
        out.push_back(")");
    return join_tokens(out);
}

/// Display form: drops NONE slots together with one adjacent comma.
inline std::string omit_none(std::string_view target) {
    auto toks = split_tokens(target);
    for (std::size_t i = 0; i < toks.size();) {
        if (toks[i] != "NONE") {
            ++i;
            continue;
        }
        if (i > 0 && toks[i - 1] == ",") {
            toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(i - 1), toks.begin() + static_cast<std::ptrdiff_t>(i + 1));
            --i;
        } else if (i + 1 < toks.size() && toks[i + 1] == ",") {
            toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i + 2));
        } else {
            toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }
    return join_tokens(toks);
}

inline std::string apply_string_mutation(MutationKind k, std::string_view target) {
    switch (k) {
    case MutationKind::original: return normalize_whitespace(target);
    case MutationKind::coarse: return coarse_string(target);
    case MutationKind::local_reverse: return local_reverse_string(target);
    case MutationKind::nested: return nested_string(target);
    case MutationKind::reverse: return reverse_string(target);
    case MutationKind::redundant: break;
    }
    throw ValidationError("redundant mutation acts on sources, not target strings");
}

// ---------------------------------------------------------------------------
// Grammar level

namespace detail {

inline Pcfg rebuild(const Pcfg &g, std::vector<Production> prods, std::vector<TerminalClass> classes) {
    return Pcfg(g.start(), std::move(prods), std::move(classes), g.max_iterations(), g.max_depth());
}

inline void reverse_production(Production &p) {
    std::reverse(p.rhs.begin(), p.rhs.end());
    for (auto &s : p.rhs)
        if (s.is_terminal())
            s.name = swap_paren(s.name);
}

template <class Pred> GrammarPair reverse_target_where(const GrammarPair &pair, Pred pred) {
    GrammarPair out = pair;
    auto prods = pair.target.productions();
    std::vector<bool> flipped(prods.size(), false);
    for (std::size_t i = 0; i < prods.size(); ++i)
        if (pred(prods[i])) {
            reverse_production(prods[i]);
            flipped[i] = true;
        }
    out.target = rebuild(pair.target, std::move(prods), pair.target.classes());
    for (auto &img : out.images)
        if (img.target && flipped[*img.target])
            std::reverse(img.child_links.begin(), img.child_links.end());
    return out;
}

/// Drops target productions unreachable from start, remapping images and
/// pruning class members no longer used.
inline GrammarPair prune_target(GrammarPair pair, const std::vector<std::vector<std::size_t>> &kept_nt_positions) {
    const auto &g = pair.target;
    std::set<std::string> reached{g.start()};
    std::vector<std::string> stack{g.start()};
    while (!stack.empty()) {
        auto nt = stack.back();
        stack.pop_back();
        for (std::size_t pi : g.productions_for(nt))
            for (const auto &s : g.production(pi).rhs)
                if (!s.is_terminal() && reached.insert(s.name).second)
                    stack.push_back(s.name);
    }
    std::vector<std::optional<std::size_t>> remap(g.productions().size());
    std::vector<Production> prods;
    for (std::size_t i = 0; i < g.productions().size(); ++i)
        if (reached.count(g.production(i).lhs)) {
            remap[i] = prods.size();
            prods.push_back(g.production(i));
        }
    std::set<std::string> used;
    for (const auto &p : prods)
        for (const auto &s : p.rhs)
            if (s.is_terminal())
                used.insert(s.name);
    std::vector<TerminalClass> classes;
    for (auto c : g.classes()) {
        c.members.erase(std::remove_if(c.members.begin(), c.members.end(), [&](const auto &m) { return !used.count(m); }),
                        c.members.end());
        if (!c.members.empty())
            classes.push_back(std::move(c));
    }
    for (auto &img : pair.images) {
        if (!img.target)
            continue;
        const std::size_t old = *img.target;
        if (!remap[old]) {
            img = RuleImage{};
            continue;
        }
        std::vector<std::size_t> links;
        for (std::size_t pos : kept_nt_positions[old])
            links.push_back(img.child_links.at(pos));
        img.target = remap[old];
        img.child_links = std::move(links);
    }
    pair.target = rebuild(g, std::move(prods), std::move(classes));
    return pair;
}

/// Positions (among rhs nonterminals) of nonterminals that survive a
/// rewrite keeping rhs symbols [0, keep) plus an optional retained tail.
inline std::vector<std::size_t> surviving_nts(const Production &before, const std::vector<bool> &keep_symbol) {
    std::vector<std::size_t> out;
    std::size_t nt = 0;
    for (std::size_t i = 0; i < before.rhs.size(); ++i) {
        if (before.rhs[i].is_terminal())
            continue;
        if (keep_symbol[i])
            out.push_back(nt);
        ++nt;
    }
    return out;
}

inline std::optional<std::size_t> matching_paren(const std::vector<Symbol> &rhs, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < rhs.size(); ++i) {
        if (!rhs[i].is_terminal())
            continue;
        if (rhs[i].name == "(")
            ++depth;
        else if (rhs[i].name == ")" && --depth == 0)
            return i;
    }
    return std::nullopt;
}

inline std::optional<std::size_t> find_terminal(const std::vector<Symbol> &rhs, std::string_view name) {
    for (std::size_t i = 0; i < rhs.size(); ++i)
        if (rhs[i].is_terminal() && rhs[i].name == name)
            return i;
    return std::nullopt;
}

} // namespace detail

/// G_t^-: every target rhs reversed, parenthesis orientation re-fixed.
inline GrammarPair reverse_target(const GrammarPair &pair) {
    return detail::reverse_target_where(pair, [](const Production &) { return true; });
}

/// Reverses non-iterative N-productions only, so clause order is kept.
inline GrammarPair local_reverse_target(const GrammarPair &pair) {
    return detail::reverse_target_where(
        pair, [](const Production &p) { return p.kind == ProductionKind::N && !p.iterative; });
}

/// Empties the first parenthesized group of every non-argument rule; argument
/// rules become unreachable and are dropped.
inline GrammarPair coarse_target(const GrammarPair &pair) {
    auto prods = pair.target.productions();
    std::vector<std::vector<std::size_t>> kept(prods.size());
    for (std::size_t i = 0; i < prods.size(); ++i) {
        auto &p = prods[i];
        std::vector<bool> keep(p.rhs.size(), true);
        if (!pair.argument_nonterminals.count(p.lhs))
            if (auto open = detail::find_terminal(p.rhs, "(")) {
                auto close = detail::matching_paren(p.rhs, *open);
                if (!close)
                    throw ValidationError("unbalanced parentheses in " + production_to_string(p));
                for (std::size_t k = *open + 1; k < *close; ++k)
                    keep[k] = false;
            }
        kept[i] = detail::surviving_nts(p, keep);
        std::vector<Symbol> rhs;
        for (std::size_t k = 0; k < p.rhs.size(); ++k)
            if (keep[k])
                rhs.push_back(p.rhs[k]);
        p.rhs = std::move(rhs);
        p.kind = infer_kind(p.rhs);
    }
    GrammarPair out = pair;
    out.target = detail::rebuild(pair.target, std::move(prods), pair.target.classes());
    return detail::prune_target(std::move(out), kept);
}

/// Replaces the iterative chain rule by "CLAUSE -> CP CONCAT CLAUSE )" and
/// cuts the complement clause after its first argument.
inline GrammarPair nested_target(const GrammarPair &pair) {
    auto prods = pair.target.productions();
    std::optional<std::size_t> chain;
    for (std::size_t i = 0; i < prods.size(); ++i)
        if (prods[i].iterative) {
            if (chain)
                throw ValidationError("nested mutation expects a single iterative rule");
            chain = i;
        }
    if (!chain || prods[*chain].rhs.empty() || prods[*chain].rhs.front().is_terminal())
        throw ValidationError("nested mutation requires a chain rule starting with a clause nonterminal");
    const std::string cp = prods[*chain].rhs.front().name;
    prods[*chain].rhs.push_back(term(")"));

    std::vector<std::vector<std::size_t>> kept(prods.size());
    for (std::size_t i = 0; i < prods.size(); ++i) {
        auto &p = prods[i];
        std::vector<bool> keep(p.rhs.size(), true);
        if (p.lhs == cp) {
            auto open = detail::find_terminal(p.rhs, "(");
            if (!open)
                throw ValidationError("complement clause rule has no argument list: " + production_to_string(p));
            auto close = detail::matching_paren(p.rhs, *open);
            if (!close)
                throw ValidationError("unbalanced parentheses in " + production_to_string(p));
            // First argument runs from after "(" to the first depth-one comma.
            std::size_t end = *open + 1;
            int depth = 0;
            for (; end < *close; ++end) {
                const auto &s = p.rhs[end];
                if (s.is_terminal() && s.name == "(")
                    ++depth;
                if (s.is_terminal() && s.name == ")")
                    --depth;
                if (s.is_terminal() && s.name == "," && depth == 0)
                    break;
            }
            const bool has_arg = end > *open + 1;
            for (std::size_t k = end; k < p.rhs.size(); ++k)
                keep[k] = false;
            kept[i] = detail::surviving_nts(p, keep);
            std::vector<Symbol> rhs(p.rhs.begin(), p.rhs.begin() + static_cast<std::ptrdiff_t>(end));
            if (has_arg)
                rhs.push_back(term(","));
            p.rhs = std::move(rhs);
            p.kind = infer_kind(p.rhs);
        } else {
            kept[i] = detail::surviving_nts(p, keep);
        }
    }
    GrammarPair out = pair;
    out.target = detail::rebuild(pair.target, std::move(prods), pair.target.classes());
    return detail::prune_target(std::move(out), kept);
}

/// Adds an unmapped adjective slot before every noun/name in the source.
inline GrammarPair redundant_source(const GrammarPair &pair, const RedundantParams &params = {}) {
    if (params.probability < 0 || params.probability > 1)
        throw ValidationError("insertion probability must be within [0, 1]");
    if (params.probability == 0)
        return pair;
    if (params.adjectives.empty())
        throw ValidationError("adjective class is empty");
    std::set<std::string> existing;
    for (const Pcfg *g : {&pair.source, &pair.target}) {
        for (const auto &t : g->terminals())
            existing.insert(t);
        for (const auto &c : g->classes())
            existing.insert(c.members.begin(), c.members.end());
        for (const auto &nt : g->nonterminals())
            existing.insert(nt);
    }
    std::set<std::string> adj_set;
    for (const auto &a : params.adjectives) {
        if (a.empty() || has_whitespace(a))
            throw ValidationError("invalid adjective '" + a + "'");
        if (existing.count(a))
            throw ValidationError("class collision: adjective '" + a + "' is already a terminal or nonterminal");
        if (!adj_set.insert(a).second)
            throw ValidationError("class collision: adjective '" + a + "' listed twice");
    }
    const std::string adj_nt = "adj";
    if (pair.source.has_productions(adj_nt))
        throw ValidationError("class collision: source already has an adj nonterminal");

    std::vector<Production> prods;
    std::vector<RuleImage> images;
    const double p = params.probability;
    for (std::size_t i = 0; i < pair.source.productions().size(); ++i) {
        const auto &orig = pair.source.production(i);
        const auto &img = pair.images[i];
        std::optional<std::size_t> slot;
        for (std::size_t k = 0; k < orig.rhs.size() && !slot; ++k)
            if (!orig.rhs[k].is_terminal() && (orig.rhs[k].name == "noun" || orig.rhs[k].name == "name"))
                slot = k;
        if (!slot || orig.lhs == adj_nt) {
            prods.push_back(orig);
            images.push_back(img);
            continue;
        }
        std::size_t nt_before = 0;
        for (std::size_t k = 0; k < *slot; ++k)
            nt_before += orig.rhs[k].is_terminal() ? 0 : 1;
        Production variant = orig;
        variant.rhs.insert(variant.rhs.begin() + static_cast<std::ptrdiff_t>(*slot), nonterm(adj_nt));
        variant.weight = orig.weight * p;
        RuleImage vimg = img;
        for (auto &l : vimg.child_links)
            if (l >= nt_before)
                ++l;
        if (p < 1) {
            Production kept = orig;
            kept.weight = orig.weight * (1 - p);
            prods.push_back(std::move(kept));
            images.push_back(img);
        }
        prods.push_back(std::move(variant));
        images.push_back(std::move(vimg));
    }
    for (const auto &a : params.adjectives) {
        prods.push_back(make_production(adj_nt, {term(a)}));
        images.push_back({});
    }
    auto classes = pair.source.classes();
    classes.insert(classes.end() - (classes.empty() || classes.back().id != "other" ? 0 : 1),
                   TerminalClass{"S_adj", params.adjectives});
    GrammarPair out = pair;
    out.source = detail::rebuild(pair.source, std::move(prods), std::move(classes));
    out.images = std::move(images);
    return out;
}

inline GrammarPair apply_mutation(const GrammarPair &pair, const GrammarMutation &m) {
    switch (m.kind) {
    case MutationKind::original: return pair;
    case MutationKind::coarse: return coarse_target(pair);
    case MutationKind::local_reverse: return local_reverse_target(pair);
    case MutationKind::nested: return nested_target(pair);
    case MutationKind::reverse: return reverse_target(pair);
    case MutationKind::redundant: return redundant_source(pair, m.redundant);
    }
    return pair;
}

inline GrammarPair apply_mutation(const GrammarPair &pair, MutationKind k) { return apply_mutation(pair, GrammarMutation{k, {}}); }

// ---------------------------------------------------------------------------
// Multi-grammar corpora

struct MultigrammarEntry {
    std::string name; // original | coarse | localreverse | nest | reverse
    std::size_t count = 0;
};

/// Examples for each named grammar, with the grammar name prepended to the
/// source as a prefix token. Example k of every grammar shares its source
/// derivation, so targets can be compared across grammars.
inline ProbeDataset build_multigrammar_corpus(const GrammarPair &base, const std::vector<MultigrammarEntry> &entries,
                                              std::uint64_t seed, const SampleConstraints &constraints = {},
                                              unsigned jobs = 1, const std::string &split = "train_A") {
    static const std::set<std::string> allowed = {"original", "coarse", "localreverse", "nest", "reverse"};
    ProbeDataset ds;
    ds.probe = "grammar";
    ds.sub_probe = "none";
    ds.grammar_tag = "mixed";
    ds.seed = seed;
    auto &out = ds.splits[split];
    std::size_t index = 0;
    for (const auto &e : entries) {
        if (!allowed.count(e.name))
            throw ValidationError("unknown mutation name '" + e.name + "'");
        const auto kind = parse_mutation_name(e.name);
        const auto pair = apply_mutation(base, kind);
        auto examples = parallel_map<ProbeExample>(e.count, jobs, [&](std::size_t k) {
            const auto d = sample_derivation(base.source, derive_seed(seed, "multigrammar", k), constraints);
            ProbeExample ex;
            ex.split = split;
            ex.probe = "grammar";
            ex.sub_probe = "none";
            ex.grammar_tag = mutation_grammar_tag(kind);
            ex.prefix = e.name;
            ex.source = e.name + " " + source_string(base, d);
            ex.target = map_derivation_to_target(pair, d);
            ex.meta.recursion_depth = d.summary.recursion_count;
            ex.meta.n_clauses = d.summary.recursion_count + 1;
            return ex;
        });
        for (auto &ex : examples) {
            ex.id = example_id("grammar", "mixed", split, index++);
            out.push_back(std::move(ex));
        }
    }
    return ds;
}

} // namespace absprobe
