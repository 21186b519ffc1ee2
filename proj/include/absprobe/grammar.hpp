#pragma once

// Weighted context-free grammars: representation, seeded constrained
// sampling, derivation replay and bounded language enumeration.

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "absprobe/common.hpp"

namespace absprobe {

enum class SymbolKind { terminal, nonterminal };

struct Symbol {
    std::string name;
    SymbolKind kind = SymbolKind::terminal;

    bool is_terminal() const noexcept { return kind == SymbolKind::terminal; }
    friend bool operator==(const Symbol &, const Symbol &) = default;
};

inline Symbol term(std::string name) { return {std::move(name), SymbolKind::terminal}; }
inline Symbol nonterm(std::string name) { return {std::move(name), SymbolKind::nonterminal}; }

/// T-productions rewrite to terminals only; N-productions contain at least one
/// nonterminal.
enum class ProductionKind { T, N };

struct Production {
    std::string lhs;
    std::vector<Symbol> rhs;
    ProductionKind kind = ProductionKind::N;
    bool iterative = false;
    double weight = 1.0;
    std::string feature; // optional tag counted in FeatureSummary

    bool recursive() const {
        return std::any_of(rhs.begin(), rhs.end(), [&](const Symbol &s) { return !s.is_terminal() && s.name == lhs; });
    }
    std::size_t nonterminal_count() const {
        return static_cast<std::size_t>(
            std::count_if(rhs.begin(), rhs.end(), [](const Symbol &s) { return !s.is_terminal(); }));
    }
    friend bool operator==(const Production &, const Production &) = default;
};

inline ProductionKind infer_kind(const std::vector<Symbol> &rhs) {
    return std::all_of(rhs.begin(), rhs.end(), [](const Symbol &s) { return s.is_terminal(); }) ? ProductionKind::T
                                                                                               : ProductionKind::N;
}

inline Production make_production(std::string lhs, std::vector<Symbol> rhs, double weight = 1.0,
                                  bool iterative = false, std::string feature = {}) {
    Production p;
    p.lhs = std::move(lhs);
    p.kind = infer_kind(rhs);
    p.rhs = std::move(rhs);
    p.weight = weight;
    p.iterative = iterative;
    p.feature = std::move(feature);
    return p;
}

struct TerminalClass {
    std::string id;
    std::vector<std::string> members;
    friend bool operator==(const TerminalClass &, const TerminalClass &) = default;
};

class Pcfg {
  public:
    static constexpr int kDefaultMaxIterations = 12;
    static constexpr int kDefaultMaxDepth = 32;
    static constexpr int kUnbounded = INT_MAX / 4;

    Pcfg() = default;

    Pcfg(std::string start, std::vector<Production> productions, std::vector<TerminalClass> classes = {},
         int max_iterations = kDefaultMaxIterations, int max_depth = kDefaultMaxDepth)
        : start_(std::move(start)), productions_(std::move(productions)), classes_(std::move(classes)),
          max_iterations_(max_iterations), max_depth_(max_depth) {
        if (start_.empty())
            throw ValidationError("grammar start symbol is empty");
        if (max_iterations_ <= 0 || max_depth_ <= 0)
            throw ValidationError("max_iterations and max_depth must be positive");
        build_tables();
    }

    const std::string &start() const noexcept { return start_; }
    const std::vector<Production> &productions() const noexcept { return productions_; }
    const Production &production(std::size_t i) const { return productions_.at(i); }
    const std::vector<TerminalClass> &classes() const noexcept { return classes_; }
    int max_iterations() const noexcept { return max_iterations_; }
    int max_depth() const noexcept { return max_depth_; }

    std::span<const std::size_t> productions_for(std::string_view lhs) const {
        auto it = by_lhs_.find(lhs);
        if (it == by_lhs_.end())
            return {};
        return it->second;
    }

    bool has_productions(std::string_view nt) const { return by_lhs_.count(nt) > 0; }

    /// Nonterminals with productions, in order of first appearance as lhs.
    const std::vector<std::string> &nonterminals() const noexcept { return lhs_order_; }

    std::optional<std::string> class_of(std::string_view terminal) const {
        auto it = class_index_.find(terminal);
        if (it == class_index_.end())
            return std::nullopt;
        return it->second;
    }

    const TerminalClass *find_class(std::string_view id) const {
        for (const auto &c : classes_)
            if (c.id == id)
                return &c;
        return nullptr;
    }

    /// Every terminal that occurs on some right-hand side.
    std::set<std::string> terminals() const {
        std::set<std::string> out;
        for (const auto &p : productions_)
            for (const auto &s : p.rhs)
                if (s.is_terminal())
                    out.insert(s.name);
        return out;
    }

    /// Smallest derivation-tree height rooted at `nt` (kUnbounded if it
    /// cannot terminate).
    int min_height(std::string_view nt) const {
        auto it = min_height_.find(nt);
        return it == min_height_.end() ? kUnbounded : it->second;
    }

    int production_min_height(std::size_t i) const { return production_min_height_.at(i); }

    bool can_reach_iterative(std::string_view nt) const {
        auto it = reach_iterative_.find(nt);
        return it != reach_iterative_.end() && it->second;
    }

    const std::set<std::string> &reachable_features(std::string_view nt) const {
        static const std::set<std::string> empty;
        auto it = reach_features_.find(nt);
        return it == reach_features_.end() ? empty : it->second;
    }

    std::optional<std::size_t> find_production(std::string_view lhs, const std::vector<std::string> &rhs) const {
        for (std::size_t i : productions_for(lhs)) {
            const auto &p = productions_[i];
            if (p.rhs.size() != rhs.size())
                continue;
            bool same = true;
            for (std::size_t k = 0; k < rhs.size() && same; ++k)
                same = p.rhs[k].name == rhs[k];
            if (same)
                return i;
        }
        return std::nullopt;
    }

    friend bool operator==(const Pcfg &a, const Pcfg &b) {
        return a.start_ == b.start_ && a.productions_ == b.productions_ && a.classes_ == b.classes_ &&
               a.max_iterations_ == b.max_iterations_ && a.max_depth_ == b.max_depth_;
    }

  private:
    void build_tables() {
        for (std::size_t i = 0; i < productions_.size(); ++i) {
            auto [it, inserted] = by_lhs_.try_emplace(productions_[i].lhs);
            if (inserted)
                lhs_order_.push_back(productions_[i].lhs);
            it->second.push_back(i);
        }
        for (const auto &c : classes_)
            for (const auto &m : c.members)
                class_index_.try_emplace(m, c.id);

        // Fixed point for minimum heights.
        for (const auto &nt : lhs_order_)
            min_height_[nt] = kUnbounded;
        production_min_height_.assign(productions_.size(), kUnbounded);
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t i = 0; i < productions_.size(); ++i) {
                int h = 1;
                for (const auto &s : productions_[i].rhs)
                    if (!s.is_terminal())
                        h = std::max(h, min_height(s.name) >= kUnbounded ? kUnbounded : 1 + min_height(s.name));
                if (h < production_min_height_[i]) {
                    production_min_height_[i] = h;
                    changed = true;
                }
                auto &mh = min_height_[productions_[i].lhs];
                if (h < mh) {
                    mh = h;
                    changed = true;
                }
            }
        }

        // Fixed point for reachability of iterative rules and features.
        for (const auto &nt : lhs_order_) {
            reach_iterative_[nt] = false;
            reach_features_[nt];
        }
        for (bool changed = true; changed;) {
            changed = false;
            for (const auto &p : productions_) {
                bool iter = p.iterative;
                std::set<std::string> feats;
                if (!p.feature.empty())
                    feats.insert(p.feature);
                for (const auto &s : p.rhs) {
                    if (s.is_terminal())
                        continue;
                    iter = iter || can_reach_iterative(s.name);
                    const auto &f = reachable_features(s.name);
                    feats.insert(f.begin(), f.end());
                }
                auto &ri = reach_iterative_[p.lhs];
                if (iter && !ri) {
                    ri = true;
                    changed = true;
                }
                auto &rf = reach_features_[p.lhs];
                const auto before = rf.size();
                rf.insert(feats.begin(), feats.end());
                changed = changed || rf.size() != before;
            }
        }
    }

    std::string start_;
    std::vector<Production> productions_;
    std::vector<TerminalClass> classes_;
    int max_iterations_ = kDefaultMaxIterations;
    int max_depth_ = kDefaultMaxDepth;

    std::map<std::string, std::vector<std::size_t>, std::less<>> by_lhs_;
    std::vector<std::string> lhs_order_;
    std::map<std::string, std::string, std::less<>> class_index_;
    std::map<std::string, int, std::less<>> min_height_;
    std::vector<int> production_min_height_;
    std::map<std::string, bool, std::less<>> reach_iterative_;
    std::map<std::string, std::set<std::string>, std::less<>> reach_features_;
};

// ---------------------------------------------------------------------------
// Derivations

struct DerivationNode {
    std::size_t production = 0;
    std::vector<std::size_t> children; // one per nonterminal on the rhs, in order
    int depth = 1;
    friend bool operator==(const DerivationNode &, const DerivationNode &) = default;
};

struct FeatureSummary {
    int recursion_count = 0; // applications of iterative productions
    std::map<std::string, int> feature_counts;
    int height = 0;

    int count(const std::string &feature) const {
        auto it = feature_counts.find(feature);
        return it == feature_counts.end() ? 0 : it->second;
    }
    friend bool operator==(const FeatureSummary &, const FeatureSummary &) = default;
};

/// Ordered tree of production applications; nodes[0] is the root.
struct Derivation {
    std::vector<DerivationNode> nodes;
    FeatureSummary summary;

    friend bool operator==(const Derivation &, const Derivation &) = default;
};

inline FeatureSummary summarize(const Pcfg &g, const Derivation &d) {
    FeatureSummary s;
    for (const auto &n : d.nodes) {
        const auto &p = g.production(n.production);
        if (p.iterative)
            ++s.recursion_count;
        if (!p.feature.empty())
            ++s.feature_counts[p.feature];
        s.height = std::max(s.height, n.depth);
    }
    return s;
}

namespace detail {

inline void append_yield(const Pcfg &g, const Derivation &d, std::size_t node, std::vector<std::string> &out) {
    const auto &n = d.nodes.at(node);
    const auto &p = g.production(n.production);
    std::size_t child = 0;
    for (const auto &s : p.rhs) {
        if (s.is_terminal())
            out.push_back(s.name);
        else
            append_yield(g, d, n.children.at(child++), out);
    }
}

inline void copy_subtree(const Derivation &src, std::size_t node, int depth, Derivation &dst, std::size_t &out) {
    out = dst.nodes.size();
    dst.nodes.push_back({src.nodes.at(node).production, {}, depth});
    for (std::size_t c : src.nodes[node].children) {
        std::size_t idx = 0;
        copy_subtree(src, c, depth + 1, dst, idx);
        dst.nodes[out].children.push_back(idx);
    }
}

} // namespace detail

/// Leaf frontier of the derivation, left to right.
inline std::vector<std::string> yield_tokens(const Pcfg &g, const Derivation &d) {
    std::vector<std::string> out;
    if (!d.nodes.empty())
        detail::append_yield(g, d, 0, out);
    return out;
}

inline Derivation extract_subtree(const Pcfg &g, const Derivation &d, std::size_t node) {
    Derivation out;
    std::size_t root = 0;
    detail::copy_subtree(d, node, 1, out, root);
    out.summary = summarize(g, out);
    return out;
}

/// Builds a derivation whose root applies `production` and whose nonterminal
/// children are the given sub-derivations.
inline Derivation compose_derivation(const Pcfg &g, std::size_t production, const std::vector<Derivation> &children) {
    const auto &p = g.production(production);
    if (children.size() != p.nonterminal_count())
        throw ValidationError("compose_derivation: production expects " + std::to_string(p.nonterminal_count()) +
                              " children, got " + std::to_string(children.size()));
    Derivation out;
    out.nodes.push_back({production, {}, 1});
    std::size_t k = 0;
    for (const auto &s : p.rhs) {
        if (s.is_terminal())
            continue;
        const auto &child = children[k++];
        if (child.nodes.empty() || g.production(child.nodes[0].production).lhs != s.name)
            throw ValidationError("compose_derivation: child does not derive '" + s.name + "'");
        std::size_t idx = 0;
        detail::copy_subtree(child, 0, 2, out, idx);
        out.nodes[0].children.push_back(idx);
    }
    out.summary = summarize(g, out);
    return out;
}

/// Rebuilds a derivation from production choices applied to the leftmost
/// open nonterminal (preorder).
inline Derivation replay_derivation(const Pcfg &g, std::span<const std::size_t> choices) {
    Derivation d;
    std::size_t next = 0;
    auto expand = [&](auto &self, const std::string &nt, int depth) -> std::size_t {
        if (next >= choices.size())
            throw ValidationError("replay: ran out of choices while expanding '" + nt + "'");
        const std::size_t pi = choices[next++];
        if (pi >= g.productions().size())
            throw ValidationError("replay: production index out of range");
        const auto &p = g.production(pi);
        if (p.lhs != nt)
            throw ValidationError("replay: production for '" + p.lhs + "' applied to '" + nt + "'");
        const std::size_t idx = d.nodes.size();
        d.nodes.push_back({pi, {}, depth});
        for (const auto &s : p.rhs) {
            if (s.is_terminal())
                continue;
            const std::size_t c = self(self, s.name, depth + 1);
            d.nodes[idx].children.push_back(c);
        }
        return idx;
    };
    expand(expand, g.start(), 1);
    if (next != choices.size())
        throw ValidationError("replay: " + std::to_string(choices.size() - next) + " unused choices");
    d.summary = summarize(g, d);
    return d;
}

// ---------------------------------------------------------------------------
// Sampling

struct SampleConstraints {
    int min_recursion = 0;
    std::optional<int> max_recursion; // defaults to the grammar's max_iterations
    std::set<std::string> required_features;
    std::set<std::string> forbidden_features;
    std::map<std::string, int> feature_limits; // feature -> max applications
    int max_attempts = 10000;
    double damping = 0.5; // weight multiplier per existing recursive application

    int effective_max_recursion(const Pcfg &g) const {
        return std::min(max_recursion.value_or(g.max_iterations()), g.max_iterations());
    }

    bool satisfied_by(const Pcfg &g, const FeatureSummary &s) const {
        if (s.recursion_count < min_recursion || s.recursion_count > effective_max_recursion(g))
            return false;
        for (const auto &f : required_features)
            if (s.count(f) == 0)
                return false;
        for (const auto &f : forbidden_features)
            if (s.count(f) > 0)
                return false;
        for (const auto &[f, lim] : feature_limits)
            if (s.count(f) > lim)
                return false;
        return s.height <= g.max_depth();
    }
};

class ConstraintsUnsatisfiable : public ProbeError {
  public:
    explicit ConstraintsUnsatisfiable(int attempts)
        : ProbeError("constraints unsatisfiable after " + std::to_string(attempts) + " attempts"), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

  private:
    int attempts_;
};

namespace detail {

class DerivationSampler {
  public:
    DerivationSampler(const Pcfg &g, const SampleConstraints &c, Rng &rng)
        : g_(g), c_(c), rng_(rng), max_rec_(c.effective_max_recursion(g)) {}

    std::optional<Derivation> attempt() {
        d_ = Derivation{};
        recursion_ = 0;
        features_.clear();
        on_path_.clear();
        std::size_t root = 0;
        if (!expand(g_.start(), 1, root))
            return std::nullopt;
        d_.summary = summarize(g_, d_);
        return std::move(d_);
    }

  private:
    bool expand(const std::string &nt, int depth, std::size_t &out) {
        std::vector<std::size_t> cand;
        for (std::size_t pi : g_.productions_for(nt)) {
            const auto &p = g_.production(pi);
            if (!(p.weight > 0))
                continue;
            if (!p.feature.empty()) {
                if (c_.forbidden_features.count(p.feature))
                    continue;
                auto lim = c_.feature_limits.find(p.feature);
                if (lim != c_.feature_limits.end() && features_[p.feature] >= lim->second)
                    continue;
            }
            if (p.iterative && recursion_ >= max_rec_)
                continue;
            if (depth - 1 + g_.production_min_height(pi) > g_.max_depth())
                continue;
            cand.push_back(pi);
        }

        auto narrow = [&](auto pred) {
            std::vector<std::size_t> keep;
            std::copy_if(cand.begin(), cand.end(), std::back_inserter(keep), pred);
            if (!keep.empty())
                cand.swap(keep);
            return !keep.empty() || !cand.empty();
        };
        auto rhs_any = [&](std::size_t pi, auto pred) {
            const auto &p = g_.production(pi);
            return std::any_of(p.rhs.begin(), p.rhs.end(),
                               [&](const Symbol &s) { return !s.is_terminal() && pred(s.name); });
        };

        // Top-down forcing toward unmet lower bounds.
        if (recursion_ < c_.min_recursion) {
            bool has_iter = std::any_of(cand.begin(), cand.end(), [&](std::size_t pi) { return g_.production(pi).iterative; });
            if (has_iter)
                narrow([&](std::size_t pi) { return g_.production(pi).iterative; });
            else
                narrow([&](std::size_t pi) {
                    return rhs_any(pi, [&](const std::string &n) { return g_.can_reach_iterative(n); });
                });
        }
        std::set<std::string> missing;
        for (const auto &f : c_.required_features)
            if (features_[f] == 0)
                missing.insert(f);
        if (!missing.empty()) {
            bool direct = std::any_of(cand.begin(), cand.end(),
                                      [&](std::size_t pi) { return missing.count(g_.production(pi).feature) > 0; });
            if (direct)
                narrow([&](std::size_t pi) { return missing.count(g_.production(pi).feature) > 0; });
            else
                narrow([&](std::size_t pi) {
                    return rhs_any(pi, [&](const std::string &n) {
                        const auto &rf = g_.reachable_features(n);
                        return std::any_of(missing.begin(), missing.end(), [&](const std::string &f) { return rf.count(f) > 0; });
                    });
                });
        }
        if (cand.empty())
            return false;

        std::vector<double> weights;
        weights.reserve(cand.size());
        for (std::size_t pi : cand) {
            const auto &p = g_.production(pi);
            double w = p.weight;
            if (p.iterative)
                w *= std::pow(c_.damping, recursion_);
            else if (p.recursive())
                w *= std::pow(c_.damping, on_path_[p.lhs]);
            weights.push_back(w);
        }
        const std::size_t pi = cand[weighted_index(rng_, weights)];
        const auto &p = g_.production(pi);

        out = d_.nodes.size();
        d_.nodes.push_back({pi, {}, depth});
        if (p.iterative)
            ++recursion_;
        if (!p.feature.empty())
            ++features_[p.feature];
        const bool nest = !p.iterative && p.recursive();
        if (nest)
            ++on_path_[p.lhs];
        for (const auto &s : p.rhs) {
            if (s.is_terminal())
                continue;
            std::size_t child = 0;
            if (!expand(s.name, depth + 1, child))
                return false;
            d_.nodes[out].children.push_back(child);
        }
        if (nest)
            --on_path_[p.lhs];
        return true;
    }

    const Pcfg &g_;
    const SampleConstraints &c_;
    Rng &rng_;
    int max_rec_;
    Derivation d_;
    int recursion_ = 0;
    std::map<std::string, int> features_;
    std::map<std::string, int> on_path_;
};

} // namespace detail

/// Draws a derivation satisfying `constraints`. Identical (grammar, seed,
/// constraints) always yield an identical derivation.
inline Derivation sample_derivation(const Pcfg &g, std::uint64_t seed, const SampleConstraints &constraints = {}) {
    Rng rng(seed);
    detail::DerivationSampler sampler(g, constraints, rng);
    for (int attempt = 1; attempt <= constraints.max_attempts; ++attempt) {
        auto d = sampler.attempt();
        if (d && constraints.satisfied_by(g, d->summary))
            return std::move(*d);
    }
    throw ConstraintsUnsatisfiable(constraints.max_attempts);
}

// ---------------------------------------------------------------------------
// Bounded enumeration (test oracle)

class LanguageTooLarge : public ProbeError {
  public:
    using ProbeError::ProbeError;
};

using Language = std::set<std::vector<std::string>>;

/// All yields derivable with tree height <= max_depth.
inline Language enumerate_language(const Pcfg &g, int max_depth, std::size_t cap = 200000) {
    std::map<std::string, Language> prev;
    for (int h = 1; h <= max_depth; ++h) {
        std::map<std::string, Language> cur;
        for (const auto &nt : g.nonterminals()) {
            Language &out = cur[nt];
            for (std::size_t pi : g.productions_for(nt)) {
                const auto &p = g.production(pi);
                std::vector<std::vector<std::string>> partial{{}};
                for (const auto &s : p.rhs) {
                    if (s.is_terminal()) {
                        for (auto &seq : partial)
                            seq.push_back(s.name);
                        continue;
                    }
                    auto it = prev.find(s.name);
                    if (it == prev.end() || it->second.empty()) {
                        partial.clear();
                        break;
                    }
                    if (partial.size() * it->second.size() > cap)
                        throw LanguageTooLarge("language too large at depth " + std::to_string(h));
                    std::vector<std::vector<std::string>> next;
                    next.reserve(partial.size() * it->second.size());
                    for (const auto &a : partial)
                        for (const auto &b : it->second) {
                            auto seq = a;
                            seq.insert(seq.end(), b.begin(), b.end());
                            next.push_back(std::move(seq));
                        }
                    partial = std::move(next);
                }
                for (auto &seq : partial)
                    out.insert(std::move(seq));
                if (out.size() > cap)
                    throw LanguageTooLarge("language too large at depth " + std::to_string(h));
            }
        }
        prev = std::move(cur);
    }
    auto it = prev.find(g.start());
    return it == prev.end() ? Language{} : it->second;
}

// ---------------------------------------------------------------------------
// Validation

struct GrammarFinding {
    enum class Kind {
        missing_start,
        unreachable_nonterminal,
        missing_productions,
        undeclared_symbol,
        class_overlap,
        zero_weight,
        kind_mismatch,
        bad_iterative,
        invalid_symbol,
    };
    Kind kind;
    std::string subject;
    std::string message;
};

inline std::string to_string(GrammarFinding::Kind k) {
    using K = GrammarFinding::Kind;
    switch (k) {
    case K::missing_start: return "missing start";
    case K::unreachable_nonterminal: return "unreachable nonterminal";
    case K::missing_productions: return "nonterminal without productions";
    case K::undeclared_symbol: return "undeclared symbol";
    case K::class_overlap: return "class overlap";
    case K::zero_weight: return "zero-weight rule";
    case K::kind_mismatch: return "production kind mismatch";
    case K::bad_iterative: return "iterative rule without self-reference";
    case K::invalid_symbol: return "invalid symbol name";
    }
    return "unknown";
}

struct GrammarReport {
    std::vector<GrammarFinding> findings;
    bool ok() const noexcept { return findings.empty(); }
    std::size_t count(GrammarFinding::Kind k) const {
        return static_cast<std::size_t>(
            std::count_if(findings.begin(), findings.end(), [k](const auto &f) { return f.kind == k; }));
    }
};

inline GrammarReport validate_grammar(const Pcfg &g) {
    using K = GrammarFinding::Kind;
    GrammarReport r;
    auto add = [&](K k, std::string subject, std::string msg) { r.findings.push_back({k, std::move(subject), std::move(msg)}); };

    if (!g.has_productions(g.start()))
        add(K::missing_start, g.start(), "start symbol has no productions");

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
    for (const auto &nt : g.nonterminals())
        if (!reached.count(nt))
            add(K::unreachable_nonterminal, nt, "not reachable from " + g.start());

    std::set<std::string> reported;
    for (std::size_t i = 0; i < g.productions().size(); ++i) {
        const auto &p = g.production(i);
        const auto where = "production " + std::to_string(i) + " (" + p.lhs + ")";
        if (!(p.weight > 0))
            add(K::zero_weight, where, "weight must be positive");
        if (p.kind != infer_kind(p.rhs))
            add(K::kind_mismatch, where, "declared kind disagrees with right-hand side");
        if (p.iterative && !p.recursive())
            add(K::bad_iterative, where, "iterative rule must contain its lhs");
        if (p.lhs.empty() || has_whitespace(p.lhs))
            add(K::invalid_symbol, where, "invalid lhs name");
        for (const auto &s : p.rhs) {
            if (s.name.empty() || has_whitespace(s.name)) {
                add(K::invalid_symbol, where, "invalid symbol name '" + s.name + "'");
                continue;
            }
            if (!reported.insert(s.name).second)
                continue;
            if (!s.is_terminal() && !g.has_productions(s.name))
                add(K::missing_productions, s.name, "nonterminal has no productions");
            else if (s.is_terminal() && !g.class_of(s.name))
                add(K::undeclared_symbol, s.name, "symbol is not declared in any class");
        }
    }

    std::map<std::string, std::vector<std::string>> owners;
    for (const auto &c : g.classes())
        for (const auto &m : c.members)
            owners[m].push_back(c.id);
    for (const auto &[term, ids] : owners)
        if (ids.size() > 1)
            add(K::class_overlap, term, "member of " + join_tokens(ids, ", "));
    return r;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const Pcfg &g) {
    nlohmann::ordered_json j;
    j["start"] = g.start();
    auto prods = nlohmann::ordered_json::array();
    for (const auto &p : g.productions()) {
        nlohmann::ordered_json jp;
        jp["lhs"] = p.lhs;
        auto rhs = nlohmann::ordered_json::array();
        for (const auto &s : p.rhs)
            rhs.push_back(s.name);
        jp["rhs"] = std::move(rhs);
        jp["kind"] = p.kind == ProductionKind::T ? "T" : "N";
        jp["iterative"] = p.iterative;
        jp["weight"] = p.weight;
        if (!p.feature.empty())
            jp["feature"] = p.feature;
        prods.push_back(std::move(jp));
    }
    j["productions"] = std::move(prods);
    nlohmann::ordered_json classes = nlohmann::ordered_json::object();
    for (const auto &c : g.classes())
        classes[c.id] = c.members;
    j["classes"] = std::move(classes);
    j["max_iterations"] = g.max_iterations();
    j["max_depth"] = g.max_depth();
    return j;
}

inline Pcfg pcfg_from_json(const nlohmann::ordered_json &j) {
    try {
        std::set<std::string> lhs;
        for (const auto &jp : j.at("productions"))
            lhs.insert(jp.at("lhs").get<std::string>());
        std::vector<Production> prods;
        for (const auto &jp : j.at("productions")) {
            Production p;
            p.lhs = jp.at("lhs").get<std::string>();
            for (const auto &s : jp.at("rhs")) {
                auto name = s.get<std::string>();
                const bool nt = lhs.count(name) > 0;
                p.rhs.push_back({std::move(name), nt ? SymbolKind::nonterminal : SymbolKind::terminal});
            }
            const auto kind = jp.at("kind").get<std::string>();
            if (kind != "T" && kind != "N")
                throw ValidationError("production kind must be T or N, got '" + kind + "'");
            p.kind = kind == "T" ? ProductionKind::T : ProductionKind::N;
            p.iterative = jp.value("iterative", false);
            p.weight = jp.value("weight", 1.0);
            p.feature = jp.value("feature", std::string{});
            prods.push_back(std::move(p));
        }
        std::vector<TerminalClass> classes;
        if (j.contains("classes"))
            for (const auto &[id, members] : j.at("classes").items())
                classes.push_back({id, members.get<std::vector<std::string>>()});
        return Pcfg(j.at("start").get<std::string>(), std::move(prods), std::move(classes),
                    j.value("max_iterations", Pcfg::kDefaultMaxIterations), j.value("max_depth", Pcfg::kDefaultMaxDepth));
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("malformed grammar JSON: ") + e.what());
    }
}

inline std::string grammar_to_string(const Pcfg &g) { return to_json(g).dump(2) + "\n"; }

inline Pcfg grammar_from_string(const std::string &text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(std::string("grammar JSON: ") + e.what(), e.byte);
    }
    return pcfg_from_json(j);
}

inline void write_grammar_file(const Pcfg &g, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ProbeError("cannot write grammar file " + path);
    out << grammar_to_string(g);
}

inline Pcfg read_grammar_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read grammar file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return grammar_from_string(text);
}

} // namespace absprobe
