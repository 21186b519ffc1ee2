#pragma once

// Boolean expressions over an operator alphabet: sampling in chain or tree
// sketches, parsing, evaluation under task/contrast truth tables, and
// label-balanced suite construction.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "absprobe/common.hpp"
#include "absprobe/dataset.hpp"
#include "absprobe/parallel.hpp"

namespace absprobe {

struct TruthTable {
    // cells[left][right]
    std::array<std::array<bool, 2>, 2> cells{};

    bool operator()(bool l, bool r) const { return cells[l ? 1 : 0][r ? 1 : 0]; }

    template <class F> static TruthTable from(F f) {
        TruthTable t;
        for (int l = 0; l < 2; ++l)
            for (int r = 0; r < 2; ++r)
                t.cells[l][r] = f(l == 1, r == 1);
        return t;
    }
    friend bool operator==(const TruthTable &, const TruthTable &) = default;
};

enum class BindingKind { task, contrast };

struct OperatorBinding {
    std::vector<std::string> alphabet;
    std::map<std::string, TruthTable> task;
    std::map<std::string, TruthTable> contrast;

    const TruthTable &table(const std::string &op, BindingKind kind) const {
        const auto &m = kind == BindingKind::task ? task : contrast;
        auto it = m.find(op);
        if (it == m.end())
            throw ValidationError("unknown operator '" + op + "'");
        return it->second;
    }
    bool has(std::string_view op) const { return std::find(alphabet.begin(), alphabet.end(), op) != alphabet.end(); }
};

/// a1 conjunction, b2 alternative denial, c3 disjunction, d4 joint denial;
/// contrast: material non-implication, material implication, converse
/// non-implication, converse implication.
inline const OperatorBinding &default_binding() {
    static const OperatorBinding b = [] {
        OperatorBinding o;
        o.alphabet = {"a1", "b2", "c3", "d4"};
        o.task["a1"] = TruthTable::from([](bool l, bool r) { return l && r; });
        o.task["b2"] = TruthTable::from([](bool l, bool r) { return !(l && r); });
        o.task["c3"] = TruthTable::from([](bool l, bool r) { return l || r; });
        o.task["d4"] = TruthTable::from([](bool l, bool r) { return !(l || r); });
        o.contrast["a1"] = TruthTable::from([](bool l, bool r) { return l && !r; });
        o.contrast["b2"] = TruthTable::from([](bool l, bool r) { return !l || r; });
        o.contrast["c3"] = TruthTable::from([](bool l, bool r) { return !l && r; });
        o.contrast["d4"] = TruthTable::from([](bool l, bool r) { return l || !r; });
        return o;
    }();
    return b;
}

inline std::string sub_probe_for_operator(std::string_view op) {
    if (op == "a1")
        return "conj";
    if (op == "b2")
        return "alt";
    if (op == "c3")
        return "disc";
    if (op == "d4")
        return "joi";
    throw ValidationError("no sub-probe for operator '" + std::string(op) + "'");
}

inline std::string operator_for_sub_probe(std::string_view sub) {
    for (const auto &op : default_binding().alphabet)
        if (sub_probe_for_operator(op) == sub)
            return op;
    throw ValidationError("no operator for sub-probe '" + std::string(sub) + "'");
}

enum class Sketch { chain, tree };

inline std::string to_string(Sketch s) { return s == Sketch::chain ? "chain" : "tree"; }

struct LogicNode {
    bool leaf = true;
    bool value = false;     // leaves
    std::string op;         // internal nodes
    std::size_t left = 0;   // internal nodes
    std::size_t right = 0;  // internal nodes
    friend bool operator==(const LogicNode &, const LogicNode &) = default;
};

struct LogicExpression {
    std::vector<LogicNode> nodes;
    std::size_t root = 0;
    Sketch sketch = Sketch::chain;

    std::size_t n_operators() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto &n) { return !n.leaf; }));
    }

    /// Operator depth: 0 for a literal.
    int depth() const { return depth_of(root); }

    bool contains(std::string_view op) const {
        return std::any_of(nodes.begin(), nodes.end(), [&](const auto &n) { return !n.leaf && n.op == op; });
    }

    friend bool operator==(const LogicExpression &, const LogicExpression &) = default;

  private:
    int depth_of(std::size_t i) const {
        const auto &n = nodes.at(i);
        return n.leaf ? 0 : 1 + std::max(depth_of(n.left), depth_of(n.right));
    }
};

namespace detail {

inline void render_node(const LogicExpression &e, std::size_t i, bool top, std::vector<std::string> &out) {
    const auto &n = e.nodes.at(i);
    if (n.leaf) {
        out.emplace_back(n.value ? "True" : "False");
        return;
    }
    if (!top)
        out.emplace_back("(");
    render_node(e, n.left, false, out);
    out.push_back(n.op);
    render_node(e, n.right, false, out);
    if (!top)
        out.emplace_back(")");
}

inline bool is_comb(const LogicExpression &e) {
    for (const auto &n : e.nodes)
        if (!n.leaf && !e.nodes[n.left].leaf && !e.nodes[n.right].leaf)
            return false;
    return true;
}

} // namespace detail

/// Fully parenthesized except at the outermost level.
inline std::string render_expression(const LogicExpression &e) {
    std::vector<std::string> out;
    detail::render_node(e, e.root, true, out);
    return join_tokens(out);
}

inline bool evaluate(const LogicExpression &e, const OperatorBinding &b, BindingKind kind, std::size_t node) {
    const auto &n = e.nodes.at(node);
    if (n.leaf)
        return n.value;
    return b.table(n.op, kind)(evaluate(e, b, kind, n.left), evaluate(e, b, kind, n.right));
}

inline bool evaluate_expression(const LogicExpression &e, BindingKind kind = BindingKind::task,
                                const OperatorBinding &b = default_binding()) {
    return evaluate(e, b, kind, e.root);
}

/// Parses "L op R" with parenthesized operands; a bare literal is accepted.
/// Offsets in errors are character offsets.
inline LogicExpression parse_expression(std::string_view text, const OperatorBinding &b = default_binding()) {
    struct Tok {
        std::string text;
        std::size_t offset;
    };
    std::vector<Tok> toks;
    for (std::size_t i = 0; i < text.size();) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
            ++j;
        toks.push_back({std::string(text.substr(i, j - i)), i});
        i = j;
    }
    LogicExpression e;
    std::size_t pos = 0;
    auto at = [&] { return pos < toks.size() ? toks[pos].offset : text.size(); };

    auto operand = [&](auto &expr_fn) -> std::size_t {
        if (pos >= toks.size())
            throw ParseError("unexpected end of expression", text.size());
        const auto &t = toks[pos];
        if (t.text == "True" || t.text == "False") {
            ++pos;
            e.nodes.push_back({true, t.text == "True", {}, 0, 0});
            return e.nodes.size() - 1;
        }
        if (t.text == "(") {
            ++pos;
            const std::size_t inner = expr_fn(expr_fn, true);
            if (pos >= toks.size() || toks[pos].text != ")")
                throw ParseError("expected ')'", at());
            ++pos;
            return inner;
        }
        throw ParseError("expected literal or '(' but found '" + t.text + "'", t.offset);
    };
    auto expr = [&](auto &self, bool require_op) -> std::size_t {
        const std::size_t left = operand(self);
        if (pos >= toks.size() || toks[pos].text == ")") {
            if (require_op)
                throw ParseError("parenthesized operand must contain an operator", at());
            return left;
        }
        const auto &op = toks[pos];
        if (!b.has(op.text))
            throw ValidationError("unknown operator '" + op.text + "' at offset " + std::to_string(op.offset));
        ++pos;
        const std::size_t right = operand(self);
        e.nodes.push_back({false, false, op.text, left, right});
        return e.nodes.size() - 1;
    };
    if (toks.empty())
        throw ParseError("empty expression", 0);
    e.root = expr(expr, false);
    if (pos != toks.size())
        throw ParseError("unexpected token '" + toks[pos].text + "'", toks[pos].offset);
    e.sketch = detail::is_comb(e) ? Sketch::chain : Sketch::tree;
    return e;
}

inline bool evaluate_expression(std::string_view text, BindingKind kind = BindingKind::task,
                                const OperatorBinding &b = default_binding()) {
    return evaluate_expression(parse_expression(text, b), kind, b);
}

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

inline double catalan(std::size_t n) {
    double c = 1;
    for (std::size_t k = 0; k < n; ++k)
        c = c * 2 * (2 * static_cast<double>(k) + 1) / (static_cast<double>(k) + 2);
    return c;
}

/// Uniform full binary tree with n internal nodes; returns the root index.
inline std::size_t random_shape(LogicExpression &e, std::size_t n, Rng &rng, std::vector<std::size_t> &internal) {
    if (n == 0) {
        e.nodes.push_back({});
        return e.nodes.size() - 1;
    }
    const double total = catalan(n);
    double r = uniform01(rng) * total;
    std::size_t k = 0;
    for (; k + 1 < n; ++k) {
        const double w = catalan(k) * catalan(n - 1 - k);
        if (r < w)
            break;
        r -= w;
    }
    const std::size_t left = random_shape(e, k, rng, internal);
    const std::size_t right = random_shape(e, n - 1 - k, rng, internal);
    e.nodes.push_back({false, false, {}, left, right});
    internal.push_back(e.nodes.size() - 1);
    return e.nodes.size() - 1;
}

} // namespace detail

struct ExpressionConstraints {
    std::set<std::string> exclude_ops;
    std::set<std::string> require_ops;
};

/// Chain: a comb grown one operator at a time on a random side. Tree: uniform
/// bracketing over n_ops operators with comb shapes rejected.
inline LogicExpression sample_expression(Sketch sketch, std::size_t n_ops, std::uint64_t seed,
                                         const ExpressionConstraints &c = {},
                                         const OperatorBinding &b = default_binding()) {
    if (n_ops < 1)
        throw ValidationError("n_ops must be at least 1");
    std::vector<std::string> allowed;
    for (const auto &op : b.alphabet)
        if (!c.exclude_ops.count(op))
            allowed.push_back(op);
    if (allowed.empty())
        throw ValidationError("unsatisfiable: every operator is excluded");
    for (const auto &op : c.require_ops) {
        if (!b.has(op))
            throw ValidationError("unknown operator '" + op + "'");
        if (c.exclude_ops.count(op))
            throw ValidationError("unsatisfiable: operator '" + op + "' both required and excluded");
    }
    if (c.require_ops.size() > n_ops)
        throw ValidationError("unsatisfiable: more required operators than operator slots");
    if (sketch == Sketch::tree && n_ops < 3)
        throw ValidationError("unsatisfiable: tree sketch needs at least 3 operators to avoid comb shapes");

    Rng rng(seed);
    LogicExpression e;
    e.sketch = sketch;
    std::vector<std::size_t> internal;
    if (sketch == Sketch::chain) {
        e.nodes.push_back({});
        std::size_t cur = 0;
        for (std::size_t k = 0; k < n_ops; ++k) {
            e.nodes.push_back({});
            const std::size_t leaf = e.nodes.size() - 1;
            const bool grow_left = bernoulli(rng, 0.5);
            e.nodes.push_back({false, false, {}, grow_left ? leaf : cur, grow_left ? cur : leaf});
            cur = e.nodes.size() - 1;
            internal.push_back(cur);
        }
        e.root = cur;
    } else {
        for (int attempt = 0;; ++attempt) {
            if (attempt == 10000)
                throw ValidationError("could not draw a non-comb tree shape");
            e.nodes.clear();
            internal.clear();
            e.root = detail::random_shape(e, n_ops, rng, internal);
            if (!detail::is_comb(e))
                break;
        }
    }

    std::vector<std::size_t> slots = internal;
    shuffle_in_place(slots, rng);
    std::size_t k = 0;
    for (const auto &op : c.require_ops)
        e.nodes[slots[k++]].op = op;
    for (; k < slots.size(); ++k)
        e.nodes[slots[k]].op = allowed[uniform_index(rng, allowed.size())];
    for (auto &n : e.nodes)
        if (n.leaf)
            n.value = bernoulli(rng, 0.5);
    return e;
}

// ---------------------------------------------------------------------------
// Suite

struct LogicSuiteConfig {
    std::uint64_t seed = 0;
    std::string probed_op = "a1";
    std::size_t n_ops = 8;
    std::size_t train_count = 100000;
    std::size_t dev_count = 1000;
    std::size_t transfer_count = 20000;
    std::size_t supplement_count = 100;
    std::size_t test_count = 1000;
    std::size_t supplement_ops = 2;
    std::size_t candidate_factor = 50; // candidate cap = factor * quota + 1000
    unsigned jobs = 1;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["probe"] = "logic";
        j["seed"] = seed;
        j["probed_op"] = probed_op;
        j["n_ops"] = n_ops;
        j["counts"] = {{"train_A", train_count},
                       {"dev_A", dev_count},
                       {"transfer_B", transfer_count},
                       {"transfer_B_supplement", supplement_count},
                       {"test_B", test_count}};
        j["supplement_ops"] = supplement_ops;
        j["candidate_factor"] = candidate_factor;
        return j;
    }

    /// Missing keys keep their defaults; unknown keys are rejected.
    static LogicSuiteConfig from_json(const nlohmann::ordered_json &j) {
        if (!j.is_object())
            throw ValidationError("logic config must be a JSON object");
        LogicSuiteConfig c;
        try {
            for (const auto &[k, v] : j.items()) {
                if (k == "probe") {
                    if (v != "logic")
                        throw ValidationError("config probe must be 'logic'");
                } else if (k == "seed") {
                    c.seed = v.get<std::uint64_t>();
                } else if (k == "probed_op") {
                    c.probed_op = v.get<std::string>();
                } else if (k == "n_ops") {
                    c.n_ops = v.get<std::size_t>();
                } else if (k == "counts") {
                    for (const auto &[ck, cv] : v.items()) {
                        const auto n = cv.get<std::size_t>();
                        if (ck == "train_A")
                            c.train_count = n;
                        else if (ck == "dev_A")
                            c.dev_count = n;
                        else if (ck == "transfer_B")
                            c.transfer_count = n;
                        else if (ck == "transfer_B_supplement")
                            c.supplement_count = n;
                        else if (ck == "test_B")
                            c.test_count = n;
                        else
                            throw ValidationError("unknown split in counts: '" + ck + "'");
                    }
                } else if (k == "supplement_ops") {
                    c.supplement_ops = v.get<std::size_t>();
                } else if (k == "candidate_factor") {
                    c.candidate_factor = v.get<std::size_t>();
                } else {
                    throw ValidationError("unknown logic config key '" + k + "'");
                }
            }
        } catch (const nlohmann::json::exception &e) {
            throw ValidationError(std::string("malformed logic config: ") + e.what());
        }
        return c;
    }
};

namespace detail {

struct LabeledExpression {
    std::string text;
    bool task = false;
    bool contrast = false;
    int depth = 0;
    std::size_t n_ops = 0;
};

inline LabeledExpression label(const LogicExpression &e) {
    return {render_expression(e), evaluate_expression(e, BindingKind::task), evaluate_expression(e, BindingKind::contrast),
            e.depth(), e.n_operators()};
}

/// Quotas per label cell; the remainder goes to cells in `order`.
inline std::vector<std::size_t> cell_quotas(std::size_t total, std::size_t cells, const std::vector<std::size_t> &order) {
    std::vector<std::size_t> q(cells, total / cells);
    for (std::size_t r = 0; r < total % cells; ++r)
        ++q[order[r]];
    return q;
}

inline ProbeExample logic_example(const LabeledExpression &le, const std::string &split, const std::string &sub,
                                  bool contrast_label) {
    ProbeExample ex;
    ex.split = split;
    ex.probe = "logic";
    ex.sub_probe = sub;
    ex.grammar_tag = "original";
    ex.source = le.text;
    const bool v = contrast_label ? le.contrast : le.task;
    ex.target = v ? "True" : "False";
    ex.meta.recursion_depth = le.depth;
    ex.meta.n_clauses = static_cast<int>(le.n_ops);
    ex.meta.label = ex.target;
    return ex;
}

} // namespace detail

class QuotaUnreachable : public ProbeError {
  public:
    using ProbeError::ProbeError;
};

/// Draws balanced expressions: candidates are generated in index order from
/// derived seeds and accepted while their label cell has room.
inline std::vector<detail::LabeledExpression>
select_balanced(std::size_t quota, bool joint, Sketch sketch, std::size_t n_ops, const ExpressionConstraints &c,
                std::uint64_t seed, const std::string &stream, const LogicSuiteConfig &cfg,
                const std::set<std::string> *exclude_text = nullptr,
                const std::function<ExpressionConstraints(std::size_t)> &per_index = {}) {
    // Cells: joint (task, contrast) in order TT, FF, TF, FT; or task only T, F.
    const std::size_t cells = joint ? 4 : 2;
    const auto quotas = detail::cell_quotas(quota, cells, joint ? std::vector<std::size_t>{0, 1, 2, 3}
                                                                : std::vector<std::size_t>{0, 1});
    auto cell_of = [&](const detail::LabeledExpression &le) -> std::size_t {
        if (!joint)
            return le.task ? 0 : 1;
        if (le.task && le.contrast)
            return 0;
        if (!le.task && !le.contrast)
            return 1;
        return le.task ? 2 : 3;
    };
    std::vector<std::size_t> have(cells, 0);
    std::vector<detail::LabeledExpression> out;
    out.reserve(quota);
    std::set<std::string> seen;
    const std::size_t cap = cfg.candidate_factor * quota + 1000;
    const std::size_t taken = quota_select<detail::LabeledExpression>(
        quota, cap, cfg.jobs,
        [&](std::size_t i) {
            const auto cons = per_index ? per_index(i) : c;
            return detail::label(sample_expression(sketch, n_ops, derive_seed(seed, stream, i), cons));
        },
        [&](detail::LabeledExpression le, std::size_t) {
            const std::size_t cell = cell_of(le);
            if (have[cell] >= quotas[cell])
                return false;
            if (exclude_text && exclude_text->count(le.text))
                return false;
            if (exclude_text && !seen.insert(le.text).second)
                return false;
            ++have[cell];
            out.push_back(std::move(le));
            return true;
        });
    if (taken < quota)
        throw QuotaUnreachable("balanced quota unreachable for " + stream + ": got " + std::to_string(taken) + " of " +
                               std::to_string(quota) + " within " + std::to_string(cap) + " candidates");
    return out;
}

inline ProbeDataset build_logic_suite(const LogicSuiteConfig &cfg) {
    const auto &b = default_binding();
    if (!b.has(cfg.probed_op))
        throw ValidationError("probed operator '" + cfg.probed_op + "' is not in the alphabet");
    const std::string sub = sub_probe_for_operator(cfg.probed_op);
    ProbeDataset ds;
    ds.probe = "logic";
    ds.sub_probe = sub;
    ds.grammar_tag = "original";
    ds.seed = cfg.seed;
    ds.config = cfg.to_json();

    auto emit = [&](const std::vector<detail::LabeledExpression> &v, const std::string &split, bool contrast) {
        auto &out = ds.splits[split];
        for (const auto &le : v) {
            auto ex = detail::logic_example(le, split, sub, contrast);
            ex.id = example_id("logic", sub, split, out.size());
            out.push_back(std::move(ex));
        }
    };

    const auto train = select_balanced(cfg.train_count, true, Sketch::chain, cfg.n_ops, {}, cfg.seed, "train_A", cfg);
    emit(train, "train_A", false);

    std::set<std::string> train_text;
    for (const auto &le : train)
        train_text.insert(le.text);
    if (cfg.dev_count > 0)
        emit(select_balanced(cfg.dev_count, false, Sketch::chain, cfg.n_ops, {}, cfg.seed, "dev_A", cfg, &train_text),
             "dev_A", false);

    auto transfer = select_balanced(cfg.transfer_count, false, Sketch::tree, cfg.n_ops, {{cfg.probed_op}, {}},
                                    cfg.seed, "transfer_B", cfg);
    if (cfg.supplement_count > 0) {
        const auto supp = select_balanced(
            cfg.supplement_count, false, Sketch::chain, cfg.supplement_ops, {}, cfg.seed, "transfer_B_supplement", cfg,
            nullptr, [&](std::size_t i) { return ExpressionConstraints{{}, {b.alphabet[i % b.alphabet.size()]}}; });
        transfer.insert(transfer.end(), supp.begin(), supp.end());
    }
    emit(transfer, "transfer_B", false);

    emit(select_balanced(cfg.test_count, false, Sketch::tree, cfg.n_ops, {{}, {cfg.probed_op}}, cfg.seed, "test_B",
                         cfg),
         "test_B", false);

    emit(train, "contrast_C", true);
    return ds;
}

/// Recomputes labels under the given binding; sources are untouched.
inline std::vector<ProbeExample> contrast_rebind(const std::vector<ProbeExample> &slice,
                                                 BindingKind kind = BindingKind::contrast,
                                                 const OperatorBinding &b = default_binding()) {
    std::vector<ProbeExample> out = slice;
    for (std::size_t i = 0; i < out.size(); ++i) {
        try {
            const bool v = evaluate_expression(out[i].source, kind, b);
            out[i].target = v ? "True" : "False";
            out[i].meta.label = out[i].target;
        } catch (const ProbeError &e) {
            throw ValidationError("line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

} // namespace absprobe
