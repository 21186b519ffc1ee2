#pragma once

// Worked examples rebuilt as derivations over the
// default pair with a hand-written partial terminal map.

#include <string>
#include <utility>
#include <vector>

#include "absprobe/absprobe.hpp"

namespace fixtures {

using namespace absprobe;

inline std::vector<RuleStep> steps(std::initializer_list<const char *> rules) {
    std::vector<RuleStep> out;
    for (const char *r : rules) {
        auto toks = split_tokens(r);
        RuleStep s;
        s.first = toks.at(0);
        s.second.assign(toks.begin() + 2, toks.end()); // skip "->"
        out.push_back(std::move(s));
    }
    return out;
}

struct Renames {
    std::vector<std::pair<std::string, std::string>> verbs; // surface -> new word
    std::vector<std::pair<std::string, std::string>> nouns; // nouns and names
    std::vector<std::pair<std::string, std::string>> preps;
    std::vector<std::pair<std::string, std::string>> conj;  // that -> x, CCOMP -> X
};

inline GrammarPair renamed(const GrammarPair &base, const Renames &r) {
    const auto sem = semantic_terminal_map(base);
    auto cls = [&](const char *sid, const char *tid, const std::vector<std::pair<std::string, std::string>> &e,
                   TerminalMap &m) {
        ClassMapping s{sid, {}}, t{tid, {}};
        for (const auto &[o, n] : e) {
            s.entries.emplace_back(o, n);
            t.entries.emplace_back(sem.at(o), to_upper(n));
        }
        m.source_classes.push_back(std::move(s));
        m.target_classes.push_back(std::move(t));
    };
    TerminalMap m;
    cls("S_v", "S_P", r.verbs, m);
    cls("S_n", "S_E", r.nouns, m);
    cls("S_prep", "S_PREP", r.preps, m);
    if (!r.conj.empty()) {
        m.source_classes.push_back({"S_c", {{"that", r.conj[0].first}}});
        m.target_classes.push_back({"S_C", {{"CCOMP", r.conj[0].second}}});
    }
    return apply_terminal_map(base, m);
}

struct Fixture {
    GrammarPair pair;
    Derivation derivation;
    std::string source;
    std::string target;   // full form
    std::string display;  // as printed (NONE omitted where the table omits it)
    std::string contrast; // display form, empty if none
};

inline GrammarPair com_train_pair() {
    return renamed(build_default_grammar_pair(),
                   {{{"hoped", "incurve"}, {"liked", "upon"}, {"admired", "bibb"}, {"screamed", "goladar"}},
                    {{"Emma", "soke"}, {"dog", "soon"}, {"cat", "ban"}, {"Liam", "acetum"}},
                    {},
                    {{"huave", "LG"}}});
}

inline Fixture com_train() {
    Fixture f;
    f.pair = com_train_pair();
    f.derivation = replay_rules(f.pair.source, steps({
        "root -> sentence .",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> name", "name -> soke", "v_cp -> incurve",
        "conj -> huave",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> det noun", "det -> the", "noun -> soon", "v_cp -> upon",
        "conj -> huave",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> det noun", "det -> a", "noun -> ban", "v_cp -> bibb",
        "conj -> huave",
        "sentence -> np_subj v_intr", "np_subj -> name", "name -> acetum", "v_intr -> goladar",
    }));
    f.source = "Soke incurve huave the soon upon huave a ban bibb huave acetum goladar .";
    f.target = "INCURVE ( SOKE , NONE , NONE ) LG UPON ( SOON , NONE , NONE ) LG BIBB ( BAN , NONE , NONE ) LG "
               "GOLADAR ( ACETUM , NONE , NONE )";
    f.display = "INCURVE ( SOKE ) LG UPON ( SOON ) LG BIBB ( BAN ) LG GOLADAR ( ACETUM )";
    f.contrast = "( ACETUM ) GOLADAR LG ( BAN ) BIBB LG ( SOON ) UPON LG ( SOKE ) INCURVE";
    return f;
}

inline Fixture com_transfer() {
    Fixture f;
    f.pair = build_default_grammar_pair();
    f.derivation = replay_rules(f.pair.source, steps({
        "root -> sentence .",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> name", "name -> Emma", "v_cp -> liked",
        "conj -> that",
        "sentence -> np_subj v_intr", "np_subj -> det noun", "det -> a", "noun -> girl", "v_intr -> saw",
    }));
    f.source = "Emma liked that a girl saw .";
    f.target = "LIKE ( EMMA , NONE , NONE ) CCOMP SEE ( GIRL , NONE , NONE )";
    f.display = "LIKE ( EMMA ) CCOMP SEE ( GIRL )";
    return f;
}

inline Fixture com_test() {
    Fixture f;
    f.pair = build_default_grammar_pair();
    f.derivation = replay_rules(f.pair.source, steps({
        "root -> sentence .",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> name", "name -> Emma", "v_cp -> admired",
        "conj -> that",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> name", "name -> Daniel", "v_cp -> liked",
        "conj -> that",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> name", "name -> James", "v_cp -> meant",
        "conj -> that",
        "sentence -> np_subj v_intr", "np_subj -> det noun", "det -> a", "noun -> lion", "v_intr -> froze",
    }));
    f.source = "Emma admired that Daniel liked that James meant that a lion froze .";
    f.target = "ADMIRE ( EMMA , NONE , NONE ) CCOMP LIKE ( DANIEL , NONE , NONE ) CCOMP MEAN ( JAMES , NONE , NONE ) "
               "CCOMP FREEZE ( LION , NONE , NONE )";
    f.display = "ADMIRE ( EMMA ) CCOMP LIKE ( DANIEL ) CCOMP MEAN ( JAMES ) CCOMP FREEZE ( LION )";
    return f;
}

inline Fixture mod_train() {
    Fixture f;
    f.pair = renamed(build_default_grammar_pair(),
                     {{{"gave", "cord"}},
                      {{"Emma", "safe"}, {"girl", "poddy"}, {"dog", "soon"}, {"cat", "pial"}},
                      {{"on", "above"}},
                      {}});
    f.derivation = replay_rules(f.pair.source, steps({
        "root -> sentence .",
        "sentence -> np_subj v_dat np_obj np_obj",
        "np_subj -> name prep np_pp", "name -> safe", "prep -> above", "np_pp -> det noun", "det -> the",
        "noun -> poddy",
        "v_dat -> cord",
        "np_obj -> det noun", "det -> the", "noun -> soon",
        "np_obj -> det noun", "det -> a", "noun -> pial",
    }));
    f.source = "Safe above the poddy cord the soon a pial .";
    f.target = "CORD ( ABOVE ( SAFE , PODDY ) , PIAL , SOON )";
    f.display = f.target;
    f.contrast = "( SOON , PIAL , ( PODDY , SAFE ) ABOVE ) CORD";
    return f;
}

inline Fixture mod_transfer() {
    Fixture f;
    f.pair = build_default_grammar_pair();
    f.derivation = replay_rules(f.pair.source, steps({
        "root -> sentence .",
        "sentence -> np_subj v_trans np_obj",
        "np_subj -> name", "name -> Emma",
        "v_trans -> ate",
        "np_obj -> det noun prep np_pp", "det -> the", "noun -> ring", "prep -> beside",
        "np_pp -> det noun", "det -> a", "noun -> bed",
    }));
    f.source = "Emma ate the ring beside a bed .";
    f.target = "EAT ( EMMA , BESIDE ( RING , BED ) , NONE )";
    f.display = f.target;
    return f;
}

inline Fixture mod_test() {
    Fixture f;
    f.pair = build_default_grammar_pair();
    f.derivation = replay_rules(f.pair.source, steps({
        "root -> sentence .",
        "sentence -> np_subj v_intr",
        "np_subj -> det noun prep np_pp", "det -> the", "noun -> baby", "prep -> on",
        "np_pp -> det noun prep np_pp", "det -> a", "noun -> tray", "prep -> in",
        "np_pp -> det noun", "det -> the", "noun -> house",
        "v_intr -> screamed",
    }));
    f.source = "The baby on a tray in the house screamed .";
    f.target = "SCREAM ( ON ( BABY , IN ( TRAY , HOUSE ) ) , NONE , NONE )";
    f.display = f.target;
    return f;
}

// Base chain of the derivations table; the table prints it only through its
// Coarse, LocalR and Nested images.
inline Fixture mutation_base() {
    Fixture f;
    f.pair = renamed(build_default_grammar_pair(),
                     {{{"hoped", "clan"}, {"liked", "incurve"}, {"gave", "upon"}},
                      {{"Emma", "ban"}, {"Liam", "soke"}, {"Daniel", "soon"}, {"James", "bibb"}, {"Olivia", "goalder"}},
                      {},
                      {{"huave", "LG"}}});
    f.derivation = replay_rules(f.pair.source, steps({
        "root -> sentence .",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> name", "name -> ban", "v_cp -> clan",
        "conj -> huave",
        "sentence -> cp_clause conj sentence",
        "cp_clause -> np_subj v_cp", "np_subj -> name", "name -> soke", "v_cp -> incurve",
        "conj -> huave",
        "sentence -> np_subj v_dat np_obj np_obj",
        "np_subj -> name", "name -> soon", "v_dat -> upon",
        "np_obj -> name", "name -> bibb",
        "np_obj -> name", "name -> goalder",
    }));
    f.source = "Ban clan huave soke incurve huave soon upon bibb goalder .";
    f.target = "CLAN ( BAN , NONE , NONE ) LG INCURVE ( SOKE , NONE , NONE ) LG UPON ( SOON , GOALDER , BIBB )";
    f.display = "CLAN ( BAN ) LG INCURVE ( SOKE ) LG UPON ( SOON , GOALDER , BIBB )";
    return f;
}

inline const char *kCoarse = "CLAN ( ) LG INCURVE ( ) LG UPON ( )";
inline const char *kLocalR = "( BAN ) CLAN LG ( SOKE ) INCURVE LG ( BIBB , GOALDER , SOON ) UPON";
inline const char *kNested = "CLAN ( BAN , LG INCURVE ( SOKE , LG UPON ( SOON , GOALDER , BIBB ) ) )";

inline GrammarPair redundant_pair() {
    GrammarOptions o;
    o.passive = true;
    auto base = renamed(build_default_grammar_pair(o),
                        {{{"gave", "ozophen"}}, {{"cat", "pial"}, {"Emma", "zogo"}, {"Liam", "dermestes"}}, {}, {}});
    return redundant_source(base);
}

inline const char *kRedundantSource = "A angry pial was ozophen to zogo by odd dermestes .";
inline const char *kRedundantPlain = "A pial was ozophen to zogo by dermestes .";
inline const char *kRedundantTarget = "OZOPHEN ( DERMESTES , PIAL , ZOGO )";

inline Derivation redundant_derivation(const GrammarPair &p, bool with_adjectives) {
    if (with_adjectives)
        return replay_rules(p.source, steps({
            "root -> sentence .",
            "sentence -> np_subj was v_dat to np_obj by np_obj",
            "np_subj -> det adj noun", "det -> a", "adj -> angry", "noun -> pial",
            "v_dat -> ozophen",
            "np_obj -> name", "name -> zogo",
            "np_obj -> adj name", "adj -> odd", "name -> dermestes",
        }));
    return replay_rules(p.source, steps({
        "root -> sentence .",
        "sentence -> np_subj was v_dat to np_obj by np_obj",
        "np_subj -> det noun", "det -> a", "noun -> pial",
        "v_dat -> ozophen",
        "np_obj -> name", "name -> zogo",
        "np_obj -> name", "name -> dermestes",
    }));
}

struct LogicRow {
    const char *expression;
    bool task;
};

inline const LogicRow kLogicTrain{
    "False c3 ( ( ( False a1 ( ( ( False b2 ( True d4 True ) ) d4 True ) d4 True ) ) d4 False ) b2 False )", true};
inline const LogicRow kLogicTransfer{
    "( ( False c3 ( False b2 False ) ) b2 True ) d4 ( True b2 ( ( False b2 ( False b2 False ) ) c3 True ) )", true};
inline const LogicRow kLogicTest{
    "( True b2 ( ( False a1 False ) d4 False ) ) a1 ( False c3 ( ( ( True a1 True ) c3 True ) a1 True ) )", false};

struct CogsFixture {
    const char *lf;
    const char *target;
};

inline const CogsFixture kCogsRows[] = {
    {"rose ( x _ 1 ) AND help . theme ( x _ 3 , x _ 1 ) AND help . agent ( x _ 3 , x _ 6 ) AND dog ( x _ 6 )",
     "HELP ( DOG , ROSE , NONE )"},
    {"* captain ( x _ 1 ) ; eat . agent ( x _ 2 , x _ 1 )", "EAT ( CAPTION , NONE , NONE )"},
    {"* dog ( x _ 4 ) ; hope . agent ( x _ 1 , Liam ) AND hope . ccomp ( x _ 1 , x _ 5 ) AND prefer . agent ( x _ 5 , "
     "x _ 4 )",
     "HOPE ( LIAM , NONE , NONE ) CCOMP PREFER ( DOG , NONE , NONE )"},
};

} // namespace fixtures

namespace fixtures {

// Image of every iterative node is the concatenation of its children's
// images; CONCAT terminals appear once per iterative application.
inline bool concatenation_law_holds(const absprobe::GrammarPair &p, const absprobe::Derivation &d,
                                    std::string *why = nullptr) {
    using namespace absprobe;
    const auto whole = map_derivation_tokens(p, d);
    const auto *concat_class = p.target.find_class("S_C");
    std::size_t concats = 0;
    for (const auto &t : whole)
        if (concat_class && std::find(concat_class->members.begin(), concat_class->members.end(), t) !=
                                concat_class->members.end())
            ++concats;
    if (concats != static_cast<std::size_t>(d.summary.recursion_count)) {
        if (why)
            *why = "CONCAT count " + std::to_string(concats) + " != recursion " +
                   std::to_string(d.summary.recursion_count);
        return false;
    }
    for (std::size_t i = 0; i < d.nodes.size(); ++i) {
        const auto &n = d.nodes[i];
        if (!p.source.production(n.production).iterative)
            continue;
        std::vector<std::string> joined;
        for (std::size_t c : n.children) {
            auto part = map_derivation_tokens(p, extract_subtree(p.source, d, c));
            joined.insert(joined.end(), part.begin(), part.end());
        }
        if (joined != map_derivation_tokens(p, extract_subtree(p.source, d, i))) {
            if (why)
                *why = "node " + std::to_string(i) + " image is not the concatenation of its parts";
            return false;
        }
    }
    return true;
}

} // namespace fixtures

namespace fixtures {

// Shunting-yard to postfix, then a stack evaluator. Tables are written from
// the standard connective definitions, independent of OperatorBinding.
inline bool postfix_eval(const std::string &expr, bool contrast) {
    auto apply = [&](const std::string &op, bool l, bool r) {
        if (!contrast) {
            if (op == "a1") return l && r;
            if (op == "b2") return !(l && r);
            if (op == "c3") return l || r;
            if (op == "d4") return !(l || r);
        } else {
            if (op == "a1") return l && !r; // material non-implication
            if (op == "b2") return !l || r; // material implication
            if (op == "c3") return !l && r; // converse non-implication
            if (op == "d4") return l || !r; // converse implication
        }
        throw std::runtime_error("bad operator " + op);
    };
    std::vector<std::string> output, ops;
    for (const auto &t : absprobe::split_tokens(expr)) {
        if (t == "True" || t == "False") {
            output.push_back(t);
        } else if (t == "(") {
            ops.push_back(t);
        } else if (t == ")") {
            while (!ops.empty() && ops.back() != "(") {
                output.push_back(ops.back());
                ops.pop_back();
            }
            if (ops.empty())
                throw std::runtime_error("unbalanced");
            ops.pop_back();
        } else {
            while (!ops.empty() && ops.back() != "(") {
                output.push_back(ops.back());
                ops.pop_back();
            }
            ops.push_back(t);
        }
    }
    while (!ops.empty()) {
        output.push_back(ops.back());
        ops.pop_back();
    }
    std::vector<bool> st;
    for (const auto &t : output) {
        if (t == "True" || t == "False") {
            st.push_back(t == "True");
            continue;
        }
        if (st.size() < 2)
            throw std::runtime_error("underflow");
        const bool r = st.back();
        st.pop_back();
        const bool l = st.back();
        st.pop_back();
        st.push_back(apply(t, l, r));
    }
    if (st.size() != 1)
        throw std::runtime_error("malformed");
    return st[0];
}

} // namespace fixtures

namespace fixtures {

inline absprobe::LogProbRecord ppl_record(const std::string &id, const std::string &condition,
                                          const std::string &set, std::vector<double> ppls) {
    absprobe::LogProbRecord r;
    r.id = id;
    r.condition = condition;
    r.eval_set = set;
    for (double p : ppls)
        r.token_logprobs.push_back(-std::log(p));
    r.n_tokens = r.token_logprobs.size();
    return r;
}

// 432 heads, three examples per eval set; pruning head k raises test PPL by
// k % 9 so every dpc value is shared by 48 heads.
inline std::vector<absprobe::LogProbRecord> synthetic_dpc_records() {
    using namespace absprobe;
    std::vector<LogProbRecord> out;
    const double base[3] = {4.0, 6.0, 9.0};
    for (const char *set : {"test_B", "transfer_B"})
        for (int e = 0; e < 3; ++e)
            out.push_back(ppl_record("ex" + std::to_string(e), "baseline", set, {base[e]}));
    const auto heads = all_head_ids();
    for (std::size_t k = 0; k < heads.size(); ++k) {
        const auto cond = "prune:" + to_string(heads[k]);
        for (int e = 0; e < 3; ++e) {
            out.push_back(ppl_record("ex" + std::to_string(e), cond, "test_B", {base[e] + static_cast<double>(k % 9)}));
            out.push_back(ppl_record("ex" + std::to_string(e), cond, "transfer_B", {base[e] + 0.5}));
        }
    }
    return out;
}

} // namespace fixtures
