#pragma once

// Source/target grammar pairs linked rule-by-rule, the default English-like
// pair with its chain-structured target, and one-to-one terminal resampling.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "absprobe/common.hpp"
#include "absprobe/grammar.hpp"

#ifndef ABSPROBE_DEFAULT_WORDLIST
#define ABSPROBE_DEFAULT_WORDLIST "data/wordlist.txt"
#endif

namespace absprobe {

/// Image of one source production: the target production it maps to and, for
/// each nonterminal on the target rhs (in order), the position of the source
/// rhs nonterminal whose image fills it. Source children that are not linked
/// carry no meaning on the target side (determiners, adjectives).
struct RuleImage {
    std::optional<std::size_t> target;
    std::vector<std::size_t> child_links;
    friend bool operator==(const RuleImage &, const RuleImage &) = default;
};

struct GrammarPair {
    Pcfg source;
    Pcfg target;
    std::vector<RuleImage> images; // parallel to source.productions()
    std::set<std::string> source_non_semantic;
    std::set<std::string> target_non_semantic;
    std::set<std::string> argument_nonterminals; // target nonterminals that fill argument slots
    std::string concat_nonterminal = "CONCAT";
    std::string conj_nonterminal = "conj";

    friend bool operator==(const GrammarPair &, const GrammarPair &) = default;
};

inline std::string production_to_string(const Production &p) {
    std::string s = p.lhs + " ->";
    for (const auto &sym : p.rhs)
        s += " " + sym.name;
    return s;
}

/// Source terminal -> target terminal, read off the T-production images.
inline std::map<std::string, std::string> semantic_terminal_map(const GrammarPair &pair) {
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < pair.source.productions().size(); ++i) {
        const auto &p = pair.source.production(i);
        const auto &img = pair.images.at(i);
        if (p.kind != ProductionKind::T || !img.target)
            continue;
        const auto &t = pair.target.production(*img.target);
        if (p.rhs.size() != 1 || t.rhs.size() != 1)
            continue;
        auto [it, inserted] = out.emplace(p.rhs[0].name, t.rhs[0].name);
        if (!inserted && it->second != t.rhs[0].name)
            throw ValidationError("terminal '" + p.rhs[0].name + "' maps to both '" + it->second + "' and '" +
                                  t.rhs[0].name + "'");
    }
    return out;
}

/// Structural checks on the rule mapping; returns human-readable problems.
inline std::vector<std::string> validate_pair(const GrammarPair &pair) {
    std::vector<std::string> problems;
    if (pair.images.size() != pair.source.productions().size()) {
        problems.push_back("image table size differs from source production count");
        return problems;
    }
    for (std::size_t i = 0; i < pair.images.size(); ++i) {
        const auto &p = pair.source.production(i);
        const auto &img = pair.images[i];
        if (!img.target) {
            if (!img.child_links.empty())
                problems.push_back("unmapped rule with links: " + production_to_string(p));
            continue;
        }
        if (*img.target >= pair.target.productions().size()) {
            problems.push_back("image index out of range: " + production_to_string(p));
            continue;
        }
        const auto &t = pair.target.production(*img.target);
        if (img.child_links.size() != t.nonterminal_count()) {
            problems.push_back("link count mismatch: " + production_to_string(p));
            continue;
        }
        std::vector<std::string> src_nts;
        for (const auto &s : p.rhs)
            if (!s.is_terminal())
                src_nts.push_back(s.name);
        std::size_t k = 0;
        for (const auto &s : t.rhs) {
            if (s.is_terminal())
                continue;
            const std::size_t link = img.child_links[k++];
            if (link >= src_nts.size()) {
                problems.push_back("link out of range: " + production_to_string(p));
                continue;
            }
            // Every source rule for the linked nonterminal must map to a rule for s.
            for (std::size_t ci : pair.source.productions_for(src_nts[link])) {
                const auto &cimg = pair.images[ci];
                if (!cimg.target || pair.target.production(*cimg.target).lhs != s.name) {
                    problems.push_back("linked child " + src_nts[link] + " cannot fill " + s.name + " in " +
                                       production_to_string(p));
                    break;
                }
            }
        }
    }
    try {
        semantic_terminal_map(pair);
    } catch (const ValidationError &e) {
        problems.push_back(e.what());
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Homomorphic mapping

namespace detail {

inline std::size_t map_node(const GrammarPair &pair, const Derivation &src, std::size_t node, int depth,
                            Derivation &out) {
    const auto &n = src.nodes.at(node);
    const auto &img = pair.images.at(n.production);
    if (!img.target)
        throw ValidationError("unmapped rule: " + production_to_string(pair.source.production(n.production)));
    const std::size_t idx = out.nodes.size();
    out.nodes.push_back({*img.target, {}, depth});
    for (std::size_t link : img.child_links) {
        const std::size_t child = map_node(pair, src, n.children.at(link), depth + 1, out);
        out.nodes[idx].children.push_back(child);
    }
    return idx;
}

} // namespace detail

/// Image of a source derivation (rooted at any source nonterminal) as a
/// target derivation.
inline Derivation map_derivation(const GrammarPair &pair, const Derivation &source_derivation) {
    Derivation out;
    if (source_derivation.nodes.empty())
        return out;
    detail::map_node(pair, source_derivation, 0, 1, out);
    out.summary = summarize(pair.target, out);
    return out;
}

inline std::vector<std::string> map_derivation_tokens(const GrammarPair &pair, const Derivation &d) {
    return yield_tokens(pair.target, map_derivation(pair, d));
}

inline std::string map_derivation_to_target(const GrammarPair &pair, const Derivation &d) {
    return join_tokens(map_derivation_tokens(pair, d));
}

/// Surface form of a source yield: sentence-initial capital.
inline std::string render_source(std::vector<std::string> tokens) {
    if (!tokens.empty())
        tokens[0] = capitalize(tokens[0]);
    return join_tokens(tokens);
}

inline std::string source_string(const GrammarPair &pair, const Derivation &d) {
    return render_source(yield_tokens(pair.source, d));
}

/// Builds a derivation from explicit (lhs, rhs) rule steps in leftmost order.
using RuleStep = std::pair<std::string, std::vector<std::string>>;

inline Derivation replay_rules(const Pcfg &g, const std::vector<RuleStep> &steps) {
    std::vector<std::size_t> choices;
    choices.reserve(steps.size());
    for (const auto &[lhs, rhs] : steps) {
        auto pi = g.find_production(lhs, rhs);
        if (!pi)
            throw ValidationError("no production " + lhs + " -> " + join_tokens(rhs));
        choices.push_back(*pi);
    }
    return replay_derivation(g, choices);
}

// ---------------------------------------------------------------------------
// Default pair

struct VerbEntry {
    std::string surface;
    std::string lemma;
    bool intransitive = false;
    bool transitive = false;
    bool dative = false;
    bool complement = false; // takes a "that" clause
};

struct Lexicon {
    std::vector<VerbEntry> verbs;
    std::vector<std::string> nouns;
    std::vector<std::string> names;
    std::vector<std::string> prepositions;
    std::string conjunction = "that";
    std::string concat = "CCOMP";
};

inline Lexicon default_lexicon() {
    Lexicon lx;
    auto v = [&](std::string s, std::string l, const char *cats) {
        std::string c(cats);
        lx.verbs.push_back({std::move(s), std::move(l), c.find('i') != std::string::npos,
                            c.find('t') != std::string::npos, c.find('d') != std::string::npos,
                            c.find('c') != std::string::npos});
    };
    v("ate", "EAT", "it");
    v("saw", "SEE", "it");
    v("liked", "LIKE", "tc");
    v("admired", "ADMIRE", "tc");
    v("meant", "MEAN", "tc");
    v("hoped", "HOPE", "c");
    v("preferred", "PREFER", "itc");
    v("froze", "FREEZE", "it");
    v("screamed", "SCREAM", "i");
    v("helped", "HELP", "it");
    v("said", "SAY", "c");
    v("believed", "BELIEVE", "tc");
    v("noticed", "NOTICE", "itc");
    v("knew", "KNOW", "tc");
    v("thought", "THINK", "c");
    v("wished", "WISH", "c");
    v("loved", "LOVE", "t");
    v("found", "FIND", "t");
    v("painted", "PAINT", "it");
    v("cleaned", "CLEAN", "it");
    v("rolled", "ROLL", "it");
    v("touched", "TOUCH", "t");
    v("kicked", "KICK", "t");
    v("held", "HOLD", "t");
    v("slept", "SLEEP", "i");
    v("smiled", "SMILE", "i");
    v("laughed", "LAUGH", "i");
    v("ran", "RUN", "i");
    v("danced", "DANCE", "i");
    v("sneezed", "SNEEZE", "i");
    v("cried", "CRY", "i");
    v("walked", "WALK", "i");
    v("gave", "GIVE", "d");
    v("sent", "SEND", "d");
    v("offered", "OFFER", "d");
    v("lent", "LEND", "d");
    v("handed", "HAND", "d");
    v("sold", "SELL", "d");
    v("mailed", "MAIL", "d");
    v("passed", "PASS", "td");
    v("showed", "SHOW", "d");
    v("brought", "BRING", "d");
    v("awarded", "AWARD", "d");
    v("fed", "FEED", "td");
    lx.nouns = {"girl",   "ring",    "bed",      "baby",  "tray",   "house",  "lion",  "dog",      "rose",
                "captain", "cake",   "cat",      "boy",   "table",  "box",    "chair", "cookie",   "donut",
                "bottle", "pencil",  "monkey",   "hedgehog", "teacher", "doctor", "friend", "bird", "book",
                "cup",    "shelf",   "bag",      "bench", "car",    "boat",   "drink", "flower",   "key",
                "lamp",   "mouse",   "pillow",   "rock",  "sandwich", "shirt", "stage", "tree",    "window",
                "zebra",  "penguin", "chicken",  "cloud", "coin"};
    lx.names = {"Emma",  "Liam",   "Daniel",  "James",  "Olivia", "Noah",  "Ava",     "Mason",  "Sophia", "Lucas",
                "Charlotte", "Ella", "Mia",   "Logan",  "Amelia", "Harper", "Evelyn", "Abigail", "Ethan", "Jacob"};
    lx.prepositions = {"on", "in", "beside"};
    return lx;
}

struct GrammarOptions {
    std::size_t max_class_size = 0; // 0 keeps the full lexicon; otherwise truncate each lexical category
    bool passive = false;
    int max_iterations = Pcfg::kDefaultMaxIterations;
    int max_depth = Pcfg::kDefaultMaxDepth;
    /// Weight overrides keyed by "lhs -> rhs tokens" (production_to_string).
    std::map<std::string, double> weights;
};

namespace detail {

class PairBuilder {
  public:
    PairBuilder(std::set<std::string> source_nts, std::set<std::string> target_nts)
        : snt_(std::move(source_nts)), tnt_(std::move(target_nts)) {}

    std::size_t target_rule(const std::string &lhs, const std::string &rhs, bool iterative = false) {
        auto p = make_production(lhs, symbols(rhs, tnt_), 1.0, iterative);
        for (std::size_t i = 0; i < tgt_.size(); ++i)
            if (tgt_[i] == p)
                return i;
        tgt_.push_back(std::move(p));
        return tgt_.size() - 1;
    }

    void rule(const std::string &lhs, const std::string &rhs, std::optional<std::size_t> image,
              std::vector<std::size_t> links = {}, bool iterative = false, std::string feature = {}) {
        src_.push_back(make_production(lhs, symbols(rhs, snt_), 1.0, iterative, std::move(feature)));
        images_.push_back({image, std::move(links)});
    }

    std::vector<Production> &source() { return src_; }
    std::vector<Production> &target() { return tgt_; }
    std::vector<RuleImage> &images() { return images_; }

  private:
    static std::vector<Symbol> symbols(const std::string &rhs, const std::set<std::string> &nts) {
        std::vector<Symbol> out;
        for (auto &tok : split_tokens(rhs))
            out.push_back(nts.count(tok) ? nonterm(tok) : term(tok));
        return out;
    }

    std::set<std::string> snt_, tnt_;
    std::vector<Production> src_, tgt_;
    std::vector<RuleImage> images_;
};

template <class T> std::vector<T> truncated(const std::vector<T> &v, std::size_t n) {
    if (n == 0 || v.size() <= n)
        return v;
    return std::vector<T>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
}

inline void apply_weight_overrides(std::vector<Production> &prods, const std::map<std::string, double> &weights) {
    std::set<std::string> used;
    for (auto &p : prods) {
        auto it = weights.find(production_to_string(p));
        if (it == weights.end())
            continue;
        if (!(it->second > 0))
            throw ValidationError("weight override must be positive: " + it->first);
        p.weight = it->second;
        used.insert(it->first);
    }
    for (const auto &[k, _] : weights)
        if (!used.count(k))
            throw ValidationError("weight override matches no production: " + k);
}

} // namespace detail

inline GrammarPair build_default_grammar_pair(const GrammarOptions &opt = {}, const Lexicon &lexicon = default_lexicon()) {
    const std::set<std::string> snt = {"root",    "sentence", "cp_clause", "conj", "np_subj", "np_obj",
                                       "np_pp",   "det",      "noun",      "name", "prep",    "v_intr",
                                       "v_trans", "v_dat",    "v_cp"};
    const std::set<std::string> tnt = {"ROOT", "CLAUSE", "CP_CLAUSE", "CONCAT", "ENTITY",
                                       "NOUN", "NAME",   "PREP",      "PRED"};
    detail::PairBuilder b(snt, tnt);

    const auto t_root = b.target_rule("ROOT", "CLAUSE");
    const auto t_intr = b.target_rule("CLAUSE", "PRED ( ENTITY , NONE , NONE )");
    const auto t_trans = b.target_rule("CLAUSE", "PRED ( ENTITY , ENTITY , NONE )");
    const auto t_dat = b.target_rule("CLAUSE", "PRED ( ENTITY , ENTITY , ENTITY )");
    const auto t_chain = b.target_rule("CLAUSE", "CP_CLAUSE CONCAT CLAUSE", true);
    const auto t_cp = b.target_rule("CP_CLAUSE", "PRED ( ENTITY , NONE , NONE )");
    const auto t_noun = b.target_rule("ENTITY", "NOUN");
    const auto t_name = b.target_rule("ENTITY", "NAME");
    const auto t_pp_noun = b.target_rule("ENTITY", "PREP ( NOUN , ENTITY )");
    const auto t_pp_name = b.target_rule("ENTITY", "PREP ( NAME , ENTITY )");

    b.rule("root", "sentence .", t_root, {0});
    b.rule("sentence", "np_subj v_intr", t_intr, {1, 0});
    b.rule("sentence", "np_subj v_trans np_obj", t_trans, {1, 0, 2});
    b.rule("sentence", "np_subj v_dat np_obj np_obj", t_dat, {1, 0, 3, 2});
    b.rule("sentence", "np_subj v_dat np_obj to np_obj", t_dat, {1, 0, 2, 3});
    if (opt.passive) {
        b.rule("sentence", "np_subj was v_trans by np_obj", t_trans, {1, 2, 0}, false, "passive");
        b.rule("sentence", "np_subj was v_dat to np_obj by np_obj", t_dat, {1, 3, 0, 2}, false, "passive");
    }
    b.rule("sentence", "cp_clause conj sentence", t_chain, {0, 1, 2}, true, "ccomp");
    b.rule("cp_clause", "np_subj v_cp", t_cp, {1, 0});
    b.rule("conj", lexicon.conjunction, b.target_rule("CONCAT", lexicon.concat));

    struct NpSpec {
        const char *lhs;
        const char *pp_feature;
        const char *nest_lhs;
    };
    for (const NpSpec np : {NpSpec{"np_subj", "pp_subj", "np_pp"}, NpSpec{"np_obj", "pp_obj", "np_pp"},
                            NpSpec{"np_pp", "pp_nested", "np_pp"}}) {
        const std::string nest = np.nest_lhs;
        b.rule(np.lhs, "det noun", t_noun, {1});
        b.rule(np.lhs, "name", t_name, {0});
        b.rule(np.lhs, "det noun prep " + nest, t_pp_noun, {2, 1, 3}, false, np.pp_feature);
        b.rule(np.lhs, "name prep " + nest, t_pp_name, {1, 0, 2}, false, np.pp_feature);
    }
    b.rule("det", "a", std::nullopt);
    b.rule("det", "the", std::nullopt);

    std::vector<std::string> s_v, s_n, s_prep, t_p, t_e, t_prep;
    const auto nouns = detail::truncated(lexicon.nouns, opt.max_class_size);
    const auto names = detail::truncated(lexicon.names, opt.max_class_size);
    const auto preps = detail::truncated(lexicon.prepositions, opt.max_class_size);
    for (const auto &n : nouns) {
        b.rule("noun", n, b.target_rule("NOUN", to_upper(n)));
        s_n.push_back(n);
        t_e.push_back(to_upper(n));
    }
    for (const auto &n : names) {
        b.rule("name", n, b.target_rule("NAME", to_upper(n)));
        s_n.push_back(n);
        t_e.push_back(to_upper(n));
    }
    for (const auto &p : preps) {
        b.rule("prep", p, b.target_rule("PREP", to_upper(p)));
        s_prep.push_back(p);
        t_prep.push_back(to_upper(p));
    }
    struct VerbCat {
        const char *lhs;
        bool VerbEntry::*flag;
    };
    std::set<std::string> seen_verbs;
    for (const VerbCat cat : {VerbCat{"v_intr", &VerbEntry::intransitive}, VerbCat{"v_trans", &VerbEntry::transitive},
                              VerbCat{"v_dat", &VerbEntry::dative}, VerbCat{"v_cp", &VerbEntry::complement}}) {
        std::vector<VerbEntry> members;
        for (const auto &ve : lexicon.verbs)
            if (ve.*(cat.flag))
                members.push_back(ve);
        for (const auto &ve : detail::truncated(members, opt.max_class_size)) {
            b.rule(cat.lhs, ve.surface, b.target_rule("PRED", ve.lemma));
            if (seen_verbs.insert(ve.surface).second) {
                s_v.push_back(ve.surface);
                t_p.push_back(ve.lemma);
            }
        }
    }

    detail::apply_weight_overrides(b.source(), opt.weights);

    std::vector<TerminalClass> sclasses = {{"S_v", s_v},
                                           {"S_n", s_n},
                                           {"S_prep", s_prep},
                                           {"S_c", {lexicon.conjunction}},
                                           {"other", {".", "a", "the", "to", "was", "by"}}};
    std::vector<TerminalClass> tclasses = {{"S_P", t_p},
                                           {"S_E", t_e},
                                           {"S_PREP", t_prep},
                                           {"S_C", {lexicon.concat}},
                                           {"other", {"(", ")", ",", "NONE"}}};

    GrammarPair pair;
    pair.source = Pcfg("root", std::move(b.source()), std::move(sclasses), opt.max_iterations, opt.max_depth);
    pair.target = Pcfg("ROOT", std::move(b.target()), std::move(tclasses), opt.max_iterations, opt.max_depth);
    pair.images = std::move(b.images());
    pair.source_non_semantic = {".", "a", "the", "to", "was", "by"};
    pair.target_non_semantic = {"(", ")", ",", "NONE"};
    pair.argument_nonterminals = {"ENTITY"};
    return pair;
}

/// Tokens ignored by disjointness checks: non-semantic terminals of both
/// sides, plus their sentence-initial capitalized forms.
inline std::set<std::string> default_exemptions(const GrammarPair &pair) {
    std::set<std::string> out;
    for (const auto &t : pair.source_non_semantic) {
        out.insert(t);
        out.insert(capitalize(t));
    }
    out.insert(pair.target_non_semantic.begin(), pair.target_non_semantic.end());
    return out;
}

/// Semantic terminals of a pair (both sides).
inline std::set<std::string> semantic_terminals(const GrammarPair &pair) {
    std::set<std::string> out;
    for (const auto &t : pair.source.terminals())
        if (!pair.source_non_semantic.count(t))
            out.insert(t);
    for (const auto &t : pair.target.terminals())
        if (!pair.target_non_semantic.count(t))
            out.insert(t);
    return out;
}

// ---------------------------------------------------------------------------
// Word lists and terminal resampling

struct WordList {
    std::vector<std::string> words;
    std::string id;
};

inline WordList load_word_list(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read word list " + path);
    WordList wl;
    std::string line;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    while (std::getline(in, line)) {
        auto toks = split_tokens(line);
        if (toks.empty())
            continue;
        if (toks.size() > 1)
            throw ValidationError("word list " + path + ": line contains whitespace: '" + line + "'");
        h = mix64(h ^ hash_string(toks[0]));
        wl.words.push_back(std::move(toks[0]));
    }
    const auto slash = path.find_last_of('/');
    std::ostringstream id;
    id << (slash == std::string::npos ? path : path.substr(slash + 1)) << ":" << wl.words.size() << ":" << std::hex << h;
    wl.id = id.str();
    return wl;
}

inline WordList default_word_list() { return load_word_list(ABSPROBE_DEFAULT_WORDLIST); }

struct ClassMapping {
    std::string class_id;
    std::vector<std::pair<std::string, std::string>> entries; // old -> new, class member order
    friend bool operator==(const ClassMapping &, const ClassMapping &) = default;
};

struct TerminalMap {
    std::vector<ClassMapping> source_classes;
    std::vector<ClassMapping> target_classes;
    std::vector<std::pair<std::string, std::string>> added_conjunctions; // (source, target)
    std::uint64_t seed = 0;
    std::string word_list_id;

    friend bool operator==(const TerminalMap &, const TerminalMap &) = default;
};

class WordListExhausted : public ProbeError {
  public:
    explicit WordListExhausted(std::size_t shortfall)
        : ProbeError("word list exhausted: " + std::to_string(shortfall) + " more unused words needed"),
          shortfall_(shortfall) {}
    std::size_t shortfall() const noexcept { return shortfall_; }

  private:
    std::size_t shortfall_;
};

namespace detail {

inline void rename_terminals(Pcfg &g, const std::vector<ClassMapping> &maps) {
    std::map<std::string, std::string> rename;
    for (const auto &cm : maps)
        for (const auto &[o, n] : cm.entries)
            rename[o] = n;
    auto prods = g.productions();
    for (auto &p : prods)
        for (auto &s : p.rhs)
            if (s.is_terminal()) {
                auto it = rename.find(s.name);
                if (it != rename.end())
                    s.name = it->second;
            }
    auto classes = g.classes();
    for (auto &c : classes)
        for (const auto &cm : maps)
            if (cm.class_id == c.id)
                for (auto &m : c.members)
                    for (const auto &[o, n] : cm.entries)
                        if (m == o) {
                            m = n;
                            break;
                        }
    g = Pcfg(g.start(), std::move(prods), std::move(classes), g.max_iterations(), g.max_depth());
}

inline void add_to_class(std::vector<TerminalClass> &classes, const std::string &id, const std::string &member) {
    for (auto &c : classes)
        if (c.id == id) {
            c.members.push_back(member);
            return;
        }
    classes.push_back({id, {member}});
}

} // namespace detail

/// Adds paired conjunction/CONCAT terminals to a pair.
inline GrammarPair add_conjunctions(const GrammarPair &pair,
                                    const std::vector<std::pair<std::string, std::string>> &words) {
    if (words.empty())
        return pair;
    GrammarPair out = pair;
    auto sprods = out.source.productions();
    auto tprods = out.target.productions();
    auto sclasses = out.source.classes();
    auto tclasses = out.target.classes();
    double weight = 1.0;
    for (std::size_t i : out.source.productions_for(out.conj_nonterminal))
        weight = out.source.production(i).weight;
    for (const auto &[s, t] : words) {
        tprods.push_back(make_production(out.concat_nonterminal, {term(t)}));
        sprods.push_back(make_production(out.conj_nonterminal, {term(s)}, weight));
        out.images.push_back({tprods.size() - 1, {}});
        detail::add_to_class(sclasses, "S_c", s);
        detail::add_to_class(tclasses, "S_C", t);
    }
    out.source = Pcfg(out.source.start(), std::move(sprods), std::move(sclasses), out.source.max_iterations(),
                      out.source.max_depth());
    out.target = Pcfg(out.target.start(), std::move(tprods), std::move(tclasses), out.target.max_iterations(),
                      out.target.max_depth());
    return out;
}

/// Renames terminals class by class and appends any added conjunctions.
inline GrammarPair apply_terminal_map(const GrammarPair &pair, const TerminalMap &map) {
    GrammarPair out = pair;
    detail::rename_terminals(out.source, map.source_classes);
    detail::rename_terminals(out.target, map.target_classes);
    out = add_conjunctions(out, map.added_conjunctions);
    semantic_terminal_map(out); // throws if the renaming broke the one-image rule
    return out;
}

/// One-to-one replacement of every semantic terminal by an unused word from
/// `words`, plus growth of the conjunction classes to `n_conjunctions` pairs.
inline std::pair<GrammarPair, TerminalMap> resample_terminals(const GrammarPair &pair, const WordList &words,
                                                              std::uint64_t seed, int n_conjunctions) {
    if (n_conjunctions < 1)
        throw ValidationError("n_conjunctions must be at least 1");

    std::set<std::string> taken;
    auto block = [&](const std::string &s) {
        taken.insert(to_lower(s));
    };
    for (const Pcfg *g : {&pair.source, &pair.target}) {
        for (const auto &t : g->terminals())
            block(t);
        for (const auto &c : g->classes())
            for (const auto &m : c.members)
                block(m);
        for (const auto &nt : g->nonterminals())
            block(nt);
    }

    std::vector<std::string> pool;
    std::set<std::string> seen;
    for (const auto &w : words.words) {
        const auto key = to_lower(w);
        if (w.empty() || has_whitespace(w) || taken.count(key) || !seen.insert(key).second)
            continue;
        pool.push_back(key);
    }
    Rng rng(seed);
    shuffle_in_place(pool, rng);

    const auto sem = semantic_terminal_map(pair);
    const std::vector<std::pair<std::string, std::string>> plan = {
        {"S_v", "S_P"}, {"S_n", "S_E"}, {"S_prep", "S_PREP"}, {"S_c", "S_C"}};
    std::size_t existing_conj = 0;
    if (const auto *c = pair.source.find_class("S_c"))
        existing_conj = c->members.size();
    const std::size_t extra = n_conjunctions > static_cast<int>(existing_conj)
                                  ? static_cast<std::size_t>(n_conjunctions) - existing_conj
                                  : 0;

    // Consume words in a fixed order; the shortfall is reported only after the
    // full demand is known.
    std::size_t next = 0;
    auto take = [&]() -> std::string { return next < pool.size() ? pool[next++] : (++next, std::string{}); };

    TerminalMap map;
    map.seed = seed;
    map.word_list_id = words.id;
    for (const auto &[sc, tc] : plan) {
        std::map<std::string, std::string> target_rename;
        ClassMapping scm{sc, {}};
        if (const auto *c = pair.source.find_class(sc))
            for (const auto &m : c->members) {
                const auto w = take();
                scm.entries.emplace_back(m, w);
                auto it = sem.find(m);
                if (it != sem.end() && sc != "S_c")
                    target_rename.emplace(it->second, to_upper(w));
            }
        ClassMapping tcm{tc, {}};
        if (const auto *c = pair.target.find_class(tc))
            for (const auto &m : c->members) {
                auto it = target_rename.find(m);
                tcm.entries.emplace_back(m, it != target_rename.end() ? it->second : to_upper(take()));
            }
        map.source_classes.push_back(std::move(scm));
        map.target_classes.push_back(std::move(tcm));
    }
    for (std::size_t k = 0; k < extra; ++k) {
        auto s = take();
        auto t = to_upper(take());
        map.added_conjunctions.emplace_back(std::move(s), std::move(t));
    }
    if (next > pool.size())
        throw WordListExhausted(next - pool.size());
    return {apply_terminal_map(pair, map), std::move(map)};
}

inline nlohmann::ordered_json to_json(const TerminalMap &m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto *side : {&m.source_classes, &m.target_classes})
        for (const auto &cm : *side) {
            nlohmann::ordered_json c = nlohmann::ordered_json::object();
            for (const auto &[o, n] : cm.entries)
                c[o] = n;
            j[cm.class_id] = std::move(c);
        }
    auto added = nlohmann::ordered_json::array();
    for (const auto &[s, t] : m.added_conjunctions)
        added.push_back({s, t});
    j["added"] = std::move(added);
    j["seed"] = m.seed;
    j["word_list_id"] = m.word_list_id;
    return j;
}

/// `source_class_ids` tells which class keys belong to the source side; the
/// rest are target classes.
inline TerminalMap terminal_map_from_json(const nlohmann::ordered_json &j,
                                          const std::set<std::string> &source_class_ids = {"S_v", "S_n", "S_prep",
                                                                                           "S_c", "S_adj"}) {
    try {
        TerminalMap m;
        for (const auto &[key, value] : j.items()) {
            if (key == "added") {
                for (const auto &p : value)
                    m.added_conjunctions.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
            } else if (key == "seed") {
                m.seed = value.get<std::uint64_t>();
            } else if (key == "word_list_id") {
                m.word_list_id = value.get<std::string>();
            } else {
                ClassMapping cm{key, {}};
                for (const auto &[o, n] : value.items())
                    cm.entries.emplace_back(o, n.get<std::string>());
                (source_class_ids.count(key) ? m.source_classes : m.target_classes).push_back(std::move(cm));
            }
        }
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("malformed terminal map: ") + e.what());
    }
}

} // namespace absprobe
