#pragma once

// Conversion of COGS logical forms into the chain-structured target format.

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "absprobe/common.hpp"

namespace absprobe {

class UnknownRoleError : public ValidationError {
  public:
    UnknownRoleError(const std::string &role, std::size_t offset)
        : ValidationError("unknown role '" + role + "' at offset " + std::to_string(offset)), role_(role),
          offset_(offset) {}
    const std::string &role() const noexcept { return role_; }
    std::size_t offset() const noexcept { return offset_; }

  private:
    std::string role_;
    std::size_t offset_;
};

namespace detail {

struct LfToken {
    std::string text;
    std::size_t offset;
};

inline std::vector<LfToken> lf_tokens(std::string_view s) {
    std::vector<LfToken> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
            ++j;
        if (j > i)
            out.push_back({std::string(s.substr(i, j - i)), i});
        i = j;
    }
    return out;
}

class LfParser {
  public:
    explicit LfParser(std::string_view text) : text_(text), toks_(lf_tokens(text)) {}

    struct Arg {
        bool is_var = false;
        std::string value; // variable index or proper name
        std::size_t offset = 0;
    };
    struct RoleAtom {
        std::string pred;
        std::string role;                // agent | theme | recipient | ccomp | nmod
        std::string prep;                // for nmod
        std::string event;               // variable index
        Arg arg;
        std::size_t offset = 0;
    };

    std::map<std::string, std::string> nouns; // variable -> noun
    std::vector<RoleAtom> roles;

    void parse() {
        while (peek() == "*") {
            next();
            noun_atom();
            expect(";");
        }
        atom();
        while (pos_ < toks_.size()) {
            expect("AND");
            atom();
        }
    }

  private:
    std::string_view peek() const { return pos_ < toks_.size() ? std::string_view(toks_[pos_].text) : std::string_view(); }

    std::size_t offset() const { return pos_ < toks_.size() ? toks_[pos_].offset : text_.size(); }

    const LfToken &next() {
        if (pos_ >= toks_.size())
            throw ParseError("unexpected end of logical form", text_.size());
        return toks_[pos_++];
    }

    void expect(std::string_view t) {
        if (peek() != t)
            throw ParseError("expected '" + std::string(t) + "'" +
                                 (pos_ < toks_.size() ? ", found '" + toks_[pos_].text + "'" : std::string()),
                             offset());
        ++pos_;
    }

    std::string word() {
        const auto &t = next();
        static const std::set<std::string> reserved = {"(", ")", ",", ";", ".", "*", "_", "AND"};
        if (reserved.count(t.text))
            throw ParseError("expected a predicate, found '" + t.text + "'", t.offset);
        return t.text;
    }

    std::string var() {
        expect("x");
        expect("_");
        const auto &n = next();
        if (n.text.empty() || n.text.find_first_not_of("0123456789") != std::string::npos)
            throw ParseError("expected a variable index, found '" + n.text + "'", n.offset);
        return n.text;
    }

    Arg arg() {
        Arg a;
        a.offset = offset();
        if (peek() == "x") {
            a.is_var = true;
            a.value = var();
        } else {
            a.value = word();
        }
        return a;
    }

    void noun_atom() {
        const auto at = offset();
        auto noun = word();
        expect("(");
        auto v = var();
        expect(")");
        auto [it, inserted] = nouns.emplace(v, noun);
        if (!inserted && it->second != noun)
            throw ParseError("variable x _ " + v + " bound to two nouns", at);
    }

    void atom() {
        const auto at = offset();
        auto pred = word();
        if (peek() == "(") {
            pos_--;
            noun_atom();
            return;
        }
        expect(".");
        RoleAtom r;
        r.pred = pred;
        r.offset = at;
        const auto role_at = offset();
        r.role = word();
        if (r.role == "nmod") {
            expect(".");
            r.prep = word();
        } else if (r.role != "agent" && r.role != "theme" && r.role != "recipient" && r.role != "ccomp") {
            throw UnknownRoleError(r.role, role_at);
        }
        expect("(");
        r.event = var();
        expect(",");
        r.arg = arg();
        expect(")");
        roles.push_back(std::move(r));
    }

    std::string_view text_;
    std::vector<LfToken> toks_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// COGS logical form -> "PRED ( AGENT , THEME , RECIPIENT )" clauses joined by
/// CCOMP, missing slots filled with NONE, all tokens upper-cased.
inline std::string convert_cogs_logical_form(std::string_view lf, std::string_view concat = "CCOMP") {
    detail::LfParser p(lf);
    p.parse();

    struct Event {
        std::string pred;
        std::optional<detail::LfParser::Arg> agent, theme, recipient;
        std::optional<std::string> ccomp;
        std::size_t offset = 0;
    };
    std::map<std::string, Event> events;
    std::vector<std::string> event_order;
    std::map<std::string, std::pair<std::string, detail::LfParser::Arg>> modifiers; // noun var -> (prep, arg)
    std::set<std::string> embedded;

    for (const auto &r : p.roles) {
        if (r.role == "nmod") {
            if (!p.nouns.count(r.event) || p.nouns.at(r.event) != r.pred)
                throw ValidationError("nmod on x _ " + r.event + " does not match its noun, at offset " +
                                      std::to_string(r.offset));
            if (!modifiers.emplace(r.event, std::make_pair(r.prep, r.arg)).second)
                throw ValidationError("multiple nmod modifiers on x _ " + r.event + " at offset " +
                                      std::to_string(r.offset));
            continue;
        }
        auto [it, inserted] = events.try_emplace(r.event);
        Event &e = it->second;
        if (inserted) {
            e.pred = r.pred;
            e.offset = r.offset;
            event_order.push_back(r.event);
        } else if (e.pred != r.pred) {
            throw ValidationError("event x _ " + r.event + " has predicates '" + e.pred + "' and '" + r.pred +
                                  "', at offset " + std::to_string(r.offset));
        }
        auto set_slot = [&](std::optional<detail::LfParser::Arg> &slot) {
            if (slot)
                throw ValidationError("duplicate " + r.role + " for x _ " + r.event + " at offset " +
                                      std::to_string(r.offset));
            slot = r.arg;
        };
        if (r.role == "agent")
            set_slot(e.agent);
        else if (r.role == "theme")
            set_slot(e.theme);
        else if (r.role == "recipient")
            set_slot(e.recipient);
        else {
            if (e.ccomp)
                throw ValidationError("duplicate ccomp for x _ " + r.event + " at offset " + std::to_string(r.offset));
            if (!r.arg.is_var)
                throw ValidationError("ccomp argument must be a variable, at offset " + std::to_string(r.arg.offset));
            e.ccomp = r.arg.value;
            embedded.insert(r.arg.value);
        }
    }
    if (events.empty())
        throw ValidationError("logical form has no event predicate");

    std::vector<std::string> roots;
    for (const auto &v : event_order)
        if (!embedded.count(v))
            roots.push_back(v);
    if (roots.size() != 1)
        throw ValidationError("logical form must have exactly one root event, found " + std::to_string(roots.size()));

    std::set<std::string> rendering;
    auto entity = [&](auto &self, const detail::LfParser::Arg &a) -> std::vector<std::string> {
        if (!a.is_var)
            return {to_upper(a.value)};
        auto n = p.nouns.find(a.value);
        if (n == p.nouns.end())
            throw ValidationError("undefined variable x _ " + a.value + " at offset " + std::to_string(a.offset));
        if (!rendering.insert(a.value).second)
            throw ValidationError("cyclic modification through x _ " + a.value);
        std::vector<std::string> out;
        auto m = modifiers.find(a.value);
        if (m == modifiers.end()) {
            out.push_back(to_upper(n->second));
        } else {
            out = {to_upper(m->second.first), "(", to_upper(n->second), ","};
            auto inner = self(self, m->second.second);
            out.insert(out.end(), inner.begin(), inner.end());
            out.push_back(")");
        }
        rendering.erase(a.value);
        return out;
    };
    auto slot = [&](const std::optional<detail::LfParser::Arg> &a) {
        return a ? entity(entity, *a) : std::vector<std::string>{"NONE"};
    };

    std::vector<std::string> out;
    std::set<std::string> visited;
    std::optional<std::string> cur = roots.front();
    while (cur) {
        if (!visited.insert(*cur).second)
            throw ValidationError("cyclic ccomp chain");
        auto it = events.find(*cur);
        if (it == events.end())
            throw ValidationError("ccomp refers to x _ " + *cur + " which has no event predicate");
        const Event &e = it->second;
        if (!out.empty())
            out.emplace_back(concat);
        out.push_back(to_upper(e.pred));
        out.push_back("(");
        for (const auto *a : {&e.agent, &e.theme, &e.recipient}) {
            if (a != &e.agent)
                out.push_back(",");
            auto toks = slot(*a);
            out.insert(out.end(), toks.begin(), toks.end());
        }
        out.push_back(")");
        cur = e.ccomp;
    }
    if (visited.size() != events.size())
        throw ValidationError("logical form has events outside the ccomp chain");
    return join_tokens(out);
}

struct CogsRow {
    std::size_t line = 0;
    std::string source;
    std::string logical_form;
    std::string generalization_type;
    std::string target;
};

struct CogsImport {
    std::vector<CogsRow> rows;
    std::vector<std::pair<std::size_t, std::string>> failures; // (line, message)
};

/// Reads a COGS TSV (source, logical_form, generalization_type) and converts
/// every row; rows that fail are reported, not dropped silently.
inline CogsImport import_cogs_tsv(std::istream &in) {
    CogsImport out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const auto tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos)
                break;
            start = tab + 1;
        }
        if (cols.size() < 2 || cols.size() > 3) {
            out.failures.emplace_back(n, "expected 2 or 3 tab-separated columns, found " + std::to_string(cols.size()));
            continue;
        }
        CogsRow row{n, cols[0], cols[1], cols.size() > 2 ? cols[2] : std::string(), {}};
        try {
            row.target = convert_cogs_logical_form(row.logical_form);
            out.rows.push_back(std::move(row));
        } catch (const ProbeError &e) {
            out.failures.emplace_back(n, e.what());
        }
    }
    return out;
}

inline CogsImport import_cogs_tsv_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ProbeError("cannot read " + path);
    return import_cogs_tsv(in);
}

} // namespace absprobe
