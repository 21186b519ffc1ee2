#pragma once

// Scoring and analysis: exact match, corpus BLEU, transfer gains, perplexity,
// per-head DPC attribution and head selection, MoA, learning-curve phases,
// checkpoint selection and expectation verdicts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "absprobe/common.hpp"

namespace absprobe {

// ---------------------------------------------------------------------------
// Exact match and BLEU

struct Prediction {
    std::string id;
    std::string prediction;
};

struct ExactMatchResult {
    double accuracy = 0; // percentage
    std::size_t correct = 0;
    std::size_t total = 0;
    std::vector<std::string> missing_ids;
};

/// Compares after whitespace normalization (trim + collapse runs of spaces).
inline ExactMatchResult exact_match(const std::vector<Prediction> &predictions,
                                    const std::map<std::string, std::string> &golds) {
    std::map<std::string, std::string> pred;
    for (const auto &p : predictions)
        if (!pred.emplace(p.id, p.prediction).second)
            throw ValidationError("duplicate prediction id '" + p.id + "'");
    ExactMatchResult r;
    r.total = golds.size();
    for (const auto &[id, gold] : golds) {
        auto it = pred.find(id);
        if (it == pred.end()) {
            r.missing_ids.push_back(id);
            continue;
        }
        if (normalize_whitespace(it->second) == normalize_whitespace(gold))
            ++r.correct;
    }
    r.accuracy = r.total == 0 ? 0.0 : 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.total);
    return r;
}

struct BleuResult {
    double score = 0; // 0-100
    std::vector<double> precisions; // per n-gram order, percentages
    double brevity_penalty = 0;
    std::size_t hyp_len = 0;
    std::size_t ref_len = 0;
};

/// Corpus BLEU: uniform weights over 1..max_order, clipped counts, standard
/// brevity penalty, whitespace tokens, no smoothing.
inline BleuResult bleu(const std::vector<std::string> &hypotheses, const std::vector<std::string> &references,
                       int max_order = 4) {
    if (references.empty())
        throw ValidationError("BLEU needs a non-empty corpus");
    if (hypotheses.size() != references.size())
        throw ValidationError("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                              std::to_string(references.size()) + " references");
    std::vector<double> matches(static_cast<std::size_t>(max_order), 0), totals(static_cast<std::size_t>(max_order), 0);
    BleuResult r;
    for (std::size_t i = 0; i < references.size(); ++i) {
        const auto hyp = split_tokens(hypotheses[i]);
        const auto ref = split_tokens(references[i]);
        if (ref.empty())
            throw ValidationError("empty reference at position " + std::to_string(i));
        r.hyp_len += hyp.size();
        r.ref_len += ref.size();
        for (int n = 1; n <= max_order; ++n) {
            std::map<std::vector<std::string>, int> ref_counts;
            for (std::size_t k = 0; k + static_cast<std::size_t>(n) <= ref.size(); ++k)
                ++ref_counts[std::vector<std::string>(ref.begin() + static_cast<std::ptrdiff_t>(k),
                                                      ref.begin() + static_cast<std::ptrdiff_t>(k) + n)];
            std::map<std::vector<std::string>, int> hyp_counts;
            for (std::size_t k = 0; k + static_cast<std::size_t>(n) <= hyp.size(); ++k)
                ++hyp_counts[std::vector<std::string>(hyp.begin() + static_cast<std::ptrdiff_t>(k),
                                                      hyp.begin() + static_cast<std::ptrdiff_t>(k) + n)];
            for (const auto &[g, c] : hyp_counts) {
                auto it = ref_counts.find(g);
                matches[static_cast<std::size_t>(n - 1)] += std::min(c, it == ref_counts.end() ? 0 : it->second);
                totals[static_cast<std::size_t>(n - 1)] += c;
            }
        }
    }
    double log_sum = 0;
    bool zero = r.hyp_len == 0;
    for (std::size_t n = 0; n < matches.size(); ++n) {
        const double p = totals[n] > 0 ? matches[n] / totals[n] : 0.0;
        r.precisions.push_back(100.0 * p);
        if (p <= 0)
            zero = true;
        else
            log_sum += std::log(p);
    }
    if (r.hyp_len == 0) {
        r.brevity_penalty = 0;
    } else {
        r.brevity_penalty = r.hyp_len >= r.ref_len
                                ? 1.0
                                : std::exp(1.0 - static_cast<double>(r.ref_len) / static_cast<double>(r.hyp_len));
    }
    r.score = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / static_cast<double>(max_order));
    return r;
}

inline double transfer_gain(double score_pretrained, double score_control) { return score_pretrained - score_control; }

// ---------------------------------------------------------------------------
// Perplexity and DPC

struct LogProbRecord {
    std::string id;
    std::string condition = "baseline"; // "baseline" or "prune:<HeadId>"
    std::string eval_set = "test_B";    // transfer_B | test_B
    std::vector<double> token_logprobs;
    std::size_t n_tokens = 0;
};

inline void check_record(const LogProbRecord &r) {
    if (r.token_logprobs.empty() || r.n_tokens == 0)
        throw ValidationError("empty log-prob record for '" + r.id + "'");
    if (r.n_tokens != r.token_logprobs.size())
        throw ValidationError("record '" + r.id + "': n_tokens " + std::to_string(r.n_tokens) + " but " +
                              std::to_string(r.token_logprobs.size()) + " log-probs");
    for (double lp : r.token_logprobs)
        if (!(lp <= 0))
            throw ValidationError("record '" + r.id + "': log-prob must be <= 0");
}

/// exp of the negative mean token log-prob.
inline double perplexity(const LogProbRecord &r) {
    check_record(r);
    double sum = 0;
    for (double lp : r.token_logprobs)
        sum += lp;
    return std::exp(-sum / static_cast<double>(r.n_tokens));
}

enum class HeadBlock { enc, dec_self, dec_cross };

struct HeadId {
    HeadBlock block = HeadBlock::enc;
    int layer = 0;
    int head = 0;

    friend auto operator<=>(const HeadId &a, const HeadId &b) {
        return std::tie(a.block, a.layer, a.head) <=> std::tie(b.block, b.layer, b.head);
    }
    friend bool operator==(const HeadId &, const HeadId &) = default;
};

inline std::string to_string(HeadBlock b) {
    switch (b) {
    case HeadBlock::enc: return "enc";
    case HeadBlock::dec_self: return "dec_self";
    case HeadBlock::dec_cross: return "dec_cross";
    }
    return "enc";
}

inline std::string to_string(const HeadId &h) {
    return to_string(h.block) + ".L" + std::to_string(h.layer) + ".H" + std::to_string(h.head);
}

inline HeadId parse_head_id(std::string_view s) {
    auto fail = [&]() -> HeadId { throw ValidationError("invalid head id '" + std::string(s) + "'"); };
    const auto d1 = s.find(".L");
    const auto d2 = s.find(".H", d1 == std::string_view::npos ? 0 : d1 + 2);
    if (d1 == std::string_view::npos || d2 == std::string_view::npos)
        return fail();
    HeadId h;
    const auto block = s.substr(0, d1);
    if (block == "enc")
        h.block = HeadBlock::enc;
    else if (block == "dec_self")
        h.block = HeadBlock::dec_self;
    else if (block == "dec_cross")
        h.block = HeadBlock::dec_cross;
    else
        return fail();
    auto number = [&](std::string_view t, int &out) {
        if (t.empty() || t.size() > 6 || t.find_first_not_of("0123456789") != std::string_view::npos)
            fail();
        out = std::stoi(std::string(t));
    };
    number(s.substr(d1 + 2, d2 - d1 - 2), h.layer);
    number(s.substr(d2 + 2), h.head);
    return h;
}

/// Every head of an encoder-decoder with `layers` x `heads` per block.
inline std::vector<HeadId> all_head_ids(int layers = 12, int heads = 12, bool encoder_decoder = true) {
    std::vector<HeadId> out;
    const std::vector<HeadBlock> blocks = encoder_decoder
                                              ? std::vector<HeadBlock>{HeadBlock::enc, HeadBlock::dec_self, HeadBlock::dec_cross}
                                              : std::vector<HeadBlock>{HeadBlock::enc};
    for (auto b : blocks)
        for (int l = 0; l < layers; ++l)
            for (int h = 0; h < heads; ++h)
                out.push_back({b, l, h});
    return out;
}

struct DpcRow {
    HeadId head;
    double delta_test = 0;
    double delta_transfer = 0;
    double dpc = 0;
    std::size_t rank = 0; // 1-based
};

struct DpcReport {
    std::vector<DpcRow> rows; // ordered by rank
};

inline constexpr std::string_view kPrunePrefix = "prune:";

namespace detail {

using PplTable = std::map<std::string, std::map<std::string, double>>; // eval_set -> id -> ppl

inline void add_ppl(PplTable &t, const LogProbRecord &r, const std::string &what) {
    if (r.eval_set != "test_B" && r.eval_set != "transfer_B")
        throw ValidationError(what + ": eval_set must be test_B or transfer_B, got '" + r.eval_set + "'");
    if (!t[r.eval_set].emplace(r.id, perplexity(r)).second)
        throw ValidationError(what + ": duplicate record for id '" + r.id + "' on " + r.eval_set);
}

inline std::string list_ids(const std::vector<std::string> &ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i)
        out += (i ? ", " : "") + ids[i];
    if (ids.size() > 20)
        out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

/// Mean of per-example differences, summed in id order.
inline double mean_delta(const std::map<std::string, double> &base, const std::map<std::string, double> &pruned,
                         const std::string &what) {
    std::vector<std::string> missing, extra;
    for (const auto &[id, _] : base)
        if (!pruned.count(id))
            missing.push_back(id);
    for (const auto &[id, _] : pruned)
        if (!base.count(id))
            extra.push_back(id);
    if (!missing.empty() || !extra.empty())
        throw ValidationError(what + ": id mismatch with baseline; missing ids: [" + list_ids(missing) +
                              "]; unexpected ids: [" + list_ids(extra) + "]");
    if (base.empty())
        throw ValidationError(what + ": no examples");
    double sum = 0;
    for (const auto &[id, b] : base)
        sum += pruned.at(id) - b;
    return sum / static_cast<double>(base.size());
}

} // namespace detail

/// Ranks rows by dpc descending, ties by head order.
inline void rank_rows(std::vector<DpcRow> &rows) {
    std::sort(rows.begin(), rows.end(), [](const DpcRow &a, const DpcRow &b) {
        if (a.dpc != b.dpc)
            return a.dpc > b.dpc;
        return a.head < b.head;
    });
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i].rank = i + 1;
}

inline DpcReport dpc_report(const std::vector<LogProbRecord> &records) {
    detail::PplTable base;
    std::map<HeadId, detail::PplTable> pruned;
    for (const auto &r : records) {
        if (r.condition == "baseline") {
            detail::add_ppl(base, r, "baseline");
        } else if (r.condition.starts_with(kPrunePrefix)) {
            const auto h = parse_head_id(std::string_view(r.condition).substr(kPrunePrefix.size()));
            detail::add_ppl(pruned[h], r, r.condition);
        } else {
            throw ValidationError("unknown condition '" + r.condition + "'");
        }
    }
    DpcReport rep;
    for (const auto &[h, t] : pruned) {
        DpcRow row;
        row.head = h;
        const auto name = "prune:" + to_string(h);
        auto get = [](const detail::PplTable &tab, const char *set) {
            auto it = tab.find(set);
            return it == tab.end() ? std::map<std::string, double>{} : it->second;
        };
        row.delta_test = detail::mean_delta(get(base, "test_B"), get(t, "test_B"), name + " on test_B");
        row.delta_transfer = detail::mean_delta(get(base, "transfer_B"), get(t, "transfer_B"), name + " on transfer_B");
        row.dpc = row.delta_test - row.delta_transfer;
        rep.rows.push_back(row);
    }
    rank_rows(rep.rows);
    return rep;
}

inline DpcReport dpc_report(const std::vector<LogProbRecord> &baseline, const std::vector<LogProbRecord> &pruned) {
    std::vector<LogProbRecord> all = baseline;
    all.insert(all.end(), pruned.begin(), pruned.end());
    for (const auto &r : baseline)
        if (r.condition != "baseline")
            throw ValidationError("baseline set contains condition '" + r.condition + "'");
    return dpc_report(all);
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string dpc_csv(const DpcReport &r) {
    std::string out = "head,delta_test,delta_transfer,dpc,rank\n";
    for (const auto &row : r.rows)
        out += to_string(row.head) + "," + format_double(row.delta_test) + "," + format_double(row.delta_transfer) +
               "," + format_double(row.dpc) + "," + std::to_string(row.rank) + "\n";
    return out;
}

inline std::string dpc_summary(const DpcReport &r, std::size_t top = 10) {
    std::ostringstream os;
    os << r.rows.size() << " heads ranked by DPC\n";
    for (std::size_t i = 0; i < r.rows.size() && i < top; ++i) {
        const auto &row = r.rows[i];
        char line[160];
        std::snprintf(line, sizeof line, "%4zu  %-16s dpc=%.4f  delta_test=%.4f  delta_transfer=%.4f\n", row.rank,
                      to_string(row.head).c_str(), row.dpc, row.delta_test, row.delta_transfer);
        os << line;
    }
    return os.str();
}

inline DpcReport read_dpc_csv(std::istream &in) {
    DpcReport r;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || (n == 1 && line.starts_with("head,")))
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 5)
            throw ValidationError("DPC CSV line " + std::to_string(n) + ": expected 5 fields");
        try {
            r.rows.push_back({parse_head_id(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]),
                              static_cast<std::size_t>(std::stoul(f[4]))});
        } catch (const std::logic_error &) {
            throw ValidationError("DPC CSV line " + std::to_string(n) + ": malformed number");
        }
    }
    std::sort(r.rows.begin(), r.rows.end(), [](const DpcRow &a, const DpcRow &b) { return a.rank < b.rank; });
    return r;
}

inline std::vector<HeadId> select_top_heads(const DpcReport &r, std::size_t k) {
    if (k > r.rows.size())
        throw ValidationError("k = " + std::to_string(k) + " exceeds the " + std::to_string(r.rows.size()) +
                              " ranked heads");
    std::vector<HeadId> out;
    for (std::size_t i = 0; i < k; ++i)
        out.push_back(r.rows[i].head);
    return out;
}

inline nlohmann::ordered_json heads_config(const std::vector<HeadId> &heads, const std::string &mode) {
    if (mode != "freeze" && mode != "prune")
        throw ValidationError("mode must be freeze or prune");
    nlohmann::ordered_json j;
    auto arr = nlohmann::ordered_json::array();
    for (const auto &h : heads)
        arr.push_back(to_string(h));
    j["heads"] = std::move(arr);
    j["mode"] = mode;
    return j;
}

// ---------------------------------------------------------------------------
// MoA, curves, verdicts

struct MoaInputs {
    double score_main = 0;     // A => B
    double score_control = 0;  // trained on B only
    double score_contrast = 0; // C => B
    double score_full = 0;     // trained on the unrestricted set
};

inline double moa(const MoaInputs &in) {
    if (!(in.score_full > 0))
        throw ValidationError("score_full must be positive");
    return (in.score_main - std::max(in.score_control, in.score_contrast)) / in.score_full;
}

struct CurvePoint {
    long long step = 0;
    double score = 0;
    friend bool operator==(const CurvePoint &, const CurvePoint &) = default;
};

using LearningCurve = std::vector<CurvePoint>;

inline void check_curve(const LearningCurve &c, const std::string &what = "curve") {
    if (c.empty())
        throw ValidationError(what + " is empty");
    for (std::size_t i = 1; i < c.size(); ++i)
        if (c[i].step <= c[i - 1].step)
            throw ValidationError(what + ": steps must be strictly increasing (step " + std::to_string(c[i].step) +
                                  " after " + std::to_string(c[i - 1].step) + ")");
}

/// Earliest step whose score reaches threshold * max(curve).
inline long long relative_performance_step(const LearningCurve &c, double threshold = 0.9,
                                           const std::string &what = "curve") {
    check_curve(c, what);
    double best = 0;
    for (const auto &p : c) {
        if (p.score < 0)
            throw ValidationError(what + ": scores must be non-negative");
        best = std::max(best, p.score);
    }
    if (!(best > 0))
        throw ValidationError(what + ": no relative performance defined for an all-zero curve");
    for (const auto &p : c)
        if (p.score >= threshold * best)
            return p.step;
    return c.back().step;
}

struct PhaseAnalysis {
    long long step_in_task = 0;
    long long step_cross_task = 0;
    long long phase_difference = 0;
};

inline PhaseAnalysis analyze_learning_curves(const LearningCurve &in_task, const LearningCurve &cross_task,
                                             double threshold = 0.9) {
    if (!(threshold > 0 && threshold <= 1))
        throw ValidationError("threshold must be in (0, 1]");
    PhaseAnalysis a;
    a.step_in_task = relative_performance_step(in_task, threshold, "in-task curve");
    a.step_cross_task = relative_performance_step(cross_task, threshold, "cross-task curve");
    a.phase_difference = a.step_cross_task - a.step_in_task;
    return a;
}

/// First step attaining the maximum dev score.
inline long long select_checkpoint(const LearningCurve &dev) {
    check_curve(dev, "dev curve");
    auto best = dev.front();
    for (const auto &p : dev)
        if (p.score > best.score)
            best = p;
    return best.step;
}

enum class Outcome { pass, fail, not_applicable };

inline std::string to_string(Outcome o) {
    switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::not_applicable: return "not_applicable";
    }
    return "fail";
}

struct VerdictThresholds {
    double min_gain = 10.0;
    double max_contrast_ratio = 0.25;
};

struct Verdict {
    double delta_main = 0;
    double delta_contrast = 0;
    Outcome expectation1 = Outcome::fail;
    Outcome expectation2 = Outcome::fail;
};

/// expectation1: delta_main >= min_gain. expectation2: delta_contrast <=
/// ratio * delta_main, reported not_applicable when delta_main <= 0.
inline Verdict expectation_verdict(double score_main, double score_control, double score_contrast,
                                   const VerdictThresholds &t = {}) {
    Verdict v;
    v.delta_main = transfer_gain(score_main, score_control);
    v.delta_contrast = transfer_gain(score_contrast, score_control);
    v.expectation1 = v.delta_main >= t.min_gain ? Outcome::pass : Outcome::fail;
    if (v.delta_main <= 0)
        v.expectation2 = Outcome::not_applicable;
    else
        v.expectation2 = v.delta_contrast <= t.max_contrast_ratio * v.delta_main ? Outcome::pass : Outcome::fail;
    return v;
}

inline nlohmann::ordered_json to_json(const Verdict &v) {
    nlohmann::ordered_json j;
    j["delta_main"] = v.delta_main;
    j["delta_contrast"] = v.delta_contrast;
    j["expectation1"] = to_string(v.expectation1);
    j["expectation2"] = to_string(v.expectation2);
    return j;
}

} // namespace absprobe
