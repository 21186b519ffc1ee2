#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace absprobe {

/// Base class for every error raised by the toolkit.
class ProbeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed textual input (logical forms, expressions, chain targets).
/// `offset` is the character offset of the offending token.
class ParseError : public ProbeError {
  public:
    ParseError(const std::string &what, std::size_t offset)
        : ProbeError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

  private:
    std::size_t offset_;
};

/// Inputs that are well-formed but violate a documented contract.
class ValidationError : public ProbeError {
  public:
    using ProbeError::ProbeError;
};

/// On-disk data that disagrees with its manifest or cannot be decoded.
class IntegrityError : public ProbeError {
  public:
    using ProbeError::ProbeError;
};

// Whitespace is the only token delimiter across the toolkit.
inline std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
            ++j;
        if (j > i)
            out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string join_tokens(const std::vector<std::string> &tokens, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i)
            out += sep;
        out += tokens[i];
    }
    return out;
}

inline std::size_t count_tokens(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c));
        if (!space && !in_token)
            ++n;
        in_token = !space;
    }
    return n;
}

inline std::string normalize_whitespace(std::string_view text) { return join_tokens(split_tokens(text)); }

inline std::string to_upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

inline std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::string capitalize(std::string s) {
    if (!s.empty())
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

inline bool has_whitespace(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Per-example seed: a pure function of (global seed, stream name, index) so
/// parallel generation is independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream, std::uint64_t index) {
    return mix64(mix64(global_seed ^ hash_string(stream)) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Portable draws on top of mt19937_64. The standard distributions are
// implementation-defined, which would make datasets differ across toolchains.
using Rng = std::mt19937_64;

inline std::uint64_t uniform_index(Rng &rng, std::uint64_t n) {
    if (n == 0)
        throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool bernoulli(Rng &rng, double p) { return uniform01(rng) < p; }

template <class Weights> std::size_t weighted_index(Rng &rng, const Weights &weights) {
    double total = 0;
    for (double w : weights)
        total += w;
    if (!(total > 0))
        throw std::invalid_argument("weighted_index: weights sum to zero");
    const double r = uniform01(rng) * total;
    double acc = 0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0))
            continue;
        acc += weights[i];
        last = i;
        if (r < acc)
            return i;
    }
    return last;
}

template <class T> void shuffle_in_place(std::vector<T> &v, Rng &rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

} // namespace absprobe
