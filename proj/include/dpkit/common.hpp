#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace dpkit {

// Vote value for a labeling function that declines to label a document.
inline constexpr int kAbstain = -1;

// Base error for everything the library throws on bad input or failed runs.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input, bad configuration or violated preconditions.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Parse failure in an input file; carries the 1-based line number when known.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Seeded generator with portable uniform/shuffle helpers. std:: distributions
// are implementation-defined, so everything that must be bit-reproducible
// goes through these instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Derives an independent stream seed from a base seed and a stage offset.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t offset) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (offset + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace dpkit
