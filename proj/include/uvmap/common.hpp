#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>

namespace uvmap {

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

// Malformed input file (OBJ/PLY/checkpoint). Carries a line number when known.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Caller violated a precondition (bad k, empty set, shape mismatch, ...).
struct ArgumentError : std::runtime_error {
    explicit ArgumentError(const std::string& what) : std::runtime_error(what) {}
};

// Geometrically degenerate input (all points identical, zero-area everything).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf surfaced inside the differentiable kernel or a loss term.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Rng — seeded generator with a stable uniform mapping
// ---------------------------------------------------------------------------

// splitmix64-initialized xoshiro256** would also do; mt19937_64 is fine and
// the 53-bit mantissa mapping below keeps the stream independent of the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {
        // splitmix64 warmup so nearby seeds decorrelate
        for (int i = 0; i < 4; ++i) next();
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0,n)
    std::uint64_t integer(std::uint64_t n) { return n ? next() % n : 0; }

private:
    std::uint64_t state_;
};

}  // namespace uvmap
