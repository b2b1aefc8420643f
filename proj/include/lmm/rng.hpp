#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace lmm {

// SplitMix64 finaliser; a bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stream key for a unit of work identified by (master seed, path...). Each path component is
// absorbed through splitmix64, so sibling streams are decorrelated and independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t c : path) {
        s = splitmix64(s ^ splitmix64(c + 0x632BE59BD9B4E019ull));
    }
    return s;
}

// mt19937_64 (bit-exact per the C++ standard) with distribution code that does not depend on the
// standard library implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() { return normal_(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal(); }

    std::mt19937_64 &engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace lmm
