#pragma once

#include <cstdint>
#include <random>

#include "numerics.hpp"

namespace blindcal {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Random source for one Monte Carlo stream.
 * Streams are keyed by (seed, trial, lane) so every trial draws the same
 * numbers whatever the thread layout.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    static Rng stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t lane = 0)
    {
        std::uint64_t h = splitmix64(seed);
        h = splitmix64(h ^ (trial + 0x632be59bd9b4e019ULL));
        h = splitmix64(h ^ (lane * 0xd1b54a32d192ed03ULL + 1));
        return Rng(h);
    }

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }

    double normal() { return norm_(eng_); }

    /// CN(0,1): real and imaginary parts each with variance 1/2.
    Complex cnormal()
    {
        double re = norm_(eng_), im = norm_(eng_);
        return {re * std::sqrt(0.5), im * std::sqrt(0.5)};
    }

    double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(eng_); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace blindcal
