#pragma once

#include "mixweak/dyadic.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mixweak
{
    /// A function on [0,1) described independently of the grid, so the same
    /// function can be sampled at several resolutions.
    struct FunctionSpec
    {
        enum class Kind
        {
            indicator,    // chi_[a, b)
            step,         // values on pieces split at breakpoints
            random_step,  // 2^level equal pieces with seeded random values
            point_mass,   // (1 / width) chi_[center, center + width)
        };

        Kind kind = Kind::indicator;
        double a = 0.0;
        double b = 1.0;
        std::vector<double> values;
        std::vector<double> breakpoints;
        std::uint64_t seed = 0;
        int level = 6;
        double zero_fraction = 0.25;

        static FunctionSpec indicator(double a, double b);
        static FunctionSpec step(std::vector<double> values, std::vector<double> breakpoints = {});
        static FunctionSpec random_step(std::uint64_t seed, int level, double zero_fraction = 0.25);
        static FunctionSpec point_mass(double center, double width);

        std::string label() const;
    };

    std::string to_string(FunctionSpec::Kind kind);

    /// Exact cell averages at resolution J.
    GridFunction make_function(const FunctionSpec& spec, int resolution);

    /// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
    inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

    /// Independent cell values: zero with probability zero_fraction,
    /// otherwise exponentially distributed.
    GridFunction random_cells(int resolution, std::uint64_t seed, double zero_fraction = 0.25);

    /// A seeded mix of random steps, indicators and point masses whose
    /// breakpoints all lie on the level-`level` dyadic grid.
    std::vector<FunctionSpec> random_corpus(std::uint64_t seed, std::size_t count, int level = 8);
}
