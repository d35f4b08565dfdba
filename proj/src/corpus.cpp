#include "mixweak/corpus.hpp"

#include "mixweak/format.hpp"
#include "mixweak/weights.hpp"

#include <cmath>
#include <stdexcept>

namespace mixweak
{
    namespace
    {
        /// Step function with value values[i] on [edges[i], edges[i+1]),
        /// edges running from 0 to 1. Empty pieces are dropped.
        GridFunction piecewise(int resolution, const std::vector<double>& edges, const std::vector<double>& values)
        {
            std::vector<double> kept_values;
            std::vector<double> breakpoints;
            for (std::size_t i = 0; i < values.size(); ++i)
            {
                if (!(edges[i + 1] > edges[i]))
                    continue;
                if (!kept_values.empty())
                    breakpoints.push_back(edges[i]);
                kept_values.push_back(values[i]);
            }
            if (kept_values.size() == 1)
                return GridFunction::constant(resolution, kept_values.front());
            return step_function(resolution, kept_values, breakpoints);
        }

        void require_unit_interval(double a, double b, const char* who)
        {
            if (!(0.0 <= a && a < b && b <= 1.0))
                throw std::invalid_argument(std::string(who) + ": need 0 <= a < b <= 1");
        }
    }

    FunctionSpec FunctionSpec::indicator(double a, double b)
    {
        require_unit_interval(a, b, "indicator");
        FunctionSpec s;
        s.kind = Kind::indicator;
        s.a = a;
        s.b = b;
        return s;
    }

    FunctionSpec FunctionSpec::step(std::vector<double> values, std::vector<double> breakpoints)
    {
        FunctionSpec s;
        s.kind = Kind::step;
        s.values = std::move(values);
        s.breakpoints = std::move(breakpoints);
        return s;
    }

    FunctionSpec FunctionSpec::random_step(std::uint64_t seed, int level, double zero_fraction)
    {
        if (level < 0 || level > 20)
            throw std::invalid_argument("random step: level must lie in [0, 20]");
        if (!(zero_fraction >= 0.0 && zero_fraction < 1.0))
            throw std::invalid_argument("random step: zero fraction must lie in [0, 1)");
        FunctionSpec s;
        s.kind = Kind::random_step;
        s.seed = seed;
        s.level = level;
        s.zero_fraction = zero_fraction;
        return s;
    }

    FunctionSpec FunctionSpec::point_mass(double center, double width)
    {
        require_unit_interval(center, center + width, "point mass");
        FunctionSpec s;
        s.kind = Kind::point_mass;
        s.a = center;
        s.b = center + width;
        return s;
    }

    std::string to_string(FunctionSpec::Kind kind)
    {
        switch (kind)
        {
        case FunctionSpec::Kind::indicator: return "indicator";
        case FunctionSpec::Kind::step: return "step";
        case FunctionSpec::Kind::random_step: return "random_step";
        case FunctionSpec::Kind::point_mass: return "point_mass";
        }
        return "unknown";
    }

    std::string FunctionSpec::label() const
    {
        switch (kind)
        {
        case Kind::indicator:
            return "indicator[" + format_short(a) + "," + format_short(b) + ")";
        case Kind::step:
            return "step" + std::to_string(values.size());
        case Kind::random_step:
            return "random_step(seed=" + std::to_string(seed) + ",level=" + std::to_string(level) + ")";
        case Kind::point_mass:
            return "point_mass[" + format_short(a) + "," + format_short(b) + ")";
        }
        return "unknown";
    }

    GridFunction make_function(const FunctionSpec& spec, int resolution)
    {
        switch (spec.kind)
        {
        case FunctionSpec::Kind::indicator:
            return piecewise(resolution, {0.0, spec.a, spec.b, 1.0}, {0.0, 1.0, 0.0});
        case FunctionSpec::Kind::point_mass:
            return piecewise(resolution, {0.0, spec.a, spec.b, 1.0}, {0.0, 1.0 / (spec.b - spec.a), 0.0});
        case FunctionSpec::Kind::step:
            return step_function(resolution, spec.values, spec.breakpoints);
        case FunctionSpec::Kind::random_step:
        {
            std::mt19937_64 rng(spec.seed);
            std::vector<double> values(std::size_t{1} << spec.level);
            for (auto& x : values)
            {
                const double gate = unit_uniform(rng);
                const double draw = unit_uniform(rng);
                x = gate < spec.zero_fraction ? 0.0 : -std::log1p(-draw);
            }
            return step_function(resolution, values);
        }
        }
        throw std::invalid_argument("function spec: unknown kind");
    }

    GridFunction random_cells(int resolution, std::uint64_t seed, double zero_fraction)
    {
        std::mt19937_64 rng(seed);
        GridFunction::Values values(detail::cells_for(resolution));
        for (Index i = 0; i < values.size(); ++i)
        {
            const double gate = unit_uniform(rng);
            const double draw = unit_uniform(rng);
            values[i] = gate < zero_fraction ? 0.0 : -std::log1p(-draw);
        }
        return {resolution, std::move(values)};
    }

    std::vector<FunctionSpec> random_corpus(std::uint64_t seed, std::size_t count, int level)
    {
        if (level < 1 || level > 20)
            throw std::invalid_argument("random corpus: level must lie in [1, 20]");
        std::mt19937_64 rng(seed);
        const auto cells = std::uint64_t{1} << level;
        const double h = std::ldexp(1.0, -level);
        auto cell = [&] { return static_cast<double>(rng() % cells); };

        std::vector<FunctionSpec> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
        {
            switch (i % 4)
            {
            case 0:
            case 1:
            {
                const int piece_level = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(level));
                out.push_back(FunctionSpec::random_step(rng(), piece_level));
                break;
            }
            case 2:
            {
                double lo = cell();
                double hi = cell();
                if (lo > hi)
                    std::swap(lo, hi);
                out.push_back(FunctionSpec::indicator(lo * h, (hi + 1.0) * h));
                break;
            }
            default:
            {
                const double width_cells = static_cast<double>(1 + rng() % 4);
                const double start = std::min(cell(), static_cast<double>(cells) - width_cells);
                out.push_back(FunctionSpec::point_mass(start * h, width_cells * h));
                break;
            }
            }
        }
        return out;
    }
}
