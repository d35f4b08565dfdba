#pragma once

#include "mixweak/dyadic.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixweak
{
    //------------------//
    // Maximal functions //
    //------------------//

    /// Dyadic maximal function: on each cell, the largest average over the
    /// dyadic intervals containing it. One top-down pass over the pyramid,
    /// carrying the running maximum from parent to children.
    template <class Scalar>
    BasicGridFunction<Scalar> dyadic_maximal(const BasicGridFunction<Scalar>& f)
    {
        using Values = typename BasicGridFunction<Scalar>::Values;
        Values running = f.level_averages(0);
        for (int level = 1; level <= f.resolution(); ++level)
        {
            const Values& avg = f.level_averages(level);
            Values next(avg.size());
            for (Index i = 0; i < avg.size(); ++i)
                next[i] = std::max(running[i / 2], avg[i]);
            running = std::move(next);
        }
        return {f.resolution(), std::move(running)};
    }

    /// Maximal function restricted to dyadic subintervals of I, on the cells
    /// of I (in order).
    template <class Scalar>
    typename BasicGridFunction<Scalar>::Values local_maximal(const BasicGridFunction<Scalar>& f,
                                                             const DyadicInterval& I)
    {
        using Values = typename BasicGridFunction<Scalar>::Values;
        Values running = Values::Constant(1, f.average(I));
        for (int level = I.level + 1; level <= f.resolution(); ++level)
        {
            const Values& avg = f.level_averages(level);
            const Index offset = static_cast<Index>(I.index << (level - I.level));
            Values next(running.size() * 2);
            for (Index i = 0; i < next.size(); ++i)
                next[i] = std::max(running[i / 2], avg[offset + i]);
            running = std::move(next);
        }
        return running;
    }

    /// Upper model for the continuous maximal function: the maximum over three
    /// dyadic systems, the standard one and the ones translated by +1/3 and
    /// -1/3 of the scale at every level. Translated intervals that stick out of
    /// [0, 1) see f as zero outside. A cell receives the average of every
    /// interval of level <= J that overlaps it in positive length.
    template <class Scalar>
    BasicGridFunction<Scalar> shifted_maximal(const BasicGridFunction<Scalar>& f)
    {
        using Values = typename BasicGridFunction<Scalar>::Values;
        const int J = f.resolution();
        const Index n = f.size();
        Values out = dyadic_maximal(f).values();
        const Scalar third = Scalar(1) / Scalar(3);
        for (int level = 0; level <= J; ++level)
        {
            const Scalar len = std::ldexp(Scalar(1), -level);
            const std::int64_t count = std::int64_t{1} << level;
            for (Scalar shift : {third, -third})
            {
                for (std::int64_t j = -1; j <= count; ++j)
                {
                    const Scalar a = (static_cast<Scalar>(j) + shift) * len;
                    const Scalar b = a + len;
                    if (b <= Scalar(0) || a >= Scalar(1))
                        continue;
                    const Scalar avg = f.integral(std::max(a, Scalar(0)), std::min(b, Scalar(1))) / len;
                    const auto first = std::max<Index>(0, static_cast<Index>(std::floor(std::ldexp(a, J))));
                    const auto last = std::min<Index>(n, static_cast<Index>(std::ceil(std::ldexp(b, J))));
                    for (Index c = first; c < last; ++c)
                        out[c] = std::max(out[c], avg);
                }
            }
        }
        return {J, std::move(out)};
    }

    /// M_d(f v) / v, cellwise. v must be strictly positive.
    template <class Scalar>
    BasicGridFunction<Scalar> perturbed_maximal(const BasicGridFunction<Scalar>& f, const BasicGridFunction<Scalar>& v)
    {
        return quotient(dyadic_maximal(product(f, v)), v);
    }

    //-----------------//
    // Haar multipliers //
    //-----------------//

    /// Multipliers eps_I with |eps_I| <= 1 for every dyadic interval of level
    /// below the grid resolution, stored in heap order.
    template <class Scalar>
    class BasicSignPattern
    {
    public:
        using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

        explicit BasicSignPattern(int resolution)
            : resolution_(resolution), eps_(Values::Ones(node_count(resolution)))
        {
        }

        BasicSignPattern(int resolution, Values eps) : resolution_(resolution), eps_(std::move(eps))
        {
            if (eps_.size() != node_count(resolution))
                throw std::invalid_argument("sign pattern: expected 2^J - 1 multipliers");
            for (Index i = 0; i < eps_.size(); ++i)
                check_value(eps_[i], DyadicInterval::from_node_id(i));
        }

        /// Unspecified intervals default to +1.
        BasicSignPattern(int resolution, const std::map<DyadicInterval, Scalar>& eps) : BasicSignPattern(resolution)
        {
            for (const auto& [I, e] : eps)
            {
                if (I.level >= resolution)
                    throw std::invalid_argument("sign pattern: interval " + to_string(I)
                                                + " is not above the grid resolution");
                check_value(e, I);
                eps_[static_cast<Index>(I.node_id())] = e;
            }
        }

        static BasicSignPattern constant(int resolution, Scalar e)
        {
            return {resolution, Values::Constant(node_count(resolution), e)};
        }

        /// Independent random signs in {-1, +1}.
        static BasicSignPattern random_signs(int resolution, std::uint64_t seed)
        {
            std::mt19937_64 rng(seed);
            Values eps(node_count(resolution));
            for (Index i = 0; i < eps.size(); ++i)
                eps[i] = (rng() >> 63) ? Scalar(1) : Scalar(-1);
            return {resolution, std::move(eps)};
        }

        /// Independent multipliers uniform on [-1, 1].
        static BasicSignPattern random_uniform(int resolution, std::uint64_t seed)
        {
            std::mt19937_64 rng(seed);
            Values eps(node_count(resolution));
            for (Index i = 0; i < eps.size(); ++i)
            {
                const Scalar unit = static_cast<Scalar>(rng() >> 11) * std::ldexp(Scalar(1), -53);
                eps[i] = Scalar(2) * unit - Scalar(1);
            }
            return {resolution, std::move(eps)};
        }

        int resolution() const { return resolution_; }
        const Values& values() const { return eps_; }
        Scalar operator()(const DyadicInterval& I) const { return eps_[static_cast<Index>(I.node_id())]; }

    private:
        static Index node_count(int resolution) { return detail::cells_for(resolution) - 1; }

        static void check_value(Scalar e, const DyadicInterval& I)
        {
            if (!(std::abs(e) <= Scalar(1)))
                throw std::invalid_argument("sign pattern: |eps| > 1 on " + to_string(I));
        }

        int resolution_;
        Values eps_;
    };

    using SignPattern = BasicSignPattern<double>;

    /// Haar multiplier T f = <f>_[0,1) + sum_I eps_I <f, h_I> h_I over all
    /// dyadic I above the cell level, with h_I the L2-normalized Haar function.
    /// On a cell the sum telescopes along the chain of containing intervals:
    /// each step adds eps_I times the signed half-difference of the children.
    template <class Scalar>
    BasicSignedGrid<Scalar> haar_multiplier(const BasicSignedGrid<Scalar>& f, const BasicSignPattern<Scalar>& eps)
    {
        using Values = typename BasicSignedGrid<Scalar>::Values;
        const int J = f.resolution();
        if (eps.resolution() != J)
            throw std::invalid_argument("haar_multiplier: sign pattern resolution differs from the function's");

        std::vector<Values> pyramid(static_cast<std::size_t>(J) + 1);
        pyramid.back() = f.values();
        for (int level = J - 1; level >= 0; --level)
        {
            const Values& fine = pyramid[static_cast<std::size_t>(level) + 1];
            Values coarse(fine.size() / 2);
            for (Index i = 0; i < coarse.size(); ++i)
                coarse[i] = (fine[2 * i] + fine[2 * i + 1]) / Scalar(2);
            pyramid[static_cast<std::size_t>(level)] = std::move(coarse);
        }

        Values acc = pyramid[0];
        for (int level = 0; level < J; ++level)
        {
            const Values& avg = pyramid[static_cast<std::size_t>(level)];
            const Values& fine = pyramid[static_cast<std::size_t>(level) + 1];
            const auto base = static_cast<Index>((std::int64_t{1} << level) - 1);
            Values next(fine.size());
            for (Index i = 0; i < avg.size(); ++i)
            {
                const Scalar e = eps.values()[base + i];
                next[2 * i] = acc[i] + e * (fine[2 * i] - avg[i]);
                next[2 * i + 1] = acc[i] + e * (fine[2 * i + 1] - avg[i]);
            }
            acc = std::move(next);
        }
        return {J, std::move(acc)};
    }

    template <class Scalar>
    BasicSignedGrid<Scalar> haar_multiplier(const BasicGridFunction<Scalar>& f, const BasicSignPattern<Scalar>& eps)
    {
        return haar_multiplier(to_signed(f), eps);
    }

    //--------------------------------//
    // Vector-valued and multilinear  //
    //--------------------------------//

    namespace detail
    {
        template <class Scalar>
        void require_common_grid(std::span<const BasicGridFunction<Scalar>> fs, const char* who)
        {
            if (fs.empty())
                throw std::invalid_argument(std::string(who) + ": empty list of functions");
            for (const auto& f : fs)
                if (f.resolution() != fs.front().resolution())
                    throw std::invalid_argument(std::string(who) + ": functions have different resolutions");
        }

        template <class Scalar>
        BasicGridFunction<Scalar> lq_combine(std::span<const BasicGridFunction<Scalar>> fs, Scalar q)
        {
            using Values = typename BasicGridFunction<Scalar>::Values;
            Values acc = Values::Zero(fs.front().size());
            // Scale by the cellwise maximum so that large q does not overflow.
            Values peak = Values::Zero(fs.front().size());
            for (const auto& f : fs)
                peak = peak.max(f.values());
            for (const auto& f : fs)
                acc += (peak > Scalar(0)).select(f.values() / peak, Scalar(0)).pow(q);
            return {fs.front().resolution(), peak * acc.pow(Scalar(1) / q)};
        }
    }

    /// Cellwise l^q norm of the family {f_j}.
    template <class Scalar>
    BasicGridFunction<Scalar> lq_norm(std::span<const BasicGridFunction<Scalar>> fs, Scalar q)
    {
        detail::require_common_grid(fs, "lq_norm");
        if (!(q >= Scalar(1)))
            throw std::invalid_argument("lq_norm: q must be at least 1");
        return detail::lq_combine(fs, q);
    }

    /// Cellwise l^q norm of {M_d f_j}.
    template <class Scalar>
    BasicGridFunction<Scalar> vector_maximal(std::span<const BasicGridFunction<Scalar>> fs, Scalar q)
    {
        detail::require_common_grid(fs, "vector_maximal");
        if (!(q > Scalar(1)))
            throw std::invalid_argument("vector_maximal: q must exceed 1");
        std::vector<BasicGridFunction<Scalar>> maximal;
        maximal.reserve(fs.size());
        for (const auto& f : fs)
            maximal.push_back(dyadic_maximal(f));
        return detail::lq_combine(std::span<const BasicGridFunction<Scalar>>(maximal), q);
    }

    /// Cellwise product of M_d f_j.
    template <class Scalar>
    BasicGridFunction<Scalar> product_maximal(std::span<const BasicGridFunction<Scalar>> fs)
    {
        detail::require_common_grid(fs, "product_maximal");
        auto values = dyadic_maximal(fs.front()).values();
        for (std::size_t j = 1; j < fs.size(); ++j)
            values *= dyadic_maximal(fs[j]).values();
        return {fs.front().resolution(), std::move(values)};
    }
}
