#pragma once

// Brute-force reference implementations. Each one recomputes its quantity
// from raw cell values by direct enumeration, sharing no code with the
// library beyond the GridFunction container.

#include "mixweak/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle
{
    using mixweak::GridFunction;
    using mixweak::Index;

    /// Grid function on 2^J cells from a list of length 2^J.
    inline GridFunction grid(const std::vector<double>& v)
    {
        int J = 0;
        while ((std::size_t{1} << J) < v.size())
            ++J;
        GridFunction::Values values(static_cast<Index>(v.size()));
        std::copy(v.begin(), v.end(), values.begin());
        return {J, std::move(values)};
    }

    inline std::vector<double> cells(const GridFunction& f)
    {
        return {f.values().data(), f.values().data() + f.size()};
    }

    inline double naive_average(const std::vector<double>& v, int J, int level, Index index)
    {
        const Index width = Index{1} << (J - level);
        double s = 0.0;
        for (Index c = index * width; c < (index + 1) * width; ++c)
            s += v[static_cast<std::size_t>(c)];
        return s / static_cast<double>(width);
    }

    /// Max over every dyadic interval containing the cell of the naive average.
    inline std::vector<double> maximal(const std::vector<double>& v, int J)
    {
        std::vector<double> out(v.size(), 0.0);
        for (Index c = 0; c < static_cast<Index>(v.size()); ++c)
            for (int level = 0; level <= J; ++level)
                out[static_cast<std::size_t>(c)] =
                    std::max(out[static_cast<std::size_t>(c)], naive_average(v, J, level, c >> (J - level)));
        return out;
    }

    /// Max over every grid-aligned window [i, j) containing the cell.
    inline std::vector<double> window_maximal(const std::vector<double>& v)
    {
        const auto n = v.size();
        std::vector<double> out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
        {
            double s = 0.0;
            for (std::size_t j = i; j < n; ++j)
            {
                s += v[j];
                const double avg = s / static_cast<double>(j - i + 1);
                for (std::size_t c = i; c <= j; ++c)
                    out[c] = std::max(out[c], avg);
            }
        }
        return out;
    }

    template <class F>
    void for_each_interval(int J, F&& f)
    {
        for (int level = 0; level <= J; ++level)
            for (Index index = 0; index < (Index{1} << level); ++index)
                f(level, index);
    }

    inline double a1(const std::vector<double>& w, int J)
    {
        double best = 0.0;
        for_each_interval(J, [&](int level, Index index) {
            const Index width = Index{1} << (J - level);
            double lo = w[static_cast<std::size_t>(index * width)];
            for (Index c = index * width; c < (index + 1) * width; ++c)
                lo = std::min(lo, w[static_cast<std::size_t>(c)]);
            best = std::max(best, naive_average(w, J, level, index) / lo);
        });
        return best;
    }

    inline double ap(const std::vector<double>& w, int J, double p)
    {
        std::vector<double> dual(w.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            dual[i] = std::pow(w[i], -1.0 / (p - 1.0));
        double best = 0.0;
        for_each_interval(J, [&](int level, Index index) {
            best = std::max(best, naive_average(w, J, level, index)
                                      * std::pow(naive_average(dual, J, level, index), p - 1.0));
        });
        return best;
    }

    /// sup_Q (1/w(Q)) integral_Q M(w chi_Q), M over dyadic subintervals of Q.
    inline double ainf(const std::vector<double>& w, int J)
    {
        double best = 0.0;
        for_each_interval(J, [&](int level, Index index) {
            const Index width = Index{1} << (J - level);
            double mass = 0.0;
            double maxint = 0.0;
            for (Index c = index * width; c < (index + 1) * width; ++c)
            {
                mass += w[static_cast<std::size_t>(c)];
                double m = 0.0;
                for (int sub = level; sub <= J; ++sub)
                    m = std::max(m, naive_average(w, J, sub, c >> (J - sub)));
                maxint += m;
            }
            best = std::max(best, maxint / mass);
        });
        return best;
    }

    /// sup_t t mu{f > t}^(1/p): scans every candidate t = value of f from
    /// below by recomputing the level-set measure directly.
    inline double weak(const std::vector<double>& f, const std::vector<double>& mu, int J, double p = 1.0)
    {
        const double h = std::ldexp(1.0, -J);
        double best = 0.0;
        for (double t : f)
        {
            double m = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (f[i] >= t)
                    m += mu[i] * h;
            best = std::max(best, t * std::pow(m, 1.0 / p));
        }
        return best;
    }

    /// Midpoint rule for p * integral_0^top mu{f > t}^(1/p) dt with n steps.
    inline double lorentz_p1_quadrature(const std::vector<double>& f, const std::vector<double>& mu, int J, double p,
                                        double top, long n)
    {
        const double h = std::ldexp(1.0, -J);
        const double dt = top / static_cast<double>(n);
        double total = 0.0;
        for (long k = 0; k < n; ++k)
        {
            const double t = (static_cast<double>(k) + 0.5) * dt;
            double m = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (f[i] > t)
                    m += mu[i] * h;
            total += std::pow(m, 1.0 / p) * dt;
        }
        return p * total;
    }

    /// Adaptive Simpson quadrature.
    inline double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 40)
    {
        const std::function<double(double, double, double, double, double, double, int)> rec =
            [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) -> double {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid);
            const double rm = 0.5 * (mid + hi);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
            const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
                return left + right + (left + right - whole) / 15.0;
            return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
        };
        const double fa = f(a);
        const double fb = f(b);
        const double fm = f(0.5 * (a + b));
        return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), depth);
    }

    /// Average of |x - c|^(-alpha) over [a, b) by quadrature after the
    /// substitution |x - c| = s^m, which removes the singularity at c.
    inline double power_average(double alpha, double c, double a, double b)
    {
        const double m = std::max(2.0, std::ceil(2.0 / (1.0 - alpha)));
        auto side = [&](double lo, double hi) {
            // integral over |x - c| in [lo, hi) of r^(-alpha) dr
            const double slo = std::pow(lo, 1.0 / m);
            const double shi = std::pow(hi, 1.0 / m);
            auto g = [&](double s) { return s <= 0.0 ? 0.0 : m * std::pow(s, m * (1.0 - alpha) - 1.0); };
            return simpson(g, slo, shi, 1e-15);
        };
        double total = 0.0;
        if (b <= c)
            total = side(c - b, c - a);
        else if (a >= c)
            total = side(a - c, b - c);
        else
            total = side(0.0, c - a) + side(0.0, b - c);
        return total / (b - a);
    }

    inline double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

    inline std::vector<double> random_positive(std::mt19937_64& rng, std::size_t n, double spread = 8.0)
    {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        std::vector<double> v(n);
        for (auto& x : v)
            x = std::exp(spread * (d(rng) - 0.5));
        return v;
    }
}
