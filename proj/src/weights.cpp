#include "mixweak/weights.hpp"

#include "mixweak/operators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

namespace mixweak
{
    namespace detail
    {
        struct CharacteristicCache
        {
            std::once_flag a1_once;
            std::once_flag ainf_once;
            double a1 = 0.0;
            double ainf = 0.0;

            std::mutex ap_mutex;
            std::map<double, double> ap;
        };

        namespace
        {
            /// Scale-invariant quantities are evaluated on w / sqrt(min * max)
            /// so that large or small powers stay inside double range.
            GridFunction normalized(const GridFunction& w)
            {
                const double centre = std::sqrt(w.min_value()) * std::sqrt(w.max_value());
                return scaled(w, 1.0 / centre);
            }

            /// Antiderivative of |x - c|^(-alpha), offset so that it vanishes at c.
            double power_antiderivative(double alpha, double c, double x)
            {
                const double beta = 1.0 - alpha;
                const double d = x - c;
                const double mag = std::pow(std::abs(d), beta) / beta;
                return d < 0 ? -mag : mag;
            }

            /// Integral of t^(-alpha) over [d, d + h) with d > 0, free of cancellation.
            double power_integral_positive(double alpha, double d, double h)
            {
                const double beta = 1.0 - alpha;
                return std::pow(d, beta) * std::expm1(beta * std::log1p(h / d)) / beta;
            }
        }
    }

    //-------------//
    // WeightSpec  //
    //-------------//

    WeightSpec WeightSpec::power(double alpha, double center)
    {
        WeightSpec s;
        s.kind = Kind::power;
        s.factors = {{alpha, center}};
        return s;
    }

    WeightSpec WeightSpec::product_of_powers(std::vector<PowerFactor> factors)
    {
        WeightSpec s;
        s.kind = Kind::product_of_powers;
        s.factors = std::move(factors);
        return s;
    }

    WeightSpec WeightSpec::step(std::vector<double> values, std::vector<double> breakpoints)
    {
        WeightSpec s;
        s.kind = Kind::step;
        s.values = std::move(values);
        s.breakpoints = std::move(breakpoints);
        return s;
    }

    WeightSpec WeightSpec::explicit_cells(std::vector<double> values)
    {
        WeightSpec s;
        s.kind = Kind::explicit_cells;
        s.values = std::move(values);
        return s;
    }

    double power_cell_average(double alpha, double center, double a, double b)
    {
        if (!(alpha < 1.0))
            throw std::invalid_argument("power weight: alpha must be below 1, got " + std::to_string(alpha));
        if (!(a < b))
            throw std::invalid_argument("power weight: empty cell");
        if (alpha == 0.0)
            return 1.0;
        const double h = b - a;
        double integral = 0.0;
        if (a > center)
            integral = detail::power_integral_positive(alpha, a - center, h);
        else if (b < center)
            integral = detail::power_integral_positive(alpha, center - b, h);
        else
            integral = detail::power_antiderivative(alpha, center, b) - detail::power_antiderivative(alpha, center, a);
        return integral / h;
    }

    GridFunction step_function(int resolution, std::span<const double> values, std::span<const double> breakpoints)
    {
        if (values.empty())
            throw std::invalid_argument("step function: no values");
        std::vector<double> edges;
        edges.reserve(values.size() + 1);
        edges.push_back(0.0);
        if (breakpoints.empty())
        {
            for (std::size_t i = 1; i < values.size(); ++i)
                edges.push_back(static_cast<double>(i) / static_cast<double>(values.size()));
        }
        else
        {
            if (breakpoints.size() + 1 != values.size())
                throw std::invalid_argument("step function: need one more value than breakpoints");
            for (double b : breakpoints)
            {
                if (!(b > edges.back() && b < 1.0))
                    throw std::invalid_argument("step function: breakpoints must increase strictly inside (0, 1)");
                edges.push_back(b);
            }
        }
        edges.push_back(1.0);

        const Index n = detail::cells_for(resolution);
        const double h = std::ldexp(1.0, -resolution);
        GridFunction::Values cells = GridFunction::Values::Zero(n);
        for (std::size_t piece = 0; piece < values.size(); ++piece)
        {
            const double lo = edges[piece];
            const double hi = edges[piece + 1];
            const auto first = static_cast<Index>(std::floor(lo / h));
            const auto last = std::min<Index>(n, static_cast<Index>(std::ceil(hi / h)));
            for (Index c = first; c < last; ++c)
            {
                const double overlap = std::min(hi, static_cast<double>(c + 1) * h) - std::max(lo, static_cast<double>(c) * h);
                if (overlap > 0)
                    cells[c] += values[piece] * (overlap / h);
            }
        }
        return {resolution, std::move(cells)};
    }

    //---------//
    // Weight  //
    //---------//

    Weight::Weight(GridFunction data) : data_(std::move(data)), cache_(std::make_shared<detail::CharacteristicCache>())
    {
        for (Index i = 0; i < data_.size(); ++i)
            if (!(data_[i] > 0.0))
                throw std::invalid_argument("weight: value on cell " + std::to_string(i) + " is not strictly positive");
    }

    double Weight::a1() const
    {
        std::call_once(cache_->a1_once, [this] { cache_->a1 = a1_constant(*this); });
        return cache_->a1;
    }

    double Weight::ainf() const
    {
        std::call_once(cache_->ainf_once, [this] { cache_->ainf = ainf_constant(*this); });
        return cache_->ainf;
    }

    double Weight::ap(double p) const
    {
        {
            std::lock_guard lock(cache_->ap_mutex);
            if (auto it = cache_->ap.find(p); it != cache_->ap.end())
                return it->second;
        }
        const double value = ap_constant(*this, p);
        std::lock_guard lock(cache_->ap_mutex);
        cache_->ap.emplace(p, value);
        return value;
    }

    Weight make_weight(const WeightSpec& spec, int resolution)
    {
        const Index n = detail::cells_for(resolution);
        const double h = std::ldexp(1.0, -resolution);
        switch (spec.kind)
        {
        case WeightSpec::Kind::power:
        case WeightSpec::Kind::product_of_powers:
        {
            if (spec.kind == WeightSpec::Kind::power && spec.factors.size() != 1)
                throw std::invalid_argument("power weight: exactly one factor expected");
            GridFunction::Values cells = GridFunction::Values::Ones(n);
            for (const auto& factor : spec.factors)
            {
                if (!(factor.center >= 0.0 && factor.center <= 1.0))
                    throw std::invalid_argument("power weight: center must lie in [0, 1]");
                for (Index c = 0; c < n; ++c)
                    cells[c] *= power_cell_average(factor.alpha, factor.center, static_cast<double>(c) * h,
                                                   static_cast<double>(c + 1) * h);
            }
            return Weight(GridFunction(resolution, std::move(cells)));
        }
        case WeightSpec::Kind::step:
            return Weight(step_function(resolution, spec.values, spec.breakpoints));
        case WeightSpec::Kind::explicit_cells:
        {
            if (static_cast<Index>(spec.values.size()) != n)
                throw std::invalid_argument("explicit weight: expected " + std::to_string(n) + " cell values");
            GridFunction::Values cells(n);
            std::copy(spec.values.begin(), spec.values.end(), cells.begin());
            return Weight(GridFunction(resolution, std::move(cells)));
        }
        }
        throw std::invalid_argument("weight spec: unknown kind");
    }

    //-----------------//
    // Characteristics //
    //-----------------//

    double a1_constant(const Weight& w)
    {
        const GridFunction& f = w.data();
        GridFunction::Values minima = f.values();
        double best = 1.0;
        for (int level = f.resolution(); level >= 0; --level)
        {
            const auto& avg = f.level_averages(level);
            best = std::max(best, (avg / minima).maxCoeff());
            if (level == 0)
                break;
            GridFunction::Values coarse(minima.size() / 2);
            for (Index i = 0; i < coarse.size(); ++i)
                coarse[i] = std::min(minima[2 * i], minima[2 * i + 1]);
            minima = std::move(coarse);
        }
        return best;
    }

    double ap_constant(const Weight& w, double p)
    {
        if (!(p > 1.0))
            throw std::invalid_argument("ap_constant: p must exceed 1, got " + std::to_string(p));
        const GridFunction base = detail::normalized(w.data());
        const GridFunction dual = power(base, -1.0 / (p - 1.0));
        double best = 1.0;
        for (int level = 0; level <= base.resolution(); ++level)
        {
            const auto value = base.level_averages(level) * dual.level_averages(level).pow(p - 1.0);
            best = std::max(best, value.maxCoeff());
        }
        return best;
    }

    double ainf_constant(const Weight& w)
    {
        const GridFunction& f = w.data();
        const int J = f.resolution();
        std::vector<double> running;
        std::vector<double> next;
        running.reserve(static_cast<std::size_t>(f.size()));
        next.reserve(static_cast<std::size_t>(f.size()));
        double best = 1.0;
        for (int level = 0; level <= J; ++level)
        {
            const auto& top = f.level_averages(level);
            for (Index q = 0; q < top.size(); ++q)
            {
                running.assign(1, top[q]);
                for (int fine = level + 1; fine <= J; ++fine)
                {
                    const auto& avg = f.level_averages(fine);
                    const Index offset = q << (fine - level);
                    next.resize(running.size() * 2);
                    for (std::size_t i = 0; i < next.size(); ++i)
                        next[i] = std::max(running[i / 2], avg[offset + static_cast<Index>(i)]);
                    running.swap(next);
                }
                detail::NeumaierSum<double> acc;
                for (double m : running)
                    acc.add(m);
                const double mean_maximal = acc.value() / static_cast<double>(running.size());
                best = std::max(best, mean_maximal / top[q]);
            }
        }
        return best;
    }

    double reverse_holder_exponent(const Weight& w, double tau)
    {
        if (!(tau > 0.0))
            throw std::invalid_argument("reverse_holder_exponent: tau must be positive");
        return 1.0 + 1.0 / (tau * w.ainf());
    }

    double measure_decay_exponent(const Weight& w, double tau)
    {
        if (!(tau > 0.0))
            throw std::invalid_argument("measure_decay_exponent: tau must be positive");
        return 1.0 / (1.0 + tau * w.ainf());
    }

    ReverseHolderReport check_reverse_holder(const Weight& w, double r)
    {
        if (!(r > 1.0))
            throw std::invalid_argument("check_reverse_holder: r must exceed 1");
        const GridFunction base = detail::normalized(w.data());
        const GridFunction raised = power(base, r);
        ReverseHolderReport report;
        report.worst_ratio = 0.0;
        for (int level = 0; level <= base.resolution(); ++level)
        {
            const auto ratio = raised.level_averages(level).pow(1.0 / r) / base.level_averages(level);
            Index where = 0;
            const double worst = ratio.maxCoeff(&where);
            if (worst > report.worst_ratio)
            {
                report.worst_ratio = worst;
                report.worst_interval = DyadicInterval(level, where);
            }
        }
        report.pass = report.worst_ratio <= 2.0;
        return report;
    }

    MeasureDecayReport check_measure_decay(const Weight& w, double epsilon)
    {
        if (!(epsilon > 0.0 && epsilon <= 1.0))
            throw std::invalid_argument("check_measure_decay: epsilon must lie in (0, 1]");
        const GridFunction& f = w.data();
        MeasureDecayReport report;
        std::vector<double> sorted;
        for (int level = 0; level <= f.resolution(); ++level)
        {
            for (std::int64_t q = 0; q < (std::int64_t{1} << level); ++q)
            {
                const DyadicInterval Q(level, q);
                const auto [first, last] = Q.cells(f.resolution());
                sorted.assign(f.values().begin() + first, f.values().begin() + last);
                std::sort(sorted.begin(), sorted.end(), std::greater<>());
                const double total = f.average(Q) * static_cast<double>(sorted.size());
                detail::NeumaierSum<double> acc;
                for (std::size_t m = 1; m <= sorted.size(); ++m)
                {
                    acc.add(sorted[m - 1]);
                    const double fraction = static_cast<double>(m) / static_cast<double>(sorted.size());
                    const double ratio = (acc.value() / total) / std::pow(fraction, epsilon);
                    if (ratio > report.worst_ratio)
                    {
                        report.worst_ratio = ratio;
                        report.worst_interval = Q;
                        report.worst_cells = static_cast<Index>(m);
                    }
                }
            }
        }
        report.pass = report.worst_ratio <= 2.0;
        return report;
    }

    std::vector<double> EmbeddingGrid::points() const
    {
        if (!(start > 1.0 && ratio > 1.0 && p_max >= start))
            throw std::invalid_argument("embedding grid: need start > 1, ratio > 1, p_max >= start");
        std::vector<double> pts;
        for (int k = 0;; ++k)
        {
            const double p = start * std::pow(ratio, k);
            if (p > p_max)
                break;
            pts.push_back(p);
        }
        return pts;
    }

    EmbeddingResult find_embedding_exponent(const Weight& w, double bound, const EmbeddingGrid& grid)
    {
        if (!(bound >= 1.0))
            throw std::invalid_argument("find_embedding_exponent: bound must be at least 1");
        const std::vector<double> pts = grid.points();
        EmbeddingResult result;
        result.exp_ainf = std::exp(w.ainf());

        const double at_max = w.ap(pts.back());
        if (at_max > bound)
        {
            result.ap_at_p = at_max;
            return result;
        }
        // Invariant: ap(pts[hi]) <= bound, and every index below lo fails.
        std::size_t lo = 0;
        std::size_t hi = pts.size() - 1;
        while (lo < hi)
        {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (w.ap(pts[mid]) <= bound)
                hi = mid;
            else
                lo = mid + 1;
        }
        result.p = pts[hi];
        result.ap_at_p = w.ap(pts[hi]);
        return result;
    }
}
