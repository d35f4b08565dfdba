#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mixweak
{
    using Index = std::ptrdiff_t;

    /// Dimension of the underlying space. Only the line is supported; the
    /// constant is kept so that formulas read with their 2^n factors.
    inline constexpr int kDimension = 1;
    inline constexpr double kTwoPowN = 2.0;

    /// Largest supported resolution. 2^30 cells is far beyond desk scale but
    /// keeps every index comfortably inside 64 bits.
    inline constexpr int kMaxResolution = 30;

    //------------------//
    // Dyadic intervals //
    //------------------//

    /// The interval [index * 2^-level, (index + 1) * 2^-level) inside [0, 1).
    /// Ordering is (level, index), which is the canonical order used for
    /// every family the library emits.
    struct DyadicInterval
    {
        int level = 0;
        std::int64_t index = 0;

        constexpr DyadicInterval() = default;
        constexpr DyadicInterval(int lvl, std::int64_t idx) : level(lvl), index(idx)
        {
            if (lvl < 0 || lvl > kMaxResolution)
                throw std::invalid_argument("DyadicInterval: level out of range");
            if (idx < 0 || idx >= (std::int64_t{1} << lvl))
                throw std::invalid_argument("DyadicInterval: index out of range for level");
        }

        static constexpr DyadicInterval root() { return {}; }

        constexpr bool is_root() const { return level == 0; }

        constexpr DyadicInterval parent() const
        {
            if (level == 0)
                throw std::logic_error("DyadicInterval: the root has no parent");
            return {level - 1, index >> 1};
        }

        constexpr DyadicInterval left_child() const { return {level + 1, index << 1}; }
        constexpr DyadicInterval right_child() const { return {level + 1, (index << 1) | 1}; }

        /// Ancestor at a coarser level (level <= this->level).
        constexpr DyadicInterval ancestor(int lvl) const
        {
            if (lvl > level || lvl < 0)
                throw std::invalid_argument("DyadicInterval: ancestor level out of range");
            return {lvl, index >> (level - lvl)};
        }

        double length() const { return std::ldexp(1.0, -level); }
        double left() const { return std::ldexp(static_cast<double>(index), -level); }
        double right() const { return std::ldexp(static_cast<double>(index + 1), -level); }

        /// Non-strict containment: other is a subset of *this.
        constexpr bool contains(const DyadicInterval& other) const
        {
            return other.level >= level && (other.index >> (other.level - level)) == index;
        }

        constexpr bool strictly_contains(const DyadicInterval& other) const
        {
            return other.level > level && contains(other);
        }

        /// Half-open range [first, last) of level-J cells covered by the interval.
        std::pair<Index, Index> cells(int resolution) const
        {
            if (level > resolution)
                throw std::invalid_argument("DyadicInterval: finer than the grid resolution");
            const int shift = resolution - level;
            return {static_cast<Index>(index << shift), static_cast<Index>((index + 1) << shift)};
        }

        /// Position in the heap layout of the full tree (root = 0).
        constexpr std::int64_t node_id() const { return ((std::int64_t{1} << level) - 1) + index; }

        static constexpr DyadicInterval from_node_id(std::int64_t id)
        {
            int lvl = 0;
            while (((std::int64_t{1} << (lvl + 1)) - 1) <= id)
                ++lvl;
            return {lvl, id - ((std::int64_t{1} << lvl) - 1)};
        }

        friend constexpr auto operator<=>(const DyadicInterval&, const DyadicInterval&) = default;
    };

    /// Number of nodes in the dyadic tree with levels 0..resolution.
    constexpr std::int64_t tree_size(int resolution) { return (std::int64_t{2} << resolution) - 1; }

    //----------------//
    // Grid functions //
    //----------------//

    namespace detail
    {
        template <class Scalar>
        struct NeumaierSum
        {
            Scalar sum{0};
            Scalar comp{0};

            void add(Scalar x)
            {
                const Scalar t = sum + x;
                if (std::abs(sum) >= std::abs(x))
                    comp += (sum - t) + x;
                else
                    comp += (x - t) + sum;
                sum = t;
            }

            Scalar value() const { return sum + comp; }
        };

        inline Index cells_for(int resolution)
        {
            if (resolution < 0 || resolution > kMaxResolution)
                throw std::invalid_argument("grid resolution out of range: " + std::to_string(resolution));
            return Index{1} << resolution;
        }
    }

    /// Values on the 2^J cells of [0,1), possibly signed. Used for operator
    /// outputs that are not positive (Haar multipliers).
    template <class Scalar>
    class BasicSignedGrid
    {
    public:
        using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

        BasicSignedGrid(int resolution, Values values) : resolution_(resolution), values_(std::move(values))
        {
            if (values_.size() != detail::cells_for(resolution))
                throw std::invalid_argument("signed grid: value count does not match 2^J");
            if (!values_.isFinite().all())
                throw std::invalid_argument("signed grid: values must be finite");
        }

        int resolution() const { return resolution_; }
        Index size() const { return values_.size(); }
        const Values& values() const { return values_; }
        Scalar operator[](Index cell) const { return values_[cell]; }

    private:
        int resolution_;
        Values values_;
    };

    /// A nonnegative piecewise-constant function at resolution 2^-J.
    ///
    /// Construction builds a pyramid of dyadic averages (each level is the
    /// exact midpoint average of the finer one, so parent = (left + right) / 2
    /// holds bit for bit) and a compensated prefix integral for arbitrary
    /// real endpoints. Both make every average query O(1).
    template <class Scalar>
    class BasicGridFunction
    {
    public:
        using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

        BasicGridFunction(int resolution, Values values) : resolution_(resolution), values_(std::move(values))
        {
            const Index n = detail::cells_for(resolution);
            if (values_.size() != n)
                throw std::invalid_argument("grid function: expected " + std::to_string(n) + " values, got "
                                            + std::to_string(values_.size()));
            for (Index i = 0; i < n; ++i)
            {
                if (!std::isfinite(static_cast<double>(values_[i])) || values_[i] < Scalar(0))
                    throw std::invalid_argument("grid function: value at cell " + std::to_string(i)
                                                + " is negative or not finite");
            }
            build_pyramid();
            build_prefix();
        }

        static BasicGridFunction constant(int resolution, Scalar c)
        {
            return {resolution, Values::Constant(detail::cells_for(resolution), c)};
        }

        int resolution() const { return resolution_; }
        Index size() const { return values_.size(); }
        Scalar cell_width() const { return std::ldexp(Scalar(1), -resolution_); }
        const Values& values() const { return values_; }
        Scalar operator[](Index cell) const { return values_[cell]; }

        /// Averages of all dyadic intervals of one level, ordered by index.
        const Values& level_averages(int level) const
        {
            check_level(level);
            return pyramid_[static_cast<std::size_t>(level)];
        }

        Scalar average(const DyadicInterval& I) const
        {
            check_level(I.level);
            return pyramid_[static_cast<std::size_t>(I.level)][static_cast<Index>(I.index)];
        }

        /// Integral over [a, b) with real endpoints, f taken as zero outside [0, 1).
        Scalar integral(Scalar a, Scalar b) const
        {
            if (!(a <= b))
                throw std::invalid_argument("grid function: integral bounds reversed");
            return antiderivative(b) - antiderivative(a);
        }

        Scalar total() const { return pyramid_[0][0]; }

        Scalar max_value() const { return values_.maxCoeff(); }
        Scalar min_value() const { return values_.minCoeff(); }

    private:
        void check_level(int level) const
        {
            if (level < 0 || level > resolution_)
                throw std::invalid_argument("grid function: interval level " + std::to_string(level)
                                            + " exceeds resolution " + std::to_string(resolution_));
        }

        void build_pyramid()
        {
            pyramid_.resize(static_cast<std::size_t>(resolution_) + 1);
            pyramid_.back() = values_;
            for (int level = resolution_ - 1; level >= 0; --level)
            {
                const Values& fine = pyramid_[static_cast<std::size_t>(level) + 1];
                Values coarse(fine.size() / 2);
                for (Index i = 0; i < coarse.size(); ++i)
                    coarse[i] = (fine[2 * i] + fine[2 * i + 1]) / Scalar(2);
                pyramid_[static_cast<std::size_t>(level)] = std::move(coarse);
            }
        }

        void build_prefix()
        {
            const Scalar h = cell_width();
            prefix_.resize(static_cast<std::size_t>(values_.size()) + 1);
            detail::NeumaierSum<Scalar> acc;
            prefix_[0] = Scalar(0);
            for (Index i = 0; i < values_.size(); ++i)
            {
                acc.add(values_[i] * h);
                prefix_[static_cast<std::size_t>(i) + 1] = acc.value();
            }
        }

        Scalar antiderivative(Scalar x) const
        {
            if (x <= Scalar(0))
                return Scalar(0);
            if (x >= Scalar(1))
                return prefix_.back();
            const Scalar scaled = std::ldexp(x, resolution_);
            const auto cell = static_cast<Index>(std::floor(scaled));
            const Scalar frac = scaled - static_cast<Scalar>(cell);
            return prefix_[static_cast<std::size_t>(cell)] + frac * values_[cell] * cell_width();
        }

        int resolution_;
        Values values_;
        std::vector<Values> pyramid_;
        std::vector<Scalar> prefix_;
    };

    using GridFunction = BasicGridFunction<double>;
    using SignedGrid = BasicSignedGrid<double>;

    //------------------//
    // Free functions   //
    //------------------//

    template <class Scalar>
    Scalar average(const BasicGridFunction<Scalar>& f, const DyadicInterval& I)
    {
        return f.average(I);
    }

    /// Weighted measure of a set of level-J cells: sum of w(cell) * 2^-J.
    template <class Scalar>
    Scalar measure(const BasicGridFunction<Scalar>& w, std::span<const Index> cells)
    {
        std::vector<bool> seen(static_cast<std::size_t>(w.size()), false);
        detail::NeumaierSum<Scalar> acc;
        for (Index c : cells)
        {
            if (c < 0 || c >= w.size())
                throw std::invalid_argument("measure: cell " + std::to_string(c) + " outside the grid");
            if (seen[static_cast<std::size_t>(c)])
                throw std::invalid_argument("measure: cell " + std::to_string(c) + " listed twice");
            seen[static_cast<std::size_t>(c)] = true;
            acc.add(w[c]);
        }
        return acc.value() * w.cell_width();
    }

    /// Weighted measure of the cells selected by a mask.
    template <class Scalar>
    Scalar measure(const BasicGridFunction<Scalar>& w, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask)
    {
        if (mask.size() != w.size())
            throw std::invalid_argument("measure: mask size does not match the grid");
        detail::NeumaierSum<Scalar> acc;
        for (Index i = 0; i < w.size(); ++i)
            if (mask[i])
                acc.add(w[i]);
        return acc.value() * w.cell_width();
    }

    /// Weighted measure of a dyadic interval, w(I).
    template <class Scalar>
    Scalar measure(const BasicGridFunction<Scalar>& w, const DyadicInterval& I)
    {
        return w.average(I) * static_cast<Scalar>(I.length());
    }

    enum class CombineOp
    {
        product,
        quotient,
    };

    namespace detail
    {
        template <class Scalar>
        void require_same_grid(const BasicGridFunction<Scalar>& f, const BasicGridFunction<Scalar>& g)
        {
            if (f.resolution() != g.resolution())
                throw std::invalid_argument("grid functions have different resolutions");
        }
    }

    template <class Scalar>
    BasicGridFunction<Scalar> pointwise_combine(const BasicGridFunction<Scalar>& f,
                                                const BasicGridFunction<Scalar>& g,
                                                CombineOp op)
    {
        detail::require_same_grid(f, g);
        if (op == CombineOp::product)
            return {f.resolution(), f.values() * g.values()};
        for (Index i = 0; i < g.size(); ++i)
            if (!(g[i] > Scalar(0)))
                throw std::domain_error("quotient: divisor vanishes on cell " + std::to_string(i) + " of 2^"
                                        + std::to_string(g.resolution()));
        return {f.resolution(), f.values() / g.values()};
    }

    template <class Scalar>
    BasicGridFunction<Scalar> product(const BasicGridFunction<Scalar>& f, const BasicGridFunction<Scalar>& g)
    {
        return pointwise_combine(f, g, CombineOp::product);
    }

    template <class Scalar>
    BasicGridFunction<Scalar> quotient(const BasicGridFunction<Scalar>& f, const BasicGridFunction<Scalar>& g)
    {
        return pointwise_combine(f, g, CombineOp::quotient);
    }

    /// Cellwise f^exponent. Zero cells raised to a negative power are rejected.
    template <class Scalar>
    BasicGridFunction<Scalar> power(const BasicGridFunction<Scalar>& f, Scalar exponent)
    {
        if (!std::isfinite(static_cast<double>(exponent)))
            throw std::invalid_argument("power: exponent must be finite");
        if (exponent < Scalar(0))
            for (Index i = 0; i < f.size(); ++i)
                if (f[i] == Scalar(0))
                    throw std::domain_error("power: negative exponent of a zero value on cell " + std::to_string(i));
        return {f.resolution(), f.values().pow(exponent)};
    }

    template <class Scalar>
    BasicGridFunction<Scalar> scaled(const BasicGridFunction<Scalar>& f, Scalar c)
    {
        return {f.resolution(), f.values() * c};
    }

    template <class Scalar>
    BasicGridFunction<Scalar> abs(const BasicSignedGrid<Scalar>& f)
    {
        return {f.resolution(), f.values().abs()};
    }

    template <class Scalar>
    BasicSignedGrid<Scalar> to_signed(const BasicGridFunction<Scalar>& f)
    {
        return {f.resolution(), f.values()};
    }

    /// Integral of f over [0, 1).
    template <class Scalar>
    Scalar integral(const BasicGridFunction<Scalar>& f)
    {
        return f.total();
    }

    inline std::string to_string(const DyadicInterval& I)
    {
        return "[" + std::to_string(I.index) + "/2^" + std::to_string(I.level) + ", " + std::to_string(I.index + 1)
               + "/2^" + std::to_string(I.level) + ")";
    }
}
