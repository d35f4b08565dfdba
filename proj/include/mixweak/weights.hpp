#pragma once

#include "mixweak/dyadic.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace mixweak
{
    /// |x - center|^(-alpha). alpha < 1 keeps the function locally integrable;
    /// negative alpha gives the growing weights |x - center|^|alpha|.
    struct PowerFactor
    {
        double alpha = 0.0;
        double center = 0.0;
    };

    struct WeightSpec
    {
        enum class Kind
        {
            power,
            step,
            product_of_powers,
            explicit_cells,
        };

        Kind kind = Kind::power;
        std::vector<PowerFactor> factors;  // power: exactly one; product_of_powers: any number
        std::vector<double> breakpoints;   // step: interior breakpoints, strictly increasing in (0, 1)
        std::vector<double> values;        // step: one value per piece; explicit_cells: one per cell

        static WeightSpec power(double alpha, double center = 0.0);
        static WeightSpec product_of_powers(std::vector<PowerFactor> factors);
        /// Pieces of equal width when breakpoints is empty.
        static WeightSpec step(std::vector<double> values, std::vector<double> breakpoints = {});
        static WeightSpec explicit_cells(std::vector<double> values);
    };

    /// Exact average of |x - center|^(-alpha) over [a, b).
    double power_cell_average(double alpha, double center, double a, double b);

    /// Cell averages at resolution J of a step function with the given pieces.
    GridFunction step_function(int resolution, std::span<const double> values, std::span<const double> breakpoints = {});

    namespace detail
    {
        struct CharacteristicCache;
    }

    /// A strictly positive grid function together with lazily computed
    /// Muckenhoupt characteristics. Copies share the cache; each cached value
    /// is computed once and then only read.
    class Weight
    {
    public:
        explicit Weight(GridFunction data);

        const GridFunction& data() const { return data_; }
        int resolution() const { return data_.resolution(); }
        Index size() const { return data_.size(); }
        double operator[](Index cell) const { return data_[cell]; }

        double a1() const;
        double ainf() const;
        double ap(double p) const;

    private:
        GridFunction data_;
        std::shared_ptr<detail::CharacteristicCache> cache_;
    };

    Weight make_weight(const WeightSpec& spec, int resolution);

    //-----------------//
    // Characteristics //
    //-----------------//

    /// sup over dyadic I of <w>_I / min_I w.
    double a1_constant(const Weight& w);

    /// sup over dyadic I of <w>_I <w^(-1/(p-1))>_I^(p-1). Requires p > 1.
    double ap_constant(const Weight& w, double p);

    /// Fujii-Wilson characteristic: sup over dyadic Q of (1/w(Q)) * integral
    /// over Q of the maximal function of w restricted to dyadic subintervals of Q.
    double ainf_constant(const Weight& w);

    inline constexpr double kDefaultTau = 8.0;

    /// 1 + 1/(tau [w]_Ainf).
    double reverse_holder_exponent(const Weight& w, double tau = kDefaultTau);

    /// 1/(1 + tau [w]_Ainf), the exponent of the set-ratio form.
    double measure_decay_exponent(const Weight& w, double tau = kDefaultTau);

    struct ReverseHolderReport
    {
        DyadicInterval worst_interval;
        double worst_ratio = 1.0;  // (<w^r>_I)^(1/r) / <w>_I
        bool pass = true;          // worst_ratio <= 2
    };

    ReverseHolderReport check_reverse_holder(const Weight& w, double r);

    struct MeasureDecayReport
    {
        DyadicInterval worst_interval;
        Index worst_cells = 0;     // |E| in cells for the worst pair
        double worst_ratio = 0.0;  // (w(E)/w(Q)) / (|E|/|Q|)^epsilon
        bool pass = true;          // worst_ratio <= 2
    };

    /// Checks w(E)/w(Q) <= 2 (|E|/|Q|)^epsilon for every dyadic Q and every
    /// union of cells E inside Q. For a fixed number of cells the heaviest
    /// cells maximize w(E), so the sweep over all E reduces to prefix sums of
    /// the sorted cell values.
    MeasureDecayReport check_measure_decay(const Weight& w, double epsilon);

    struct EmbeddingGrid
    {
        double start = 1.05;
        double ratio = 1.1;
        double p_max = 64.0;

        std::vector<double> points() const;
    };

    struct EmbeddingResult
    {
        std::optional<double> p;  // empty: not found below p_max
        double ap_at_p = 0.0;     // [w]_Ap at the returned p (or at p_max when not found)
        double exp_ainf = 0.0;    // e^[w]_Ainf, for trend comparison
    };

    /// Smallest grid p with [w]_Ap <= bound. [w]_Ap is nonincreasing in p, so
    /// the search bisects over the grid.
    EmbeddingResult find_embedding_exponent(const Weight& w, double bound, const EmbeddingGrid& grid = {});
}
