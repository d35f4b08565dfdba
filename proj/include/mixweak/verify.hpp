#pragma once

#include "mixweak/dyadic.hpp"
#include "mixweak/operators.hpp"
#include "mixweak/weights.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mixweak
{
    //----------------//
    // Lorentz norms  //
    //----------------//

    /// sup_t t * mu{|f| > t}. The supremum is approached at the distinct
    /// values of f, so it is computed exactly from the sorted values.
    double weak_lorentz_norm(const GridFunction& f, const GridFunction& mu);

    enum class LorentzIndex
    {
        one,
        infinity,
    };

    /// L^{p,infinity}: sup_t t mu{|f|>t}^(1/p).
    /// L^{p,1}: p * integral_0^inf mu{|f|>t}^(1/p) dt, summed exactly over
    /// the value breakpoints. Requires p >= 1.
    double weak_lorentz_pq_norm(const GridFunction& f, const GridFunction& mu, double p, LorentzIndex q);

    /// sup_t t mu{|f|>t}^(1/p) for any p > 0, including the quasi-normed
    /// range p < 1 where no duality is available.
    double weak_quasinorm(const GridFunction& f, const GridFunction& mu, double p);

    struct DistributionPoint
    {
        double t = 0.0;
        double level_measure = 0.0;  // mu{|f| >= t}
        double weak_value = 0.0;     // t * mu{|f| >= t}
    };

    /// Breakpoints of the distribution function, decreasing in t.
    std::vector<DistributionPoint> distribution_profile(const GridFunction& f, const GridFunction& mu);

    //------------------------//
    // Ratio experiments      //
    //------------------------//

    enum class MixedOperator
    {
        perturbed_maximal,  // M_d(f v) / v
        haar_multiplier,    // |T_eps(f v)| / v
        vector_maximal,     // l^q norm of {M_d(f_j v)} / v
    };

    struct OperatorConfig
    {
        MixedOperator kind = MixedOperator::perturbed_maximal;
        std::optional<SignPattern> eps;  // haar_multiplier
        double q = 2.0;                  // vector_maximal

        static OperatorConfig maximal() { return {}; }
        static OperatorConfig haar(SignPattern eps) { return {MixedOperator::haar_multiplier, std::move(eps), 2.0}; }
        static OperatorConfig vector(double q) { return {MixedOperator::vector_maximal, std::nullopt, q}; }
    };

    /// Measure on the right-hand side: u v, or v M_d u for the (u, Mu) form.
    enum class RightHandMeasure
    {
        uv,
        v_maximal_u,
    };

    struct Characteristics
    {
        double u_a1 = 1.0;
        double u_ainf = 1.0;
        double v_a1 = 1.0;
        double v_ap = 1.0;
        double v_ainf = 1.0;
        double p = 2.0;
        double q = std::numeric_limits<double>::quiet_NaN();  // vector exponent when applicable
        bool u_equals_v = false;
    };

    Characteristics characteristics_of(const Weight& u, const Weight& v, double p);

    struct RatioReport
    {
        std::string scenario_id;
        int resolution = 0;
        std::string op;
        double lhs = 0.0;
        double rhs = 0.0;
        double ratio = 0.0;
        Characteristics chars;
        double shape = std::numeric_limits<double>::quiet_NaN();
        double margin = std::numeric_limits<double>::quiet_NaN();
    };

    struct ReportOptions
    {
        std::string scenario_id;
        double p = 2.0;  // exponent for [v]_Ap in the snapshot and bound shapes
        RightHandMeasure rhs = RightHandMeasure::uv;
    };

    /// lhs / rhs with 0/0 reported as 0; a positive lhs over a zero rhs is an error.
    double safe_ratio(double lhs, double rhs);

    /// lhs = || T(f v) / v ||_{L^{1,inf}(u v)}, rhs = || f ||_{L^1(u v)} (or
    /// L^1(v M_d u)). For the vector operator fs holds the components and rhs
    /// uses their cellwise l^q norm; otherwise fs must hold one function.
    RatioReport verify_mixed(std::span<const GridFunction> fs, const Weight& u, const Weight& v,
                             const OperatorConfig& op, const ReportOptions& options = {});

    RatioReport verify_mixed(const GridFunction& f, const Weight& u, const Weight& v, const OperatorConfig& op,
                             const ReportOptions& options = {});

    /// lhs = || prod_j M_d f_j ||_{L^{1/m,inf}(nu)}, nu = (prod_j w_j)^(1/m);
    /// rhs = prod_j || f_j ||_{L^1(w_j)}.
    RatioReport verify_multilinear(std::span<const GridFunction> fs, std::span<const Weight> ws,
                                   const ReportOptions& options = {});

    /// integral |T_eps f|^p0 w / integral (M_d f)^p0 w; 0 when f vanishes.
    double verify_cf(const SignPattern& eps, const GridFunction& f, double p0, const Weight& w);

    /// || T_eps(f v) / v ||_{L^{1,inf}(uv)} against || M_d(f v) / v ||_{L^{1,inf}(uv)}.
    RatioReport verify_transfer(const GridFunction& f, const Weight& u, const Weight& v, const SignPattern& eps,
                                const ReportOptions& options = {});

    //-------------------------//
    // Rubio de Francia        //
    //-------------------------//

    /// S f = M_d(f u) / u.
    GridFunction rubio_S(const GridFunction& f, const Weight& u);

    struct RubioIterate
    {
        GridFunction sum;
        double contraction = 0.0;  // [u]_A1 / (2 K0)
        bool tail_certified = false;
        double tail_bound = std::numeric_limits<double>::infinity();  // sup-norm bound on the omitted terms
    };

    /// sum_{k < terms} S^k h / (2 K0)^k.
    RubioIterate rubio_iterate(const GridFunction& h, const Weight& u, double K0, int terms);

    inline constexpr double kDefaultRubioCPrime = 2.0;
    inline constexpr double kDefaultRPrimeFactor = 2.0;

    struct RubioOptions
    {
        double cprime = kDefaultRubioCPrime;         // K0 = c' [u]_A1 log([v]_A1 + e)
        double rprime_factor = kDefaultRPrimeFactor; // r' = factor * K0
        int terms = 64;
        double tolerance = 1e-6;
    };

    struct RubioReport
    {
        double K0 = 0.0;
        double rprime = 0.0;
        bool majorizes = false;          // h <= R h on every cell
        double rh_u_a1 = 0.0;            // [(R h) u]_A1, must be <= 2 K0
        double norm_ratio = 0.0;         // ||R h|| / ||h|| in L^{r',1}(uv), must be <= 2 + tol
        double rh_u_v_a1 = 0.0;          // [(R h) u v^(1/r')]_A1, must be <= 4 e K0 (1 + tol)
        bool tail_certified = false;
        bool pass_a1 = false;
        bool pass_norm = false;
        bool pass_product = false;

        bool pass() const { return majorizes && pass_a1 && pass_norm && pass_product; }
    };

    RubioReport rubio_check(const GridFunction& h, const Weight& u, const Weight& v, const RubioOptions& options = {});

    //-------------------------//
    // Bound shapes            //
    //-------------------------//

    enum class Theorem
    {
        T41,  // maximal, v in A_p
        T43,  // maximal, v in A_1
        T44,  // maximal, u = v
        T46,  // Haar multiplier against maximal
        C48,  // Haar multiplier, u, v in A_1
    };

    std::string to_string(Theorem theorem);

    struct MarginRecord
    {
        Theorem theorem = Theorem::T41;
        bool applicable = false;
        std::string reason;
        double shape = std::numeric_limits<double>::quiet_NaN();
        double margin = std::numeric_limits<double>::quiet_NaN();  // ratio / shape
    };

    /// Evaluates the bound shape with all dimensional constants set to 1.
    double bound_shape(const Characteristics& chars, Theorem theorem);

    MarginRecord bound_comparison(const RatioReport& report, Theorem theorem);

    /// Theorem whose shape is recorded in the report's shape/margin columns.
    std::optional<Theorem> default_theorem(const std::string& op);

    //-------------//
    // Serializing //
    //-------------//

    /// scenario_id,J,op,lhs,rhs,ratio,u_a1,u_ainf,v_a1,v_ap,v_ainf,p,q,shape,margin
    std::string ratio_csv_header();

    /// Numbers carry 17 significant digits; values that do not apply are empty.
    std::string to_csv_row(const RatioReport& report);
}
