#include "mixweak/verify.hpp"

#include "mixweak/format.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace mixweak
{
    namespace
    {
        constexpr double kRoundingSlack = 1e-12;

        struct Layer
        {
            double value;       // distinct |f| value, decreasing
            double cumulative;  // mu{|f| >= value}
        };

        void require_same_grid(const GridFunction& f, const GridFunction& g, const char* who)
        {
            if (f.resolution() != g.resolution())
                throw std::invalid_argument(std::string(who) + ": resolutions differ");
        }

        /// Distinct positive values of f in decreasing order with the
        /// cumulative mu-measure of {f >= value}.
        std::vector<Layer> layers(const GridFunction& f, const GridFunction& mu)
        {
            require_same_grid(f, mu, "distribution");
            const Index n = f.size();
            std::vector<Index> order(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i)
                order[static_cast<std::size_t>(i)] = i;
            std::sort(order.begin(), order.end(), [&](Index a, Index b) {
                return f[a] != f[b] ? f[a] > f[b] : a < b;
            });

            const double h = f.cell_width();
            std::vector<Layer> out;
            detail::NeumaierSum<double> acc;
            for (std::size_t k = 0; k < order.size(); ++k)
            {
                const double value = f[order[k]];
                if (value <= 0.0)
                    break;
                acc.add(mu[order[k]] * h);
                const bool last_of_value = k + 1 == order.size() || f[order[k + 1]] != value;
                if (last_of_value)
                    out.push_back({value, acc.value()});
            }
            return out;
        }
    }

    //----------------//
    // Lorentz norms  //
    //----------------//

    double weak_quasinorm(const GridFunction& f, const GridFunction& mu, double p)
    {
        if (!(p > 0.0))
            throw std::invalid_argument("weak_quasinorm: p must be positive");
        double best = 0.0;
        for (const auto& layer : layers(f, mu))
            best = std::max(best, layer.value * std::pow(layer.cumulative, 1.0 / p));
        return best;
    }

    double weak_lorentz_norm(const GridFunction& f, const GridFunction& mu)
    {
        double best = 0.0;
        for (const auto& layer : layers(f, mu))
            best = std::max(best, layer.value * layer.cumulative);
        return best;
    }

    double weak_lorentz_pq_norm(const GridFunction& f, const GridFunction& mu, double p, LorentzIndex q)
    {
        if (!(p >= 1.0))
            throw std::invalid_argument("weak_lorentz_pq_norm: p must be at least 1");
        switch (q)
        {
        case LorentzIndex::infinity:
            return weak_quasinorm(f, mu, p);
        case LorentzIndex::one:
        {
            // mu{|f| > t} equals cumulative_i for t in [v_{i+1}, v_i).
            const auto ls = layers(f, mu);
            detail::NeumaierSum<double> acc;
            for (std::size_t i = 0; i < ls.size(); ++i)
            {
                const double next = i + 1 < ls.size() ? ls[i + 1].value : 0.0;
                acc.add((ls[i].value - next) * std::pow(ls[i].cumulative, 1.0 / p));
            }
            return p * acc.value();
        }
        }
        throw std::invalid_argument("weak_lorentz_pq_norm: unsupported second index");
    }

    std::vector<DistributionPoint> distribution_profile(const GridFunction& f, const GridFunction& mu)
    {
        std::vector<DistributionPoint> out;
        for (const auto& layer : layers(f, mu))
            out.push_back({layer.value, layer.cumulative, layer.value * layer.cumulative});
        return out;
    }

    //------------------------//
    // Ratio experiments      //
    //------------------------//

    Characteristics characteristics_of(const Weight& u, const Weight& v, double p)
    {
        Characteristics c;
        c.u_a1 = u.a1();
        c.u_ainf = u.ainf();
        c.v_a1 = v.a1();
        c.v_ap = v.ap(p);
        c.v_ainf = v.ainf();
        c.p = p;
        c.u_equals_v = u.resolution() == v.resolution() && (u.data().values() == v.data().values()).all();
        return c;
    }

    double safe_ratio(double lhs, double rhs)
    {
        if (rhs > 0.0)
            return lhs / rhs;
        if (lhs == 0.0)
            return 0.0;
        throw std::domain_error("ratio: positive left-hand side over a vanishing right-hand side");
    }

    namespace
    {
        void fill_ratio(RatioReport& r)
        {
            r.ratio = safe_ratio(r.lhs, r.rhs);
            if (const auto theorem = default_theorem(r.op))
            {
                const auto m = bound_comparison(r, *theorem);
                if (m.applicable)
                {
                    r.shape = m.shape;
                    r.margin = m.margin;
                }
            }
        }

        std::string op_name(const OperatorConfig& op)
        {
            switch (op.kind)
            {
            case MixedOperator::perturbed_maximal: return "maximal";
            case MixedOperator::haar_multiplier: return "haar";
            case MixedOperator::vector_maximal: return "vector";
            }
            return "unknown";
        }
    }

    RatioReport verify_mixed(std::span<const GridFunction> fs, const Weight& u, const Weight& v,
                             const OperatorConfig& op, const ReportOptions& options)
    {
        if (fs.empty())
            throw std::invalid_argument("verify_mixed: no input functions");
        if (op.kind != MixedOperator::vector_maximal && fs.size() != 1)
            throw std::invalid_argument("verify_mixed: scalar operators take exactly one function");
        const int J = u.resolution();
        if (v.resolution() != J)
            throw std::invalid_argument("verify_mixed: weights have different resolutions");
        for (const auto& f : fs)
            require_same_grid(f, u.data(), "verify_mixed");

        const GridFunction uv = product(u.data(), v.data());
        GridFunction image = GridFunction::constant(J, 0.0);
        GridFunction integrand = GridFunction::constant(J, 0.0);
        switch (op.kind)
        {
        case MixedOperator::perturbed_maximal:
            image = perturbed_maximal(fs[0], v.data());
            integrand = fs[0];
            break;
        case MixedOperator::haar_multiplier:
        {
            if (!op.eps)
                throw std::invalid_argument("verify_mixed: Haar multiplier needs a sign pattern");
            image = quotient(abs(haar_multiplier(product(fs[0], v.data()), *op.eps)), v.data());
            integrand = fs[0];
            break;
        }
        case MixedOperator::vector_maximal:
        {
            std::vector<GridFunction> weighted;
            weighted.reserve(fs.size());
            for (const auto& f : fs)
                weighted.push_back(product(f, v.data()));
            image = quotient(vector_maximal(std::span<const GridFunction>(weighted), op.q), v.data());
            integrand = lq_norm(fs, op.q);
            break;
        }
        }

        const GridFunction rhs_measure = options.rhs == RightHandMeasure::uv
                                             ? uv
                                             : product(v.data(), dyadic_maximal(u.data()));

        RatioReport r;
        r.scenario_id = options.scenario_id;
        r.resolution = J;
        r.op = op_name(op);
        r.lhs = weak_lorentz_norm(image, uv);
        r.rhs = integral(product(integrand, rhs_measure));
        r.chars = characteristics_of(u, v, options.p);
        if (op.kind == MixedOperator::vector_maximal)
            r.chars.q = op.q;
        fill_ratio(r);
        return r;
    }

    RatioReport verify_mixed(const GridFunction& f, const Weight& u, const Weight& v, const OperatorConfig& op,
                             const ReportOptions& options)
    {
        return verify_mixed(std::span<const GridFunction>(&f, 1), u, v, op, options);
    }

    RatioReport verify_multilinear(std::span<const GridFunction> fs, std::span<const Weight> ws,
                                   const ReportOptions& options)
    {
        if (fs.empty() || fs.size() != ws.size())
            throw std::invalid_argument("verify_multilinear: need one weight per function");
        const int J = fs.front().resolution();
        const double m = static_cast<double>(fs.size());

        auto nu_values = GridFunction::Values::Ones(fs.front().size()).eval();
        double rhs = 1.0;
        for (std::size_t j = 0; j < fs.size(); ++j)
        {
            require_same_grid(fs[j], ws[j].data(), "verify_multilinear");
            nu_values *= ws[j].data().values();
            rhs *= integral(product(fs[j], ws[j].data()));
        }
        const GridFunction nu(J, nu_values.pow(1.0 / m));

        RatioReport r;
        r.scenario_id = options.scenario_id;
        r.resolution = J;
        r.op = "product";
        r.lhs = weak_quasinorm(product_maximal(fs), nu, 1.0 / m);
        r.rhs = rhs;
        r.chars = characteristics_of(ws.front(), ws.back(), options.p);
        fill_ratio(r);
        return r;
    }

    double verify_cf(const SignPattern& eps, const GridFunction& f, double p0, const Weight& w)
    {
        if (!(p0 > 0.0))
            throw std::invalid_argument("verify_cf: p0 must be positive");
        require_same_grid(f, w.data(), "verify_cf");
        const GridFunction tf = abs(haar_multiplier(f, eps));
        const GridFunction mf = dyadic_maximal(f);
        const double num = integral(product(power(tf, p0), w.data()));
        const double den = integral(product(power(mf, p0), w.data()));
        return safe_ratio(num, den);
    }

    RatioReport verify_transfer(const GridFunction& f, const Weight& u, const Weight& v, const SignPattern& eps,
                                const ReportOptions& options)
    {
        const auto haar = verify_mixed(f, u, v, OperatorConfig::haar(eps), options);
        const auto maximal = verify_mixed(f, u, v, OperatorConfig::maximal(), options);
        RatioReport r = haar;
        r.op = "haar_vs_maximal";
        r.lhs = haar.lhs;
        r.rhs = maximal.lhs;
        r.shape = std::numeric_limits<double>::quiet_NaN();
        r.margin = std::numeric_limits<double>::quiet_NaN();
        fill_ratio(r);
        return r;
    }

    //-------------------------//
    // Rubio de Francia        //
    //-------------------------//

    GridFunction rubio_S(const GridFunction& f, const Weight& u) { return perturbed_maximal(f, u.data()); }

    RubioIterate rubio_iterate(const GridFunction& h, const Weight& u, double K0, int terms)
    {
        if (!(K0 > 0.0))
            throw std::invalid_argument("rubio_iterate: K0 must be positive");
        if (terms < 1)
            throw std::invalid_argument("rubio_iterate: need at least one term");
        require_same_grid(h, u.data(), "rubio_iterate");

        RubioIterate out{h, u.a1() / (2.0 * K0), false, std::numeric_limits<double>::infinity()};
        GridFunction term = h;
        auto sum = h.values();
        double scale = 1.0;
        for (int k = 1; k < terms; ++k)
        {
            term = rubio_S(term, u);
            scale /= 2.0 * K0;
            sum += term.values() * scale;
        }
        out.sum = GridFunction(h.resolution(), std::move(sum));

        // ||S^k h||_inf <= [u]_A1^k ||h||_inf, so the omitted terms sum to at
        // most ||h||_inf c^terms / (1 - c) with c the contraction.
        const double c = out.contraction;
        out.tail_certified = c < 1.0;
        if (out.tail_certified)
            out.tail_bound = h.max_value() * std::pow(c, terms) / (1.0 - c);
        return out;
    }

    RubioReport rubio_check(const GridFunction& h, const Weight& u, const Weight& v, const RubioOptions& options)
    {
        if (!(options.cprime > 0.0) || !(options.rprime_factor > 0.0))
            throw std::invalid_argument("rubio_check: c' and the r' factor must be positive");
        if (v.resolution() != u.resolution())
            throw std::invalid_argument("rubio_check: weights have different resolutions");

        RubioReport r;
        r.K0 = options.cprime * u.a1() * std::log(v.a1() + std::numbers::e);
        r.rprime = std::max(1.0, options.rprime_factor * r.K0);
        const auto it = rubio_iterate(h, u, r.K0, options.terms);
        r.tail_certified = it.tail_certified;
        const GridFunction& Rh = it.sum;

        r.majorizes = (h.values() <= Rh.values()).all();

        const GridFunction uv = product(u.data(), v.data());
        const double h_norm = weak_lorentz_pq_norm(h, uv, r.rprime, LorentzIndex::one);
        const double rh_norm = weak_lorentz_pq_norm(Rh, uv, r.rprime, LorentzIndex::one);
        r.norm_ratio = safe_ratio(rh_norm, h_norm);

        if (Rh.min_value() > 0.0)
        {
            const Weight rh_u(product(Rh, u.data()));
            const Weight rh_u_v(product(rh_u.data(), power(v.data(), 1.0 / r.rprime)));
            r.rh_u_a1 = rh_u.a1();
            r.rh_u_v_a1 = rh_u_v.a1();
        }
        else
        {
            // Only h == 0 leaves zeros in R h; the products then vanish identically.
            r.rh_u_a1 = Rh.max_value() > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
            r.rh_u_v_a1 = r.rh_u_a1;
        }

        // Where h vanishes the infinite series gives M_d((Rh)u) = 2 K0 (Rh)u
        // exactly, so the bound is attained; the truncated sum overshoots it
        // by at most the certified tail relative to min Rh, plus rounding.
        const double tail_slack = it.tail_certified && Rh.min_value() > 0.0
                                      ? it.tail_bound / Rh.min_value()
                                      : std::numeric_limits<double>::infinity();
        r.pass_a1 = r.rh_u_a1 <= 2.0 * r.K0 * (1.0 + tail_slack + kRoundingSlack);
        r.pass_norm = r.norm_ratio <= 2.0 + options.tolerance;
        r.pass_product = r.rh_u_v_a1 <= 4.0 * std::numbers::e * r.K0 * (1.0 + options.tolerance);
        return r;
    }

    //-------------------------//
    // Bound shapes            //
    //-------------------------//

    std::string to_string(Theorem theorem)
    {
        switch (theorem)
        {
        case Theorem::T41: return "T41";
        case Theorem::T43: return "T43";
        case Theorem::T44: return "T44";
        case Theorem::T46: return "T46";
        case Theorem::C48: return "C48";
        }
        return "unknown";
    }

    double bound_shape(const Characteristics& c, Theorem theorem)
    {
        const double log_v_a1 = std::log(c.v_a1);
        switch (theorem)
        {
        case Theorem::T41:
            return c.u_a1 * c.v_ainf
                   * (c.u_a1 * c.v_ainf + c.u_ainf * std::max(c.p, 1.0 + std::log(c.v_ap + 1.0)));
        case Theorem::T43:
            return c.u_a1 * c.v_ainf * (c.u_a1 * c.v_ainf + log_v_a1);
        case Theorem::T44:
            return c.u_a1 * c.u_a1;
        case Theorem::T46:
            return c.u_a1 * std::log(c.v_a1 + std::numbers::e);
        case Theorem::C48:
            return c.u_a1 * c.u_a1 * c.u_a1 * c.v_ainf * (c.v_ainf + log_v_a1) * (log_v_a1 + 1.0);
        }
        throw std::invalid_argument("bound_shape: unknown theorem");
    }

    MarginRecord bound_comparison(const RatioReport& report, Theorem theorem)
    {
        MarginRecord m;
        m.theorem = theorem;
        const auto& c = report.chars;

        const bool maximal = report.op == "maximal";
        switch (theorem)
        {
        case Theorem::T41:
        case Theorem::T43:
            if (!maximal)
                m.reason = "bound concerns the perturbed maximal operator";
            break;
        case Theorem::T44:
            if (!maximal)
                m.reason = "bound concerns the perturbed maximal operator";
            else if (!c.u_equals_v)
                m.reason = "bound requires u = v";
            break;
        case Theorem::T46:
            if (report.op != "haar_vs_maximal")
                m.reason = "bound compares a Haar multiplier against the maximal operator";
            break;
        case Theorem::C48:
            if (report.op != "haar")
                m.reason = "bound concerns Haar multipliers";
            break;
        }
        const bool needs_v_a1 = theorem == Theorem::T43 || theorem == Theorem::T46 || theorem == Theorem::C48;
        if (m.reason.empty() && needs_v_a1 && !std::isfinite(c.v_a1))
            m.reason = "v has no finite A1 characteristic";
        if (m.reason.empty() && !(std::isfinite(c.u_a1) && std::isfinite(c.u_ainf) && std::isfinite(c.v_ainf)))
            m.reason = "missing characteristic";
        if (m.reason.empty() && theorem == Theorem::T41 && !std::isfinite(c.v_ap))
            m.reason = "v has no finite Ap characteristic";
        if (!m.reason.empty())
            return m;

        m.applicable = true;
        m.shape = bound_shape(c, theorem);
        m.margin = report.ratio / m.shape;
        return m;
    }

    std::optional<Theorem> default_theorem(const std::string& op)
    {
        if (op == "maximal")
            return Theorem::T41;
        if (op == "haar")
            return Theorem::C48;
        if (op == "haar_vs_maximal")
            return Theorem::T46;
        return std::nullopt;
    }

    //-------------//
    // Serializing //
    //-------------//

    std::string ratio_csv_header() { return "scenario_id,J,op,lhs,rhs,ratio,u_a1,u_ainf,v_a1,v_ap,v_ainf,p,q,shape,margin"; }

    std::string to_csv_row(const RatioReport& r)
    {
        auto num = [](double x) { return std::isnan(x) ? std::string() : format_double(x); };
        std::string row = r.scenario_id;
        if (row.find_first_of(",\"\n") != std::string::npos)
        {
            std::string quoted = "\"";
            for (char ch : row)
                quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            row = quoted + '"';
        }
        row += ',' + std::to_string(r.resolution);
        row += ',' + r.op;
        for (double x : {r.lhs, r.rhs, r.ratio, r.chars.u_a1, r.chars.u_ainf, r.chars.v_a1, r.chars.v_ap,
                         r.chars.v_ainf, r.chars.p, r.chars.q, r.shape, r.margin})
            row += ',' + num(x);
        return row;
    }
}
