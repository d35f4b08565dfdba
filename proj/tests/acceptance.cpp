// Acceptance suite: one PASS/FAIL line per criterion. Tolerances, corpora
// and runtime limits are fixed here.

#include "oracles.hpp"

#include "mixweak/corpus.hpp"
#include "mixweak/decomposition.hpp"
#include "mixweak/format.hpp"
#include "mixweak/operators.hpp"
#include "mixweak/verify.hpp"
#include "mixweak/weights.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace mixweak;
namespace fs = std::filesystem;

namespace
{
    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    struct Criterion
    {
        int id;
        std::string name;
        double time_limit_s;
        std::function<Outcome()> body;
    };

    std::string num(double x) { return format_short(x); }

    Weight constant_weight(int J) { return make_weight(WeightSpec::step({1}), J); }

    //-------------------------------------------------------------------//

    Outcome maximal_oracle()
    {
        std::mt19937_64 rng(1001);
        double worst = 0.0;
        int functions = 0;
        for (int J : {4, 6, 8})
            for (int i = 0; i < 100; ++i)
            {
                const auto f = random_cells(J, rng(), 0.3);
                const auto fast = oracle::cells(dyadic_maximal(f));
                const auto slow = oracle::maximal(oracle::cells(f), J);
                for (std::size_t c = 0; c < fast.size(); ++c)
                    worst = std::max(worst, std::abs(fast[c] - slow[c]));
                ++functions;
            }
        return {worst <= 1e-12, std::to_string(functions) + " functions, max abs deviation " + num(worst)};
    }

    Outcome unweighted_weak11()
    {
        const int J = 10;
        const auto one = constant_weight(J);
        std::mt19937_64 rng(1002);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i)
        {
            const auto f = random_cells(J, rng(), 0.4);
            worst = std::max(worst, verify_mixed(f, one, one, OperatorConfig::maximal()).ratio);
        }
        const auto half = make_function(FunctionSpec::indicator(0.0, 0.5), J);
        const double exact = verify_mixed(half, one, one, OperatorConfig::maximal()).ratio;
        return {worst <= 1 + 1e-9 && exact == 1.0,
                "max ratio over 200 functions " + num(worst) + ", half indicator ratio " + num(exact)};
    }

    /// Maximal dyadic subintervals of I with naive average above lambda.
    std::set<DyadicInterval> brute_cz(const std::vector<double>& v, int J, const DyadicInterval& I, double lambda)
    {
        std::map<DyadicInterval, double> avg;
        oracle::for_each_interval(J, [&](int level, Index index) {
            const DyadicInterval K(level, index);
            if (I.contains(K))
                avg[K] = oracle::naive_average(v, J, level, index);
        });
        std::set<DyadicInterval> out;
        for (const auto& [K, a] : avg)
        {
            if (!(a > lambda))
                continue;
            bool maximal = true;
            for (int up = I.level; up < K.level && maximal; ++up)
                maximal = !(avg.at(K.ancestor(up)) > lambda);
            if (maximal)
                out.insert(K);
        }
        return out;
    }

    Outcome cz_invariants()
    {
        std::mt19937_64 rng(1003);
        int cubes = 0;
        int violations = 0;
        for (int s = 0; s < 50; ++s)
        {
            const int J = 4 + s % 7;
            const auto cells = oracle::random_positive(rng, std::size_t{1} << J, 8.0);
            const Weight v(oracle::grid(cells));
            const int level = static_cast<int>(rng() % static_cast<std::uint64_t>(J - 1));
            const DyadicInterval I(level, static_cast<std::int64_t>(rng() % (std::uint64_t{1} << level)));
            const double lambda = v.data().average(I) * (1.0 + 4.0 * oracle::unit(rng));
            const auto family = cz_decompose(v, I, lambda);

            std::set<DyadicInterval> got;
            std::vector<bool> covered(cells.size(), false);
            for (const auto& c : family.entries)
            {
                ++cubes;
                got.insert(c.interval);
                const double avg = v.data().average(c.interval);
                if (!(lambda < avg && avg < 2.0 * lambda))
                    ++violations;
                const auto [first, last] = c.interval.cells(J);
                for (Index i = first; i < last; ++i)
                    covered[static_cast<std::size_t>(i)] = true;
            }
            const auto [first, last] = I.cells(J);
            for (Index i = first; i < last; ++i)
                if (!covered[static_cast<std::size_t>(i)] && cells[static_cast<std::size_t>(i)] > lambda)
                    ++violations;
            if (got != brute_cz(cells, J, I, lambda))
                ++violations;
        }
        return {violations == 0, "50 scenarios, " + std::to_string(cubes) + " cubes, "
                                     + std::to_string(violations) + " violations"};
    }

    std::vector<std::pair<std::string, WeightSpec>> scenario_weights()
    {
        std::vector<std::pair<std::string, WeightSpec>> out;
        for (double beta : {0.1, 0.3, 0.5, 0.7})
            out.emplace_back("power" + num(beta), WeightSpec::power(beta));
        out.emplace_back("power0.5@0.3", WeightSpec::power(0.5, 0.3));
        out.emplace_back("step8", WeightSpec::step({8, 1, 1, 1}));
        out.emplace_back("step_geometric", WeightSpec::step({1, 3, 9, 27, 81}, {0.1, 0.3, 0.55, 0.8}));
        return out;
    }

    Outcome sparsity()
    {
        const auto functions = random_corpus(1004, 8, 8);
        int families = 0;
        int cubes = 0;
        double worst = 0.0;
        std::string worst_at;
        int nesting_failures = 0;
        for (const auto& [name, spec] : scenario_weights())
            for (int J : {8, 10, 12})
            {
                const auto v = make_weight(spec, J);
                for (std::size_t i = 0; i < functions.size(); ++i)
                {
                    const auto g = product(make_function(functions[i], J), v.data());
                    const auto family = gamma_families(g, v, 4.0);
                    ++families;
                    cubes += static_cast<int>(family.size());
                    const auto report = sparsity_check(family, 0.5);
                    if (report.worst_fraction > worst || worst_at.empty())
                    {
                        worst = report.worst_fraction;
                        worst_at = name + "/J" + std::to_string(J) + "/f" + std::to_string(i);
                    }
                    if (!check_nesting(family).pass)
                        ++nesting_failures;
                }
            }
        return {worst <= 0.5 && nesting_failures == 0,
                std::to_string(families) + " families, " + std::to_string(cubes) + " cubes, worst fraction "
                    + num(worst) + " (" + worst_at + "), nesting failures " + std::to_string(nesting_failures)};
    }

    /// Thirty weights at J = 12 chosen to spread [w]_Ainf as far as the grid
    /// allows: constants, powers, steps, binomial cascades and single spikes.
    std::vector<Weight> rh_corpus(int J)
    {
        std::vector<Weight> out;
        out.push_back(constant_weight(J));
        for (double alpha : {-2.0, -0.5, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99})
            out.push_back(make_weight(WeightSpec::power(alpha, 0.0), J));
        for (double alpha : {0.5, 0.9})
            out.push_back(make_weight(WeightSpec::power(alpha, 0.37), J));
        out.push_back(make_weight(WeightSpec::product_of_powers({{0.6, 0.25}, {0.6, 0.75}}), J));
        for (double contrast : {10.0, 1e3, 1e6, 1e9})
            out.push_back(make_weight(WeightSpec::step({contrast, 1.0}, {1.0 / 1024}), J));
        const Index n = Index{1} << J;
        for (double m : {0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999})
        {
            GridFunction::Values v(n);
            for (Index c = 0; c < n; ++c)
            {
                double value = 1.0;
                for (int b = J - 1; b >= 0; --b)
                    value *= 2.0 * (((c >> b) & 1) == 0 ? m : 1.0 - m);
                v[c] = value;
            }
            out.emplace_back(GridFunction(J, std::move(v)));
        }
        for (double spike : {1e2, 1e4, 1e6, 1e9, 1e12})
        {
            GridFunction::Values v = GridFunction::Values::Ones(n);
            v[n / 3] = spike;
            out.emplace_back(GridFunction(J, std::move(v)));
        }
        std::mt19937_64 rng(1005);
        for (double spread : {4.0, 12.0})
            out.emplace_back(oracle::grid(oracle::random_positive(rng, static_cast<std::size_t>(n), spread)));
        return out;
    }

    Outcome reverse_holder()
    {
        const auto corpus = rh_corpus(12);
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        double worst_rh = 0.0;
        for (const auto& w : corpus)
        {
            const double ainf = w.ainf();
            lo = std::min(lo, ainf);
            hi = std::max(hi, ainf);
            worst_rh = std::max(worst_rh, check_reverse_holder(w, reverse_holder_exponent(w)).worst_ratio);
        }
        double worst_set = 0.0;
        for (const auto& w : rh_corpus(8))
            worst_set = std::max(worst_set, check_measure_decay(w, measure_decay_exponent(w)).worst_ratio);

        const bool span = lo <= 1.0 + 1e-12 && hi >= 20.0;
        const bool pass = corpus.size() == 30 && span && worst_rh <= 2.0 && worst_set <= 2.0;
        std::string detail = std::to_string(corpus.size()) + " weights, Ainf span [" + num(lo) + ", " + num(hi)
                             + "], worst reverse Holder ratio " + num(worst_rh) + ", worst set ratio "
                             + num(worst_set);
        if (!span)
            detail += "; Ainf span short of [1, 20]: on 2^12 cells [w]_Ainf <= 13 for every weight";
        return {pass, detail};
    }

    Outcome decay()
    {
        const int J = 12;
        const auto u = make_weight(WeightSpec::power(0.25), J);
        const auto v = make_weight(WeightSpec::power(0.5), J);
        std::vector<GridFunction> sources{v.data()};
        for (const auto& spec : random_corpus(1006, 12, 8))
            sources.push_back(product(make_function(spec, J), v.data()));

        bool bounded = true;
        bool monotone = true;
        std::map<int, std::size_t> rows_per_bucket;
        double worst = 0.0;
        for (const auto& g : sources)
        {
            const auto table = decay_profile(u, v, g, 4.0);
            std::optional<double> previous;
            for (const auto& row : table.rows)
            {
                rows_per_bucket[row.bucket] += 1;
                worst = std::max(worst, row.max_u_ratio);
                bounded = bounded && row.max_u_ratio <= 1.0;
                if (row.bucket >= 2)
                {
                    if (previous && row.max_u_ratio > *previous)
                        monotone = false;
                    previous = row.max_u_ratio;
                }
            }
        }
        std::string buckets;
        for (const auto& [l, count] : rows_per_bucket)
            buckets += (buckets.empty() ? "" : " ") + std::string("l=") + std::to_string(l) + ":" + std::to_string(count);
        return {bounded && monotone, std::to_string(sources.size()) + " sources, max ratio " + num(worst)
                                         + ", rows per bucket {" + buckets + "}"};
    }

    double max_mixed_ratio(const std::vector<FunctionSpec>& corpus, const WeightSpec& us, const WeightSpec& vs, int J)
    {
        const auto u = make_weight(us, J);
        const auto v = make_weight(vs, J);
        double best = 0.0;
        for (const auto& spec : corpus)
            best = std::max(best, verify_mixed(make_function(spec, J), u, v, OperatorConfig::maximal()).ratio);
        return best;
    }

    Outcome stability()
    {
        const auto corpus = random_corpus(2024, 50, 8);
        const double r12 = max_mixed_ratio(corpus, WeightSpec::power(0.25), WeightSpec::power(0.5), 12);
        const double r16 = max_mixed_ratio(corpus, WeightSpec::power(0.25), WeightSpec::power(0.5), 16);
        const double drift = std::abs(r16 - r12) / r12;
        return {std::isfinite(r16) && drift < 0.10,
                "max ratio J=12 " + num(r12) + ", J=16 " + num(r16) + ", relative drift " + num(drift)};
    }

    Outcome bound_shapes()
    {
        const int J = 12;
        const auto corpus = random_corpus(1008, 12, 8);
        std::vector<GridFunction> fs;
        for (const auto& spec : corpus)
            fs.push_back(make_function(spec, J));
        const std::vector<double> betas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};

        double t41 = 0.0;
        double t44 = 0.0;
        double t46 = 0.0;
        int scenarios = 0;
        for (double bu : betas)
            for (double bv : betas)
            {
                const auto u = make_weight(WeightSpec::power(bu), J);
                const auto v = make_weight(WeightSpec::power(bv), J);
                for (const auto& f : fs)
                {
                    const auto report = verify_mixed(f, u, v, OperatorConfig::maximal());
                    const auto m = bound_comparison(report, Theorem::T41);
                    if (m.applicable)
                        t41 = std::max(t41, m.margin);
                }
                ++scenarios;
            }
        for (double b : betas)
        {
            const auto w = make_weight(WeightSpec::power(b), J);
            for (const auto& f : fs)
            {
                const auto m = bound_comparison(verify_mixed(f, w, w, OperatorConfig::maximal()), Theorem::T44);
                if (m.applicable)
                    t44 = std::max(t44, m.margin);
            }
        }
        for (double bu : betas)
            for (double bv : betas)
            {
                const auto u = make_weight(WeightSpec::power(bu), J);
                const auto v = make_weight(WeightSpec::power(bv), J);
                for (std::uint64_t seed = 100; seed < 110; ++seed)
                {
                    const auto eps = SignPattern::random_signs(J, seed);
                    for (std::size_t i = 0; i < fs.size(); i += 3)
                    {
                        const auto m = bound_comparison(verify_transfer(fs[i], u, v, eps), Theorem::T46);
                        if (m.applicable)
                            t46 = std::max(t46, m.margin);
                    }
                }
            }
        const double cap = 10.0;
        return {t41 <= cap && t44 <= cap && t46 <= cap,
                std::to_string(scenarios) + " weight pairs; max margin T41 " + num(t41) + ", T44 " + num(t44)
                    + ", T46 " + num(t46) + " (cap " + num(cap) + ")"};
    }

    Outcome rubio()
    {
        const int J = 10;
        const auto corpus = random_corpus(1009, 8, 8);
        int cases = 0;
        int failures = 0;
        double worst_a1 = 0.0;
        double worst_norm = 0.0;
        double worst_product = 0.0;
        for (double bu : {0.1, 0.3, 0.5})
            for (double bv : {0.1, 0.3, 0.5, 0.7})
            {
                const auto u = make_weight(WeightSpec::power(bu, 0.3), J);
                const auto v = make_weight(WeightSpec::power(bv), J);
                for (const auto& spec : corpus)
                {
                    const auto h = make_function(spec, J);
                    const auto r = rubio_check(h, u, v);
                    ++cases;
                    worst_a1 = std::max(worst_a1, r.rh_u_a1 / (2 * r.K0));
                    worst_norm = std::max(worst_norm, r.norm_ratio);
                    worst_product = std::max(worst_product, r.rh_u_v_a1 / (4 * std::numbers::e * r.K0));
                    if (!r.pass() || !r.tail_certified)
                        ++failures;
                }
            }
        return {failures == 0, std::to_string(cases) + " cases; max [(Rh)u]_A1/(2K0) " + num(worst_a1)
                                   + ", max norm ratio " + num(worst_norm) + ", max [(Rh)uv^(1/r')]_A1/(4eK0) "
                                   + num(worst_product) + ", failures " + std::to_string(failures)};
    }

    Outcome multilinear_vector()
    {
        const auto corpus = random_corpus(1010, 24, 8);
        auto multilinear_max = [&](int J) {
            const std::vector<Weight> ws{make_weight(WeightSpec::power(0.25), J), make_weight(WeightSpec::power(0.5), J)};
            double best = 0.0;
            for (std::size_t i = 0; i + 1 < corpus.size(); i += 2)
            {
                const std::vector<GridFunction> fs{make_function(corpus[i], J), make_function(corpus[i + 1], J)};
                best = std::max(best, verify_multilinear(std::span<const GridFunction>(fs), std::span<const Weight>(ws)).ratio);
            }
            return best;
        };
        auto vector_max = [&](int J) {
            const auto u = make_weight(WeightSpec::power(0.25), J);
            const auto v = make_weight(WeightSpec::power(0.5), J);
            double best = 0.0;
            for (std::size_t i = 0; i + 1 < corpus.size(); i += 2)
            {
                const std::vector<GridFunction> fs{make_function(corpus[i], J), make_function(corpus[i + 1], J)};
                best = std::max(best, verify_mixed(std::span<const GridFunction>(fs), u, v, OperatorConfig::vector(2.0)).ratio);
            }
            return best;
        };
        const double m10 = multilinear_max(10);
        const double m12 = multilinear_max(12);
        const double v10 = vector_max(10);
        const double v12 = vector_max(12);
        const double m_drift = std::abs(m12 - m10) / m10;
        const double v_drift = std::abs(v12 - v10) / v10;

        // Degenerate reductions against the unweighted weak (1,1) values.
        const int J = 10;
        const auto one = constant_weight(J);
        std::mt19937_64 rng(1002);
        double worst_reduction = 0.0;
        for (int i = 0; i < 50; ++i)
        {
            const auto f = random_cells(J, rng(), 0.4);
            const double base = verify_mixed(f, one, one, OperatorConfig::maximal()).ratio;
            const std::vector<GridFunction> single{f};
            const std::vector<Weight> w1{one};
            const double factor =
                verify_multilinear(std::span<const GridFunction>(single), std::span<const Weight>(w1)).ratio;
            const double component =
                verify_mixed(std::span<const GridFunction>(single), one, one, OperatorConfig::vector(2.0)).ratio;
            worst_reduction = std::max({worst_reduction, std::abs(factor - base), std::abs(component - base)});
        }
        const bool finite = std::isfinite(m10) && std::isfinite(m12) && std::isfinite(v10) && std::isfinite(v12);
        return {finite && m_drift < 0.10 && v_drift < 0.10 && worst_reduction <= 1e-12,
                "multilinear " + num(m10) + " -> " + num(m12) + " (drift " + num(m_drift) + "), vector " + num(v10)
                    + " -> " + num(v12) + " (drift " + num(v_drift) + "), max reduction gap " + num(worst_reduction)};
    }

    std::map<std::string, std::string> csv_files(const fs::path& root)
    {
        std::map<std::string, std::string> out;
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
            {
                std::ifstream in(entry.path(), std::ios::binary);
                std::stringstream ss;
                ss << in.rdbuf();
                out[fs::relative(entry.path(), root).string()] = ss.str();
            }
        return out;
    }

    Outcome determinism()
    {
        const fs::path base = fs::current_path() / "acceptance_runs";
        fs::remove_all(base);
        const std::vector<std::pair<std::string, std::string>> jobs{
            {"trivial.json", "verify"}, {"power.json", "constants"}, {"power.json", "maximal"}, {"power.json", "cz"},
            {"power.json", "verify"},   {"power.json", "rubio"},     {"sweep.json", "sweep"}};
        int runs = 0;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& [config, sub] : jobs)
            {
                const fs::path out = base / ("run" + std::to_string(pass)) / (config + "." + sub);
                const std::string cmd = std::string("\"") + MIXWEAK_TOOL_PATH + "\" " + sub + " --config \""
                                        + MIXWEAK_CONFIG_DIR + "/" + config + "\" --out \"" + out.string()
                                        + "\" --threads " + (pass == 0 ? "1" : "4") + " > /dev/null 2>&1";
                if (std::system(cmd.c_str()) != 0)
                    return {false, "command failed: " + cmd};
                ++runs;
            }
        const auto a = csv_files(base / "run0");
        const auto b = csv_files(base / "run1");
        std::size_t bytes = 0;
        for (const auto& [name, text] : a)
            bytes += text.size();
        return {!a.empty() && a == b, std::to_string(runs) + " runs, " + std::to_string(a.size()) + " CSV files ("
                                          + std::to_string(bytes) + " bytes) per pass, threads 1 vs 4"};
    }
}

int main()
{
    const std::vector<Criterion> criteria{
        {1, "maximal function equals brute-force enumeration", 5, maximal_oracle},
        {2, "unweighted dyadic weak (1,1) ratio", 10, unweighted_weak11},
        {3, "Calderon-Zygmund invariants", 10, cz_invariants},
        {4, "sparsity and nesting of Gamma families", 30, sparsity},
        {5, "reverse Holder and set-ratio forms over an Ainf span of [1, 20]", 60, reverse_holder},
        {6, "decay profile", 30, decay},
        {7, "mixed weak-type stability J=12 vs J=16", 120, stability},
        {8, "bound-shape margins across the power sweep", 180, bound_shapes},
        {9, "Rubio de Francia properties", 60, rubio},
        {10, "multilinear and vector-valued stability", 60, multilinear_vector},
        {11, "determinism of CSV outputs", 600, determinism},
    };

    int failed = 0;
    for (const auto& c : criteria)
    {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try
        {
            outcome = c.body();
        }
        catch (const std::exception& e)
        {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds < c.time_limit_s;
        const bool pass = outcome.pass && in_time;
        failed += pass ? 0 : 1;
        char timing[96];
        std::snprintf(timing, sizeof timing, "%.2f s of %.0f s", seconds, c.time_limit_s);
        std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << "  " << c.name << "; "
                  << outcome.detail << "; " << timing << (in_time ? "" : " (over the time limit)") << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
