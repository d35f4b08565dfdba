#include "oracles.hpp"

#include "mixweak/corpus.hpp"

#include <doctest.h>

using namespace mixweak;

namespace
{
    /// Coarsens a grid function by `steps` levels using naive cell averages.
    std::vector<double> coarsen(const GridFunction& f, int steps)
    {
        const auto v = oracle::cells(f);
        std::vector<double> out(v.size() >> steps);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = oracle::naive_average(v, f.resolution(), f.resolution() - steps, static_cast<Index>(i));
        return out;
    }
}

TEST_SUITE("corpus")
{
    TEST_CASE("indicator cell averages are exact")
    {
        const auto f = make_function(FunctionSpec::indicator(0.25, 0.625), 3);
        CHECK(oracle::cells(f) == std::vector<double>{0, 0, 1, 1, 1, 0, 0, 0});
        const auto g = make_function(FunctionSpec::indicator(0.3, 0.6), 2);
        CHECK(g[1] == doctest::Approx((0.5 - 0.3) / 0.25).epsilon(1e-14));
        CHECK(g[2] == doctest::Approx((0.6 - 0.5) / 0.25).epsilon(1e-14));
        CHECK_THROWS_AS(FunctionSpec::indicator(0.5, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(FunctionSpec::indicator(0.5, 1.5), std::invalid_argument);
    }

    TEST_CASE("point mass has unit integral")
    {
        for (int J : {4, 8, 12})
        {
            const auto f = make_function(FunctionSpec::point_mass(0.3, 1.0 / 64), J);
            CHECK(f.total() == doctest::Approx(1.0).epsilon(1e-13));
        }
    }

    TEST_CASE("step functions")
    {
        const auto f = make_function(FunctionSpec::step({3, 1}, {0.75}), 2);
        CHECK(oracle::cells(f) == std::vector<double>{3, 3, 3, 1});
    }

    TEST_CASE("functions are consistent across resolutions")
    {
        for (const auto& spec : random_corpus(101, 12, 8))
        {
            const auto fine = make_function(spec, 12);
            const auto coarse = make_function(spec, 9);
            const auto averaged = coarsen(fine, 3);
            for (std::size_t i = 0; i < averaged.size(); ++i)
                CHECK(coarse[static_cast<Index>(i)] == doctest::Approx(averaged[i]).epsilon(1e-12).scale(1.0));
        }
    }

    TEST_CASE("random corpus is deterministic in its seed")
    {
        const auto a = random_corpus(7, 20);
        const auto b = random_corpus(7, 20);
        const auto c = random_corpus(8, 20);
        REQUIRE(a.size() == 20);
        bool differs = false;
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            CHECK(a[i].label() == b[i].label());
            CHECK((make_function(a[i], 10).values() == make_function(b[i], 10).values()).all());
            differs = differs || a[i].label() != c[i].label();
        }
        CHECK(differs);
    }

    TEST_CASE("random corpus cycles through the kinds")
    {
        const auto corpus = random_corpus(9, 8);
        using K = FunctionSpec::Kind;
        const std::vector<K> expected{K::random_step, K::random_step, K::indicator, K::point_mass};
        for (std::size_t i = 0; i < corpus.size(); ++i)
            CHECK(corpus[i].kind == expected[i % 4]);
        CHECK(to_string(K::point_mass) == "point_mass");
        CHECK(corpus[2].label().rfind("indicator[", 0) == 0);
    }

    TEST_CASE("random cells")
    {
        const auto a = random_cells(10, 5, 0.5);
        const auto b = random_cells(10, 5, 0.5);
        CHECK((a.values() == b.values()).all());
        const auto zeros = (a.values() == 0.0).count();
        CHECK(zeros > 400);
        CHECK(zeros < 624);
        CHECK((a.values() >= 0.0).all());
        CHECK_THROWS_AS(FunctionSpec::random_step(1, 4, 1.0), std::invalid_argument);
    }

    TEST_CASE("unit uniform lies in [0, 1)")
    {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 1000; ++i)
        {
            const double x = unit_uniform(rng);
            CHECK(x >= 0.0);
            CHECK(x < 1.0);
        }
    }
}
