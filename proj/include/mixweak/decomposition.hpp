#pragma once

#include "mixweak/dyadic.hpp"
#include "mixweak/weights.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mixweak
{
    enum class CubeKind
    {
        level_cube,  // maximal interval of a level set {M_d g > a^k}
        cz_cube,     // Calderon-Zygmund subinterval of a bucket -1 level cube
    };

    std::string to_string(CubeKind kind);

    /// Bucket value for cubes that have not been bucketed.
    inline constexpr int kNoBucket = -2;

    struct Cube
    {
        DyadicInterval interval;
        int generation = 0;
        int bucket = kNoBucket;
        CubeKind kind = CubeKind::level_cube;
        /// For cz cubes: the level cube they were cut from.
        std::optional<DyadicInterval> host;

        /// The interval whose length normalizes this cube's contribution in
        /// the principal sums: the host for cz cubes, the cube itself otherwise.
        DyadicInterval host_or_self() const { return host.value_or(interval); }

        friend bool operator==(const Cube&, const Cube&) = default;
    };

    /// Canonical order: (level, index, generation, kind, bucket).
    bool canonical_less(const Cube& a, const Cube& b);

    struct CubeFamily
    {
        double base = 4.0;
        std::vector<Cube> entries;
        /// Set when [0,1) itself was selected as a level cube: on the unit
        /// interval there is no parent to certify its maximality.
        bool root_boundary = false;

        std::size_t size() const { return entries.size(); }
        bool empty() const { return entries.empty(); }
        void canonicalize();
        void append(const CubeFamily& other);
    };

    /// Maximal dyadic subintervals of `within` whose g-average exceeds threshold.
    /// `within` itself is a candidate.
    std::vector<DyadicInterval> maximal_intervals_above(const GridFunction& g, double threshold,
                                                        const DyadicInterval& within = DyadicInterval::root());

    /// Q_k: maximal dyadic intervals with <g>_I > a^k. Requires a > 2^n.
    CubeFamily level_cubes(const GridFunction& g, double a, int k);

    /// Same selection at an arbitrary threshold; entries carry generation k.
    CubeFamily level_cubes_at(const GridFunction& g, double a, double threshold, int k);

    /// Bucket index l of an average: -1 when avg < a^k, otherwise the l >= 0
    /// with a^(k+l) <= avg < a^(k+l+1).
    int bucket_index(double average, double a, int k);

    /// Splits a generation-k level family into {Q_{l,k}} by <v>_I. The
    /// returned cubes carry their bucket. Only a > 1 is needed here.
    std::map<int, CubeFamily> bucket_by_average(const CubeFamily& family, const Weight& v, double a, int k);

    /// Calderon-Zygmund decomposition of v restricted to I at height lambda.
    /// Requires <v>_I < lambda. Entries are cz cubes hosted by I.
    CubeFamily cz_decompose(const Weight& v, const DyadicInterval& I, double lambda, int generation = 0);

    struct GenerationRange
    {
        int first = 0;
        int last = 0;  // inclusive
    };

    /// Generations outside this range give empty families: below it the
    /// v-level set {a^k < v <= a^(k+1)} is empty, above it {M_d g > a^k} is.
    GenerationRange default_generation_range(const GridFunction& g, const Weight& v, double a);

    /// The family Gamma: bucket l >= 0 level cubes and the cz subcubes of
    /// bucket -1 level cubes, kept when they meet {a^k < v <= a^(k+1)} in at
    /// least one cell.
    CubeFamily gamma_families(const GridFunction& g, const Weight& v, double a,
                              std::optional<GenerationRange> range = std::nullopt);

    struct SparsityReport
    {
        bool pass = true;
        std::optional<DyadicInterval> worst_cube;
        double worst_fraction = 0.0;
    };

    /// For every cube Q of the family, the measure of the union of family
    /// cubes strictly inside Q must be at most theta |Q|.
    SparsityReport sparsity_check(const CubeFamily& family, double theta);

    struct NestingReport
    {
        bool pass = true;
        std::optional<Cube> outer;
        std::optional<Cube> inner;
    };

    /// Strictly nested family cubes must have strictly increasing generations.
    NestingReport check_nesting(const CubeFamily& family);

    struct PrincipalMode
    {
        enum class Kind
        {
            factor2,
            geometric,
        };

        Kind kind = Kind::factor2;
        double delta = 1.0;
        double a = 4.0;

        static PrincipalMode factor2() { return {}; }
        static PrincipalMode geometric(double delta, double a) { return {Kind::geometric, delta, a}; }
    };

    inline constexpr double kDefaultGeometricCPrime = 12.0;

    /// delta = 1 / (c' [v]_Ainf).
    double geometric_delta(const Weight& v, double cprime = kDefaultGeometricCPrime);

    struct PrincipalForest
    {
        CubeFamily family;            // canonical order
        PrincipalMode mode;
        std::vector<std::size_t> nodes;                 // entry indices of principal cubes
        std::vector<std::optional<std::size_t>> parent; // per principal node: parent principal entry
        std::vector<std::size_t> pi;                    // per entry: minimal principal entry containing it

        bool is_principal(std::size_t entry) const { return pi[entry] == entry; }
    };

    /// Stopping-time selection of principal cubes with respect to u. Cubes
    /// are visited top-down; a cube becomes principal when its u-average
    /// exceeds the threshold relative to its current minimal principal
    /// ancestor (2x, or a^((k - t) delta) in geometric mode), or when it has
    /// no principal ancestor at all.
    PrincipalForest principal_cubes(const CubeFamily& family, const Weight& u, const PrincipalMode& mode);

    struct PrincipalProfile
    {
        GridFunction sum;
        double max_ratio = 0.0;  // max over cells of sum / u
        Index argmax = 0;
    };

    /// Cellwise sum over principal cubes P of u(P) / |H| * chi_H, H the host
    /// of P (P itself for level cubes).
    PrincipalProfile principal_sum_profile(const PrincipalForest& forest, const Weight& u);

    struct DecayRow
    {
        int bucket = 0;
        std::size_t cube_count = 0;
        double max_u_ratio = 0.0;            // max u(E_k cap I) / u(I)
        double max_lebesgue_fraction = 0.0;  // max |E_k cap I| / |I|
        double intermediate_bound = 0.0;     // a^((1-l)/(q-1)) [v]_Aq^(1/(q-1))
    };

    struct DecayTable
    {
        double q = 0.0;
        double v_aq = 0.0;
        std::vector<DecayRow> rows;  // increasing bucket
    };

    /// Bound on [v]_Aq used to pick q for the intermediate bound.
    inline constexpr double kDefaultDecayEmbeddingBound = 2.718281828459045;

    /// Per bucket l >= 0, the worst u(E_k cap I)/u(I) over I in Gamma_{l,k},
    /// with E_k = {1 < M_d g / v <= 2, a^k < v <= a^(k+1)}.
    DecayTable decay_profile(const Weight& u, const Weight& v, const GridFunction& g, double a,
                             double embedding_bound = kDefaultDecayEmbeddingBound);

    //---------------//
    // Text formats  //
    //---------------//

    /// One cube per line: level index generation bucket kind host, where host
    /// is the heap node id of the host interval (-1 for level cubes).
    void write_family(std::ostream& os, const CubeFamily& family);
    CubeFamily read_family(std::istream& is);

    /// One principal cube per line: id level index generation bucket kind
    /// parent, with parent the id of the parent principal cube (-1 at roots).
    void write_forest(std::ostream& os, const PrincipalForest& forest);
}
