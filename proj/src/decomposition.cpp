#include "mixweak/decomposition.hpp"

#include "mixweak/format.hpp"
#include "mixweak/operators.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <limits>
#include <unordered_map>

namespace mixweak
{
    namespace
    {
        void require_base(double a)
        {
            if (!(a > kTwoPowN))
                throw std::invalid_argument("base a must exceed 2^n = 2, got " + format_double(a));
        }

        int kind_rank(CubeKind kind) { return kind == CubeKind::level_cube ? 0 : 1; }

        /// Prefix counts of the cells where a^k < v <= a^(k+1).
        std::vector<Index> level_band_prefix(const Weight& v, double lo, double hi)
        {
            std::vector<Index> prefix(static_cast<std::size_t>(v.size()) + 1, 0);
            for (Index c = 0; c < v.size(); ++c)
                prefix[static_cast<std::size_t>(c) + 1] =
                    prefix[static_cast<std::size_t>(c)] + ((v[c] > lo && v[c] <= hi) ? 1 : 0);
            return prefix;
        }

        bool meets(const std::vector<Index>& prefix, const DyadicInterval& I, int resolution)
        {
            const auto [first, last] = I.cells(resolution);
            return prefix[static_cast<std::size_t>(last)] > prefix[static_cast<std::size_t>(first)];
        }

        /// The k with a^k < x <= a^(k+1).
        int band_of(double x, double a)
        {
            int k = static_cast<int>(std::ceil(std::log(x) / std::log(a))) - 1;
            while (std::pow(a, k) >= x)
                --k;
            while (std::pow(a, k + 1) < x)
                ++k;
            return k;
        }
    }

    std::string to_string(CubeKind kind) { return kind == CubeKind::level_cube ? "level" : "cz"; }

    bool canonical_less(const Cube& a, const Cube& b)
    {
        return std::forward_as_tuple(a.interval, a.generation, kind_rank(a.kind), a.bucket)
               < std::forward_as_tuple(b.interval, b.generation, kind_rank(b.kind), b.bucket);
    }

    void CubeFamily::canonicalize() { std::stable_sort(entries.begin(), entries.end(), canonical_less); }

    void CubeFamily::append(const CubeFamily& other)
    {
        entries.insert(entries.end(), other.entries.begin(), other.entries.end());
        root_boundary = root_boundary || other.root_boundary;
    }

    std::vector<DyadicInterval> maximal_intervals_above(const GridFunction& g, double threshold,
                                                        const DyadicInterval& within)
    {
        std::vector<DyadicInterval> selected;
        std::vector<DyadicInterval> stack{within};
        while (!stack.empty())
        {
            const DyadicInterval I = stack.back();
            stack.pop_back();
            if (g.average(I) > threshold)
            {
                selected.push_back(I);
                continue;
            }
            if (I.level < g.resolution())
            {
                stack.push_back(I.right_child());
                stack.push_back(I.left_child());
            }
        }
        std::sort(selected.begin(), selected.end());
        return selected;
    }

    CubeFamily level_cubes_at(const GridFunction& g, double a, double threshold, int k)
    {
        require_base(a);
        CubeFamily family;
        family.base = a;
        for (const auto& I : maximal_intervals_above(g, threshold))
        {
            family.entries.push_back({I, k, kNoBucket, CubeKind::level_cube, std::nullopt});
            if (I.is_root())
                family.root_boundary = true;
        }
        return family;
    }

    CubeFamily level_cubes(const GridFunction& g, double a, int k) { return level_cubes_at(g, a, std::pow(a, k), k); }

    int bucket_index(double average, double a, int k)
    {
        if (!(a > 1.0))
            throw std::invalid_argument("bucket_index: base must exceed 1, got " + format_double(a));
        if (average < std::pow(a, k))
            return -1;
        int l = std::max(0, static_cast<int>(std::floor(std::log(average) / std::log(a))) - k);
        while (l > 0 && std::pow(a, k + l) > average)
            --l;
        while (std::pow(a, k + l + 1) <= average)
            ++l;
        return l;
    }

    std::map<int, CubeFamily> bucket_by_average(const CubeFamily& family, const Weight& v, double a, int k)
    {
        std::map<int, CubeFamily> buckets;
        for (Cube cube : family.entries)
        {
            cube.bucket = bucket_index(v.data().average(cube.interval), a, k);
            auto& target = buckets[cube.bucket];
            target.base = a;
            target.entries.push_back(cube);
            if (cube.interval.is_root())
                target.root_boundary = family.root_boundary;
        }
        return buckets;
    }

    CubeFamily cz_decompose(const Weight& v, const DyadicInterval& I, double lambda, int generation)
    {
        const double avg = v.data().average(I);
        if (!(avg < lambda))
            throw std::invalid_argument("cz_decompose: need <v>_I < lambda, got <v>_I = " + format_double(avg)
                                        + " and lambda = " + format_double(lambda));
        CubeFamily family;
        for (const auto& sub : maximal_intervals_above(v.data(), lambda, I))
            family.entries.push_back({sub, generation, -1, CubeKind::cz_cube, I});
        return family;
    }

    GenerationRange default_generation_range(const GridFunction& g, const Weight& v, double a)
    {
        require_base(a);
        const double top = std::max(v.data().max_value(), g.max_value());
        GenerationRange range;
        range.first = band_of(v.data().min_value(), a) - 1;
        range.last = top > 0 ? band_of(top, a) + 1 : range.first;
        return range;
    }

    CubeFamily gamma_families(const GridFunction& g, const Weight& v, double a, std::optional<GenerationRange> range)
    {
        require_base(a);
        if (g.resolution() != v.resolution())
            throw std::invalid_argument("gamma_families: g and v have different resolutions");
        const GenerationRange gens = range.value_or(default_generation_range(g, v, a));
        const int J = g.resolution();
        CubeFamily gamma;
        gamma.base = a;
        for (int k = gens.first; k <= gens.last; ++k)
        {
            const double height = std::pow(a, k);
            const auto band = level_band_prefix(v, height, std::pow(a, k + 1));
            if (band.back() == 0)
                continue;
            const CubeFamily level = level_cubes(g, a, k);
            for (const Cube& cube : level.entries)
            {
                const int l = bucket_index(v.data().average(cube.interval), a, k);
                gamma.root_boundary = gamma.root_boundary || cube.interval.is_root();
                if (l >= 0)
                {
                    if (meets(band, cube.interval, J))
                        gamma.entries.push_back({cube.interval, k, l, CubeKind::level_cube, std::nullopt});
                    continue;
                }
                for (const Cube& sub : cz_decompose(v, cube.interval, height, k).entries)
                    if (meets(band, sub.interval, J))
                        gamma.entries.push_back(sub);
            }
        }
        gamma.canonicalize();
        return gamma;
    }

    SparsityReport sparsity_check(const CubeFamily& family, double theta)
    {
        if (!(theta > 0.0 && theta < 1.0))
            throw std::invalid_argument("sparsity_check: theta must lie in (0, 1)");
        SparsityReport report;
        if (family.empty())
            return report;
        int depth = 0;
        for (const auto& c : family.entries)
            depth = std::max(depth, c.interval.level);

        // Covered measure in units of 2^-depth, accumulated bottom-up.
        std::vector<char> member(static_cast<std::size_t>(tree_size(depth)), 0);
        for (const auto& c : family.entries)
            member[static_cast<std::size_t>(c.interval.node_id())] = 1;
        std::vector<std::int64_t> covered(member.size(), 0);
        for (int level = depth; level >= 0; --level)
        {
            const std::int64_t unit = std::int64_t{1} << (depth - level);
            for (std::int64_t i = 0; i < (std::int64_t{1} << level); ++i)
            {
                const DyadicInterval I(level, i);
                const auto id = static_cast<std::size_t>(I.node_id());
                if (member[id])
                    covered[id] = unit;
                else if (level < depth)
                    covered[id] = covered[static_cast<std::size_t>(I.left_child().node_id())]
                                  + covered[static_cast<std::size_t>(I.right_child().node_id())];
            }
        }
        for (std::size_t id = 0; id < member.size(); ++id)
        {
            if (!member[id])
                continue;
            const DyadicInterval Q = DyadicInterval::from_node_id(static_cast<std::int64_t>(id));
            if (Q.level == depth)
                continue;
            const std::int64_t inside = covered[static_cast<std::size_t>(Q.left_child().node_id())]
                                        + covered[static_cast<std::size_t>(Q.right_child().node_id())];
            const double fraction =
                static_cast<double>(inside) / static_cast<double>(std::int64_t{1} << (depth - Q.level));
            if (fraction > report.worst_fraction || !report.worst_cube)
            {
                report.worst_fraction = fraction;
                report.worst_cube = Q;
            }
        }
        report.pass = report.worst_fraction <= theta;
        return report;
    }

    NestingReport check_nesting(const CubeFamily& family)
    {
        struct Span
        {
            std::size_t min_entry;
            std::size_t max_entry;
        };
        std::unordered_map<std::int64_t, Span> by_node;
        for (std::size_t i = 0; i < family.entries.size(); ++i)
        {
            const Cube& c = family.entries[i];
            auto [it, inserted] = by_node.try_emplace(c.interval.node_id(), Span{i, i});
            if (!inserted)
            {
                if (c.generation < family.entries[it->second.min_entry].generation)
                    it->second.min_entry = i;
                if (c.generation > family.entries[it->second.max_entry].generation)
                    it->second.max_entry = i;
            }
        }
        NestingReport report;
        for (std::size_t i = 0; i < family.entries.size(); ++i)
        {
            const Cube& inner = family.entries[i];
            for (int level = inner.interval.level - 1; level >= 0; --level)
            {
                const auto it = by_node.find(inner.interval.ancestor(level).node_id());
                if (it == by_node.end())
                    continue;
                const Cube& outer = family.entries[it->second.max_entry];
                if (!(inner.generation > outer.generation))
                {
                    report.pass = false;
                    report.outer = outer;
                    report.inner = inner;
                    return report;
                }
            }
        }
        return report;
    }

    double geometric_delta(const Weight& v, double cprime)
    {
        if (!(cprime > 0.0))
            throw std::invalid_argument("geometric_delta: c' must be positive");
        return 1.0 / (cprime * v.ainf());
    }

    PrincipalForest principal_cubes(const CubeFamily& family, const Weight& u, const PrincipalMode& mode)
    {
        if (mode.kind == PrincipalMode::Kind::geometric)
        {
            if (!(mode.delta > 0.0))
                throw std::invalid_argument("principal_cubes: geometric mode needs delta > 0");
            require_base(mode.a);
        }
        PrincipalForest forest;
        forest.family = family;
        forest.family.canonicalize();
        forest.mode = mode;
        const auto& entries = forest.family.entries;
        forest.pi.assign(entries.size(), 0);

        std::unordered_map<std::int64_t, std::vector<std::size_t>> principal_at;
        std::unordered_map<std::size_t, std::optional<std::size_t>> parent_of;
        for (std::size_t e = 0; e < entries.size(); ++e)
        {
            const Cube& cube = entries[e];
            std::optional<std::size_t> owner;
            for (int level = cube.interval.level; level >= 0 && !owner; --level)
            {
                const auto it = principal_at.find(cube.interval.ancestor(level).node_id());
                if (it != principal_at.end())
                    owner = it->second.back();
            }

            bool principal = !owner.has_value();
            if (owner)
            {
                const Cube& top = entries[*owner];
                const double here = u.data().average(cube.interval);
                const double there = u.data().average(top.interval);
                double factor = 2.0;
                if (mode.kind == PrincipalMode::Kind::geometric)
                    factor = std::pow(mode.a, (cube.generation - top.generation) * mode.delta);
                principal = here > factor * there;
            }

            if (principal)
            {
                forest.pi[e] = e;
                forest.nodes.push_back(e);
                parent_of[e] = owner;
                principal_at[cube.interval.node_id()].push_back(e);
            }
            else
            {
                forest.pi[e] = *owner;
            }
        }
        forest.parent.reserve(forest.nodes.size());
        for (std::size_t node : forest.nodes)
            forest.parent.push_back(parent_of[node]);
        return forest;
    }

    PrincipalProfile principal_sum_profile(const PrincipalForest& forest, const Weight& u)
    {
        const int J = u.resolution();
        GridFunction::Values sum = GridFunction::Values::Zero(u.size());
        for (std::size_t node : forest.nodes)
        {
            const Cube& cube = forest.family.entries[node];
            const DyadicInterval host = cube.host_or_self();
            const double height = measure(u.data(), cube.interval) / host.length();
            const auto [first, last] = host.cells(J);
            sum.segment(first, last - first) += height;
        }
        PrincipalProfile profile{GridFunction(J, sum), 0.0, 0};
        const auto ratio = sum / u.data().values();
        profile.max_ratio = ratio.maxCoeff(&profile.argmax);
        return profile;
    }

    DecayTable decay_profile(const Weight& u, const Weight& v, const GridFunction& g, double a, double embedding_bound)
    {
        require_base(a);
        if (u.resolution() != v.resolution() || g.resolution() != v.resolution())
            throw std::invalid_argument("decay_profile: u, v and g must share a resolution");
        const int J = g.resolution();
        const CubeFamily gamma = gamma_families(g, v, a);
        const GridFunction maximal = dyadic_maximal(g);

        // band[c]: the k of the set E_k containing cell c, or a sentinel.
        constexpr int kOutside = std::numeric_limits<int>::min();
        std::vector<int> band(static_cast<std::size_t>(g.size()), kOutside);
        for (Index c = 0; c < g.size(); ++c)
        {
            const double ratio = maximal[c] / v[c];
            if (ratio > 1.0 && ratio <= 2.0)
                band[static_cast<std::size_t>(c)] = band_of(v[c], a);
        }

        const EmbeddingResult embedding = find_embedding_exponent(v, embedding_bound);
        DecayTable table;
        table.q = embedding.p.value_or(EmbeddingGrid{}.p_max);
        table.v_aq = embedding.ap_at_p;

        std::map<int, DecayRow> rows;
        for (const Cube& cube : gamma.entries)
        {
            if (cube.bucket < 0)
                continue;
            const auto [first, last] = cube.interval.cells(J);
            double in_set = 0.0;
            double total = 0.0;
            Index count = 0;
            for (Index c = first; c < last; ++c)
            {
                total += u[c];
                if (band[static_cast<std::size_t>(c)] == cube.generation)
                {
                    in_set += u[c];
                    ++count;
                }
            }
            DecayRow& row = rows[cube.bucket];
            row.bucket = cube.bucket;
            row.cube_count += 1;
            row.max_u_ratio = std::max(row.max_u_ratio, in_set / total);
            row.max_lebesgue_fraction =
                std::max(row.max_lebesgue_fraction, static_cast<double>(count) / static_cast<double>(last - first));
        }
        for (auto& [l, row] : rows)
        {
            row.intermediate_bound =
                std::pow(a, (1.0 - l) / (table.q - 1.0)) * std::pow(table.v_aq, 1.0 / (table.q - 1.0));
            table.rows.push_back(row);
        }
        return table;
    }

    //---------------//
    // Text formats  //
    //---------------//

    void write_family(std::ostream& os, const CubeFamily& family)
    {
        os << "# mixweak-family v1\n";
        os << "# base " << format_double(family.base) << "\n";
        os << "# root_boundary " << (family.root_boundary ? 1 : 0) << "\n";
        os << "# level index generation bucket kind host\n";
        for (const Cube& c : family.entries)
        {
            os << c.interval.level << ' ' << c.interval.index << ' ' << c.generation << ' ' << c.bucket << ' '
               << to_string(c.kind) << ' ' << (c.host ? c.host->node_id() : -1) << '\n';
        }
    }

    CubeFamily read_family(std::istream& is)
    {
        CubeFamily family;
        std::string line;
        if (!std::getline(is, line) || line != "# mixweak-family v1")
            throw std::runtime_error("read_family: missing header");
        std::size_t line_no = 1;
        while (std::getline(is, line))
        {
            ++line_no;
            if (line.empty())
                continue;
            std::istringstream fields(line);
            if (line.front() == '#')
            {
                std::string hash, key;
                fields >> hash >> key;
                if (key == "base")
                    fields >> family.base;
                else if (key == "root_boundary")
                {
                    int flag = 0;
                    fields >> flag;
                    family.root_boundary = flag != 0;
                }
                continue;
            }
            int level = 0;
            std::int64_t index = 0, host = -1;
            Cube c;
            std::string kind;
            if (!(fields >> level >> index >> c.generation >> c.bucket >> kind >> host))
                throw std::runtime_error("read_family: malformed line " + std::to_string(line_no));
            c.interval = DyadicInterval(level, index);
            if (kind == "level")
                c.kind = CubeKind::level_cube;
            else if (kind == "cz")
                c.kind = CubeKind::cz_cube;
            else
                throw std::runtime_error("read_family: unknown kind '" + kind + "' on line " + std::to_string(line_no));
            if (host >= 0)
                c.host = DyadicInterval::from_node_id(host);
            family.entries.push_back(c);
        }
        return family;
    }

    void write_forest(std::ostream& os, const PrincipalForest& forest)
    {
        os << "# mixweak-forest v1\n";
        os << "# base " << format_double(forest.family.base) << "\n";
        if (forest.mode.kind == PrincipalMode::Kind::factor2)
            os << "# mode factor2\n";
        else
            os << "# mode geometric delta " << format_double(forest.mode.delta) << "\n";
        os << "# id level index generation bucket kind parent\n";
        std::unordered_map<std::size_t, std::size_t> id_of;
        for (std::size_t i = 0; i < forest.nodes.size(); ++i)
            id_of[forest.nodes[i]] = i;
        for (std::size_t i = 0; i < forest.nodes.size(); ++i)
        {
            const Cube& c = forest.family.entries[forest.nodes[i]];
            const auto& parent = forest.parent[i];
            os << i << ' ' << c.interval.level << ' ' << c.interval.index << ' ' << c.generation << ' ' << c.bucket
               << ' ' << to_string(c.kind) << ' ' << (parent ? static_cast<std::int64_t>(id_of.at(*parent)) : -1)
               << '\n';
        }
    }
}
