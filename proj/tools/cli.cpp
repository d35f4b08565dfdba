#include "mixweak/cli.hpp"

#include "mixweak/decomposition.hpp"
#include "mixweak/format.hpp"
#include "mixweak/operators.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace mixweak::cli
{
    using nlohmann::json;
    namespace fs = std::filesystem;

    namespace
    {
        //----------------//
        // Config reading //
        //----------------//

        std::uint64_t splitmix64(std::uint64_t x)
        {
            x += 0x9E3779B97F4A7C15ull;
            x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
            x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
            return x ^ (x >> 31);
        }

        /// A JSON object together with its dotted path, for field-level errors.
        class Node
        {
        public:
            Node(const json& j, std::string path) : j_(j), path_(std::move(path))
            {
                if (!j_.is_object())
                    throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
            }

            const std::string& path() const { return path_; }
            std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
            bool has(const std::string& key) const { return j_.contains(key); }
            const json& raw(const std::string& key) const { return j_.at(key); }

            Node child(const std::string& key) const
            {
                if (!has(key))
                    throw ConfigError(field(key), "missing");
                return {j_.at(key), field(key)};
            }

            double number(const std::string& key, std::optional<double> fallback = std::nullopt) const
            {
                if (!has(key))
                {
                    if (fallback)
                        return *fallback;
                    throw ConfigError(field(key), "missing");
                }
                const json& x = j_.at(key);
                if (!x.is_number())
                    throw ConfigError(field(key), "expected a number");
                const double d = x.get<double>();
                if (!std::isfinite(d))
                    throw ConfigError(field(key), "must be finite");
                return d;
            }

            int integer(const std::string& key, std::optional<int> fallback = std::nullopt) const
            {
                if (!has(key))
                {
                    if (fallback)
                        return *fallback;
                    throw ConfigError(field(key), "missing");
                }
                const json& x = j_.at(key);
                if (!x.is_number_integer())
                    throw ConfigError(field(key), "expected an integer");
                return x.get<int>();
            }

            std::optional<std::uint64_t> seed(const std::string& key) const
            {
                if (!has(key))
                    return std::nullopt;
                const json& x = j_.at(key);
                if (!x.is_number_unsigned() && !(x.is_number_integer() && x.get<std::int64_t>() >= 0))
                    throw ConfigError(field(key), "expected a nonnegative integer seed");
                return x.get<std::uint64_t>();
            }

            std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) const
            {
                if (!has(key))
                {
                    if (fallback)
                        return *fallback;
                    throw ConfigError(field(key), "missing");
                }
                const json& x = j_.at(key);
                if (!x.is_string())
                    throw ConfigError(field(key), "expected a string");
                return x.get<std::string>();
            }

            bool flag(const std::string& key, bool fallback) const
            {
                if (!has(key))
                    return fallback;
                const json& x = j_.at(key);
                if (!x.is_boolean())
                    throw ConfigError(field(key), "expected true or false");
                return x.get<bool>();
            }

            std::vector<double> numbers(const std::string& key) const
            {
                std::vector<double> out;
                if (!has(key))
                    return out;
                const json& x = j_.at(key);
                if (!x.is_array())
                    throw ConfigError(field(key), "expected an array of numbers");
                for (std::size_t i = 0; i < x.size(); ++i)
                {
                    if (!x[i].is_number() || !std::isfinite(x[i].get<double>()))
                        throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a finite number");
                    out.push_back(x[i].get<double>());
                }
                return out;
            }

        private:
            const json& j_;
            std::string path_;
        };

        /// Seed for the random element at `path`: its own seed, or one derived
        /// from the top-level seed. Randomness without any seed is rejected.
        std::uint64_t resolve_seed(const Node& node, const std::string& key, const std::optional<std::uint64_t>& base,
                                   std::uint64_t salt)
        {
            if (auto own = node.seed(key))
                return *own;
            if (!base)
                throw ConfigError(node.field(key), "random element needs a seed (here, at the top level, or via --seed)");
            return splitmix64(*base ^ splitmix64(salt));
        }

        std::uint64_t path_salt(const std::string& path)
        {
            std::uint64_t h = 1469598103934665603ull;
            for (unsigned char c : path)
                h = (h ^ c) * 1099511628211ull;
            return h;
        }

        WeightSpec parse_weight(const Node& n)
        {
            const std::string kind = n.text("kind");
            if (kind == "constant")
            {
                const double c = n.number("value", 1.0);
                if (!(c > 0.0))
                    throw ConfigError(n.field("value"), "must be positive");
                return WeightSpec::step({c});
            }
            if (kind == "power")
            {
                const double alpha = n.number("alpha");
                if (!(alpha < 1.0))
                    throw ConfigError(n.field("alpha"), "must be below 1 for local integrability");
                const double center = n.number("center", 0.0);
                if (!(center >= 0.0 && center <= 1.0))
                    throw ConfigError(n.field("center"), "must lie in [0, 1]");
                return WeightSpec::power(alpha, center);
            }
            if (kind == "product_of_powers")
            {
                if (!n.has("factors") || !n.raw("factors").is_array() || n.raw("factors").empty())
                    throw ConfigError(n.field("factors"), "expected a nonempty array");
                std::vector<PowerFactor> factors;
                for (std::size_t i = 0; i < n.raw("factors").size(); ++i)
                {
                    const Node f(n.raw("factors")[i], n.field("factors") + "[" + std::to_string(i) + "]");
                    const double alpha = f.number("alpha");
                    if (!(alpha < 1.0))
                        throw ConfigError(f.field("alpha"), "must be below 1 for local integrability");
                    factors.push_back({alpha, f.number("center", 0.0)});
                }
                return WeightSpec::product_of_powers(std::move(factors));
            }
            if (kind == "step")
            {
                auto values = n.numbers("values");
                if (values.empty())
                    throw ConfigError(n.field("values"), "expected at least one value");
                for (std::size_t i = 0; i < values.size(); ++i)
                    if (!(values[i] > 0.0))
                        throw ConfigError(n.field("values") + "[" + std::to_string(i) + "]", "weights must be positive");
                auto breakpoints = n.numbers("breakpoints");
                if (!breakpoints.empty() && breakpoints.size() + 1 != values.size())
                    throw ConfigError(n.field("breakpoints"), "need exactly one fewer breakpoint than values");
                return WeightSpec::step(std::move(values), std::move(breakpoints));
            }
            if (kind == "explicit_cells")
            {
                auto values = n.numbers("values");
                for (std::size_t i = 0; i < values.size(); ++i)
                    if (!(values[i] > 0.0))
                        throw ConfigError(n.field("values") + "[" + std::to_string(i) + "]", "weights must be positive");
                return WeightSpec::explicit_cells(std::move(values));
            }
            throw ConfigError(n.field("kind"), "unknown weight kind '" + kind + "'");
        }

        void parse_function(const Node& n, const std::optional<std::uint64_t>& base_seed, std::vector<FunctionSpec>& out)
        {
            const std::string kind = n.text("kind");
            try
            {
                if (kind == "indicator")
                {
                    out.push_back(FunctionSpec::indicator(n.number("a"), n.number("b")));
                }
                else if (kind == "point_mass")
                {
                    out.push_back(FunctionSpec::point_mass(n.number("center"), n.number("width")));
                }
                else if (kind == "step")
                {
                    auto values = n.numbers("values");
                    if (values.empty())
                        throw ConfigError(n.field("values"), "expected at least one value");
                    for (std::size_t i = 0; i < values.size(); ++i)
                        if (!(values[i] >= 0.0))
                            throw ConfigError(n.field("values") + "[" + std::to_string(i) + "]", "must be nonnegative");
                    auto breakpoints = n.numbers("breakpoints");
                    if (!breakpoints.empty() && breakpoints.size() + 1 != values.size())
                        throw ConfigError(n.field("breakpoints"), "need exactly one fewer breakpoint than values");
                    out.push_back(FunctionSpec::step(std::move(values), std::move(breakpoints)));
                }
                else if (kind == "random_step")
                {
                    const auto seed = resolve_seed(n, "seed", base_seed, path_salt(n.path()));
                    out.push_back(FunctionSpec::random_step(seed, n.integer("level", 6), n.number("zero_fraction", 0.25)));
                }
                else if (kind == "random_corpus")
                {
                    const auto seed = resolve_seed(n, "seed", base_seed, path_salt(n.path()));
                    const int count = n.integer("count");
                    if (count < 1 || count > 100000)
                        throw ConfigError(n.field("count"), "must lie in [1, 100000]");
                    for (auto& spec : random_corpus(seed, static_cast<std::size_t>(count), n.integer("level", 8)))
                        out.push_back(std::move(spec));
                }
                else
                {
                    throw ConfigError(n.field("kind"), "unknown function kind '" + kind + "'");
                }
            }
            catch (const std::invalid_argument& e)
            {
                throw ConfigError(n.path(), e.what());
            }
        }

        const std::set<std::string>& known_checks()
        {
            static const std::set<std::string> names{"mixed", "multilinear", "cf", "rubio", "decomposition",
                                                     "constants", "embedding"};
            return names;
        }

        OperatorEntry parse_operator(const Node& n, const std::optional<std::uint64_t>& base_seed)
        {
            OperatorEntry op;
            static const std::map<std::string, OperatorEntry::Kind> kinds{
                {"maximal", OperatorEntry::Kind::maximal},
                {"haar", OperatorEntry::Kind::haar},
                {"transfer", OperatorEntry::Kind::transfer},
                {"vector", OperatorEntry::Kind::vector},
                {"product", OperatorEntry::Kind::product},
            };
            const std::string kind = n.text("kind", "maximal");
            const auto it = kinds.find(kind);
            if (it == kinds.end())
                throw ConfigError(n.field("kind"), "unknown operator '" + kind + "'");
            op.kind = it->second;

            const std::string eps = n.text("eps", "signs");
            if (eps != "signs" && eps != "uniform")
                throw ConfigError(n.field("eps"), "expected 'signs' or 'uniform'");
            op.uniform_eps = eps == "uniform";
            if (op.kind == OperatorEntry::Kind::haar || op.kind == OperatorEntry::Kind::transfer)
                op.eps_seed = resolve_seed(n, "eps_seed", base_seed, path_salt(n.field("eps_seed")));
            else if (auto s = n.seed("eps_seed"))
                op.eps_seed = s;

            op.q = n.number("q", 2.0);
            if (!(op.q > 1.0))
                throw ConfigError(n.field("q"), "must exceed 1");
            op.p0 = n.number("p0", 1.0);
            if (!(op.p0 > 0.0))
                throw ConfigError(n.field("p0"), "must be positive");
            op.m = n.integer("m", 2);
            if (op.m < 1 || op.m > 8)
                throw ConfigError(n.field("m"), "must lie in [1, 8]");
            return op;
        }

        SweepRanges parse_sweep(const Node& n, int max_resolution)
        {
            SweepRanges s;
            s.beta_u = n.numbers("beta_u");
            s.beta_v = n.numbers("beta_v");
            for (const auto* key : {"beta_u", "beta_v"})
                for (double b : n.numbers(key))
                    if (!(b < 1.0))
                        throw ConfigError(n.field(key), "power exponents must be below 1");
            for (double J : n.numbers("J"))
            {
                if (J != std::floor(J) || J < 1 || J > max_resolution)
                    throw ConfigError(n.field("J"), "resolutions must be integers in [1, " + std::to_string(max_resolution) + "]");
                s.resolutions.push_back(static_cast<int>(J));
            }
            s.bases = n.numbers("a");
            for (double a : s.bases)
                if (!(a > 2.0))
                    throw ConfigError(n.field("a"), "base must exceed 2");
            const int cap = n.integer("max_rows", 4096);
            if (cap < 1)
                throw ConfigError(n.field("max_rows"), "must be positive");
            s.max_rows = static_cast<std::size_t>(cap);
            return s;
        }
    }

    bool ScenarioConfig::has_check(const std::string& check) const
    {
        return std::find(checks.begin(), checks.end(), check) != checks.end();
    }

    ScenarioConfig parse_config(const std::string& text, const Overrides& overrides)
    {
        json doc;
        try
        {
            doc = json::parse(text);
        }
        catch (const json::parse_error& e)
        {
            throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
        }
        const Node root(doc, "");

        ScenarioConfig c;
        c.schema_version = root.integer("schema_version");
        if (c.schema_version != kSchemaVersion)
            throw ConfigError("schema_version", "unsupported version " + std::to_string(c.schema_version)
                                                    + " (expected " + std::to_string(kSchemaVersion) + ")");
        c.name = root.text("name", "scenario");
        if (c.name.empty() || c.name.find_first_of(",/\\\"\n ") != std::string::npos)
            throw ConfigError("name", "must be nonempty without spaces, commas, quotes or slashes");

        c.seed = root.seed("seed");
        if (overrides.seed)
            c.seed = overrides.seed;

        c.max_resolution = root.integer("max_resolution", 16);
        if (c.max_resolution < 1 || c.max_resolution > 20)
            throw ConfigError("max_resolution", "must lie in [1, 20]");
        c.resolution = root.integer("J");
        if (c.resolution < 1 || c.resolution > c.max_resolution)
            throw ConfigError("J", "must lie in [1, " + std::to_string(c.max_resolution) + "]");
        c.base = root.number("a", 4.0);
        if (!(c.base > 2.0))
            throw ConfigError("a", "base must exceed 2^n = 2");
        c.p = root.number("p", 2.0);
        if (!(c.p > 1.0))
            throw ConfigError("p", "must exceed 1");

        const Node weights = root.child("weights");
        c.u = parse_weight(weights.child("u"));
        c.v = parse_weight(weights.child("v"));
        for (const auto& [key, spec] : {std::pair{"u", &c.u}, std::pair{"v", &c.v}})
            if (spec->kind == WeightSpec::Kind::explicit_cells
                && spec->values.size() != static_cast<std::size_t>(std::size_t{1} << c.resolution))
                throw ConfigError(std::string("weights.") + key + ".values", "expected 2^J cell values");

        if (!root.has("functions") || !root.raw("functions").is_array() || root.raw("functions").empty())
            throw ConfigError("functions", "expected a nonempty array");
        for (std::size_t i = 0; i < root.raw("functions").size(); ++i)
            parse_function(Node(root.raw("functions")[i], "functions[" + std::to_string(i) + "]"), c.seed, c.functions);

        if (root.has("operator"))
            c.op = parse_operator(root.child("operator"), c.seed);

        const std::string rhs = root.text("rhs", "uv");
        if (rhs == "uv")
            c.rhs = RightHandMeasure::uv;
        else if (rhs == "v_maximal_u")
            c.rhs = RightHandMeasure::v_maximal_u;
        else
            throw ConfigError("rhs", "expected 'uv' or 'v_maximal_u'");

        if (root.has("checks"))
        {
            const json& checks = root.raw("checks");
            if (!checks.is_array())
                throw ConfigError("checks", "expected an array of names");
            for (std::size_t i = 0; i < checks.size(); ++i)
            {
                const std::string field = "checks[" + std::to_string(i) + "]";
                if (!checks[i].is_string() || !known_checks().contains(checks[i].get<std::string>()))
                    throw ConfigError(field, "unknown check");
                c.checks.push_back(checks[i].get<std::string>());
            }
        }
        else
        {
            c.checks = {"mixed"};
        }
        if ((c.has_check("cf")) && !c.op.eps_seed)
            c.op.eps_seed = resolve_seed(root.has("operator") ? root.child("operator") : root, "eps_seed", c.seed,
                                         path_salt("operator.eps_seed"));

        c.tau = overrides.tau.value_or(root.number("tau", kDefaultTau));
        if (!(c.tau > 0.0))
            throw ConfigError("tau", "must be positive");

        if (root.has("cprime"))
        {
            const Node cp = root.child("cprime");
            c.rubio_cprime = cp.number("rubio", kDefaultRubioCPrime);
            c.geometric_cprime = cp.number("geometric", kDefaultGeometricCPrime);
        }
        if (overrides.cprime)
            c.rubio_cprime = *overrides.cprime;
        if (!(c.rubio_cprime > 0.0))
            throw ConfigError("cprime.rubio", "must be positive");
        if (!(c.geometric_cprime > 0.0))
            throw ConfigError("cprime.geometric", "must be positive");

        if (root.has("rubio"))
        {
            const Node r = root.child("rubio");
            c.rubio_terms = r.integer("terms", 64);
            c.rprime_factor = r.number("rprime_factor", kDefaultRPrimeFactor);
            if (c.rubio_terms < 1 || c.rubio_terms > 4096)
                throw ConfigError("rubio.terms", "must lie in [1, 4096]");
            if (!(c.rprime_factor > 0.0))
                throw ConfigError("rubio.rprime_factor", "must be positive");
        }

        if (root.has("sweep"))
            c.sweep = parse_sweep(root.child("sweep"), c.max_resolution);

        if (root.has("output"))
        {
            const Node o = root.child("output");
            c.output.csv = o.flag("csv", true);
            c.output.json = o.flag("json", true);
            c.output.plots = o.flag("plots", true);
        }

        const int threads = root.integer("threads", 1);
        if (threads < 1 || threads > 256)
            throw ConfigError("threads", "must lie in [1, 256]");
        c.threads = overrides.threads.value_or(static_cast<unsigned>(threads));
        if (c.threads < 1)
            throw ConfigError("threads", "must be positive");
        return c;
    }

    ScenarioConfig load_config(const fs::path& path, const Overrides& overrides)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("--config", "cannot open " + path.string());
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse_config(buffer.str(), overrides);
    }

    namespace
    {
        //---------------//
        // Output files  //
        //---------------//

        std::string num(double x) { return std::isnan(x) ? std::string() : format_double(x); }
        std::string yes_no(bool b) { return b ? "true" : "false"; }

        json json_number(double x)
        {
            if (std::isnan(x))
                return nullptr;
            if (std::isinf(x))
                return x > 0 ? "inf" : "-inf";
            return x;
        }

        class Artifacts
        {
        public:
            explicit Artifacts(fs::path root) : root_(std::move(root)) {}

            void add(const std::string& relative, std::string content) { files_[relative] = std::move(content); }

            void flush() const
            {
                for (const auto& [relative, content] : files_)
                {
                    const fs::path target = root_ / relative;
                    fs::create_directories(target.parent_path());
                    std::ofstream out(target, std::ios::binary);
                    if (!out)
                        throw std::runtime_error("cannot write " + target.string());
                    out << content;
                }
            }

        private:
            fs::path root_;
            std::map<std::string, std::string> files_;
        };

        std::string csv(const std::string& header, const std::vector<std::string>& rows)
        {
            std::string out = header + "\n";
            for (const auto& r : rows)
                out += r + "\n";
            return out;
        }

        std::string join(std::initializer_list<std::string> fields)
        {
            std::string out;
            for (const auto& f : fields)
            {
                if (!out.empty())
                    out += ',';
                out += f;
            }
            return out;
        }

        std::string padded(std::size_t i)
        {
            std::string s = std::to_string(i);
            return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
        }

        json to_json(const RatioReport& r)
        {
            return json{{"scenario_id", r.scenario_id},
                        {"J", r.resolution},
                        {"op", r.op},
                        {"lhs", json_number(r.lhs)},
                        {"rhs", json_number(r.rhs)},
                        {"ratio", json_number(r.ratio)},
                        {"characteristics",
                         {{"u_a1", json_number(r.chars.u_a1)},
                          {"u_ainf", json_number(r.chars.u_ainf)},
                          {"v_a1", json_number(r.chars.v_a1)},
                          {"v_ap", json_number(r.chars.v_ap)},
                          {"v_ainf", json_number(r.chars.v_ainf)},
                          {"p", json_number(r.chars.p)},
                          {"q", json_number(r.chars.q)},
                          {"u_equals_v", r.chars.u_equals_v}}},
                        {"shape", json_number(r.shape)},
                        {"margin", json_number(r.margin)}};
        }

        std::string profile_data(const GridFunction& f, const GridFunction& mu)
        {
            std::string out = "# t t*mu{f>=t}\n";
            for (const auto& p : distribution_profile(f, mu))
                out += format_double(p.t) + " " + format_double(p.weak_value) + "\n";
            return out;
        }

        //---------------//
        // Scenario data //
        //---------------//

        struct Scenario
        {
            Weight u;
            Weight v;
            std::vector<GridFunction> functions;
            std::vector<std::string> ids;
        };

        Scenario materialize(const ScenarioConfig& c, const WeightSpec& u, const WeightSpec& v, int J,
                             const std::string& prefix)
        {
            Scenario s{make_weight(u, J), make_weight(v, J), {}, {}};
            for (std::size_t i = 0; i < c.functions.size(); ++i)
            {
                s.functions.push_back(make_function(c.functions[i], J));
                s.ids.push_back(prefix + "/f" + padded(i));
            }
            return s;
        }

        SignPattern sign_pattern(const ScenarioConfig& c, int J)
        {
            if (!c.op.eps_seed)
                throw ConfigError("operator.eps_seed", "a Haar multiplier needs a seed");
            return c.op.uniform_eps ? SignPattern::random_uniform(J, *c.op.eps_seed)
                                    : SignPattern::random_signs(J, *c.op.eps_seed);
        }

        struct Failures
        {
            std::vector<std::string> items;
            void add(std::string what) { items.push_back(std::move(what)); }
            bool empty() const { return items.empty(); }
        };

        //-----------------//
        // Subcommands     //
        //-----------------//

        void run_constants(const ScenarioConfig& c, const Scenario& s, Artifacts& out, Failures& failures,
                           bool embedding_only)
        {
            std::vector<std::string> rows;
            std::vector<std::string> embedding_rows;
            for (const auto& [name, w] : {std::pair<std::string, const Weight*>{"u", &s.u}, {"v", &s.v}})
            {
                const auto emb = find_embedding_exponent(*w, std::numbers::e);
                embedding_rows.push_back(join({name, std::to_string(w->resolution()), num(std::numbers::e),
                                               emb.p ? num(*emb.p) : std::string(), num(emb.ap_at_p),
                                               num(emb.exp_ainf)}));
                if (embedding_only)
                    continue;
                const double r = reverse_holder_exponent(*w, c.tau);
                const auto rh = check_reverse_holder(*w, r);
                const double eps = measure_decay_exponent(*w, c.tau);
                const auto md = check_measure_decay(*w, eps);
                if (!rh.pass)
                    failures.add("reverse Hoelder fails for " + name + " on " + to_string(rh.worst_interval));
                if (!md.pass)
                    failures.add("set-ratio decay fails for " + name + " on " + to_string(md.worst_interval));
                rows.push_back(join({name, std::to_string(w->resolution()), num(w->a1()), num(w->ap(c.p)), num(c.p),
                                     num(w->ainf()), num(r), num(rh.worst_ratio), yes_no(rh.pass), num(eps),
                                     num(md.worst_ratio), yes_no(md.pass), emb.p ? num(*emb.p) : std::string(),
                                     num(emb.ap_at_p), num(emb.exp_ainf)}));
            }
            if (!embedding_only)
                out.add("constants.csv",
                        csv("weight,J,a1,ap,p,ainf,rh_exponent,rh_worst_ratio,rh_pass,decay_exponent,"
                            "decay_worst_ratio,decay_pass,embedding_p,embedding_ap,exp_ainf",
                            rows));
            out.add("embedding.csv", csv("weight,J,bound,p,ap_at_p,exp_ainf", embedding_rows));
        }

        void run_maximal(const ScenarioConfig& c, const Scenario& s, Artifacts& out, Failures& failures)
        {
            const GridFunction uv = product(s.u.data(), s.v.data());
            std::vector<std::string> rows;
            for (std::size_t i = 0; i < s.functions.size(); ++i)
            {
                const auto& f = s.functions[i];
                const auto m = dyadic_maximal(f);
                const auto sh = shifted_maximal(f);
                const auto pm = perturbed_maximal(f, s.v.data());
                for (Index cell = 0; cell < f.size(); ++cell)
                {
                    if (m[cell] < f[cell])
                        failures.add(s.ids[i] + ": maximal function below f at cell " + std::to_string(cell));
                    if (sh[cell] < m[cell])
                        failures.add(s.ids[i] + ": shifted maximal below dyadic at cell " + std::to_string(cell));
                    rows.push_back(join({s.ids[i], std::to_string(cell), num(f[cell]), num(m[cell]), num(sh[cell]),
                                         num(pm[cell])}));
                }
                if (c.output.plots)
                    out.add("plots/distribution_" + s.ids[i].substr(s.ids[i].rfind('/') + 1) + ".dat",
                            profile_data(pm, uv));
            }
            out.add("maximal.csv", csv("scenario_id,cell,f,maximal,shifted,perturbed", rows));
        }

        void run_cz(const ScenarioConfig& c, const Scenario& s, Artifacts& out, Failures& failures)
        {
            const double theta = kTwoPowN / c.base;
            std::vector<std::string> rows;
            std::vector<std::string> decay_rows;
            for (std::size_t i = 0; i < s.functions.size(); ++i)
            {
                const std::string& id = s.ids[i];
                const std::string tag = id.substr(id.rfind('/') + 1);
                const GridFunction g = product(s.functions[i], s.v.data());
                const CubeFamily family = gamma_families(g, s.v, c.base);
                const auto sparse = sparsity_check(family, theta);
                const auto nest = check_nesting(family);
                const auto mode = PrincipalMode::geometric(geometric_delta(s.v, c.geometric_cprime), c.base);
                const auto forest = principal_cubes(family, s.u, mode);
                const auto profile = principal_sum_profile(forest, s.u);
                if (!sparse.pass)
                    failures.add(id + ": Gamma family is not " + format_double(theta) + "-sparse at "
                                 + to_string(*sparse.worst_cube));
                if (!nest.pass)
                    failures.add(id + ": nested cubes without increasing generation");

                std::ostringstream fam;
                write_family(fam, family);
                out.add("families/" + tag + ".txt", fam.str());
                std::ostringstream fo;
                write_forest(fo, forest);
                out.add("forests/" + tag + ".txt", fo.str());

                rows.push_back(join({id, std::to_string(family.size()), yes_no(family.root_boundary),
                                     yes_no(sparse.pass), num(sparse.worst_fraction), yes_no(nest.pass),
                                     std::to_string(forest.nodes.size()), num(profile.max_ratio)}));

                const auto table = decay_profile(s.u, s.v, g, c.base);
                for (const auto& row : table.rows)
                {
                    if (row.max_u_ratio > 1.0)
                        failures.add(id + ": decay ratio above 1 in bucket " + std::to_string(row.bucket));
                    decay_rows.push_back(join({id, std::to_string(row.bucket), std::to_string(row.cube_count),
                                               num(row.max_u_ratio), num(row.max_lebesgue_fraction),
                                               num(row.intermediate_bound), num(table.q), num(table.v_aq)}));
                }
            }
            out.add("cz.csv", csv("scenario_id,cubes,root_boundary,sparsity_pass,worst_fraction,nesting_pass,"
                                  "principal_cubes,principal_max_ratio",
                                  rows));
            out.add("decay.csv", csv("scenario_id,bucket,cubes,max_u_ratio,max_lebesgue_fraction,intermediate_bound,q,v_aq",
                                     decay_rows));
        }

        void run_rubio(const ScenarioConfig& c, const Scenario& s, Artifacts& out, Failures& failures)
        {
            RubioOptions options;
            options.cprime = c.rubio_cprime;
            options.rprime_factor = c.rprime_factor;
            options.terms = c.rubio_terms;
            std::vector<std::string> rows;
            for (std::size_t i = 0; i < s.functions.size(); ++i)
            {
                const auto r = rubio_check(s.functions[i], s.u, s.v, options);
                if (!r.pass())
                    failures.add(s.ids[i] + ": Rubio de Francia properties fail");
                if (!r.tail_certified)
                    failures.add(s.ids[i] + ": Rubio de Francia tail not certified (2 K0 <= [u]_A1)");
                rows.push_back(join({s.ids[i], num(r.K0), num(r.rprime), yes_no(r.majorizes), num(r.rh_u_a1),
                                     num(2.0 * r.K0), num(r.norm_ratio), num(r.rh_u_v_a1),
                                     num(4.0 * std::numbers::e * r.K0), yes_no(r.tail_certified), yes_no(r.pass())}));
            }
            out.add("rubio.csv", csv("scenario_id,K0,rprime,majorizes,rh_u_a1,bound_a1,norm_ratio,rh_u_v_a1,"
                                     "bound_product,tail_certified,pass",
                                     rows));
        }

        /// The mixed-type reports of one scenario for the configured operator.
        std::vector<RatioReport> mixed_reports(const ScenarioConfig& c, const Scenario& s, int J)
        {
            ReportOptions options;
            options.p = c.p;
            options.rhs = c.rhs;
            std::vector<RatioReport> reports;
            switch (c.op.kind)
            {
            case OperatorEntry::Kind::maximal:
            case OperatorEntry::Kind::haar:
            case OperatorEntry::Kind::transfer:
            {
                std::optional<SignPattern> eps;
                if (c.op.kind != OperatorEntry::Kind::maximal)
                    eps = sign_pattern(c, J);
                for (std::size_t i = 0; i < s.functions.size(); ++i)
                {
                    options.scenario_id = s.ids[i];
                    if (c.op.kind == OperatorEntry::Kind::maximal)
                        reports.push_back(verify_mixed(s.functions[i], s.u, s.v, OperatorConfig::maximal(), options));
                    else if (c.op.kind == OperatorEntry::Kind::haar)
                        reports.push_back(verify_mixed(s.functions[i], s.u, s.v, OperatorConfig::haar(*eps), options));
                    else
                        reports.push_back(verify_transfer(s.functions[i], s.u, s.v, *eps, options));
                }
                break;
            }
            case OperatorEntry::Kind::vector:
            {
                options.scenario_id = s.ids.front().substr(0, s.ids.front().rfind('/')) + "/all";
                reports.push_back(verify_mixed(s.functions, s.u, s.v, OperatorConfig::vector(c.op.q), options));
                break;
            }
            case OperatorEntry::Kind::product:
            {
                const auto m = static_cast<std::size_t>(c.op.m);
                for (std::size_t first = 0; first + m <= s.functions.size(); first += m)
                {
                    std::vector<Weight> ws;
                    for (std::size_t j = 0; j < m; ++j)
                        ws.push_back(j % 2 == 0 ? s.u : s.v);
                    options.scenario_id = s.ids[first];
                    reports.push_back(verify_multilinear(
                        std::span<const GridFunction>(s.functions.data() + first, m), ws, options));
                }
                break;
            }
            }
            return reports;
        }

        std::vector<RatioReport> multilinear_reports(const ScenarioConfig& c, const Scenario& s)
        {
            ScenarioConfig product_config = c;
            product_config.op.kind = OperatorEntry::Kind::product;
            return mixed_reports(product_config, s, s.u.resolution());
        }

        void check_reports(const std::vector<RatioReport>& reports, Failures& failures)
        {
            for (const auto& r : reports)
                if (!std::isfinite(r.ratio) || r.ratio < 0.0)
                    failures.add(r.scenario_id + ": ratio is not a finite nonnegative number");
        }

        std::string margins_table(const std::vector<RatioReport>& reports)
        {
            std::string out = "# scenario_id theorem u_a1 u_ainf v_a1 v_ap v_ainf ratio shape margin\n";
            for (const auto& r : reports)
                for (Theorem t : {Theorem::T41, Theorem::T43, Theorem::T44, Theorem::T46, Theorem::C48})
                {
                    const auto m = bound_comparison(r, t);
                    if (!m.applicable)
                        continue;
                    out += r.scenario_id + " " + to_string(t) + " " + format_double(r.chars.u_a1) + " "
                           + format_double(r.chars.u_ainf) + " " + format_double(r.chars.v_a1) + " "
                           + format_double(r.chars.v_ap) + " " + format_double(r.chars.v_ainf) + " "
                           + format_double(r.ratio) + " " + format_double(m.shape) + " " + format_double(m.margin)
                           + "\n";
                }
            return out;
        }

        void sort_reports(std::vector<RatioReport>& reports)
        {
            std::stable_sort(reports.begin(), reports.end(), [](const RatioReport& a, const RatioReport& b) {
                return std::tie(a.scenario_id, a.op) < std::tie(b.scenario_id, b.op);
            });
        }

        void emit_reports(const ScenarioConfig& c, const std::string& stem, std::vector<RatioReport> reports,
                          Artifacts& out, const json& extra = json::object())
        {
            sort_reports(reports);
            if (c.output.csv)
            {
                std::vector<std::string> rows;
                for (const auto& r : reports)
                    rows.push_back(to_csv_row(r));
                out.add(stem + ".csv", csv(ratio_csv_header(), rows));
            }
            if (c.output.json)
            {
                json doc{{"schema_version", kSchemaVersion}, {"name", c.name}, {"reports", json::array()}};
                for (const auto& r : reports)
                    doc["reports"].push_back(to_json(r));
                for (const auto& [key, value] : extra.items())
                    doc[key] = value;
                out.add(stem + ".json", doc.dump(2) + "\n");
            }
            if (c.output.plots)
                out.add("plots/margins_" + stem + ".dat", margins_table(reports));
        }

        void run_cf(const ScenarioConfig& c, const Scenario& s, Artifacts& out)
        {
            const SignPattern eps = sign_pattern(c, s.u.resolution());
            std::vector<std::string> rows;
            for (std::size_t i = 0; i < s.functions.size(); ++i)
                rows.push_back(join({s.ids[i], num(c.op.p0), num(verify_cf(eps, s.functions[i], c.op.p0, s.v)),
                                     num(s.v.ainf())}));
            out.add("cf.csv", csv("scenario_id,p0,ratio,w_ainf", rows));
        }

        void run_verify(const ScenarioConfig& c, const Scenario& s, Artifacts& out, Failures& failures)
        {
            if (c.has_check("mixed"))
            {
                auto reports = mixed_reports(c, s, s.u.resolution());
                check_reports(reports, failures);
                emit_reports(c, "report", reports, out);
                if (c.output.plots && c.op.kind == OperatorEntry::Kind::maximal)
                {
                    const GridFunction uv = product(s.u.data(), s.v.data());
                    for (std::size_t i = 0; i < s.functions.size(); ++i)
                        out.add("plots/distribution_" + s.ids[i].substr(s.ids[i].rfind('/') + 1) + ".dat",
                                profile_data(perturbed_maximal(s.functions[i], s.v.data()), uv));
                }
            }
            if (c.has_check("multilinear"))
            {
                auto reports = multilinear_reports(c, s);
                check_reports(reports, failures);
                emit_reports(c, "multilinear", reports, out);
            }
            if (c.has_check("cf"))
                run_cf(c, s, out);
            if (c.has_check("rubio"))
                run_rubio(c, s, out, failures);
            if (c.has_check("decomposition"))
                run_cz(c, s, out, failures);
            if (c.has_check("constants"))
                run_constants(c, s, out, failures, false);
            else if (c.has_check("embedding"))
                run_constants(c, s, out, failures, true);
            const GridFunction uv = product(s.u.data(), s.v.data());
            for (std::size_t i = 0; i < s.functions.size(); ++i)
            {
                const double weak = weak_lorentz_norm(s.functions[i], uv);
                const double strong = integral(product(s.functions[i], uv));
                if (weak > strong * (1.0 + 1e-12))
                    failures.add(s.ids[i] + ": weak norm exceeds the L1 norm");
            }
        }

        //---------//
        // Sweep   //
        //---------//

        struct SweepPoint
        {
            std::string id;
            WeightSpec u;
            WeightSpec v;
            int resolution = 0;
            double base = 0.0;
        };

        std::vector<SweepPoint> sweep_points(const ScenarioConfig& c)
        {
            const SweepRanges& r = *c.sweep;
            auto center = [](const WeightSpec& w) {
                return w.kind == WeightSpec::Kind::power ? w.factors.front().center : 0.0;
            };
            const std::vector<int> Js = r.resolutions.empty() ? std::vector<int>{c.resolution} : r.resolutions;
            const std::vector<double> as = r.bases.empty() ? std::vector<double>{c.base} : r.bases;
            const std::size_t nu = std::max<std::size_t>(1, r.beta_u.size());
            const std::size_t nv = std::max<std::size_t>(1, r.beta_v.size());
            const std::size_t total = nu * nv * Js.size() * as.size();
            if (total > r.max_rows)
                throw ConfigError("sweep.max_rows", "the parameter product has " + std::to_string(total)
                                                        + " scenarios, above the cap of " + std::to_string(r.max_rows));

            std::vector<SweepPoint> points;
            for (std::size_t iu = 0; iu < nu; ++iu)
                for (std::size_t iv = 0; iv < nv; ++iv)
                    for (int J : Js)
                        for (double a : as)
                        {
                            SweepPoint p;
                            p.u = r.beta_u.empty() ? c.u : WeightSpec::power(r.beta_u[iu], center(c.u));
                            p.v = r.beta_v.empty() ? c.v : WeightSpec::power(r.beta_v[iv], center(c.v));
                            p.resolution = J;
                            p.base = a;
                            p.id = c.name + ";beta_u=" + (r.beta_u.empty() ? std::string("base") : format_short(r.beta_u[iu]))
                                   + ";beta_v=" + (r.beta_v.empty() ? std::string("base") : format_short(r.beta_v[iv]))
                                   + ";J=" + std::to_string(J) + ";a=" + format_short(a);
                            points.push_back(std::move(p));
                        }
            return points;
        }

        /// One row per scenario: the function with the largest ratio.
        RatioReport sweep_row(const ScenarioConfig& c, const SweepPoint& p)
        {
            const Scenario s = materialize(c, p.u, p.v, p.resolution, p.id);
            auto reports = mixed_reports(c, s, p.resolution);
            const auto best = std::max_element(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
                return a.ratio < b.ratio;
            });
            RatioReport row = *best;
            row.scenario_id = p.id;
            return row;
        }

        int run_sweep(const ScenarioConfig& c, Artifacts& out, std::ostream& log)
        {
            if (!c.sweep)
                throw ConfigError("sweep", "the sweep subcommand needs a 'sweep' block");
            const auto points = sweep_points(c);
            std::vector<std::optional<RatioReport>> rows(points.size());
            std::vector<std::string> errors(points.size());
            std::atomic<std::size_t> next{0};
            auto worker = [&] {
                for (std::size_t i = next++; i < points.size(); i = next++)
                {
                    try
                    {
                        rows[i] = sweep_row(c, points[i]);
                    }
                    catch (const std::exception& e)
                    {
                        errors[i] = points[i].id + ": " + e.what();
                    }
                }
            };
            const unsigned n = std::max(1u, std::min<unsigned>(c.threads, static_cast<unsigned>(points.size())));
            std::vector<std::thread> pool;
            for (unsigned t = 1; t < n; ++t)
                pool.emplace_back(worker);
            worker();
            for (auto& t : pool)
                t.join();

            Failures failures;
            std::vector<RatioReport> reports;
            for (std::size_t i = 0; i < points.size(); ++i)
            {
                if (!errors[i].empty())
                    failures.add(errors[i]);
                else
                    reports.push_back(*rows[i]);
            }
            check_reports(reports, failures);
            sort_reports(reports);

            std::vector<std::string> summary_rows;
            json summary = json::array();
            for (Theorem t : {Theorem::T41, Theorem::T43, Theorem::T44, Theorem::T46, Theorem::C48})
            {
                std::size_t applicable = 0;
                double best = std::numeric_limits<double>::quiet_NaN();
                std::string argmax;
                for (const auto& r : reports)
                {
                    const auto m = bound_comparison(r, t);
                    if (!m.applicable)
                        continue;
                    ++applicable;
                    if (std::isnan(best) || m.margin > best)
                    {
                        best = m.margin;
                        argmax = r.scenario_id;
                    }
                }
                summary_rows.push_back(join({to_string(t), std::to_string(applicable), num(best), argmax}));
                summary.push_back({{"theorem", to_string(t)},
                                   {"rows", applicable},
                                   {"max_margin", json_number(best)},
                                   {"argmax", argmax}});
                if (applicable > 0)
                    log << "max margin " << to_string(t) << " = " << format_double(best) << " (" << argmax << ")\n";
            }
            out.add("summary.csv", csv("theorem,rows,max_margin,argmax_scenario", summary_rows));
            emit_reports(c, "sweep", reports, out, json{{"summary", summary}});

            for (const auto& f : failures.items)
                log << "FAILED: " << f << "\n";
            return failures.empty() ? exit_pass : exit_invariant_failure;
        }
    }

    int run(const std::string& subcommand, const ScenarioConfig& c, const fs::path& out_dir, std::ostream& log)
    {
        Artifacts out(out_dir);
        if (subcommand == "sweep")
        {
            const int code = run_sweep(c, out, log);
            out.flush();
            return code;
        }

        const Scenario s = materialize(c, c.u, c.v, c.resolution, c.name);
        Failures failures;
        if (subcommand == "constants")
            run_constants(c, s, out, failures, false);
        else if (subcommand == "maximal")
            run_maximal(c, s, out, failures);
        else if (subcommand == "cz")
            run_cz(c, s, out, failures);
        else if (subcommand == "verify")
            run_verify(c, s, out, failures);
        else if (subcommand == "rubio")
            run_rubio(c, s, out, failures);
        else
            throw ConfigError("<subcommand>", "unknown subcommand '" + subcommand + "'");
        out.flush();

        for (const auto& f : failures.items)
            log << "FAILED: " << f << "\n";
        return failures.empty() ? exit_pass : exit_invariant_failure;
    }

    int run_from_file(const std::string& subcommand, const fs::path& config_path, const fs::path& out,
                      const Overrides& overrides, std::ostream& log)
    {
        try
        {
            const ScenarioConfig config = load_config(config_path, overrides);
            return run(subcommand, config, out, log);
        }
        catch (const ConfigError& e)
        {
            log << "config error: " << e.what() << "\n";
            return exit_config_error;
        }
        catch (const std::invalid_argument& e)
        {
            log << "config error: " << e.what() << "\n";
            return exit_config_error;
        }
    }
}
