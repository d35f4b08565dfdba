#pragma once

#include "mixweak/corpus.hpp"
#include "mixweak/verify.hpp"
#include "mixweak/weights.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixweak::cli
{
    inline constexpr int kSchemaVersion = 1;

    enum ExitCode : int
    {
        exit_pass = 0,
        exit_invariant_failure = 1,
        exit_config_error = 2,
    };

    /// Invalid configuration. `field` is the dotted path of the offending entry.
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(std::string field, const std::string& message)
            : std::runtime_error(field + ": " + message), field_(std::move(field))
        {
        }

        const std::string& field() const { return field_; }

    private:
        std::string field_;
    };

    struct OperatorEntry
    {
        enum class Kind
        {
            maximal,   // M_d(f v) / v
            haar,      // |T_eps(f v)| / v
            transfer,  // Haar multiplier measured against the maximal operator
            vector,    // l^q-valued maximal over all listed functions
            product,   // product of maximal functions over groups of m functions
        };

        Kind kind = Kind::maximal;
        bool uniform_eps = false;  // multipliers uniform on [-1, 1] instead of random signs
        std::optional<std::uint64_t> eps_seed;
        double q = 2.0;   // vector exponent
        double p0 = 1.0;  // exponent of the Coifman-Fefferman check
        int m = 2;        // factors of the product operator
    };

    struct SweepRanges
    {
        std::vector<double> beta_u;  // u = |x - center|^(-beta)
        std::vector<double> beta_v;
        std::vector<int> resolutions;
        std::vector<double> bases;
        std::size_t max_rows = 4096;
    };

    struct OutputOptions
    {
        bool csv = true;
        bool json = true;
        bool plots = true;
    };

    /// Parsed and validated scenario. All randomness is resolved to explicit
    /// seeds during parsing.
    struct ScenarioConfig
    {
        int schema_version = kSchemaVersion;
        std::string name;
        int resolution = 10;
        int max_resolution = 16;
        double base = 4.0;
        double p = 2.0;
        WeightSpec u;
        WeightSpec v;
        std::vector<FunctionSpec> functions;
        OperatorEntry op;
        RightHandMeasure rhs = RightHandMeasure::uv;
        std::vector<std::string> checks;
        double tau = kDefaultTau;
        double rubio_cprime = kDefaultRubioCPrime;
        double geometric_cprime = 12.0;
        double rprime_factor = kDefaultRPrimeFactor;
        int rubio_terms = 64;
        std::optional<SweepRanges> sweep;
        OutputOptions output;
        std::optional<std::uint64_t> seed;
        unsigned threads = 1;

        bool has_check(const std::string& check) const;
    };

    struct Overrides
    {
        std::optional<std::uint64_t> seed;
        std::optional<unsigned> threads;
        std::optional<double> tau;
        std::optional<double> cprime;
    };

    /// Parses the JSON text of a scenario file.
    ScenarioConfig parse_config(const std::string& text, const Overrides& overrides = {});
    ScenarioConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

    /// Runs one subcommand and writes its artifacts below `out`. Progress and
    /// failures go to `log`.
    int run(const std::string& subcommand, const ScenarioConfig& config, const std::filesystem::path& out,
            std::ostream& log);

    /// Loads the config and runs; configuration problems map to exit code 2.
    int run_from_file(const std::string& subcommand, const std::filesystem::path& config_path,
                      const std::filesystem::path& out, const Overrides& overrides, std::ostream& log);

    inline const std::vector<std::string>& subcommands()
    {
        static const std::vector<std::string> names{"constants", "maximal", "cz", "verify", "sweep", "rubio"};
        return names;
    }
}
