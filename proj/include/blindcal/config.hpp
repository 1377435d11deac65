#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "calib_known.hpp"
#include "oversampled.hpp"
#include "scenario.hpp"

namespace blindcal {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { lr_pdf, ml_benchmark, invariant, adhoc, oversampled, crb_profile };

inline const char* to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::lr_pdf: return "lr_pdf";
    case ExperimentKind::ml_benchmark: return "ml_benchmark";
    case ExperimentKind::invariant: return "invariant";
    case ExperimentKind::adhoc: return "adhoc";
    case ExperimentKind::oversampled: return "oversampled";
    case ExperimentKind::crb_profile: return "crb_profile";
    }
    return "?";
}

enum class Sampling { wishart, snapshots };

struct ExperimentOptions {
    AlignMode alignment = AlignMode::constant;
    int n_diags = 1;
    bool ml_refine = false;
    bool use_rmt = true;
    double alpha = 0.01;
    int bins = 50;
    ElementPattern pattern = ElementPattern::cosine;
    int max_iterations = 10000;
    double rel_tol = 1e-10;
    bool exact_run = true;
    Sampling sampling = Sampling::wishart;
    std::string null_cache = "null_cache";
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::ml_benchmark;
    ScenarioConfig scenario;
    ExperimentOptions options;
    int threads = 1;
    std::string output_dir = "out";

    void validate() const
    {
        scenario.validate();
        if (options.n_diags < 1 || options.n_diags >= std::max(scenario.N, 2))
            throw DomainError("estimator.n_diags must lie in [1, N-1]");
        if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw DomainError("lr.alpha must lie in (0, 1)");
        if (options.bins < 1) throw DomainError("run.bins must be >= 1");
        if (options.max_iterations < 1) throw DomainError("oversampled.max_iterations must be >= 1");
        if (threads < 1) throw DomainError("run.threads must be >= 1");
        if (kind == ExperimentKind::lr_pdf && scenario.T <= scenario.N)
            throw DomainError("lr_pdf needs scenario.T > scenario.N");
    }
};

/// Defaults for one experiment kind; ML errors are scored against element 0 with nothing fitted.
inline ExperimentSpec default_spec(ExperimentKind kind)
{
    ExperimentSpec spec;
    spec.kind = kind;
    if (kind == ExperimentKind::ml_benchmark) spec.options.alignment = AlignMode::reference;
    return spec;
}

namespace detail {

inline long parse_long(const std::string& key, const std::string& v)
{
    try {
        size_t pos = 0;
        long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v)
{
    try {
        size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid unsigned integer for " + key + ": '" + v + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& v)
{
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

inline std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string trim(const std::string& s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/**
 * Flat dotted-key configuration. Every key has a setter and a getter so the
 * resolved spec can be echoed back verbatim.
 */
class ConfigSchema {
public:
    struct Entry {
        std::string key;
        std::string help;
        std::function<void(ExperimentSpec&, const std::string&)> set;
        std::function<std::string(const ExperimentSpec&)> get;
    };

    static const ConfigSchema& instance()
    {
        static ConfigSchema s;
        return s;
    }

    const std::vector<Entry>& entries() const { return entries_; }

    std::string valid_keys() const
    {
        std::string out;
        for (const auto& e : entries_) out += (out.empty() ? "" : ", ") + e.key;
        return out;
    }

    /// Bare scenario field names (N, T, seed, ...) resolve to scenario.*.
    std::string canonical(const std::string& key) const
    {
        for (const auto& e : entries_)
            if (e.key == key) return key;
        std::string alt = "scenario." + key;
        for (const auto& e : entries_)
            if (e.key == alt) return alt;
        throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid_keys());
    }

    void apply(ExperimentSpec& spec, const std::string& key, const std::string& value) const
    {
        std::string k = canonical(key);
        for (const auto& e : entries_)
            if (e.key == k) {
                try {
                    e.set(spec, detail::trim(value));
                } catch (const DomainError& ex) {
                    throw ConfigError(k + ": " + ex.what());
                }
                return;
            }
    }

    /// key=value overrides, '#' comments, blank lines ignored.
    void apply_text(ExperimentSpec& spec, std::istream& is, const std::string& origin) const
    {
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
            apply(spec, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
        }
    }

    void apply_file(ExperimentSpec& spec, const std::string& path) const
    {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file '" + path + "'");
        apply_text(spec, is, path);
    }

    void apply_override(ExperimentSpec& spec, const std::string& kv) const
    {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
        apply(spec, detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
    }

    std::string render(const ExperimentSpec& spec) const
    {
        std::string out = "# kind: " + std::string(to_string(spec.kind)) + "\n";
        for (const auto& e : entries_)
            if (e.key != "run.threads") out += e.key + "=" + e.get(spec) + "\n";  // results do not depend on it
        return out;
    }

    std::string help() const
    {
        std::string out;
        for (const auto& e : entries_) {
            ExperimentSpec def;
            out += "  " + e.key + " (default " + e.get(def) + "): " + e.help + "\n";
        }
        return out;
    }

private:
    ConfigSchema()
    {
        using namespace detail;
        auto add = [&](std::string k, std::string h, auto set, auto get) {
            entries_.push_back({std::move(k), std::move(h), set, get});
        };
        add("scenario.N", "array elements", [](ExperimentSpec& s, const std::string& v) { s.scenario.N = int(parse_long("scenario.N", v)); },
            [](const ExperimentSpec& s) { return std::to_string(s.scenario.N); });
        add("scenario.T", "snapshots per trial", [](ExperimentSpec& s, const std::string& v) { s.scenario.T = int(parse_long("scenario.T", v)); },
            [](const ExperimentSpec& s) { return std::to_string(s.scenario.T); });
        add("scenario.W1", "first sinc bandwidth", [](ExperimentSpec& s, const std::string& v) { s.scenario.W1 = parse_double("scenario.W1", v); },
            [](const ExperimentSpec& s) { return fmt(s.scenario.W1); });
        add("scenario.W2", "second sinc bandwidth", [](ExperimentSpec& s, const std::string& v) { s.scenario.W2 = parse_double("scenario.W2", v); },
            [](const ExperimentSpec& s) { return fmt(s.scenario.W2); });
        add("scenario.theta0", "steering angle, degrees", [](ExperimentSpec& s, const std::string& v) { s.scenario.theta0 = parse_double("scenario.theta0", v); },
            [](const ExperimentSpec& s) { return fmt(s.scenario.theta0); });
        add("scenario.d_over_lambda", "element spacing in wavelengths", [](ExperimentSpec& s, const std::string& v) { s.scenario.d_over_lambda = parse_double("scenario.d_over_lambda", v); },
            [](const ExperimentSpec& s) { return fmt(s.scenario.d_over_lambda); });
        add("scenario.q_inv_sq_db", "white noise floor, dB", [](ExperimentSpec& s, const std::string& v) { s.scenario.q_inv_sq_db = parse_double("scenario.q_inv_sq_db", v); },
            [](const ExperimentSpec& s) { return fmt(s.scenario.q_inv_sq_db); });
        add("scenario.phi_max_deg", "max phase error, degrees", [](ExperimentSpec& s, const std::string& v) { s.scenario.phi_max_deg = parse_double("scenario.phi_max_deg", v); },
            [](const ExperimentSpec& s) { return fmt(s.scenario.phi_max_deg); });
        add("scenario.covariance_kind", "two_sinc | one_sinc | shifted_symmetric",
            [](ExperimentSpec& s, const std::string& v) { s.scenario.covariance_kind = covariance_kind_from_string(v); },
            [](const ExperimentSpec& s) { return std::string(to_string(s.scenario.covariance_kind)); });
        add("scenario.trials", "Monte Carlo trials", [](ExperimentSpec& s, const std::string& v) { s.scenario.trials = int(parse_long("scenario.trials", v)); },
            [](const ExperimentSpec& s) { return std::to_string(s.scenario.trials); });
        add("scenario.seed", "64-bit seed", [](ExperimentSpec& s, const std::string& v) { s.scenario.seed = parse_u64("scenario.seed", v); },
            [](const ExperimentSpec& s) { return std::to_string(s.scenario.seed); });
        add("estimator.alignment", "residual alignment: reference | constant | affine (ml-benchmark defaults to reference)",
            [](ExperimentSpec& s, const std::string& v) { s.options.alignment = align_mode_from_string(v); },
            [](const ExperimentSpec& s) { return std::string(to_string(s.options.alignment)); });
        add("estimator.n_diags", "super-diagonals used by the invariant estimator",
            [](ExperimentSpec& s, const std::string& v) { s.options.n_diags = int(parse_long("estimator.n_diags", v)); },
            [](const ExperimentSpec& s) { return std::to_string(s.options.n_diags); });
        add("estimator.ml_refine", "constant-modulus refinement of the ML estimate",
            [](ExperimentSpec& s, const std::string& v) { s.options.ml_refine = parse_bool("estimator.ml_refine", v); },
            [](const ExperimentSpec& s) { return std::string(s.options.ml_refine ? "true" : "false"); });
        add("lr.use_rmt", "apply eigenvalue correction before the origin test",
            [](ExperimentSpec& s, const std::string& v) { s.options.use_rmt = parse_bool("lr.use_rmt", v); },
            [](const ExperimentSpec& s) { return std::string(s.options.use_rmt ? "true" : "false"); });
        add("lr.alpha", "lower-tail test level", [](ExperimentSpec& s, const std::string& v) { s.options.alpha = parse_double("lr.alpha", v); },
            [](const ExperimentSpec& s) { return fmt(s.options.alpha); });
        add("oversampled.pattern", "cosine | ideal element pattern",
            [](ExperimentSpec& s, const std::string& v) { s.options.pattern = element_pattern_from_string(v); },
            [](const ExperimentSpec& s) { return std::string(to_string(s.options.pattern)); });
        add("oversampled.max_iterations", "optimizer iteration cap",
            [](ExperimentSpec& s, const std::string& v) { s.options.max_iterations = int(parse_long("oversampled.max_iterations", v)); },
            [](const ExperimentSpec& s) { return std::to_string(s.options.max_iterations); });
        add("oversampled.rel_tol", "optimizer relative stopping tolerance",
            [](ExperimentSpec& s, const std::string& v) { s.options.rel_tol = parse_double("oversampled.rel_tol", v); },
            [](const ExperimentSpec& s) { return fmt(s.options.rel_tol); });
        add("oversampled.exact_run", "also optimize the exact-covariance matrix",
            [](ExperimentSpec& s, const std::string& v) { s.options.exact_run = parse_bool("oversampled.exact_run", v); },
            [](const ExperimentSpec& s) { return std::string(s.options.exact_run ? "true" : "false"); });
        add("run.sampling", "wishart | snapshots",
            [](ExperimentSpec& s, const std::string& v) {
                if (v == "wishart") s.options.sampling = Sampling::wishart;
                else if (v == "snapshots") s.options.sampling = Sampling::snapshots;
                else throw ConfigError("run.sampling must be wishart or snapshots");
            },
            [](const ExperimentSpec& s) { return std::string(s.options.sampling == Sampling::wishart ? "wishart" : "snapshots"); });
        add("run.bins", "histogram bins", [](ExperimentSpec& s, const std::string& v) { s.options.bins = int(parse_long("run.bins", v)); },
            [](const ExperimentSpec& s) { return std::to_string(s.options.bins); });
        add("run.threads", "worker threads", [](ExperimentSpec& s, const std::string& v) { s.threads = int(parse_long("run.threads", v)); },
            [](const ExperimentSpec& s) { return std::to_string(s.threads); });
        add("run.null_cache", "directory for cached null distributions",
            [](ExperimentSpec& s, const std::string& v) { s.options.null_cache = v; },
            [](const ExperimentSpec& s) { return s.options.null_cache; });
    }

    std::vector<Entry> entries_;
};

}  // namespace blindcal
