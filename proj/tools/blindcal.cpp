// Command-line driver for the calibration experiments.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "blindcal/harness.hpp"

using namespace blindcal;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

ExperimentSpec resolve(ExperimentKind kind, const Common& c)
{
    const auto& schema = ConfigSchema::instance();
    ExperimentSpec spec = default_spec(kind);
    if (!c.config.empty()) schema.apply_file(spec, c.config);
    for (const auto& kv : c.overrides) schema.apply_override(spec, kv);
    if (c.seed) spec.scenario.seed = *c.seed;
    spec.threads = c.threads;
    spec.output_dir = c.out;
    try {
        spec.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

int run_kind(ExperimentKind kind, const Common& c)
{
    ExperimentSpec spec = resolve(kind, c);
    std::filesystem::path dir = spec.output_dir;
    std::filesystem::create_directories(dir);
    std::ofstream records(dir / "records.csv");
    records << csv_header(experiment_columns(spec));
    long every = std::max(1L, long(spec.scenario.trials) / 10);
    ExperimentReport rep = run_experiment(spec, [&](const TrialRecord& r) {
        records << csv_row(r) << std::flush;
        if ((r.trial + 1) % every == 0) std::fprintf(stderr, "trials done: %ld\n", r.trial + 1);
    });
    records.close();
    write_report(rep, dir, true);
    std::fprintf(stderr, "wall time: %.3f s\n", rep.wall_seconds);
    std::cout << rep.summary.dump(2) << "\n";
    return 0;
}

int run_null(const Common& c)
{
    ExperimentSpec spec = resolve(ExperimentKind::lr_pdf, c);
    const auto& sc = spec.scenario;
    std::filesystem::path dir = std::filesystem::path(spec.output_dir) / spec.options.null_cache;
    NullDistribution nd = cached_null_samples(dir, sc.N, sc.T, sc.trials, sc.seed, spec.threads);
    std::cout << (dir / null_cache_name(sc.N, sc.T, sc.trials, sc.seed)).string() << "\n";
    std::cout << "quantile(" << spec.options.alpha << ") = " << format_double(nd.quantile(spec.options.alpha))
              << "\n";
    return 0;
}

// One draw of the scenario, reconstructed and scored against the true covariance.
int run_reconstruct(const Common& c)
{
    ExperimentSpec spec = resolve(ExperimentKind::lr_pdf, c);
    const auto& sc = spec.scenario;
    ToeplitzHermitian T_N = build_covariance(sc);
    Rng rng_phase = Rng::stream(sc.seed, 0, 1);
    PhaseVector phases = draw_phase_errors(sc.phi_max_deg, sc.N, rng_phase);
    Rng rng = Rng::stream(sc.seed, 0, 0);
    SnapshotModel model(T_N, phases);
    CMatrix R = spec.options.sampling == Sampling::wishart ? model.sample_covariance_direct(sc.T, rng)
                                                           : sample_covariance(model.snapshots(sc.T, rng));
    CMatrix Rm = spec.options.use_rmt ? modify_matrix(R, sc.T) : R;
    Reconstruction rec = reconstruct(Rm);

    std::filesystem::path dir = spec.output_dir;
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "records.csv");
    os << "lag,true_re,true_im,recon_re,recon_im\n";
    const CVector& t_hat = rec.T_hat.first_col();
    for (long m = 0; m < sc.N; ++m)
        os << m << "," << format_double(T_N.lag(m).real()) << "," << format_double(T_N.lag(m).imag()) << ","
           << format_double(t_hat(m).real()) << "," << format_double(t_hat(m).imag()) << "\n";

    Json s;
    s["kind"] = "reconstruct";
    s["N"] = sc.N;
    s["T"] = sc.T;
    s["seed"] = sc.seed;
    s["use_rmt"] = spec.options.use_rmt;
    s["log_lr_recon"] = lr_stat(Rm, rec.T_hat).log_lr;
    s["log_lr_true"] = lr_stat(R, T_N).log_lr;
    s["max_abs_lag_error"] = max_abs(rec.T_hat.dense() - T_N.dense());
    std::ofstream(dir / "summary.json") << s.dump(2) << "\n";
    std::ofstream(dir / "resolved.cfg") << ConfigSchema::instance().render(spec);
    std::cout << s.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Blind phase calibration experiments for uniform linear arrays"};
    app.require_subcommand(1);
    app.footer("Config keys (file lines or --set key=value):\n" + ConfigSchema::instance().help());

    Common c;
    struct Sub {
        const char* name;
        const char* help;
        std::function<int()> fn;
    };
    std::vector<Sub> subs = {
        {"lr-pdf", "LR statistics of raw, RMT-corrected and true-covariance fits",
         [&] { return run_kind(ExperimentKind::lr_pdf, c); }},
        {"ml-benchmark", "ML phase estimation with the true covariance",
         [&] { return run_kind(ExperimentKind::ml_benchmark, c); }},
        {"invariant", "superdiagonal phase estimator", [&] { return run_kind(ExperimentKind::invariant, c); }},
        {"adhoc", "ad-hoc eigenvector phase estimator", [&] { return run_kind(ExperimentKind::adhoc, c); }},
        {"oversampled", "invisible-sector power minimisation",
         [&] { return run_kind(ExperimentKind::oversampled, c); }},
        {"crb", "per-element Cramer-Rao bound", [&] { return run_kind(ExperimentKind::crb_profile, c); }},
        {"null-dist", "precompute and cache the identity-covariance LR distribution", [&] { return run_null(c); }},
        {"reconstruct", "single-shot Toeplitz reconstruction of one sample matrix", [&] { return run_reconstruct(c); }},
    };
    std::function<int()> chosen;
    for (auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", c.config, "config file of key=value lines");
        sub->add_option("--set", c.overrides, "override a config key (repeatable)")->take_all();
        sub->add_option("--out", c.out, "output directory");
        sub->add_option("--seed", c.seed, "seed override");
        sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->footer("Config keys:\n" + ConfigSchema::instance().help());
        sub->callback([&chosen, fn = s.fn] { chosen = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        return chosen();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
