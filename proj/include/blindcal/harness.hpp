#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>

#include <json.hpp>

#include "calib_known.hpp"
#include "config.hpp"
#include "oversampled.hpp"
#include "rmt.hpp"
#include "scenario.hpp"
#include "sphericity.hpp"
#include "toeplitz_recon.hpp"

namespace blindcal {

using Json = nlohmann::ordered_json;

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<long> counts;

    long total() const
    {
        long s = 0;
        for (long c : counts) s += c;
        return s;
    }
};

/// Fixed-width histogram; values outside the range land in the edge bins.
inline Histogram histogram(const std::vector<double>& values, int bins,
                           std::optional<std::pair<double, double>> range = std::nullopt)
{
    if (bins < 1) throw DomainError("histogram: bins must be >= 1");
    Histogram h;
    std::vector<double> v;
    for (double x : values)
        if (!std::isnan(x)) v.push_back(x);
    if (v.empty()) return h;
    double lo, hi;
    if (range) {
        lo = range->first, hi = range->second;
    } else {
        auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        lo = *mn, hi = *mx;
    }
    if (!(hi > lo)) lo -= 0.5, hi += 0.5;
    h.edges.resize(size_t(bins) + 1);
    for (int k = 0; k <= bins; ++k) h.edges[size_t(k)] = lo + (hi - lo) * double(k) / bins;
    h.counts.assign(size_t(bins), 0);
    for (double x : v) {
        long k = long(std::floor((x - lo) / (hi - lo) * bins));
        k = std::clamp(k, 0L, long(bins) - 1);
        ++h.counts[size_t(k)];
    }
    return h;
}

/// sqrt of the mean squared residual over every element of every record, degrees in and out.
inline double summarize_sqrt_second_moment(const std::vector<std::vector<double>>& residuals_deg)
{
    std::vector<double> sq;
    for (const auto& r : residuals_deg)
        for (double x : r) sq.push_back(x * x);
    if (sq.empty()) return 0.0;
    std::sort(sq.begin(), sq.end());
    double s = 0.0;
    for (double x : sq) s += x;
    return std::sqrt(s / double(sq.size()));
}

struct TrialRecord {
    long trial = 0;
    std::vector<double> values;
    std::string status = "ok";
};

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::ml_benchmark;
    std::string resolved_config;
    std::uint64_t seed = 0;
    std::vector<std::string> columns;
    std::vector<TrialRecord> records;
    Json summary = Json::object();
    std::vector<std::pair<std::string, Histogram>> histograms;
    double wall_seconds = 0.0;

    long column(const std::string& name) const
    {
        for (size_t k = 0; k < columns.size(); ++k)
            if (columns[k] == name) return long(k);
        throw std::out_of_range("no column " + name);
    }

    std::vector<double> values(const std::string& name, bool ok_only = true) const
    {
        long c = column(name);
        std::vector<double> out;
        for (const auto& r : records)
            if (!ok_only || r.status == "ok") out.push_back(r.values[size_t(c)]);
        return out;
    }
};

using RecordSink = std::function<void(const TrialRecord&)>;

namespace detail {

inline std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

// Sums in sorted order so the result does not depend on record order.
inline double sum_of(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline double mean_of(const std::vector<double>& v) { return v.empty() ? NAN : sum_of(v) / double(v.size()); }

inline double quantile_of(std::vector<double> v, double p)
{
    if (v.empty()) return NAN;
    std::sort(v.begin(), v.end());
    long idx = std::clamp(long(std::ceil(p * double(v.size()))) - 1, 0L, long(v.size()) - 1);
    return v[size_t(idx)];
}

// Per-trial output of a kind-specific kernel; aux feeds histograms only.
struct TrialOutput {
    std::vector<double> values;
    std::map<std::string, std::vector<double>> aux;
};

inline CMatrix draw_sample(const SnapshotModel& model, long T, Sampling s, Rng& rng)
{
    if (s == Sampling::wishart) return model.sample_covariance_direct(T, rng);
    return sample_covariance(model.snapshots(T, rng));
}

// Residual of an estimate against truth after alignment; returns aligned residual in degrees.
inline std::vector<double> aligned_residual_deg(const PhaseVector& est, const PhaseVector& truth, AlignMode mode,
                                                double dl)
{
    Alignment al = align_phases(est, truth, mode, dl);
    std::vector<double> r(size_t(al.residual.size()));
    for (long k = 0; k < al.residual.size(); ++k) r[size_t(k)] = al.residual(k) / deg;
    return r;
}

inline double sq_sum(const std::vector<double>& r)
{
    std::vector<double> sq(r.size());
    for (size_t k = 0; k < r.size(); ++k) sq[k] = r[k] * r[k];
    return sum_of(std::move(sq));
}

}  // namespace detail

/// Per-trial CSV columns for the experiment kind.
inline std::vector<std::string> experiment_columns(const ExperimentSpec& spec)
{
    const long N = spec.scenario.N;
    const ExperimentOptions& op = spec.options;
    std::vector<std::string> c;
    switch (spec.kind) {
    case ExperimentKind::ml_benchmark:
        c = {"sq_sum_deg2", "count", "rms_deg", "lambda_min", "form_value"};
        for (long n = 1; n < N; ++n) c.push_back("err_deg_" + std::to_string(n));
        break;
    case ExperimentKind::invariant:
        c = {"sq_true_deg2", "sq_est_deg2", "sq_est_raw_deg2", "count", "rms_true_deg", "rms_est_deg",
             "arg_t1_err_deg"};
        if (op.n_diags > 1) c.push_back("sq_multi_deg2");
        break;
    case ExperimentKind::adhoc: c = {"sq_sum_deg2", "count", "rms_deg"}; break;
    case ExperimentKind::lr_pdf: c = {"log_lr_true", "log_lr_rmt", "log_lr_plain", "shrink", "reject"}; break;
    case ExperimentKind::oversampled:
        c = {"p_before", "p_after", "gain_db", "relaxed_gain_db", "p_before_err", "p_after_err",
             "delta_rmse_deg", "iter_no_err", "iter_err", "converged_no_err", "converged_err"};
        for (long n = 0; n < N; ++n) c.push_back("psi_deg_" + std::to_string(n));
        break;
    case ExperimentKind::crb_profile:
        c = {"element", "crb_rad2", "crb_sqrt_deg", "tinv_nn", "t_nn", "crb_full_rad2", "crb_full_sqrt_deg"};
        break;
    }
    return c;
}

/**
 * Runs every trial of the experiment. Trial k draws from Rng::stream(seed, k, lane)
 * so results do not depend on the thread count; records come back sorted by trial
 * and are handed to `sink` in that order as soon as a contiguous prefix is done.
 */
inline ExperimentReport run_experiment(const ExperimentSpec& spec, const RecordSink& sink = {})
{
    spec.validate();
    auto t_start = std::chrono::steady_clock::now();
    const ScenarioConfig& sc = spec.scenario;
    const ExperimentOptions& op = spec.options;
    const long N = sc.N, T = sc.T;

    ExperimentReport rep;
    rep.kind = spec.kind;
    rep.seed = sc.seed;
    rep.resolved_config = ConfigSchema::instance().render(spec);

    ToeplitzHermitian T_N = build_covariance(sc);
    const CMatrix root = hermitian_sqrt(T_N.dense());
    const CMatrix T_inv = toeplitz_inverse(T_N);
    const PhaseVector zero(N);

    if (spec.kind == ExperimentKind::crb_profile) {
        CRBProfile p = crb(T_N, T), pf = crb_full(T_N, T);
        CMatrix M = T_N.dense();
        rep.columns = experiment_columns(spec);
        double best = INFINITY, worst = 0.0;
        long arg_best = -1;
        for (long n = 1; n < N; ++n) {
            double sq = std::sqrt(p.bound(n)) / deg;
            rep.records.push_back({n,
                                   {double(n), p.bound(n), sq, T_inv(n, n).real(), M(n, n).real(), pf.bound(n),
                                    std::sqrt(pf.bound(n)) / deg},
                                   "ok"});
            if (sq < best) best = sq, arg_best = n;
            worst = std::max(worst, sq);
        }
        rep.summary["kind"] = "crb_profile";
        rep.summary["N"] = N;
        rep.summary["T"] = T;
        rep.summary["min_crb_sqrt_deg"] = best;
        rep.summary["max_crb_sqrt_deg"] = worst;
        rep.summary["argmin_element"] = arg_best;
        rep.summary["center_element"] = (N - 1) / 2;
        double full = 0.0;
        for (long n = 1; n < N; ++n) full += pf.bound(n);
        rep.summary["crb_full_mean_sqrt_deg"] = std::sqrt(full / double(N - 1)) / deg;
        if (sink)
            for (const auto& r : rep.records) sink(r);
        rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return rep;
    }

    // kind-specific setup
    std::vector<double> lag_args = superdiag_args(T_N, op.n_diags);
    SectorMatrices sectors;
    if (spec.kind == ExperimentKind::oversampled) sectors = sector_matrices(sc.d_over_lambda, N, op.pattern);
    double reference_threshold = NAN;
    NullDistribution reference;
    if (spec.kind == ExperimentKind::lr_pdf && sc.phi_max_deg > 0.0) {
        // calibrated-array distribution of the corrected LR, drawn on a separate lane
        std::vector<double> reference_samples(size_t(sc.trials), NAN);
        SnapshotModel model0 = SnapshotModel::from_root(root, zero);
        parallel_trials(sc.trials, spec.threads, [&](long k) {
            Rng rng = Rng::stream(sc.seed, std::uint64_t(k), 2);
            CMatrix R = detail::draw_sample(model0, T, op.sampling, rng);
            reference_samples[size_t(k)] = lr_against_reconstruction(R, T, op.use_rmt).log_lr;
        });
        reference = NullDistribution{N, T, sc.seed, std::move(reference_samples)};
        std::sort(reference.samples.begin(), reference.samples.end());
        reference_threshold = reference.quantile(op.alpha);
    }

    rep.columns = experiment_columns(spec);
    const size_t ncol = rep.columns.size();

    auto kernel = [&](long k) -> detail::TrialOutput {
        Rng rng_phase = Rng::stream(sc.seed, std::uint64_t(k), 1);
        PhaseVector phases = draw_phase_errors(sc.phi_max_deg, N, rng_phase);
        SnapshotModel model = SnapshotModel::from_root(root, phases);
        Rng rng = Rng::stream(sc.seed, std::uint64_t(k), 0);
        detail::TrialOutput out;
        auto& v = out.values;

        switch (spec.kind) {
        case ExperimentKind::ml_benchmark: {
            CMatrix R = detail::draw_sample(model, T, op.sampling, rng);
            PhaseEstimate est = ml_estimate_with_inverse(R, T_inv, op.ml_refine);
            auto r = detail::aligned_residual_deg(est.phases, phases, op.alignment, sc.d_over_lambda);
            v = {detail::sq_sum(r), double(N), std::sqrt(detail::sq_sum(r) / N), est.lambda_min, est.form_value};
            for (long n = 1; n < N; ++n) v.push_back(wrap_angle(est.phases[n] - phases[n]) / deg);
            out.aux["residual"] = r;
            break;
        }
        case ExperimentKind::invariant: {
            CMatrix R = detail::draw_sample(model, T, op.sampling, rng);
            SuperdiagOptions given{1, lag_args};
            PhaseEstimate e_true = superdiag_estimate(R, given);
            PhaseEstimate e_est = superdiag_estimate(R, SuperdiagOptions{1, {}});
            // the lag-1 reference error only adds a linear ramp; take it out before scoring
            double dt1 = wrap_angle(lag_args[0] - e_est.arg_t1_used);
            RVector ramp_fixed(N);
            for (long l = 0; l < N; ++l) ramp_fixed(l) = e_est.phases[l] + double(l) * dt1;
            PhaseVector e_est_fixed = PhaseVector::normalized(ramp_fixed);
            auto r_true = detail::aligned_residual_deg(e_true.phases, phases, op.alignment, sc.d_over_lambda);
            auto r_est = detail::aligned_residual_deg(e_est_fixed, phases, op.alignment, sc.d_over_lambda);
            auto r_raw = detail::aligned_residual_deg(e_est.phases, phases, op.alignment, sc.d_over_lambda);
            v = {detail::sq_sum(r_true), detail::sq_sum(r_est), detail::sq_sum(r_raw), double(N),
                 std::sqrt(detail::sq_sum(r_true) / N), std::sqrt(detail::sq_sum(r_est) / N), dt1 / deg};
            if (op.n_diags > 1) {
                PhaseEstimate e_multi = superdiag_estimate(R, SuperdiagOptions{op.n_diags, lag_args});
                auto r_multi = detail::aligned_residual_deg(e_multi.phases, phases, op.alignment, sc.d_over_lambda);
                v.push_back(detail::sq_sum(r_multi));
            }
            out.aux["residual"] = r_true;
            break;
        }
        case ExperimentKind::adhoc: {
            CMatrix R = detail::draw_sample(model, T, op.sampling, rng);
            PhaseEstimate est = adhoc_estimate(R, T_N);
            auto r = detail::aligned_residual_deg(est.phases, phases, op.alignment, sc.d_over_lambda);
            v = {detail::sq_sum(r), double(N), std::sqrt(detail::sq_sum(r) / N)};
            out.aux["residual"] = r;
            break;
        }
        case ExperimentKind::lr_pdf: {
            CMatrix R = detail::draw_sample(model, T, op.sampling, rng);
            double l_true = lr_stat(R, T_N).log_lr;
            EigenCorrection ec;
            CMatrix Rm = modify_matrix(R, T, &ec);
            Reconstruction rec_m = reconstruct(Rm);
            double l_rmt = lr_stat(Rm, rec_m.T_hat).log_lr;
            double l_plain = lr_against_reconstruction(R, T, false).log_lr;
            const long n = ec.lambda_hat.size();
            double shrink = ec.gamma_hat.maxCoeff() / ec.gamma_hat.minCoeff() <
                                    ec.lambda_hat(n - 1) / ec.lambda_hat(0)
                                ? 1.0
                                : 0.0;
            double reject = NAN;
            if (!std::isnan(reference_threshold))
                reject = toeplitz_origin_test(R, T, op.use_rmt, reference, op.alpha).verdict == Verdict::non_toeplitz_origin
                             ? 1.0
                             : 0.0;
            v = {l_true, l_rmt, l_plain, shrink, reject};
            break;
        }
        case ExperimentKind::oversampled: {
            // paired draws: identical xi, with and without phase errors
            SnapshotModel model0 = SnapshotModel::from_root(root, zero);
            Rng rng0 = rng;
            CMatrix R_err = detail::draw_sample(model, T, op.sampling, rng);
            CMatrix R_no = detail::draw_sample(model0, T, op.sampling, rng0);
            CMatrix B_no = b_matrix_from_covariance(R_no, sectors.R_inv);
            CMatrix B_err = b_matrix_from_covariance(R_err, sectors.R_inv);
            OptimizerOptions oo;
            oo.max_iterations = op.max_iterations;
            oo.rel_tol = op.rel_tol;
            OptimizerResult o_no = optimize_phases(B_no, zero, oo);
            OptimizerResult o_err = optimize_phases(B_err, zero, oo);
            double p_before = hermitian_form(B_no, zero.values());
            double p_before_err = hermitian_form(B_err, zero.values());
            double relaxed = double(N) * hermitian_eig(B_no).values(0);
            double delta = decomposition_residual(o_err.psi, o_no.psi, phases);
            v = {p_before,
                 o_no.invisible_power,
                 10.0 * std::log10(p_before / o_no.invisible_power),
                 10.0 * std::log10(p_before / relaxed),
                 p_before_err,
                 o_err.invisible_power,
                 delta,
                 double(o_no.iterations),
                 double(o_err.iterations),
                 o_no.converged ? 1.0 : 0.0,
                 o_err.converged ? 1.0 : 0.0};
            for (long n = 0; n < N; ++n) v.push_back(o_no.psi[n] / deg);
            break;
        }
        case ExperimentKind::crb_profile: break;
        }
        return out;
    };

    std::vector<detail::TrialOutput> outputs(size_t(sc.trials));
    rep.records.resize(size_t(sc.trials));
    std::vector<char> done(size_t(sc.trials), 0);
    std::mutex sink_mu;
    long flushed = 0;
    parallel_trials(sc.trials, spec.threads, [&](long k) {
        TrialRecord rec;
        rec.trial = k;
        try {
            outputs[size_t(k)] = kernel(k);
            rec.values = outputs[size_t(k)].values;
        } catch (const std::exception& ex) {
            rec.values.assign(ncol, NAN);
            rec.status = std::string("error: ") + ex.what();
        }
        std::lock_guard lk(sink_mu);
        rep.records[size_t(k)] = std::move(rec);
        done[size_t(k)] = 1;
        while (flushed < sc.trials && done[size_t(flushed)]) {
            if (sink) sink(rep.records[size_t(flushed)]);
            ++flushed;
        }
    });

    // summaries, computed from the records alone
    Json& s = rep.summary;
    s["kind"] = to_string(spec.kind);
    s["N"] = N;
    s["T"] = T;
    s["trials"] = sc.trials;
    s["seed"] = sc.seed;
    long failed = 0;
    for (const auto& r : rep.records)
        if (r.status != "ok") ++failed;
    s["trials_failed"] = failed;

    auto pooled = [&](const char* sq, const char* cnt) {
        double a = detail::sum_of(rep.values(sq)), b = detail::sum_of(rep.values(cnt));
        return b > 0 ? std::sqrt(a / b) : NAN;
    };
    auto residual_hist = [&]() {
        std::vector<double> all;
        for (const auto& o : outputs) {
            auto it = o.aux.find("residual");
            if (it != o.aux.end()) all.insert(all.end(), it->second.begin(), it->second.end());
        }
        rep.histograms.emplace_back("residual_deg", histogram(all, op.bins));
    };

    switch (spec.kind) {
    case ExperimentKind::ml_benchmark: {
        s["sqrt_second_moment_deg"] = pooled("sq_sum_deg2", "count");
        CRBProfile p = crb(T_N, T), pf = crb_full(T_N, T);
        double crb_mean = 0.0, full_mean = 0.0, ratio_min = INFINITY, ratio_sum = 0.0, full_ratio_sum = 0.0;
        for (long n = 1; n < N; ++n) {
            auto e = rep.values("err_deg_" + std::to_string(n));
            for (double& x : e) x *= deg;
            double mse = detail::sq_sum(e) / double(std::max<size_t>(e.size(), 1));
            crb_mean += p.bound(n);
            full_mean += pf.bound(n);
            full_ratio_sum += mse / pf.bound(n);
            ratio_min = std::min(ratio_min, mse / p.bound(n));
            ratio_sum += mse / p.bound(n);
        }
        s["crb_mean_sqrt_deg"] = std::sqrt(crb_mean / double(N - 1)) / deg;
        s["mse_over_crb_min"] = ratio_min;
        s["mse_over_crb_mean"] = ratio_sum / double(N - 1);
        s["crb_full_mean_sqrt_deg"] = std::sqrt(full_mean / double(N - 1)) / deg;
        s["mse_over_crb_full_mean"] = full_ratio_sum / double(N - 1);
        s["mean_lambda_min"] = detail::mean_of(rep.values("lambda_min"));
        residual_hist();
        break;
    }
    case ExperimentKind::invariant:
        s["sqrt_second_moment_deg"] = pooled("sq_true_deg2", "count");
        s["sqrt_second_moment_est_t1_deg"] = pooled("sq_est_deg2", "count");
        s["sqrt_second_moment_est_t1_unramped_deg"] = pooled("sq_est_raw_deg2", "count");
        if (op.n_diags > 1) s["sqrt_second_moment_multi_deg"] = pooled("sq_multi_deg2", "count");
        residual_hist();
        break;
    case ExperimentKind::adhoc:
        s["sqrt_second_moment_deg"] = pooled("sq_sum_deg2", "count");
        residual_hist();
        break;
    case ExperimentKind::lr_pdf: {
        auto lt = rep.values("log_lr_true"), lr = rep.values("log_lr_rmt"), lp = rep.values("log_lr_plain");
        s["median_log_lr_true"] = detail::quantile_of(lt, 0.5);
        s["median_log_lr_rmt"] = detail::quantile_of(lr, 0.5);
        s["median_log_lr_plain"] = detail::quantile_of(lp, 0.5);
        s["ks_rmt_vs_true"] = ks_distance(lr, lt);
        s["ks_plain_vs_true"] = ks_distance(lp, lt);
        s["shrink_rate"] = detail::mean_of(rep.values("shrink"));
        s["alpha"] = op.alpha;
        s["use_rmt"] = op.use_rmt;
        if (!std::isnan(reference_threshold)) {
            s["reference_threshold"] = reference_threshold;
            s["detection_rate"] = detail::mean_of(rep.values("reject"));
        }
        rep.histograms.emplace_back("log_lr_true", histogram(lt, op.bins));
        rep.histograms.emplace_back("log_lr_rmt", histogram(lr, op.bins));
        rep.histograms.emplace_back("log_lr_plain", histogram(lp, op.bins));
        break;
    }
    case ExperimentKind::oversampled: {
        auto gains = rep.values("gain_db"), delta = rep.values("delta_rmse_deg");
        s["mean_gain_db"] = detail::mean_of(gains);
        s["mean_relaxed_gain_db"] = detail::mean_of(rep.values("relaxed_gain_db"));
        s["mean_p_before"] = detail::mean_of(rep.values("p_before"));
        s["mean_p_after"] = detail::mean_of(rep.values("p_after"));
        long small = 0, large = 0;
        double dmax = 0.0;
        for (double d : delta) {
            if (d <= 0.1) ++small;
            if (d > 10.0) ++large;
            dmax = std::max(dmax, d);
        }
        s["delta_le_0p1_deg"] = small;
        s["delta_gt_10_deg"] = large;
        s["delta_max_deg"] = dmax;
        s["unconverged"] = double(rep.values("converged_no_err").size()) - detail::sum_of(rep.values("converged_no_err"));
        if (op.exact_run) {
            CMatrix B_inf = asymptotic_b(T_N, zero, sectors.R_inv);
            OptimizerOptions oo;
            oo.max_iterations = op.max_iterations;
            oo.rel_tol = op.rel_tol;
            OptimizerResult o = optimize_phases(B_inf, zero, oo);
            double p0 = hermitian_form(B_inf, zero.values());
            s["exact_p_before"] = p0;
            s["exact_p_after"] = o.invisible_power;
            s["exact_gain_db"] = 10.0 * std::log10(p0 / o.invisible_power);
            s["exact_relaxed_gain_db"] = 10.0 * std::log10(p0 / (double(N) * hermitian_eig(B_inf).values(0)));
        }
        rep.histograms.emplace_back("delta_rmse_deg", histogram(delta, op.bins));
        rep.histograms.emplace_back("gain_db", histogram(gains, op.bins));
        break;
    }
    case ExperimentKind::crb_profile: break;
    }

    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

inline std::string csv_header(const std::vector<std::string>& columns)
{
    std::string out = "trial,seed_offset";
    for (const auto& c : columns) out += "," + c;
    return out + ",status\n";
}

inline std::string csv_row(const TrialRecord& r)
{
    std::string out = std::to_string(r.trial) + "," + std::to_string(r.trial);
    for (double v : r.values) out += "," + format_double(v);
    return out + "," + detail::csv_escape(r.status) + "\n";
}

inline std::string histogram_csv(const Histogram& h)
{
    std::string out = "bin_lo,bin_hi,count\n";
    for (size_t k = 0; k < h.counts.size(); ++k)
        out += format_double(h.edges[k]) + "," + format_double(h.edges[k + 1]) + "," + std::to_string(h.counts[k]) + "\n";
    return out;
}

/// Writes records.csv (unless already streamed), summary.json, histogram_*.csv and resolved.cfg.
inline void write_report(const ExperimentReport& rep, const std::filesystem::path& dir, bool records_streamed = false)
{
    std::filesystem::create_directories(dir);
    if (!records_streamed) {
        std::ofstream os(dir / "records.csv");
        os << csv_header(rep.columns);
        for (const auto& r : rep.records) os << csv_row(r);
    }
    {
        std::ofstream os(dir / "summary.json");
        os << rep.summary.dump(2) << "\n";
    }
    for (const auto& [name, h] : rep.histograms) {
        std::ofstream os(dir / ("histogram_" + name + ".csv"));
        os << histogram_csv(h);
    }
    std::ofstream os(dir / "resolved.cfg");
    os << rep.resolved_config;
}

}  // namespace blindcal
