#include "catch_amalgamated.hpp"

#include "blindcal/calib_known.hpp"

using namespace blindcal;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ScenarioConfig random_scenario(Rng& rng)
{
    ScenarioConfig c;
    c.N = 3 + int(rng.uniform(0.0, 15.0));
    c.W1 = rng.uniform(0.05, 0.45);
    c.W2 = rng.uniform(0.05, 0.45);
    c.theta0 = rng.uniform(-60.0, 60.0);
    c.q_inv_sq_db = rng.uniform(-30.0, -5.0);
    return c;
}

PhaseVector random_phases(long n, double max_deg, Rng& rng)
{
    return draw_phase_errors(max_deg, n, rng);
}

double max_wrapped_diff(const PhaseVector& a, const PhaseVector& b)
{
    double d = 0.0;
    for (long k = 0; k < a.size(); ++k) d = std::max(d, std::abs(wrap_angle(a[k] - b[k])));
    return d;
}

// brute-force (c, b) search: fine grid, then two refined grids around the best cell
double grid_rms_deg(const RVector& r, bool with_slope)
{
    auto rms = [&](double c, double b) {
        double s = 0.0;
        for (long l = 0; l < r.size(); ++l) {
            double e = wrap_angle(r(l) - c - b * double(l));
            s += e * e;
        }
        return std::sqrt(s / double(r.size())) / deg;
    };
    const int Kc = 200, Kb = with_slope ? 2000 : 1;
    double hc = 2.0 * pi / Kc, hb = with_slope ? 2.0 * pi / Kb : 0.0;
    double bc = 0.0, bb = 0.0, best = 1e300;
    for (int i = 0; i < Kc; ++i)
        for (int j = 0; j < Kb; ++j) {
            double c = -pi + hc * i, b = with_slope ? -pi + hb * j : 0.0;
            double v = rms(c, b);
            if (v < best) best = v, bc = c, bb = b;
        }
    const int K = 100;
    for (int round = 0; round < 2; ++round) {
        double c0 = bc, b0 = bb;
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < (with_slope ? K : 1); ++j) {
                double c = c0 - hc + 2.0 * hc * i / (K - 1);
                double b = with_slope ? b0 - hb + 2.0 * hb * j / (K - 1) : 0.0;
                double v = rms(c, b);
                if (v < best) best = v, bc = c, bb = b;
            }
        hc *= 4.0 / K;
        hb *= 4.0 / K;
    }
    return best;
}

}  // namespace

TEST_CASE("crb examples", "[calib_known]")
{
    auto id = crb(ToeplitzHermitian(CVector::Unit(5, 0)), 100);
    CHECK(std::isnan(id.bound(0)));
    for (long k = 1; k < 5; ++k) CHECK(std::isinf(id.bound(k)));

    const double rho = 0.6;
    CVector c(2);
    c << 1.0, rho;
    auto two = crb(ToeplitzHermitian(c), 10);
    CHECK_THAT(two.bound(1), WithinRel((1.0 - rho * rho) / (2.0 * 10.0 * rho * rho), 1e-14));

    CHECK_THROWS_AS(crb(ToeplitzHermitian(c), 0), DomainError);
}

TEST_CASE("smallest bound sits at the element with the largest inverse diagonal", "[calib_known]")
{
    ScenarioConfig cfg;
    auto t = build_covariance(cfg);
    auto p = crb(t, 100);
    CMatrix Ti = toeplitz_inverse(t);
    long argmin = 1, argmax = 1;
    for (long k = 1; k < cfg.N; ++k) {
        if (p.bound(k) < p.bound(argmin) - 1e-15 * p.bound(argmin)) argmin = k;
        if (Ti(k, k).real() > Ti(argmax, argmax).real() * (1.0 + 1e-15)) argmax = k;
    }
    const long centre = (cfg.N - 1) / 2;
    CHECK(std::abs(argmin - centre) <= 1);
    CHECK(argmin == argmax);
    // the profile is symmetric about the centre
    for (long k = 1; k + 1 < cfg.N; ++k) CHECK_THAT(p.bound(k), WithinRel(p.bound(cfg.N - 1 - k), 1e-9));
}

TEST_CASE("fim_entry matches the closed form and the CRB diagonal", "[calib_known][property]")
{
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        auto cfg = random_scenario(rng);
        auto t = build_covariance(cfg);
        auto phases = random_phases(cfg.N, 180.0, rng);
        const long T = 1 + long(rng.uniform(0.0, 1000.0));
        CMatrix R = apply_phases(t.dense(), phases);
        CMatrix Ri = R.inverse();
        auto p = crb(t, T);
        double scale = 0.0;
        for (long n = 1; n < cfg.N; ++n) scale = std::max(scale, fim_entry(t, phases, n, n, T));
        for (long n = 1; n < cfg.N; ++n) {
            double jnn = fim_entry(t, phases, n, n, T);
            double direct = 2.0 * double(T) * (Ri(n, n).real() * R(n, n).real() - 1.0);
            CHECK_THAT(jnn, WithinAbs(direct, 1e-9 * scale));
            if (std::isfinite(p.bound(n))) CHECK_THAT(jnn * p.bound(n), WithinAbs(1.0, 1e-8));
            for (long m = 1; m < cfg.N; ++m) {
                if (m == n) continue;
                double closed = 2.0 * double(T) * (R(n, m) * Ri(m, n)).real();
                CHECK_THAT(fim_entry(t, phases, n, m, T), WithinAbs(closed, 1e-9 * scale));
            }
        }
    }
    ScenarioConfig cfg;
    auto t = build_covariance(cfg);
    CHECK_THROWS_AS(fim_entry(t, PhaseVector(cfg.N), 0, 1, 10), DomainError);
}

TEST_CASE("crb_full inverts the assembled Fisher matrix", "[calib_known]")
{
    ScenarioConfig cfg;
    auto t = build_covariance(cfg);
    const long T = 100, n = cfg.N - 1;
    RMatrix J(n, n);
    for (long a = 1; a <= n; ++a)
        for (long b = 1; b <= n; ++b) J(a - 1, b - 1) = fim_entry(t, PhaseVector(cfg.N), a, b, T);
    RMatrix Ji = J.inverse();
    auto full = crb_full(t, T);
    auto diag = crb(t, T);
    for (long k = 1; k <= n; ++k) {
        CHECK_THAT(full.bound(k), WithinRel(Ji(k - 1, k - 1), 1e-8));
        CHECK(full.bound(k) >= diag.bound(k));
    }
    auto id = crb_full(ToeplitzHermitian(CVector::Unit(4, 0)), T);
    for (long k = 1; k < 4; ++k) CHECK(std::isinf(id.bound(k)));
}

TEST_CASE("covariance_derivative against finite differences", "[calib_known]")
{
    Rng rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        auto cfg = random_scenario(rng);
        auto t = build_covariance(cfg);
        auto phases = random_phases(cfg.N, 180.0, rng);
        CMatrix R = apply_phases(t.dense(), phases);
        const double h = 1e-6;
        for (long n = 1; n < cfg.N; ++n) {
            RVector up = phases.values(), dn = phases.values();
            up(n) += h;
            dn(n) -= h;
            CMatrix fd = (apply_phases(t.dense(), PhaseVector::normalized(up)) -
                          apply_phases(t.dense(), PhaseVector::normalized(dn))) / (2.0 * h);
            CHECK(max_abs(fd - covariance_derivative(R, n)) <= 1e-5 * max_abs(R));
        }
    }
}

TEST_CASE("ml_form", "[calib_known]")
{
    Rng rng(7);
    CMatrix y(4, 6);
    for (long j = 0; j < 4; ++j)
        for (long k = 0; k < 6; ++k) y(j, k) = rng.cnormal();
    SnapshotSet Y{y};

    CMatrix Hi = ml_form(Y, CMatrix::Identity(4, 4));
    CHECK(max_abs(Hi - CMatrix(Hi.diagonal().asDiagonal())) <= 1e-15);

    ScenarioConfig cfg;
    cfg.N = 4;
    CMatrix Ti = toeplitz_inverse(build_covariance(cfg));
    CMatrix H = ml_form(Y, Ti);
    CMatrix ref = CMatrix::Zero(4, 4);
    for (long t = 0; t < 6; ++t) {
        CVector x = y.col(t);
        ref += x.conjugate().asDiagonal() * Ti * x.asDiagonal();
    }
    ref /= 6.0;
    CHECK(max_abs(H - ref) <= 1e-12 * max_abs(ref));
    CHECK(hermitian_eig(H).values(0) >= -1e-12 * max_abs(H));

    const Complex c(1.5, -2.0);
    SnapshotSet cY{c * y};
    CHECK(max_abs(ml_form(cY, Ti) - std::norm(c) * H) <= 1e-12 * max_abs(H));

    // E[x^H T^-1 x] = N
    ScenarioConfig big;
    auto t = build_covariance(big);
    Rng w(8);
    CMatrix R = SnapshotModel(t, PhaseVector(big.N)).sample_covariance_direct(1000000, w);
    CMatrix Hb = ml_form_from_covariance(R, toeplitz_inverse(t));
    CHECK_THAT(hermitian_form(Hb, RVector::Zero(big.N)), WithinRel(double(big.N), 0.01));
}

TEST_CASE("mle_bound", "[calib_known]")
{
    CHECK_THAT(mle_bound(CMatrix::Identity(3, 3)), WithinAbs(1.0, 1e-14));
    CMatrix d = CMatrix::Zero(3, 3);
    d(0, 0) = 4.0;
    d(1, 1) = 0.5;
    d(2, 2) = 2.0;
    CHECK_THAT(mle_bound(d), WithinAbs(0.5, 1e-14));

    Rng rng(9);
    for (int rep = 0; rep < 100; ++rep) {
        long n = 2 + rep % 15;
        CMatrix a(n, n);
        for (long j = 0; j < n; ++j)
            for (long k = 0; k < n; ++k) a(j, k) = rng.cnormal();
        CMatrix H = hermitian_part(a * a.adjoint());
        RVector psi(n);
        for (long k = 0; k < n; ++k) psi(k) = rng.uniform(-pi, pi);
        CHECK(hermitian_form(H, psi) >= double(n) * mle_bound(H) * (1.0 - 1e-12));
    }
}

TEST_CASE("ml_estimate recovers phases from the exact covariance", "[calib_known]")
{
    Rng rng(10);
    for (int rep = 0; rep < 10; ++rep) {
        auto cfg = random_scenario(rng);
        auto t = build_covariance(cfg);
        auto phases = random_phases(cfg.N, 180.0, rng);
        auto est = ml_estimate(apply_phases(t.dense(), phases), t);
        CHECK(max_wrapped_diff(est.phases, phases) <= 1e-7);
        CHECK_THAT(est.lambda_min, WithinAbs(1.0, 1e-9));
        CHECK(est.form_value >= double(cfg.N) * est.lambda_min * (1.0 - 1e-12));
    }

    ScenarioConfig cfg;
    auto t = build_covariance(cfg);
    Rng pr(11), dr(12);
    auto phases = random_phases(cfg.N, 30.0, pr);
    CMatrix R = SnapshotModel(t, phases).sample_covariance_direct(100, dr);
    auto relaxed = ml_estimate(R, t), refined = ml_estimate(R, t, true);
    CMatrix H = ml_form_from_covariance(R, toeplitz_inverse(t));
    CHECK(refined.form_value <= relaxed.form_value * (1.0 + 1e-12));
    CHECK_THAT(refined.form_value, WithinRel(hermitian_form(H, refined.phases.values()), 1e-10));
}

TEST_CASE("superdiag_estimate", "[calib_known]")
{
    Rng rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        auto cfg = random_scenario(rng);
        cfg.N = std::max(cfg.N, 5);
        auto t = build_covariance(cfg);
        auto phases = random_phases(cfg.N, 180.0, rng);
        CMatrix R = apply_phases(t.dense(), phases);

        SuperdiagOptions one;
        one.lag_args = superdiag_args(t, 1);
        CHECK(max_wrapped_diff(superdiag_estimate(R, one).phases, phases) <= 1e-10);

        SuperdiagOptions multi;
        multi.n_diags = 3;
        multi.lag_args = superdiag_args(t, 3);
        CHECK(max_wrapped_diff(superdiag_estimate(R, multi).phases, phases) <= 1e-9);

        // estimated lag argument: exact up to a linear ramp
        auto blind = superdiag_estimate(R);
        CHECK(align_phases(blind.phases, phases, AlignMode::affine).rms_deg <= 1e-7);
    }

    CMatrix z = CMatrix::Identity(3, 3);
    CHECK_THROWS_AS(superdiag_estimate(z), DegenerateError);
    CHECK_THROWS_AS(superdiag_estimate(z, {0}), DomainError);
}

TEST_CASE("superdiag errors equal the paired error-free lag arguments", "[calib_known]")
{
    ScenarioConfig cfg;
    auto t = build_covariance(cfg);
    SuperdiagOptions opt;
    opt.lag_args = superdiag_args(t, 1);
    const double a1 = std::arg(t(0, 1));
    for (int i = 0; i < 20; ++i) {
        Rng pr = Rng::stream(14, i, 1), a = Rng::stream(14, i), b = Rng::stream(14, i);
        auto phases = draw_phase_errors(180.0, cfg.N, pr);
        CMatrix R0 = SnapshotModel(t, PhaseVector(cfg.N)).sample_covariance_direct(100, a);
        CMatrix R = SnapshotModel(t, phases).sample_covariance_direct(100, b);
        auto est = superdiag_estimate(R, opt);
        // error at element p+1 accumulates -(arg R0(q, q+1) - arg t1) over q <= p
        double acc = 0.0;
        for (long p = 0; p + 1 < cfg.N; ++p) {
            acc -= wrap_angle(std::arg(R0(p, p + 1)) - a1);
            CHECK(std::abs(wrap_angle(est.phases[p + 1] - phases[p + 1] - acc)) <= 1e-9);
        }
    }
}

TEST_CASE("adhoc_estimate", "[calib_known]")
{
    Rng rng(15);
    ScenarioConfig full;
    full.W1 = 0.23;
    full.W2 = 0.13;
    for (auto cfg : {full, ScenarioConfig{}}) {
        auto t = build_covariance(cfg);
        for (int rep = 0; rep < 5; ++rep) {
            auto phases = random_phases(cfg.N, 180.0, rng);
            auto est = adhoc_estimate(apply_phases(t.dense(), phases), t);
            CHECK(max_wrapped_diff(est.phases, phases) <= 1e-9);
        }
    }
    ToeplitzHermitian id(CVector::Unit(4, 0));
    CHECK_THROWS_AS(adhoc_estimate(CMatrix::Identity(4, 4), id), DegenerateError);
}

TEST_CASE("superdiag and adhoc errors do not depend on phi_max", "[calib_known][property]")
{
    ScenarioConfig cfg;
    auto t = build_covariance(cfg);
    SuperdiagOptions opt;
    opt.lag_args = superdiag_args(t, 1);
    for (int i = 0; i < 20; ++i) {
        std::vector<Alignment> sd, ah;
        for (double phi : {5.0, 180.0}) {
            Rng pr = Rng::stream(16, i, 1), dr = Rng::stream(16, i);
            auto phases = draw_phase_errors(phi, cfg.N, pr);
            CMatrix R = SnapshotModel(t, phases).sample_covariance_direct(100, dr);
            sd.push_back(align_phases(superdiag_estimate(R, opt).phases, phases, AlignMode::constant));
            ah.push_back(align_phases(adhoc_estimate(R, t).phases, phases, AlignMode::constant));
        }
        for (long k = 0; k < cfg.N; ++k) {
            CHECK(std::abs(wrap_angle(sd[0].residual(k) - sd[1].residual(k))) <= 1e-9);
            CHECK(std::abs(wrap_angle(ah[0].residual(k) - ah[1].residual(k))) <= 1e-9);
        }
    }
}

TEST_CASE("alignment examples", "[calib_known]")
{
    Rng rng(17);
    auto truth = random_phases(17, 180.0, rng);
    CHECK(align_and_rmse(truth, truth, 0.25).second == 0.0);

    RVector shifted = truth.values();
    for (long l = 0; l < 17; ++l) shifted(l) += 0.7 - 0.05 * double(l);
    auto [aligned, rms] = align_and_rmse(PhaseVector::normalized(shifted), truth, 0.25);
    CHECK(rms <= 1e-9);

    // element 0 is pinned, so a common offset on the rest leaves a small remainder
    RVector off = truth.values().array() + 0.3;
    off(0) = 0.0;
    auto constant = align_phases(PhaseVector::normalized(off), truth, AlignMode::constant);
    const double m = 0.3 * 16.0 / 17.0;
    double expect = std::sqrt((m * m + 16.0 * (0.3 - m) * (0.3 - m)) / 17.0) / deg;
    CHECK_THAT(constant.rms_deg, WithinRel(expect, 1e-9));

    RVector raw = truth.values();
    raw(3) += 0.1;
    auto ref = align_phases(PhaseVector::normalized(raw), truth, AlignMode::reference);
    CHECK_THAT(ref.rms_deg, WithinRel(0.1 / deg / std::sqrt(17.0), 1e-12));
    CHECK(ref.offset == 0.0);

    CHECK_THROWS_AS(align_phases(PhaseVector(3), PhaseVector(4)), DomainError);
}

TEST_CASE("alignment against a brute-force grid search", "[calib_known][property]")
{
    Rng rng(18);
    for (int rep = 0; rep < 30; ++rep) {
        const long n = 8 + rep % 10;
        double c = rng.uniform(-pi, pi), b = rng.uniform(-0.3, 0.3);
        double sd = rng.uniform(2.0, 30.0) * deg;
        RVector r(n);
        for (long l = 0; l < n; ++l) r(l) = c + b * double(l) + sd * rng.normal();
        PhaseVector zero(n);
        RVector est = r;
        PhaseVector e = PhaseVector::normalized(est);
        // compare on the residual as the aligner sees it
        RVector seen(n);
        for (long l = 0; l < n; ++l) seen(l) = wrap_angle(e[l]);

        auto aff = align_phases(e, zero, AlignMode::affine);
        CHECK_THAT(aff.rms_deg, WithinRel(grid_rms_deg(seen, true), 0.01));
        // the beam-peak fit and the least-squares polish agree unless the spread is wide
        if (sd < 15.0 * deg) CHECK(std::abs(aff.peak_rms_deg - aff.rms_deg) <= 0.1);

        auto con = align_phases(e, zero, AlignMode::constant);
        CHECK_THAT(con.rms_deg, WithinRel(grid_rms_deg(seen, false), 0.01));
    }
}
