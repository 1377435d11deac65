#pragma once

#include <limits>
#include <optional>
#include <string>

#include "numerics.hpp"
#include "oversampled.hpp"
#include "scenario.hpp"

namespace blindcal {

struct PhaseEstimate {
    PhaseVector phases;
    std::string method;
    double lambda_min = std::numeric_limits<double>::quiet_NaN();  // ml: smallest eigenvalue of H
    double form_value = std::numeric_limits<double>::quiet_NaN();  // ml: E^H H E at the estimate
    double arg_t1_used = std::numeric_limits<double>::quiet_NaN(); // superdiag: reference lag-1 argument
};

struct CRBProfile {
    RVector bound;  // radians^2; element 0 is NaN (reference element), +inf when unidentifiable
    long T = 0;
};

inline CRBProfile crb(const ToeplitzHermitian& T_N, long T)
{
    if (T < 1) throw DomainError("crb: T must be >= 1");
    const long n = T_N.size();
    CMatrix M = T_N.dense();
    Eigen::LLT<CMatrix> llt(M);
    if (llt.info() != Eigen::Success) throw DomainError("crb: covariance not positive definite");
    CMatrix Mi = llt.solve(CMatrix::Identity(n, n));
    CRBProfile p;
    p.T = T;
    p.bound = RVector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    for (long k = 1; k < n; ++k) {
        double den = Mi(k, k).real() * M(k, k).real() - 1.0;
        p.bound(k) = den > 1e-12 ? 1.0 / (2.0 * double(T) * den) : std::numeric_limits<double>::infinity();
    }
    return p;
}

/// Diagonal of the inverse of the full (N-1)x(N-1) Fisher matrix, element 0 as reference.
inline CRBProfile crb_full(const ToeplitzHermitian& T_N, long T)
{
    if (T < 1) throw DomainError("crb_full: T must be >= 1");
    const long n = T_N.size();
    CMatrix M = T_N.dense();
    Eigen::LLT<CMatrix> llt(M);
    if (llt.info() != Eigen::Success) throw DomainError("crb_full: covariance not positive definite");
    CMatrix Mi = llt.solve(CMatrix::Identity(n, n));
    CRBProfile p;
    p.T = T;
    p.bound = RVector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    if (n < 2) return p;
    // J_jk = 2T [Re(M_jk Mi_kj) - delta_jk]
    RMatrix J(n - 1, n - 1);
    for (long j = 1; j < n; ++j)
        for (long k = 1; k < n; ++k) J(j - 1, k - 1) = 2.0 * double(T) * ((M(j, k) * Mi(k, j)).real() - (j == k));
    Eigen::LDLT<RMatrix> ldlt(J);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-12 * J.diagonal().maxCoeff()) {
        p.bound.tail(n - 1).setConstant(std::numeric_limits<double>::infinity());
        return p;
    }
    RMatrix Ji = ldlt.solve(RMatrix::Identity(n - 1, n - 1));
    for (long k = 1; k < n; ++k) p.bound(k) = Ji(k - 1, k - 1);
    return p;
}

/// dR/dphi_n for R = D(phi) T D(phi)^H: i (e_n e_n^T R - R e_n e_n^T).
inline CMatrix covariance_derivative(const CMatrix& R, long n)
{
    CMatrix d = CMatrix::Zero(R.rows(), R.cols());
    const Complex i1(0.0, 1.0);
    d.row(n) += i1 * R.row(n);
    d.col(n) -= i1 * R.col(n);
    return d;
}

/// Fisher information T tr(R_n R^-1 R_m R^-1), evaluated directly from the derivative matrices.
inline double fim_entry(const ToeplitzHermitian& T_N, const PhaseVector& phases, long n, long m, long T)
{
    const long N = T_N.size();
    if (phases.size() != N) throw DomainError("fim_entry: dimension mismatch");
    if (n < 1 || m < 1 || n >= N || m >= N) throw DomainError("fim_entry: indices must lie in 1..N-1");
    CMatrix R = apply_phases(T_N.dense(), phases);
    Eigen::LLT<CMatrix> llt(R);
    CMatrix Ri = llt.solve(CMatrix::Identity(N, N));
    CMatrix A = covariance_derivative(R, n) * Ri;
    CMatrix B = covariance_derivative(R, m) * Ri;
    return double(T) * (A * B).trace().real();
}

/// H_jk = (T^-1)_jk R_hat_kj, i.e. (1/T) sum diag(y^H) T^-1 diag(y).
inline CMatrix ml_form_from_covariance(const CMatrix& R_hat, const CMatrix& T_inv)
{
    if (R_hat.rows() != T_inv.rows() || R_hat.cols() != T_inv.cols())
        throw DomainError("ml_form: dimension mismatch");
    return hermitian_part(T_inv.cwiseProduct(R_hat.transpose()));
}

inline CMatrix ml_form(const SnapshotSet& Y, const CMatrix& T_inv)
{
    return ml_form_from_covariance(sample_covariance(Y), T_inv);
}

inline double mle_bound(const CMatrix& H)
{
    return hermitian_eig(H).values(0);
}

inline CMatrix toeplitz_inverse(const ToeplitzHermitian& T_N)
{
    CMatrix M = T_N.dense();
    Eigen::LLT<CMatrix> llt(M);
    if (llt.info() != Eigen::Success) throw DomainError("covariance not positive definite");
    return hermitian_part(llt.solve(CMatrix::Identity(M.rows(), M.cols())));
}

inline double hermitian_form(const CMatrix& H, const RVector& psi)
{
    CVector E = correction_vector(psi);
    return (E.adjoint() * H * E)(0).real();
}

/**
 * Relaxed ML estimate: arguments of the minimum eigenvector of H.
 * Both sign mappings are scored through the form and the smaller one is kept.
 */
inline PhaseEstimate ml_estimate_with_inverse(const CMatrix& R_hat, const CMatrix& T_inv, bool refine = false)
{
    CMatrix H = ml_form_from_covariance(R_hat, T_inv);
    auto ed = hermitian_eig(H);
    const long n = H.rows();
    RVector a(n);
    for (long k = 0; k < n; ++k) a(k) = std::arg(ed.vectors(k, 0));
    PhaseVector minus = PhaseVector::normalized(-a), plus = PhaseVector::normalized(a);
    double fm = hermitian_form(H, minus.values()), fp = hermitian_form(H, plus.values());

    PhaseEstimate est;
    est.method = "ml";
    est.phases = fm <= fp ? minus : plus;
    est.form_value = std::min(fm, fp);
    est.lambda_min = ed.values(0);
    if (refine) {
        auto r = optimize_phases(H, est.phases);
        est.phases = r.psi;
        est.form_value = r.invisible_power;
        est.method = "ml_refined";
    }
    return est;
}

inline PhaseEstimate ml_estimate(const CMatrix& R_hat, const ToeplitzHermitian& T_N, bool refine = false)
{
    return ml_estimate_with_inverse(R_hat, toeplitz_inverse(T_N), refine);
}

inline PhaseEstimate ml_estimate(const SnapshotSet& Y, const ToeplitzHermitian& T_N, bool refine = false)
{
    return ml_estimate(sample_covariance(Y), T_N, refine);
}

/// arg of the super-diagonal entries T(p, p+m), m = 1..count.
inline std::vector<double> superdiag_args(const ToeplitzHermitian& T_N, int count)
{
    std::vector<double> a;
    for (int m = 1; m <= count; ++m) a.push_back(std::arg(T_N(0, m)));
    return a;
}

struct SuperdiagOptions {
    int n_diags = 1;
    // arg T(p, p+m) for m = 1..n_diags; empty means estimate from the data
    std::vector<double> lag_args;
    int ls_passes = 20;
};

/**
 * Phases from the super-diagonals of R_hat. One diagonal gives the bidiagonal
 * cumulative solve; more diagonals are combined by wrapped least squares.
 */
inline PhaseEstimate superdiag_estimate(const CMatrix& R_hat, const SuperdiagOptions& opt = {})
{
    const long n = R_hat.rows();
    if (opt.n_diags < 1 || opt.n_diags >= std::max<long>(n, 2)) throw DomainError("superdiag_estimate: bad n_diags");
    const bool given = !opt.lag_args.empty();
    if (given && long(opt.lag_args.size()) < opt.n_diags)
        throw DomainError("superdiag_estimate: need one reference argument per diagonal");
    for (int m = 1; m <= opt.n_diags; ++m)
        for (long p = 0; p + m < n; ++p)
            if (R_hat(p, p + m) == Complex(0.0)) throw DegenerateError("superdiag_estimate: zero super-diagonal entry");

    // reference argument of lag m given the current phase estimate
    auto lag_arg = [&](int m, const RVector& phi) {
        if (given) return opt.lag_args[size_t(m - 1)];
        Complex s = 0.0;
        for (long p = 0; p + m < n; ++p) s += R_hat(p, p + m) * std::polar(1.0, -(phi(p) - phi(p + m)));
        return std::arg(s);
    };

    RVector phi = RVector::Zero(n);
    double a1 = lag_arg(1, phi);
    for (long p = 0; p + 1 < n; ++p) {
        double step = wrap_angle(std::arg(R_hat(p, p + 1)) - a1);
        phi(p + 1) = phi(p) - step;
    }

    if (opt.n_diags > 1) {
        // rows: phi_p - phi_{p+m} = r, unknowns phi_1..phi_{n-1}
        long rows = 0;
        for (int m = 1; m <= opt.n_diags; ++m) rows += n - m;
        RMatrix A = RMatrix::Zero(rows, n - 1);
        {
            long r = 0;
            for (int m = 1; m <= opt.n_diags; ++m)
                for (long p = 0; p + m < n; ++p, ++r) {
                    if (p > 0) A(r, p - 1) = 1.0;
                    A(r, p + m - 1) = -1.0;
                }
        }
        Eigen::ColPivHouseholderQR<RMatrix> qr(A);
        for (int pass = 0; pass < opt.ls_passes; ++pass) {
            RVector res(rows);
            long r = 0;
            for (int m = 1; m <= opt.n_diags; ++m) {
                double am = lag_arg(m, phi);
                for (long p = 0; p + m < n; ++p, ++r)
                    res(r) = wrap_angle(std::arg(R_hat(p, p + m)) - am - (phi(p) - phi(p + m)));
            }
            RVector d = qr.solve(res);
            phi.tail(n - 1) += d;
            if (d.cwiseAbs().maxCoeff() < 1e-13) break;
        }
    }

    PhaseEstimate est;
    est.method = opt.n_diags == 1 ? "superdiag" : "superdiag_multi";
    est.phases = PhaseVector::normalized(phi);
    est.arg_t1_used = a1;
    return est;
}

/// Phases from the dominant eigenvector of the masked element-wise ratio R_hat / T_N.
inline PhaseEstimate adhoc_estimate(const CMatrix& R_hat, const ToeplitzHermitian& T_N)
{
    const long n = T_N.size();
    if (R_hat.rows() != n) throw DomainError("adhoc_estimate: dimension mismatch");
    CMatrix M = T_N.dense();
    double eps = 1e-8 * M.cwiseAbs().maxCoeff();
    CMatrix D = CMatrix::Zero(n, n);
    bool any_off = false;
    for (long j = 0; j < n; ++j)
        for (long k = 0; k < n; ++k)
            if (std::abs(M(j, k)) > eps) {
                D(j, k) = R_hat(j, k) / M(j, k);
                if (j != k) any_off = true;
            }
    if (!any_off && n > 1) throw DegenerateError("adhoc_estimate: every off-diagonal covariance entry is masked");
    auto ed = hermitian_eig(hermitian_part(D));
    RVector a(n);
    for (long k = 0; k < n; ++k) a(k) = std::arg(ed.vectors(k, n - 1));
    PhaseEstimate est;
    est.method = "adhoc";
    est.phases = PhaseVector::normalized(a);
    return est;
}

/// reference: both vectors already share element 0, nothing is fitted.
enum class AlignMode { affine, constant, reference };

inline AlignMode align_mode_from_string(const std::string& s)
{
    if (s == "affine") return AlignMode::affine;
    if (s == "constant") return AlignMode::constant;
    if (s == "reference") return AlignMode::reference;
    throw DomainError("unknown alignment '" + s + "' (affine, constant, reference)");
}

inline const char* to_string(AlignMode m)
{
    switch (m) {
    case AlignMode::affine: return "affine";
    case AlignMode::constant: return "constant";
    case AlignMode::reference: return "reference";
    }
    return "?";
}

struct Alignment {
    RVector residual;        // wrapped, radians
    double offset = 0.0;     // removed constant
    double slope = 0.0;      // removed ramp per element
    double peak_offset = 0.0;  // beam-peak fit before least-squares polishing
    double peak_slope = 0.0;
    double peak_rms_deg = 0.0;
    double rms_deg = 0.0;
    double peak_angle_deg = std::numeric_limits<double>::quiet_NaN();  // direction implied by the ramp

    PhaseVector aligned() const { return PhaseVector::normalized(residual); }
    double sum_sq() const { return residual.squaredNorm(); }
};

namespace detail {

inline double rms_deg(const RVector& r) { return r.size() ? std::sqrt(r.squaredNorm() / double(r.size())) / deg : 0.0; }

inline RVector affine_residual(const RVector& r, double c, double b)
{
    RVector out(r.size());
    for (long l = 0; l < r.size(); ++l) out(l) = wrap_angle(r(l) - c - b * double(l));
    return out;
}

}  // namespace detail

/**
 * Residual wrap(est - truth) with the best constant (and, in affine mode, linear
 * ramp) removed. The ramp is located from the peak of sum exp(i(r_l - b l)) and
 * then polished by least squares on the wrapped residual.
 */
inline Alignment align_phases(const PhaseVector& estimate, const PhaseVector& truth, AlignMode mode = AlignMode::affine,
                              double d_over_lambda = 0.25)
{
    const long n = estimate.size();
    if (truth.size() != n) throw DomainError("align_and_rmse: length mismatch");
    RVector r(n);
    for (long l = 0; l < n; ++l) r(l) = wrap_angle(estimate[l] - truth[l]);
    if (mode == AlignMode::reference) {
        Alignment al;
        al.residual = r;
        al.rms_deg = al.peak_rms_deg = detail::rms_deg(r);
        return al;
    }

    auto peak = [&](double b) {
        Complex s = 0.0;
        for (long l = 0; l < n; ++l) s += std::polar(1.0, r(l) - b * double(l));
        return s;
    };

    double b = 0.0;
    if (mode == AlignMode::affine && n > 1) {
        const int K = std::max<int>(4096, int(64 * n));
        double best = -1.0;
        for (int k = 0; k < K; ++k) {
            double bb = -pi + 2.0 * pi * (k + 0.5) / K;
            double v = std::abs(peak(bb));
            if (v > best) best = v, b = bb;
        }
        double lo = b - 2.0 * pi / K, hi = b + 2.0 * pi / K;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
            if (std::abs(peak(x1)) > std::abs(peak(x2))) hi = x2;
            else lo = x1;
        }
        b = 0.5 * (lo + hi);
    }
    double c = n ? std::arg(peak(b)) : 0.0;

    Alignment al;
    al.peak_offset = c;
    al.peak_slope = b;
    al.peak_rms_deg = detail::rms_deg(detail::affine_residual(r, c, b));

    // Gauss-Newton on the wrapped residual
    const double lbar = 0.5 * double(n - 1);
    double sxx = 0.0;
    for (long l = 0; l < n; ++l) sxx += (l - lbar) * (l - lbar);
    for (int it = 0; it < 100 && n > 0; ++it) {
        RVector e = detail::affine_residual(r, c, b);
        double dc, db = 0.0;
        if (mode == AlignMode::affine && n > 1) {
            double sxy = 0.0;
            for (long l = 0; l < n; ++l) sxy += (l - lbar) * e(l);
            db = sxy / sxx;
            dc = e.mean() - db * lbar;
        } else {
            dc = e.mean();
        }
        c += dc;
        b += db;
        if (std::abs(dc) < 1e-15 && std::abs(db) < 1e-15) break;
    }
    RVector polished = detail::affine_residual(r, c, b);
    if (detail::rms_deg(polished) > al.peak_rms_deg) {
        // least squares wandered into a worse wrap branch
        c = al.peak_offset;
        b = al.peak_slope;
        polished = detail::affine_residual(r, c, b);
    }
    al.offset = wrap_angle(c);
    al.slope = b;
    al.residual = polished;
    al.rms_deg = detail::rms_deg(al.residual);
    double s = -b / (2.0 * pi * d_over_lambda);
    if (std::abs(s) <= 1.0) al.peak_angle_deg = std::asin(s) / deg;
    return al;
}

inline std::pair<PhaseVector, double> align_and_rmse(const PhaseVector& estimate, const PhaseVector& truth,
                                                     double d_over_lambda, AlignMode mode = AlignMode::affine)
{
    Alignment al = align_phases(estimate, truth, mode, d_over_lambda);
    return {al.aligned(), al.rms_deg};
}

}  // namespace blindcal
