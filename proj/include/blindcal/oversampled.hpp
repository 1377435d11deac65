#pragma once

#include <optional>

#include "numerics.hpp"
#include "scenario.hpp"

namespace blindcal {

enum class ElementPattern { cosine, ideal };

inline ElementPattern element_pattern_from_string(const std::string& s)
{
    if (s == "cosine") return ElementPattern::cosine;
    if (s == "ideal") return ElementPattern::ideal;
    throw DomainError("unknown element pattern '" + s + "' (cosine, ideal)");
}

inline const char* to_string(ElementPattern p) { return p == ElementPattern::cosine ? "cosine" : "ideal"; }

struct SectorMatrices {
    CMatrix R_inv;
    CMatrix R_vis;
    double d_over_lambda = 0.0;
    ElementPattern pattern = ElementPattern::cosine;
};

/**
 * Invisible/visible sector matrices. R_inv = I - sinc(d/lambda) in both cases;
 * the ideal pattern swaps R_vis for the J0 form and does not keep R_inv + R_vis = I.
 */
inline SectorMatrices sector_matrices(double d_over_lambda, long N, ElementPattern pattern = ElementPattern::cosine)
{
    if (!(d_over_lambda > 0.0 && d_over_lambda <= 0.5))
        throw DomainError("sector_matrices: d/lambda must lie in (0, 0.5]");
    SectorMatrices s;
    s.d_over_lambda = d_over_lambda;
    s.pattern = pattern;
    CMatrix vis = build_sinc_matrix(d_over_lambda, N);
    s.R_inv = CMatrix::Identity(N, N) - vis;
    if (pattern == ElementPattern::cosine) {
        s.R_vis = vis;
    } else {
        s.R_vis.resize(N, N);
        for (long j = 0; j < N; ++j)
            for (long k = 0; k < N; ++k) s.R_vis(j, k) = bessel_j0(2.0 * pi * d_over_lambda * double(j - k));
    }
    return s;
}

/// B = R_inv .* R_hat^T, i.e. B_jk = R_inv_jk (1/T) sum conj(y_j) y_k.
inline CMatrix b_matrix_from_covariance(const CMatrix& R_hat, const CMatrix& R_inv)
{
    if (R_hat.rows() != R_inv.rows() || R_hat.cols() != R_inv.cols())
        throw DomainError("b_matrix: dimension mismatch");
    return hermitian_part(R_inv.cwiseProduct(R_hat.transpose()));
}

inline CMatrix b_matrix(const SnapshotSet& Y, const CMatrix& R_inv)
{
    return b_matrix_from_covariance(sample_covariance(Y), R_inv);
}

/// E_j = exp(-i psi_j): psi is the phase error to be removed from the data.
inline CVector correction_vector(const RVector& psi)
{
    CVector e(psi.size());
    for (long k = 0; k < psi.size(); ++k) e(k) = std::polar(1.0, -psi(k));
    return e;
}

namespace detail {

inline double regularizer(const CMatrix& B)
{
    return 1e-12 * std::abs(B.trace().real()) / double(B.rows());
}

struct FormPair {
    double num, den;
};

inline FormPair forms(const RVector& psi, const CMatrix& B, const CMatrix* F, double eps)
{
    CVector E = correction_vector(psi);
    double den = (E.adjoint() * B * E)(0).real() + eps * double(E.size());
    double num = F ? (E.adjoint() * (*F) * E)(0).real() : double(E.size());
    return {num, den};
}

}  // namespace detail

/// q = (E^H F E) / (E^H B E); F defaults to the identity.
inline double objective_q(const RVector& psi, const CMatrix& B, const CMatrix* F = nullptr)
{
    if (psi.size() != B.rows()) throw DomainError("objective_q: dimension mismatch");
    auto f = detail::forms(psi, B, F, detail::regularizer(B));
    if (!(f.den > 0.0)) throw DomainError("objective_q: zero denominator");
    return f.num / f.den;
}

inline RVector gradient_q(const RVector& psi, const CMatrix& B, const CMatrix* F = nullptr)
{
    if (psi.size() != B.rows()) throw DomainError("gradient_q: dimension mismatch");
    const long n = psi.size();
    double eps = detail::regularizer(B);
    CVector E = correction_vector(psi);
    CVector BE = B * E + eps * E;
    double den = (E.adjoint() * BE)(0).real();
    if (!(den > 0.0)) throw DomainError("gradient_q: zero denominator");
    CVector FE = F ? CVector((*F) * E) : E;
    double num = (E.adjoint() * FE)(0).real();
    double q = num / den;
    RVector g(n);
    for (long m = 0; m < n; ++m) g(m) = -2.0 * (std::conj(E(m)) * (FE(m) - q * BE(m))).imag() / den;
    if (n > 0) g(0) = 0.0;
    return g;
}

struct OptimizerOptions {
    int max_iterations = 10000;
    double rel_tol = 1e-10;
    const CMatrix* F = nullptr;
};

struct OptimizerResult {
    PhaseVector psi;
    std::vector<double> trace;  // q per iteration, starting with the initial value
    bool converged = false;
    double invisible_power = 0.0;  // E^H B E at the final psi
    int iterations = 0;
};

/// Steepest ascent of q over the phases with element 0 held fixed.
inline OptimizerResult optimize_phases(const CMatrix& B, const PhaseVector& psi0, const OptimizerOptions& opt = {})
{
    require_hermitian(B, "optimize_phases");
    const long n = B.rows();
    if (psi0.size() != n) throw DomainError("optimize_phases: dimension mismatch");
    RVector psi = psi0.values();
    auto q_at = [&](const RVector& p) { return objective_q(p, B, opt.F); };

    OptimizerResult res;
    double q = q_at(psi);
    res.trace.push_back(q);
    double step = 0.0;  // remembered alpha scale

    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        RVector g = gradient_q(psi, B, opt.F);
        double gmax = g.cwiseAbs().maxCoeff();
        if (!(gmax > 1e-14 * q)) {
            res.converged = true;
            break;
        }
        auto phi = [&](double a) { return q_at(psi + a * g); };

        // bracket a maximum along the ray
        double a = 0.0, fa = q;
        double b = step > 0.0 ? step : 0.1 / gmax;
        double fb = phi(b);
        double c, fc;
        if (fb > fa) {
            c = 2.0 * b;
            fc = phi(c);
            for (int k = 0; k < 200 && fc > fb; ++k) {
                a = b, fa = fb;
                b = c, fb = fc;
                c = 2.0 * c;
                fc = phi(c);
            }
        } else {
            c = b, fc = fb;
            bool found = false;
            for (int k = 0; k < 200; ++k) {
                b = 0.5 * c;
                fb = phi(b);
                if (fb > fa) {
                    found = true;
                    break;
                }
                c = b, fc = fb;
            }
            if (!found) {
                res.converged = true;
                break;
            }
        }

        // golden section on [a, c] around b
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double lo = a, hi = c;
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = phi(x1), f2 = phi(x2);
        double best_a = b, best_f = fb;
        for (int k = 0; k < 60 && (hi - lo) > 1e-10 * hi; ++k) {
            if (f1 > best_f) best_a = x1, best_f = f1;
            if (f2 > best_f) best_a = x2, best_f = f2;
            if (f1 > f2) {
                hi = x2;
                x2 = x1, f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = phi(x1);
            } else {
                lo = x1;
                x1 = x2, f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = phi(x2);
            }
        }
        if (f1 > best_f) best_a = x1, best_f = f1;
        if (f2 > best_f) best_a = x2, best_f = f2;

        if (!(best_f > q)) {
            res.converged = true;
            break;
        }
        psi += best_a * g;
        for (long k = 0; k < n; ++k) psi(k) = wrap_angle(psi(k));
        double dq = (best_f - q) / q;
        q = best_f;
        res.trace.push_back(q);
        step = 2.0 * best_a;
        if (dq < opt.rel_tol) {
            res.converged = true;
            break;
        }
    }
    res.psi = PhaseVector::normalized(psi);
    CVector E = correction_vector(res.psi.values());
    res.invisible_power = (E.adjoint() * B * E)(0).real();
    return res;
}

/// Large-sample limit of b_matrix: D^H (R_inv .* T^T) D.
inline CMatrix asymptotic_b(const ToeplitzHermitian& T_N, const PhaseVector& phases, const CMatrix& R_inv)
{
    const long n = T_N.size();
    if (phases.size() != n || R_inv.rows() != n) throw DomainError("asymptotic_b: dimension mismatch");
    CMatrix S = hermitian_sqrt(T_N.dense());
    CMatrix B0 = CMatrix::Zero(n, n);
    for (long k = 0; k < n; ++k) {
        CVector s = S.col(k);
        B0 += s.conjugate().asDiagonal() * R_inv * s.asDiagonal();
    }
    CVector e = phases.phasors();
    CMatrix B = e.conjugate().asDiagonal() * B0 * e.asDiagonal();
    return hermitian_part(B);
}

/// RMS (degrees) of wrap(psi_with - (psi_no + injected)).
inline double decomposition_residual(const PhaseVector& psi_with, const PhaseVector& psi_no,
                                     const PhaseVector& injected)
{
    const long n = psi_with.size();
    if (psi_no.size() != n || injected.size() != n) throw DomainError("decomposition_residual: length mismatch");
    if (n == 0) return 0.0;
    double s = 0.0;
    for (long k = 0; k < n; ++k) {
        double r = wrap_angle(psi_with[k] - (psi_no[k] + injected[k]));
        s += r * r;
    }
    return std::sqrt(s / double(n)) / deg;
}

}  // namespace blindcal
