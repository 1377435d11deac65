#pragma once

#include "numerics.hpp"

namespace blindcal {

struct EigenCorrection {
    RVector lambda_hat;  // ascending, after tie separation
    RVector mu_hat;
    RVector gamma_hat;
    double C = 0.0;
    bool ties_perturbed = false;
};

namespace detail {

// Separate eigenvalues closer than 1e-12 lambda_max. Returns true if anything moved.
inline bool separate_ties(RVector& lam)
{
    const long n = lam.size();
    if (n < 2) return false;
    double gap = 1e-12 * lam(n - 1);
    bool moved = false;
    for (long k = 1; k < n; ++k) {
        if (lam(k) - lam(k - 1) < gap) {
            lam(k) = lam(k - 1) + gap;
            moved = true;
        }
    }
    return moved;
}

}  // namespace detail

/**
 * Roots of (1/N) sum_k lam_k/(lam_k - mu) = 1/C, one per interval
 * (lam_{k-1}, lam_k) with lam_{-1} = 0. Input must be ascending and distinct.
 * Bisection runs on delta = lam_k - mu so the root keeps full relative precision.
 */
inline RVector mestre_roots(const RVector& lam, double C)
{
    const long n = lam.size();
    if (!(C > 0.0 && C < 1.0)) throw DomainError("mestre_roots: C must lie in (0, 1)");
    if (n == 0) return {};
    for (long k = 0; k < n; ++k) {
        if (!(lam(k) > 0.0)) throw DomainError("mestre_roots: eigenvalues must be positive");
        if (k > 0 && !(lam(k) > lam(k - 1))) throw DomainError("mestre_roots: eigenvalues must be ascending and distinct");
    }
    const double target = 1.0 / C;
    // f(mu) = (1/n) sum lam_j / (lam_j - mu) increases on each bracket; bisect down to adjacent
    // doubles and keep whichever end has the smaller residual
    auto f = [&](double m) {
        double s = 0.0;
        for (long j = 0; j < n; ++j) s += lam(j) / (lam(j) - m);
        return s / double(n) - target;
    };
    RVector mu(n);
    for (long k = 0; k < n; ++k) {
        double lo = k == 0 ? 0.0 : lam(k - 1), hi = lam(k);
        for (int it = 0; it < 4000; ++it) {
            double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (f(mid) < 0.0) lo = mid;
            else hi = mid;
        }
        bool lo_ok = k == 0 || lo > lam(k - 1), hi_ok = hi < lam(k);
        if (lo_ok && hi_ok) mu(k) = std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
        else mu(k) = lo_ok ? lo : hi;
    }
    return mu;
}

inline EigenCorrection mestre_correct(const RVector& lambda_hat, long T)
{
    const long n = lambda_hat.size();
    if (T <= n) throw DomainError("mestre_correct: T must exceed N");
    EigenCorrection ec;
    ec.C = double(n) / double(T);
    ec.lambda_hat = lambda_hat;
    std::sort(ec.lambda_hat.data(), ec.lambda_hat.data() + n);
    ec.ties_perturbed = detail::separate_ties(ec.lambda_hat);
    ec.mu_hat = mestre_roots(ec.lambda_hat, ec.C);
    ec.gamma_hat = double(T) * (ec.lambda_hat - ec.mu_hat);
    return ec;
}

/// Sample matrix with its eigenvalues replaced by the corrected ones.
inline CMatrix modify_matrix(const CMatrix& R, long T, EigenCorrection* info = nullptr)
{
    auto ed = hermitian_eig(R);
    if (!(ed.values(0) > 0.0)) throw DomainError("modify_matrix: matrix not positive definite");
    EigenCorrection ec = mestre_correct(ed.values, T);
    CMatrix out = ed.vectors * ec.gamma_hat.asDiagonal() * ed.vectors.adjoint();
    if (info) *info = ec;
    return hermitian_part(out);
}

}  // namespace blindcal
