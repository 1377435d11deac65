#pragma once

#include "numerics.hpp"
#include "scenario.hpp"

namespace blindcal {

/// Normalized first column of an inverse covariance (maximum-entropy predictor).
struct MEVector {
    CVector values;

    long size() const { return values.size(); }
    ComplexPolynomial polynomial() const { return ComplexPolynomial(values); }
};

inline constexpr double circle_eps = 1e-10;

inline MEVector me_vector(const CMatrix& R)
{
    require_hermitian(R, "me_vector");
    const long n = R.rows();
    Eigen::LLT<CMatrix> llt(hermitian_part(R));
    if (llt.info() != Eigen::Success) throw DomainError("me_vector: matrix not positive definite");
    CVector e1 = CVector::Zero(n);
    e1(0) = 1.0;
    CVector w = llt.solve(e1);
    Complex w0 = w(0);
    if (!(w0.real() > 0.0) || !w.allFinite()) throw DomainError("me_vector: matrix is singular");
    w /= w0.real();
    w(0) = 1.0;
    return {w};
}

/**
 * Reflect every root inside the unit disk to 1/conj(z). The unit-circle
 * magnitude is kept and P(0) is made real positive.
 */
inline MEVector flip_zeros(const MEVector& W)
{
    const long n = W.size();
    if (n == 0 || !(W.values(0).real() > 0.0) || W.values(0).imag() != 0.0)
        throw DomainError("flip_zeros: leading coefficient must be real positive");
    ComplexPolynomial w(W.values);
    if (w.degree() < 1) return W;

    std::vector<Complex> roots = poly_roots(w);
    std::vector<Complex> flipped;
    flipped.reserve(roots.size());
    double inside_scale = 1.0;
    bool any = false;
    for (const auto& z : roots) {
        double r = std::abs(z);
        if (r >= 1.0 - circle_eps && r <= 1.0)
            throw DegenerateError("flip_zeros: root on the unit circle");
        if (r < 1.0 - circle_eps) {
            flipped.push_back(1.0 / std::conj(z));
            inside_scale *= r;
            any = true;
        } else {
            flipped.push_back(z);
        }
    }
    if (!any) return W;

    // |P(e^iw)| = |W(e^iw)| fixes |lead| = |a_lead| * prod_in |z|; phase makes P(0) > 0.
    double lead_mag = std::abs(w.leading()) * inside_scale;
    Complex p0 = 1.0;
    for (const auto& z : flipped) p0 *= -z;
    Complex lead = lead_mag * std::conj(p0) / std::abs(p0);
    ComplexPolynomial P = ComplexPolynomial::from_roots(flipped, lead);

    MEVector out{CVector::Zero(n)};
    const auto& c = P.coeffs();
    for (size_t k = 0; k < c.size() && long(k) < n; ++k) out.values(k) = c[k];
    out.values(0) = out.values(0).real();
    return out;
}

/// Lower-triangular Toeplitz matrix with the given first column.
inline CMatrix lower_toeplitz(const CVector& col)
{
    const long n = col.size();
    CMatrix L = CMatrix::Zero(n, n);
    for (long j = 0; j < n; ++j)
        for (long k = 0; k <= j; ++k) L(j, k) = col(j - k);
    return L;
}

/// Inverse Toeplitz matrix from P = T^{-1} e1: P0 T^{-1} = L L^H - M M^H.
inline CMatrix gs_inverse(const MEVector& P)
{
    const long n = P.size();
    if (n == 0 || !(P.values(0).real() > 0.0)) throw DomainError("gs_inverse: P[0] must be positive");
    CVector m = CVector::Zero(n);
    for (long k = 1; k < n; ++k) m(k) = std::conj(P.values(n - k));
    CMatrix L = lower_toeplitz(P.values);
    CMatrix M = lower_toeplitz(m);
    CMatrix Ti = (L * L.adjoint() - M * M.adjoint()) / P.values(0).real();
    Ti = hermitian_part(Ti);
    Eigen::LLT<CMatrix> llt(Ti);
    if (llt.info() != Eigen::Success) throw DomainError("gs_inverse: result is not positive definite (roots inside the unit disk?)");
    return Ti;
}

/// Average each diagonal of a Hermitian matrix into a Toeplitz first column.
inline CVector diagonal_means(const CMatrix& X, double* max_dev = nullptr)
{
    const long n = X.rows();
    CVector t(n);
    double dev = 0.0;
    for (long m = 0; m < n; ++m) {
        Complex s = 0.0;
        for (long j = m; j < n; ++j) s += 0.5 * (X(j, j - m) + std::conj(X(j - m, j)));
        s /= double(n - m);
        for (long j = m; j < n; ++j) dev = std::max(dev, std::abs(X(j, j - m) - s));
        t(m) = s;
    }
    t(0) = t(0).real();
    if (max_dev) *max_dev = dev;
    return t;
}

struct Reconstruction {
    ToeplitzHermitian T_hat;
    CMatrix T_inv;
};

/**
 * Toeplitz matrix sharing the ME spectrum of R. With x0 = (R^-1)_00 the spectrum is
 * 1/(x0 |W|^2); the flipped P keeps |W| on the circle, so T^-1 = x0 P0 gs_inverse(P).
 */
inline Reconstruction reconstruct(const CMatrix& R)
{
    MEVector W = me_vector(R);
    MEVector P = flip_zeros(W);
    Eigen::LLT<CMatrix> lr(hermitian_part(R));
    double x0 = lr.solve(CVector::Unit(R.rows(), 0))(0).real();
    CMatrix Ti = (x0 * P.values(0).real()) * gs_inverse(P);
    Eigen::LLT<CMatrix> llt(Ti);
    CMatrix X = llt.solve(CMatrix::Identity(Ti.rows(), Ti.cols()));
    double dev = 0.0;
    CVector t = diagonal_means(X, &dev);
    double scale = t.cwiseAbs().maxCoeff();
    if (dev > 1e-8 * scale) throw InternalError("reconstruct: inverse of the Gohberg-Semencul matrix is not Toeplitz");
    return {ToeplitzHermitian(t), Ti};
}

}  // namespace blindcal
