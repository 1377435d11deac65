#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace blindcal {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double deg = pi / 180.0;

// Precondition violated by the caller (bad range, singular input, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Input does not have the required matrix structure.
struct StructuralError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input sits on a degenerate boundary the algorithm refuses to handle.
struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A post-condition that should hold analytically did not.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a)
{
    double r = std::remainder(a, 2.0 * pi);
    if (r <= -pi) r += 2.0 * pi;
    return r;
}

inline double max_abs(const CMatrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// max |M - M^H| relative to max |M|.
inline double hermitian_defect(const CMatrix& m)
{
    if (m.rows() != m.cols()) return INFINITY;
    double scale = max_abs(m);
    if (scale == 0.0) return 0.0;
    return max_abs(m - m.adjoint()) / scale;
}

inline void require_hermitian(const CMatrix& m, const char* what = "matrix", double tol = 1e-12)
{
    if (m.rows() != m.cols())
        throw StructuralError(std::string(what) + ": not square");
    if (hermitian_defect(m) > tol)
        throw StructuralError(std::string(what) + ": not Hermitian");
}

inline CMatrix hermitian_part(const CMatrix& m)
{
    return 0.5 * (m + m.adjoint());
}

struct EigenDecomposition {
    RVector values;   // ascending
    CMatrix vectors;  // unit-norm columns
};

inline EigenDecomposition hermitian_eig(const CMatrix& m)
{
    require_hermitian(m, "hermitian_eig");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m));
    if (es.info() != Eigen::Success)
        throw InternalError("hermitian_eig: no convergence");
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Hermitian PSD square root. Small negative eigenvalues (> -1e-10 lambda_max) are clamped.
inline CMatrix hermitian_sqrt(const CMatrix& m)
{
    auto ed = hermitian_eig(m);
    const long n = ed.values.size();
    if (n == 0) return m;
    double lmax = std::max(std::abs(ed.values(n - 1)), std::abs(ed.values(0)));
    RVector s(n);
    for (long k = 0; k < n; ++k) {
        double l = ed.values(k);
        if (l < -1e-10 * lmax) throw DomainError("hermitian_sqrt: matrix is indefinite");
        s(k) = std::sqrt(std::max(l, 0.0));
    }
    CMatrix r = ed.vectors * s.asDiagonal() * ed.vectors.adjoint();
    return hermitian_part(r);
}

/// log det of a Hermitian positive definite matrix via Cholesky.
inline double log_det_hpd(const CMatrix& m)
{
    Eigen::LLT<CMatrix> llt(hermitian_part(m));
    if (llt.info() != Eigen::Success) throw DomainError("log_det_hpd: matrix not positive definite");
    double s = 0.0;
    for (long k = 0; k < m.rows(); ++k) s += std::log(llt.matrixL()(k, k).real());
    return 2.0 * s;
}

/**
 * Complex polynomial with coefficients in ascending degree.
 * Trailing exact zeros are trimmed on construction.
 */
class ComplexPolynomial {
public:
    ComplexPolynomial() = default;
    explicit ComplexPolynomial(std::vector<Complex> c) : c_(std::move(c)) { trim(); }
    explicit ComplexPolynomial(const CVector& v) : c_(v.data(), v.data() + v.size()) { trim(); }

    /// Monic-scaled polynomial lead * prod (z - r_k).
    static ComplexPolynomial from_roots(const std::vector<Complex>& roots, Complex lead = 1.0)
    {
        std::vector<Complex> c{lead};
        for (const auto& r : roots) {
            std::vector<Complex> next(c.size() + 1, 0.0);
            for (size_t k = 0; k < c.size(); ++k) {
                next[k + 1] += c[k];
                next[k] -= r * c[k];
            }
            c = std::move(next);
        }
        return ComplexPolynomial(std::move(c));
    }

    const std::vector<Complex>& coeffs() const { return c_; }
    bool is_zero() const { return c_.empty(); }
    int degree() const { return static_cast<int>(c_.size()) - 1; }
    Complex leading() const { return c_.empty() ? Complex(0.0) : c_.back(); }

    Complex operator()(Complex z) const
    {
        Complex acc = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
        return acc;
    }

    Complex derivative(Complex z) const
    {
        Complex acc = 0.0;
        for (int k = degree(); k >= 1; --k) acc = acc * z + double(k) * c_[k];
        return acc;
    }

    double norm() const
    {
        double s = 0.0;
        for (auto& x : c_) s += std::norm(x);
        return std::sqrt(s);
    }

private:
    void trim()
    {
        while (!c_.empty() && c_.back() == Complex(0.0)) c_.pop_back();
    }
    std::vector<Complex> c_;
};

namespace detail {

// Parlett-Reinsch style balancing with powers of two.
inline void balance(CMatrix& a)
{
    const long n = a.rows();
    const double radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (long i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (long j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0, s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
}

}  // namespace detail

/// All roots (with multiplicity) via balanced companion matrix, one Newton step each.
inline std::vector<Complex> poly_roots(const ComplexPolynomial& p)
{
    if (p.is_zero()) throw DomainError("poly_roots: zero polynomial");
    const int n = p.degree();
    if (n < 1) throw DomainError("poly_roots: degree must be at least 1");
    const auto& c = p.coeffs();
    if (n == 1) return {-c[0] / c[1]};

    CMatrix comp = CMatrix::Zero(n, n);
    for (int k = 1; k < n; ++k) comp(k, k - 1) = 1.0;
    for (int k = 0; k < n; ++k) comp(k, n - 1) = -c[k] / c[n];
    detail::balance(comp);

    Eigen::ComplexEigenSolver<CMatrix> es(comp, false);
    if (es.info() != Eigen::Success) throw InternalError("poly_roots: eigen solver failed");

    std::vector<Complex> roots(es.eigenvalues().data(), es.eigenvalues().data() + n);
    for (auto& z : roots) {
        Complex f = p(z), d = p.derivative(z);
        if (d != Complex(0.0)) {
            Complex z1 = z - f / d;
            if (std::isfinite(z1.real()) && std::isfinite(z1.imag()) && std::abs(p(z1)) <= std::abs(f))
                z = z1;
        }
    }
    return roots;
}

/// Bessel function of the first kind, order zero.
inline double bessel_j0(double x)
{
    x = std::abs(x);
    if (x <= 12.0) {
        // ascending series; terms peak near k ~ x/2 so cancellation stays below 1e-12 here
        long double q = -0.25L * x * x, term = 1.0L, sum = 1.0L;
        for (int k = 1; k < 200; ++k) {
            term *= q / (static_cast<long double>(k) * k);
            sum += term;
            if (std::abs(term) < 1e-22L * std::abs(sum) && std::abs(term) < 1e-22L) break;
        }
        return static_cast<double>(sum);
    }
    // Hankel asymptotic expansion, summed until terms stop shrinking
    double mu = 0.0;  // 4 nu^2
    double P = 0.0, Q = 0.0;
    double a = 1.0;  // a_k(nu) / x^k
    double prev = INFINITY;
    for (int k = 0; k < 60; ++k) {
        if (k > 0) a *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (8.0 * k * x);
        if (std::abs(a) > prev) break;
        prev = std::abs(a);
        int s = (k / 2) % 2 == 0 ? 1 : -1;
        if (k % 2 == 0) P += s * a;
        else Q += s * a;
        if (prev < 1e-17) break;
    }
    double chi = x - pi / 4.0;
    return std::sqrt(2.0 / (pi * x)) * (P * std::cos(chi) - Q * std::sin(chi));
}

}  // namespace blindcal
