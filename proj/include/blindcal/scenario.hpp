#pragma once

#include <cstdint>
#include <string>

#include "numerics.hpp"
#include "rng.hpp"

namespace blindcal {

/// Positive definite Hermitian Toeplitz matrix stored by its first column.
class ToeplitzHermitian {
public:
    ToeplitzHermitian() = default;
    explicit ToeplitzHermitian(CVector first_col) : t_(std::move(first_col))
    {
        if (t_.size() < 1) throw DomainError("ToeplitzHermitian: empty first column");
        if (!(t_(0).real() > 0.0)) throw DomainError("ToeplitzHermitian: t0 must be positive");
        t_(0) = t_(0).real();
    }

    long size() const { return t_.size(); }
    const CVector& first_col() const { return t_; }

    /// Lag m entry t_m (m may be negative).
    Complex lag(long m) const { return m >= 0 ? t_(m) : std::conj(t_(-m)); }
    Complex operator()(long j, long k) const { return lag(j - k); }

    CMatrix dense() const
    {
        const long n = size();
        CMatrix m(n, n);
        for (long j = 0; j < n; ++j)
            for (long k = 0; k < n; ++k) m(j, k) = lag(j - k);
        return m;
    }

private:
    CVector t_;
};

/// Per-element phases in radians, each in (-pi, pi], element 0 exactly zero.
class PhaseVector {
public:
    PhaseVector() = default;
    explicit PhaseVector(long n) : v_(RVector::Zero(n)) {}

    /// Wraps every entry and re-references to element 0.
    static PhaseVector normalized(const RVector& raw)
    {
        PhaseVector p(raw.size());
        if (raw.size() == 0) return p;
        for (long k = 1; k < raw.size(); ++k) p.v_(k) = wrap_angle(raw(k) - raw(0));
        return p;
    }

    long size() const { return v_.size(); }
    double operator[](long k) const { return v_(k); }
    const RVector& values() const { return v_; }

    RVector degrees() const { return v_ / deg; }

    /// diag(exp(i*phi)) as a vector
    CVector phasors() const
    {
        CVector e(size());
        for (long k = 0; k < size(); ++k) e(k) = std::polar(1.0, v_(k));
        return e;
    }

private:
    RVector v_;
};

/// T snapshots of an N-element array, one per column.
struct SnapshotSet {
    CMatrix data;  // N x T

    long dim() const { return data.rows(); }
    long count() const { return data.cols(); }
};

enum class CovarianceKind { two_sinc, one_sinc, shifted_symmetric };

inline const char* to_string(CovarianceKind k)
{
    switch (k) {
    case CovarianceKind::two_sinc: return "two_sinc";
    case CovarianceKind::one_sinc: return "one_sinc";
    case CovarianceKind::shifted_symmetric: return "shifted_symmetric";
    }
    return "?";
}

inline CovarianceKind covariance_kind_from_string(const std::string& s)
{
    if (s == "two_sinc") return CovarianceKind::two_sinc;
    if (s == "one_sinc") return CovarianceKind::one_sinc;
    if (s == "shifted_symmetric") return CovarianceKind::shifted_symmetric;
    throw DomainError("unknown covariance kind '" + s + "' (two_sinc, one_sinc, shifted_symmetric)");
}

struct ScenarioConfig {
    int N = 17;
    int T = 100;
    double W1 = 0.2;
    double W2 = 0.1;
    double theta0 = 20.0;        // degrees
    double d_over_lambda = 0.25;
    double q_inv_sq_db = -40.0;  // white floor added to the diagonal
    double phi_max_deg = 5.0;
    CovarianceKind covariance_kind = CovarianceKind::two_sinc;
    int trials = 1000;
    std::uint64_t seed = 1;

    double noise_floor() const { return std::pow(10.0, q_inv_sq_db / 10.0); }

    void validate() const
    {
        if (N < 1) throw DomainError("N must be >= 1");
        if (T < 1) throw DomainError("T must be >= 1");
        if (!(W1 > 0.0 && W1 <= 0.5)) throw DomainError("W1 must lie in (0, 0.5]");
        if (!(W2 > 0.0 && W2 <= 0.5)) throw DomainError("W2 must lie in (0, 0.5]");
        if (!(d_over_lambda > 0.0 && d_over_lambda <= 0.5)) throw DomainError("d_over_lambda must lie in (0, 0.5]");
        if (!(std::abs(theta0) <= 90.0)) throw DomainError("theta0 must lie in [-90, 90]");
        if (!(phi_max_deg >= 0.0 && phi_max_deg <= 180.0)) throw DomainError("phi_max_deg must lie in [0, 180]");
        if (!std::isfinite(q_inv_sq_db)) throw DomainError("q_inv_sq_db must be finite");
        if (trials < 1) throw DomainError("trials must be >= 1");
    }
};

/// Lag m of sin(2 pi W m)/(pi m), with the 2W limit at m = 0 and exact zeros at sine nodes.
inline double sinc_lag(double W, long m)
{
    if (m == 0) return 2.0 * W;
    double x = 2.0 * W * double(m);
    double xr = x - 2.0 * std::round(x / 2.0);  // sin(pi x) = sin(pi xr)
    if (std::abs(x - std::round(x)) < 1e-12) return 0.0;
    return std::sin(pi * xr) / (pi * double(m));
}

inline CMatrix build_sinc_matrix(double W, long N)
{
    if (!(W > 0.0 && W <= 0.5)) throw DomainError("build_sinc_matrix: W must lie in (0, 0.5]");
    CMatrix m(N, N);
    for (long j = 0; j < N; ++j)
        for (long k = 0; k < N; ++k) m(j, k) = sinc_lag(W, j - k);
    return m;
}

/// exp(i l 2 pi d/lambda sin theta0), l = 0..N-1
inline CVector build_steering(double theta0_deg, double d_over_lambda, long N)
{
    if (!(std::abs(theta0_deg) <= 90.0)) throw DomainError("build_steering: |theta0| must be <= 90");
    double u = 2.0 * pi * d_over_lambda * std::sin(theta0_deg * deg);
    CVector e(N);
    for (long l = 0; l < N; ++l) e(l) = std::polar(1.0, u * double(l));
    return e;
}

inline ToeplitzHermitian build_covariance(const ScenarioConfig& cfg)
{
    cfg.validate();
    const long N = cfg.N;
    const double q = cfg.noise_floor();
    const double u = 2.0 * pi * cfg.d_over_lambda * std::sin(cfg.theta0 * deg);
    CVector t(N);
    for (long m = 0; m < N; ++m) {
        Complex shift = std::polar(1.0, u * double(m));
        Complex v = m == 0 ? q : 0.0;
        switch (cfg.covariance_kind) {
        case CovarianceKind::two_sinc: v += sinc_lag(cfg.W1, m) + 0.5 * shift * sinc_lag(cfg.W2, m); break;
        case CovarianceKind::one_sinc: v += sinc_lag(cfg.W1, m); break;
        case CovarianceKind::shifted_symmetric: v += shift * sinc_lag(cfg.W2, m); break;
        }
        t(m) = v;
    }
    ToeplitzHermitian T(t);
    Eigen::LLT<CMatrix> llt(T.dense());
    if (llt.info() != Eigen::Success) throw InternalError("build_covariance: result is not positive definite");
    return T;
}

inline PhaseVector draw_phase_errors(double phi_max_deg, long N, Rng& rng)
{
    if (!(phi_max_deg >= 0.0 && phi_max_deg <= 180.0))
        throw DomainError("draw_phase_errors: phi_max must lie in [0, 180] degrees");
    RVector v = RVector::Zero(N);
    double a = phi_max_deg * deg;
    for (long k = 1; k < N; ++k) {
        double u = rng.uniform(-1.0, 1.0);
        v(k) = a * u;
    }
    return PhaseVector::normalized(v);
}

/// Draws of the model Y_t = D(phi) T^{1/2} xi_t.
class SnapshotModel {
public:
    SnapshotModel(const ToeplitzHermitian& T, const PhaseVector& phases)
    {
        if (phases.size() != T.size()) throw DomainError("SnapshotModel: dimension mismatch");
        CMatrix dense = T.dense();
        Eigen::LLT<CMatrix> llt(dense);
        if (llt.info() != Eigen::Success) throw DomainError("SnapshotModel: covariance not positive definite");
        root_ = hermitian_sqrt(dense);
        mix_ = phases.phasors().asDiagonal() * root_;
    }

    /// Reuses a precomputed T^{1/2}.
    static SnapshotModel from_root(const CMatrix& root, const PhaseVector& phases)
    {
        if (phases.size() != root.rows()) throw DomainError("SnapshotModel: dimension mismatch");
        SnapshotModel m;
        m.root_ = root;
        m.mix_ = phases.phasors().asDiagonal() * root;
        return m;
    }

    long dim() const { return mix_.rows(); }
    const CMatrix& mixing() const { return mix_; }

    SnapshotSet snapshots(long T, Rng& rng) const
    {
        if (T < 1) throw DomainError("generate_snapshots: T must be >= 1");
        CMatrix xi(dim(), T);
        for (long t = 0; t < T; ++t)
            for (long j = 0; j < dim(); ++j) xi(j, t) = rng.cnormal();
        return {mix_ * xi};
    }

    /// Sample covariance of T snapshots drawn through a Bartlett-factored Wishart matrix.
    /// Same distribution as sample_covariance(snapshots(T)), at O(N^3) instead of O(N^2 T).
    CMatrix sample_covariance_direct(long T, Rng& rng) const;

private:
    SnapshotModel() = default;
    CMatrix root_, mix_;
};

/**
 * W = (1/T) sum xi xi^H with xi ~ CN(0, I), drawn as A A^H / T where A is
 * lower triangular with A_kk^2 ~ Gamma(T - k, 1) and CN(0,1) below the diagonal.
 */
inline CMatrix wishart_identity(long N, long T, Rng& rng)
{
    if (T < N) throw DomainError("wishart_identity: T must be >= N");
    CMatrix A = CMatrix::Zero(N, N);
    for (long k = 0; k < N; ++k) {
        A(k, k) = std::sqrt(0.5 * rng.chi_squared(2.0 * double(T - k)));
        for (long j = k + 1; j < N; ++j) A(j, k) = rng.cnormal();
    }
    CMatrix W = A * A.adjoint() / double(T);
    return hermitian_part(W);
}

inline CMatrix SnapshotModel::sample_covariance_direct(long T, Rng& rng) const
{
    if (T < dim()) {
        // Bartlett needs T >= N; small T falls back to explicit snapshots
        CMatrix xi(dim(), T);
        for (long t = 0; t < T; ++t)
            for (long j = 0; j < dim(); ++j) xi(j, t) = rng.cnormal();
        CMatrix y = mix_ * xi;
        return hermitian_part(y * y.adjoint() / double(T));
    }
    CMatrix W = wishart_identity(dim(), T, rng);
    return hermitian_part(mix_ * W * mix_.adjoint());
}

inline SnapshotSet generate_snapshots(const ToeplitzHermitian& T_N, const PhaseVector& phases, long T, Rng& rng)
{
    return SnapshotModel(T_N, phases).snapshots(T, rng);
}

inline CMatrix sample_covariance(const SnapshotSet& Y)
{
    if (Y.count() < 1) throw DomainError("sample_covariance: no snapshots");
    CMatrix r = Y.data * Y.data.adjoint() / double(Y.count());
    return hermitian_part(r);
}

/// D(phi) M D(phi)^H
inline CMatrix apply_phases(const CMatrix& M, const PhaseVector& phases)
{
    CVector e = phases.phasors();
    return e.asDiagonal() * M * e.conjugate().asDiagonal();
}

}  // namespace blindcal
