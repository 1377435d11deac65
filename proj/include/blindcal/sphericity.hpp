#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "rmt.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "toeplitz_recon.hpp"

namespace blindcal {

struct LRStatistic {
    double log_lr = 0.0;  // <= 0

    double lr() const { return std::exp(log_lr); }
};

/// log det(R M^-1) - N log(tr(R M^-1)/N), through the whitened matrix L^-1 R L^-H.
inline LRStatistic lr_stat(const CMatrix& R_hat, const CMatrix& M)
{
    require_hermitian(R_hat, "lr_stat");
    require_hermitian(M, "lr_stat");
    const long n = R_hat.rows();
    if (M.rows() != n) throw DomainError("lr_stat: dimension mismatch");
    Eigen::LLT<CMatrix> llt(hermitian_part(M));
    if (llt.info() != Eigen::Success) throw DomainError("lr_stat: reference matrix not positive definite");
    CMatrix L = llt.matrixL();
    CMatrix A = L.triangularView<Eigen::Lower>().solve(hermitian_part(R_hat));
    A = L.triangularView<Eigen::Lower>().solve(A.adjoint()).adjoint();
    RVector ev = hermitian_eig(hermitian_part(A)).values;
    double lmax = ev(n - 1);
    if (!(ev(0) > 1e-14 * lmax) || !(lmax > 0.0)) throw DomainError("lr_stat: sample matrix is rank deficient");
    ev /= lmax;  // scale out before logs
    double sum_log = 0.0, sum = 0.0;
    for (long k = 0; k < n; ++k) {
        sum_log += std::log(ev(k));
        sum += ev(k);
    }
    double v = sum_log - double(n) * std::log(sum / double(n));
    return {std::min(v, 0.0)};
}

inline LRStatistic lr_stat(const CMatrix& R_hat, const ToeplitzHermitian& M)
{
    return lr_stat(R_hat, M.dense());
}

struct NullDistribution {
    long N = 0;
    long T = 0;
    std::uint64_t seed = 0;
    std::vector<double> samples;  // sorted ascending

    long trials() const { return long(samples.size()); }

    /// Lower alpha-quantile (order statistic ceil(alpha n)).
    double quantile(double alpha) const
    {
        if (samples.empty()) throw DomainError("NullDistribution: no samples");
        long n = long(samples.size());
        long idx = long(std::ceil(alpha * double(n))) - 1;
        idx = std::clamp(idx, 0L, n - 1);
        return samples[size_t(idx)];
    }
};

/// Runs fn(trial) for trial in [0, trials) on `threads` workers.
template <class Fn>
void parallel_trials(long trials, int threads, Fn&& fn)
{
    if (threads <= 1 || trials <= 1) {
        for (long t = 0; t < trials; ++t) fn(t);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                long t = next.fetch_add(1);
                if (t >= trials) return;
                try {
                    fn(t);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

inline NullDistribution null_samples(long N, long T, long trials, std::uint64_t seed, int threads = 1)
{
    if (T < N) throw DomainError("null_samples: T must be >= N");
    if (trials < 1) throw DomainError("null_samples: trials must be >= 1");
    NullDistribution nd{N, T, seed, std::vector<double>(size_t(trials))};
    CMatrix I = CMatrix::Identity(N, N);
    parallel_trials(trials, threads, [&](long t) {
        Rng rng = Rng::stream(seed, std::uint64_t(t));
        nd.samples[size_t(t)] = N == 1 ? 0.0 : lr_stat(wishart_identity(N, T, rng), I).log_lr;
    });
    std::sort(nd.samples.begin(), nd.samples.end());
    return nd;
}

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_null_cache(const NullDistribution& nd, const std::filesystem::path& file)
{
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << "# N=" << nd.N << " T=" << nd.T << " trials=" << nd.trials() << " seed=" << nd.seed << "\n";
    for (double v : nd.samples) os << format_double(v) << "\n";
}

inline NullDistribution read_null_cache(const std::filesystem::path& file)
{
    std::ifstream is(file);
    if (!is) throw std::runtime_error("cannot read " + file.string());
    std::string header;
    std::getline(is, header);
    NullDistribution nd;
    long trials = 0;
    unsigned long long seed = 0;
    if (std::sscanf(header.c_str(), "# N=%ld T=%ld trials=%ld seed=%llu", &nd.N, &nd.T, &trials, &seed) != 4)
        throw std::runtime_error("bad null cache header in " + file.string());
    nd.seed = seed;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) nd.samples.push_back(std::stod(line));
    if (long(nd.samples.size()) != trials) throw std::runtime_error("truncated null cache " + file.string());
    return nd;
}

inline std::filesystem::path null_cache_name(long N, long T, long trials, std::uint64_t seed)
{
    return "null_N" + std::to_string(N) + "_T" + std::to_string(T) + "_n" + std::to_string(trials) + "_s" +
           std::to_string(seed) + ".txt";
}

/// Loads the null distribution from dir if present, otherwise computes and stores it.
inline NullDistribution cached_null_samples(const std::filesystem::path& dir, long N, long T, long trials,
                                            std::uint64_t seed, int threads = 1)
{
    auto file = dir / null_cache_name(N, T, trials, seed);
    if (std::filesystem::exists(file)) {
        auto nd = read_null_cache(file);
        if (nd.N == N && nd.T == T && nd.trials() == trials && nd.seed == seed) return nd;
    }
    auto nd = null_samples(N, T, trials, seed, threads);
    std::filesystem::create_directories(dir);
    write_null_cache(nd, file);
    return nd;
}

/// LR of the (optionally RMT-modified) sample matrix against its own Toeplitz reconstruction.
inline LRStatistic lr_against_reconstruction(const CMatrix& R_hat, long T, bool use_rmt)
{
    CMatrix R = use_rmt ? modify_matrix(R_hat, T) : hermitian_part(R_hat);
    Reconstruction rec = reconstruct(R);
    return lr_stat(R, rec.T_hat);
}

enum class Verdict { toeplitz_origin, non_toeplitz_origin };

struct OriginTestResult {
    Verdict verdict = Verdict::toeplitz_origin;
    double log_lr = 0.0;
    double threshold = 0.0;
};

inline OriginTestResult toeplitz_origin_test(const CMatrix& R_hat, long T, bool use_rmt, const NullDistribution& null,
                                             double alpha = 0.01)
{
    if (null.N != R_hat.rows() || null.T != T)
        throw DomainError("toeplitz_origin_test: null distribution computed for a different (N, T)");
    OriginTestResult r;
    r.log_lr = lr_against_reconstruction(R_hat, T, use_rmt).log_lr;
    r.threshold = null.quantile(alpha);
    r.verdict = r.log_lr < r.threshold ? Verdict::non_toeplitz_origin : Verdict::toeplitz_origin;
    return r;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_distance(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty()) return 1.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

}  // namespace blindcal
