// noise.hpp — discretized classical noise realizations and empirical statistics
//
// All generators are pure functions of (spec, grid, seed): regenerating with
// the same arguments reproduces the path bit-for-bit.
#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "nmjc/model.hpp"
#include "nmjc/rng.hpp"

namespace nmjc {

struct TimeGrid {
    double t0{0.0};
    double dt{0.01};
    int n_steps{0}; // samples = n_steps + 1

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be > 0");
        if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    }
    int n_samples() const { return n_steps + 1; }
    double time(int j) const { return t0 + j * dt; }
    double span() const { return n_steps * dt; }
    bool operator==(const TimeGrid& o) const {
        return t0 == o.t0 && dt == o.dt && n_steps == o.n_steps;
    }
};

struct NoisePath {
    TimeGrid grid;
    std::vector<complexd> values; // length n_steps + 1
    ClassicalNoiseSpec spec_tag;

    void check() const {
        if (values.size() != static_cast<std::size_t>(grid.n_samples()))
            throw std::invalid_argument("NoisePath: values length must be n_steps + 1");
        for (const auto& v : values)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw std::runtime_error("NoisePath: non-finite sample");
    }
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

// Stationary OU path: mean 0, variance Gamma*gamma/2, autocorrelation
// (Gamma*gamma/2) exp(-gamma tau). Exact AR(1) recursion, no dt bias:
//   x_{n+1} = x_n e^{-gamma dt} + sigma sqrt(1 - e^{-2 gamma dt}) N(0,1)
inline NoisePath sample_ou(double Gamma, double gamma, const TimeGrid& grid, std::uint64_t seed) {
    if (!(gamma > 0.0)) throw std::invalid_argument("sample_ou: gamma must be > 0");
    if (Gamma < 0.0) throw std::invalid_argument("sample_ou: Gamma must be >= 0");
    grid.validate();

    const double sigma = std::sqrt(0.5 * Gamma * gamma);
    const double r = std::exp(-gamma * grid.dt);
    const double q = sigma * std::sqrt(1.0 - r * r);

    RandomStream rng(seed);
    NoisePath path;
    path.grid = grid;
    path.values.resize(grid.n_samples());
    double x = sigma * rng.normal(); // stationary initial draw
    path.values[0] = x;
    for (int j = 1; j < grid.n_samples(); ++j) {
        x = x * r + q * rng.normal();
        path.values[j] = x;
    }
    path.spec_tag.process = NoiseProcessKind::OU;
    path.spec_tag.Gamma = Gamma;
    path.spec_tag.gamma = gamma;
    return path;
}

// Two-valued piecewise-constant path on +-amplitude. At every interval
// boundary t0 + k*flip_interval the sign flips with probability p. A sample
// landing exactly on a boundary takes the post-flip value.
inline NoisePath sample_telegraph(double p, double amplitude, double flip_interval,
                                  const TimeGrid& grid, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_telegraph: p must be in [0,1]");
    if (!(flip_interval > 0.0))
        throw std::invalid_argument("sample_telegraph: flip_interval must be > 0");
    grid.validate();

    RandomStream rng(seed);
    NoisePath path;
    path.grid = grid;
    path.values.resize(grid.n_samples());

    double sign = (rng.uniform() < 0.5) ? 1.0 : -1.0;
    path.values[0] = sign * amplitude;
    long boundary = 1; // next boundary index: t0 + boundary*flip_interval
    const double eps = 1e-12 * flip_interval;
    for (int j = 1; j < grid.n_samples(); ++j) {
        const double t = j * grid.dt; // relative to t0
        while (boundary * flip_interval <= t + eps) {
            if (rng.uniform() < p) sign = -sign;
            ++boundary;
        }
        path.values[j] = sign * amplitude;
    }
    path.spec_tag.process = NoiseProcessKind::Telegraph;
    path.spec_tag.p = p;
    path.spec_tag.amplitude = amplitude;
    path.spec_tag.flip_interval = flip_interval;
    return path;
}

// Path identically equal to c (frozen-noise limit of infinite memory time).
inline NoisePath constant_offset(double c, const TimeGrid& grid) {
    grid.validate();
    NoisePath path;
    path.grid = grid;
    path.values.assign(grid.n_samples(), complexd(c, 0.0));
    path.spec_tag.process = NoiseProcessKind::ConstantOffset;
    path.spec_tag.offset = c;
    return path;
}

namespace detail {
inline std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}
} // namespace detail

// Complex Gaussian path with two-point function <z(t) z*(s)> = alpha(t-s),
// built by filtering white noise with the square root of the circulant
// spectrum of alpha. The real and imaginary parts carry alpha(0)/2 each.
// A burn-in margin of 4x the memory time is generated and discarded at both
// ends to suppress wrap-around correlation.
inline NoisePath sample_spectral(const CorrelationSpec& target, const TimeGrid& grid,
                                 std::uint64_t seed) {
    grid.validate();
    target.validate();
    const int n = grid.n_samples();
    const double mem = target.memory_time();
    if (target.kind != CorrelationKind::Delta) {
        if (mem < grid.dt)
            throw std::invalid_argument("sample_spectral: memory time must exceed dt");
        if (mem > 0.25 * grid.span())
            throw std::invalid_argument("sample_spectral: memory time must be < span/4");
    }
    const std::size_t margin =
        static_cast<std::size_t>(std::ceil(4.0 * mem / grid.dt)) + 1;
    const std::size_t M = detail::next_pow2(static_cast<std::size_t>(n) + 2 * margin);

    // circulant covariance and its eigenvalues
    std::vector<complexd> cov(M);
    for (std::size_t j = 0; j < M; ++j) {
        const std::size_t k = std::min(j, M - j);
        if (target.kind == CorrelationKind::Delta)
            cov[j] = (k == 0) ? complexd(target.Gamma / grid.dt, 0.0) : complexd(0.0, 0.0);
        else
            cov[j] = complexd(ou_correlation(target, static_cast<double>(k) * grid.dt), 0.0);
    }
    Eigen::FFT<double> fft;
    std::vector<complexd> lambda(M);
    fft.fwd(lambda, cov);

    double lam_max = 0.0;
    for (const auto& l : lambda) lam_max = std::max(lam_max, l.real());
    std::vector<double> lam(M);
    for (std::size_t k = 0; k < M; ++k) {
        const double lr = lambda[k].real();
        if (lr < -1e-9 * lam_max)
            throw std::domain_error("sample_spectral: target correlation has negative spectral density");
        lam[k] = std::max(lr, 0.0);
    }

    // z = sqrt(M) * IFFT(sqrt(lambda) .* w), w complex standard normal
    RandomStream rng(seed);
    std::vector<complexd> w(M);
    const double inv_sqrt2 = 0.70710678118654752440;
    for (std::size_t k = 0; k < M; ++k) {
        const double re = rng.normal();
        const double im = rng.normal();
        w[k] = std::sqrt(lam[k]) * complexd(re * inv_sqrt2, im * inv_sqrt2);
    }
    std::vector<complexd> z(M);
    fft.inv(z, w);
    const double scale = std::sqrt(static_cast<double>(M));

    NoisePath path;
    path.grid = grid;
    path.values.resize(n);
    for (int j = 0; j < n; ++j) path.values[j] = z[margin + j] * scale;
    path.spec_tag.process = NoiseProcessKind::Spectral;
    path.spec_tag.spectral_target = target;
    return path;
}

// ---------------------------------------------------------------------------
// Empirical statistics
// ---------------------------------------------------------------------------

struct CorrelationEstimate {
    double tau{0.0};
    complexd alpha_hat{0.0, 0.0};
    double stderr_re{0.0}; // path-to-path spread of the real part
};

// Unbiased cross-time estimator of <x(t+tau) x*(t)> averaged over paths and t.
inline std::vector<CorrelationEstimate> estimate_correlation(const std::vector<NoisePath>& paths,
                                                             int max_lag) {
    if (paths.size() < 2)
        throw std::invalid_argument("estimate_correlation: need at least 2 paths");
    const TimeGrid& grid = paths.front().grid;
    for (const auto& p : paths)
        if (!(p.grid == grid))
            throw std::invalid_argument("estimate_correlation: mismatched grids");
    if (max_lag < 0 || max_lag > grid.n_steps)
        throw std::invalid_argument("estimate_correlation: max_lag outside grid");

    const int n = grid.n_samples();
    const std::size_t np = paths.size();
    std::vector<CorrelationEstimate> out(static_cast<std::size_t>(max_lag) + 1);
    std::vector<complexd> per_path(np);
    for (int k = 0; k <= max_lag; ++k) {
        complexd mean(0.0, 0.0);
        for (std::size_t i = 0; i < np; ++i) {
            complexd acc(0.0, 0.0);
            const auto& v = paths[i].values;
            for (int j = 0; j + k < n; ++j) acc += v[j + k] * std::conj(v[j]);
            per_path[i] = acc / static_cast<double>(n - k);
            mean += per_path[i];
        }
        mean /= static_cast<double>(np);
        double var = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            const double d = per_path[i].real() - mean.real();
            var += d * d;
        }
        var /= static_cast<double>(np - 1);
        out[k].tau = k * grid.dt;
        out[k].alpha_hat = mean;
        out[k].stderr_re = std::sqrt(var / static_cast<double>(np));
    }
    return out;
}

// CSV dump: t, value_re, value_im
inline void write_path_csv(const NoisePath& path, std::ostream& os) {
    os << "t,value_re,value_im\n";
    os.precision(17);
    for (int j = 0; j < path.grid.n_samples(); ++j) {
        os << path.grid.time(j) << ',' << path.values[j].real() << ','
           << path.values[j].imag() << '\n';
    }
}

} // namespace nmjc
