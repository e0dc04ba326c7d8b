// ensemble.hpp — Monte Carlo orchestration: seed streams, parallel trajectory
// execution, noise-averaged density matrices, error bars, protection metric
//
// Averaging contract. The ensemble averages the stochastic density matrix
// rho' pointwise (a convex combination, so Hermiticity and unit trace
// survive) and extracts observables from the averaged state: coherence,
// purity and negativity are nonlinear in rho, and the physics of dephasing
// noise lives exactly in the phase averaging of rho'. Error bars come from
// fixed-count batch means: trajectories are split into K contiguous batches
// by index, each batch is averaged by a single worker in index order, and the
// spread of per-batch observables gives the standard error. Results are
// bitwise independent of the worker count.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nmjc/evolve.hpp"
#include "nmjc/measures.hpp"
#include "nmjc/model.hpp"
#include "nmjc/noise.hpp"
#include "nmjc/rng.hpp"

namespace nmjc {

struct EnsembleConfig {
    int n_traj{2000};
    std::uint64_t base_seed{1};
    ModelParams params{};
    CorrelationSpec alpha1{};
    ClassicalNoiseSpec classical{};
    double T{100.0};
    double dt{0.01};
    int record_stride{10};
    SolverKind solver{SolverKind::MeqHalf};
    EtaFrame eta_frame{EtaFrame::Direct};
    double lindblad_Gamma3{0.0};
    int n_threads{0};                                   // 0 = hardware concurrency
    std::vector<std::pair<double, double>> avg_windows; // windowed coherence averages

    TrajectorySpec trajectory() const {
        TrajectorySpec ts;
        ts.params = params;
        ts.alpha1 = alpha1;
        ts.channel = classical.channel;
        ts.eta_frame = eta_frame;
        ts.solver = solver;
        ts.T = T;
        ts.dt = dt;
        ts.record_stride = record_stride;
        ts.lindblad_Gamma3 = lindblad_Gamma3;
        return ts;
    }

    void validate() const {
        if (n_traj < 1) throw std::invalid_argument("EnsembleConfig: n_traj must be >= 1");
        classical.validate();
        trajectory().validate();
    }

    std::string canonical_string() const;
    std::string config_hash() const;
};

struct WindowStat {
    double t_lo{0.0}, t_hi{0.0};
    double coherence_avg{0.0};
    double std_err{0.0};
};

struct EnsembleResult {
    std::vector<double> times;
    std::vector<ObservableRecord> mean;
    std::vector<ObservableRecord> std_err;
    std::vector<std::vector<ObservableRecord>> batches; // per-batch mean curves
    std::vector<WindowStat> windows;
    int n_traj{0};
    int n_batches{0};
    std::string config_hash;
    TrajectoryDiagnostics diagnostics;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline NoisePath make_noise_path(const ClassicalNoiseSpec& cl, const TimeGrid& grid,
                                 std::uint64_t seed) {
    switch (cl.process) {
    case NoiseProcessKind::OU: return sample_ou(cl.Gamma, cl.gamma, grid, seed);
    case NoiseProcessKind::Telegraph:
        return sample_telegraph(cl.p, cl.amplitude, cl.flip_interval, grid, seed);
    case NoiseProcessKind::ConstantOffset: return constant_offset(cl.offset, grid);
    case NoiseProcessKind::Spectral: return sample_spectral(cl.spectral_target, grid, seed);
    }
    throw std::logic_error("make_noise_path: unknown process");
}

// trapezoid average of y over record indices [lo, hi]
inline double window_average(const std::vector<double>& times, const std::vector<double>& y,
                             int lo, int hi) {
    double acc = 0.0;
    for (int r = lo; r < hi; ++r)
        acc += 0.5 * (times[r + 1] - times[r]) * (y[r] + y[r + 1]);
    return acc / (times[hi] - times[lo]);
}

inline void window_indices(const std::vector<double>& times, double t_lo, double t_hi, int& lo,
                           int& hi) {
    const double eps = 1e-9 * (times.back() + 1.0);
    lo = -1;
    hi = -1;
    for (int r = 0; r < static_cast<int>(times.size()); ++r) {
        if (lo < 0 && times[r] >= t_lo - eps) lo = r;
        if (times[r] <= t_hi + eps) hi = r;
    }
    if (lo < 0 || hi < 0 || hi <= lo)
        throw std::invalid_argument("window must span at least two record times");
}

} // namespace detail

inline std::string EnsembleConfig::canonical_string() const {
    using detail::fmt_g;
    std::string s;
    auto add = [&](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
    add("n_traj", std::to_string(n_traj));
    add("base_seed", std::to_string(base_seed));
    add("omega0", fmt_g(params.omega0));
    add("Omega", fmt_g(params.Omega));
    add("G0", fmt_g(params.G0));
    add("kx0", fmt_g(params.kx0));
    add("n_max", std::to_string(params.n_max));
    add("init_ce", fmt_g(params.init_ce.real()) + "+" + fmt_g(params.init_ce.imag()) + "i");
    add("init_cg", fmt_g(params.init_cg.real()) + "+" + fmt_g(params.init_cg.imag()) + "i");
    add("alpha1.kind", std::to_string(static_cast<int>(alpha1.kind)));
    add("alpha1.Gamma", fmt_g(alpha1.Gamma));
    add("alpha1.gamma", fmt_g(alpha1.gamma));
    for (const auto& c : alpha1.components)
        add("alpha1.component",
            fmt_g(c.weight) + ":" + fmt_g(c.Gamma) + ":" + fmt_g(c.gamma));
    add("classical.channel", std::to_string(static_cast<int>(classical.channel)));
    add("classical.process", std::to_string(static_cast<int>(classical.process)));
    add("classical.Gamma", fmt_g(classical.Gamma));
    add("classical.gamma", fmt_g(classical.gamma));
    add("classical.p", fmt_g(classical.p));
    add("classical.amplitude", fmt_g(classical.amplitude));
    add("classical.flip_interval", fmt_g(classical.flip_interval));
    add("classical.offset", fmt_g(classical.offset));
    add("classical.seed_stream", std::to_string(classical.seed_stream));
    add("T", fmt_g(T));
    add("dt", fmt_g(dt));
    add("record_stride", std::to_string(record_stride));
    add("solver", std::to_string(static_cast<int>(solver)));
    add("eta_frame", std::to_string(static_cast<int>(eta_frame)));
    add("lindblad_Gamma3", fmt_g(lindblad_Gamma3));
    return s;
}

inline std::string EnsembleConfig::config_hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(canonical_string())));
    return buf;
}

// Run the full ensemble. Deterministic for a fixed config regardless of the
// worker count: batches are contiguous trajectory-index ranges, each summed in
// index order by exactly one worker, reduced in batch order.
inline EnsembleResult run_ensemble(const EnsembleConfig& config) {
    config.validate();
    const TrajectorySpec ts = config.trajectory();
    const int n_steps = ts.n_steps();
    const int n_records = n_steps / config.record_stride + 1;
    const int dim = config.params.dim();
    const int n = config.n_traj;
    const int K = std::min(20, n);
    const bool stochastic = config.classical.channel != NoiseChannel::None &&
                            config.classical.process != NoiseProcessKind::ConstantOffset;

    // batch b covers [starts[b], starts[b+1])
    std::vector<int> starts(K + 1, 0);
    for (int b = 0; b < K; ++b) starts[b + 1] = starts[b] + n / K + (b < n % K ? 1 : 0);

    std::vector<std::vector<MatrixXcd>> batch_sum(
        K, std::vector<MatrixXcd>(n_records, MatrixXcd::Zero(dim, dim)));
    std::vector<TrajectoryDiagnostics> batch_diag(K);

    const TimeGrid noise_grid{0.0, 0.5 * config.dt, 2 * n_steps};
    const std::uint64_t seed_base =
        config.base_seed ^ (config.classical.seed_stream * 0x9E3779B97F4A7C15ull);

    std::atomic<int> next_batch{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const int b = next_batch.fetch_add(1);
            if (b >= K) return;
            try {
                for (int i = starts[b]; i < starts[b + 1]; ++i) {
                    NoisePath path;
                    const bool has_noise = config.classical.channel != NoiseChannel::None;
                    if (has_noise)
                        path = detail::make_noise_path(config.classical, noise_grid,
                                                       stream_seed(seed_base, i));
                    auto& acc = batch_sum[b];
                    try {
                        run_trajectory(
                            ts, has_noise ? &path : nullptr,
                            [&](int rec, double, const Eigen::Ref<const MatrixXcd>& rho) {
                                acc[rec] += rho;
                            },
                            &batch_diag[b]);
                    } catch (const std::exception& e) {
                        throw std::runtime_error("trajectory " + std::to_string(i) + " (seed " +
                                                 std::to_string(stream_seed(seed_base, i)) +
                                                 "): " + e.what());
                    }
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int threads = config.n_threads > 0 ? config.n_threads
                                       : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, K));
    {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    EnsembleResult res;
    res.n_traj = n;
    res.n_batches = K;
    res.config_hash = config.config_hash();
    res.times.resize(n_records);
    for (int r = 0; r < n_records; ++r) res.times[r] = r * config.record_stride * config.dt;

    for (int b = 0; b < K; ++b) res.diagnostics.merge(batch_diag[b]);

    // totals in fixed batch order, then per-batch and total observables
    const double pg0 = std::norm(config.params.init_cg);
    std::vector<MatrixXcd> total(n_records, MatrixXcd::Zero(dim, dim));
    for (int b = 0; b < K; ++b)
        for (int r = 0; r < n_records; ++r) total[r] += batch_sum[b][r];

    res.mean.resize(n_records);
    res.batches.assign(K, std::vector<ObservableRecord>(n_records));
    for (int r = 0; r < n_records; ++r) {
        res.mean[r] =
            observables_from(total[r] / static_cast<double>(n), res.times[r], pg0);
        for (int b = 0; b < K; ++b) {
            const double cnt = starts[b + 1] - starts[b];
            res.batches[b][r] =
                observables_from(batch_sum[b][r] / cnt, res.times[r], pg0);
        }
    }

    // batch-mean standard errors (zero when the dynamics is deterministic)
    res.std_err.assign(n_records, ObservableRecord{});
    if (K >= 2 && stochastic) {
        auto fill = [&](auto field) {
            for (int r = 0; r < n_records; ++r) {
                double m = 0.0;
                for (int b = 0; b < K; ++b) m += res.batches[b][r].*field;
                m /= K;
                double var = 0.0;
                for (int b = 0; b < K; ++b) {
                    const double d = res.batches[b][r].*field - m;
                    var += d * d;
                }
                var /= (K - 1);
                res.std_err[r].*field = std::sqrt(var / K);
            }
        };
        fill(&ObservableRecord::coherence);
        fill(&ObservableRecord::purity);
        fill(&ObservableRecord::negativity);
        fill(&ObservableRecord::pop_e);
        fill(&ObservableRecord::pop_photon);
        fill(&ObservableRecord::pop_bath_proxy);
        for (int r = 0; r < n_records; ++r) res.std_err[r].t = res.times[r];
    }

    // windowed time-averaged coherence
    for (const auto& w : config.avg_windows) {
        int lo, hi;
        detail::window_indices(res.times, w.first, w.second, lo, hi);
        std::vector<double> mean_c(n_records);
        for (int r = 0; r < n_records; ++r) mean_c[r] = res.mean[r].coherence;
        WindowStat ws;
        ws.t_lo = w.first;
        ws.t_hi = w.second;
        ws.coherence_avg = detail::window_average(res.times, mean_c, lo, hi);
        if (K >= 2 && stochastic) {
            std::vector<double> bvals(K);
            double m = 0.0;
            for (int b = 0; b < K; ++b) {
                std::vector<double> bc(n_records);
                for (int r = 0; r < n_records; ++r) bc[r] = res.batches[b][r].coherence;
                bvals[b] = detail::window_average(res.times, bc, lo, hi);
                m += bvals[b];
            }
            m /= K;
            double var = 0.0;
            for (int b = 0; b < K; ++b) var += (bvals[b] - m) * (bvals[b] - m);
            ws.std_err = std::sqrt(var / (K - 1) / K);
        }
        res.windows.push_back(ws);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Figure-level metrics
// ---------------------------------------------------------------------------

namespace detail {
inline void check_same_grid(const EnsembleResult& a, const EnsembleResult& b) {
    if (a.times.size() != b.times.size())
        throw std::invalid_argument("ensemble results have mismatched time grids");
    for (std::size_t r = 0; r < a.times.size(); ++r)
        if (std::abs(a.times[r] - b.times[r]) > 1e-12)
            throw std::invalid_argument("ensemble results have mismatched time grids");
}
} // namespace detail

struct MetricStat {
    double value{0.0};
    double std_err{0.0};
};

// Time-averaged coherence difference over [t_lo, t_hi]; the error bar comes
// from the with-noise batch spread (plus the baseline's, when stochastic).
inline MetricStat window_delta_stats(const EnsembleResult& with_noise,
                                     const EnsembleResult& baseline, double t_lo, double t_hi) {
    detail::check_same_grid(with_noise, baseline);
    int lo, hi;
    detail::window_indices(with_noise.times, t_lo, t_hi, lo, hi);
    const int n_records = static_cast<int>(with_noise.times.size());
    std::vector<double> delta(n_records);
    for (int r = 0; r < n_records; ++r)
        delta[r] = with_noise.mean[r].coherence - baseline.mean[r].coherence;
    MetricStat out;
    out.value = detail::window_average(with_noise.times, delta, lo, hi);

    auto batch_spread = [&](const EnsembleResult& res, const EnsembleResult& ref) -> double {
        const int K = res.n_batches;
        if (K < 2 || res.batches.empty()) return 0.0;
        std::vector<double> vals(K);
        double m = 0.0;
        for (int b = 0; b < K; ++b) {
            std::vector<double> d(n_records);
            for (int r = 0; r < n_records; ++r)
                d[r] = res.batches[b][r].coherence - ref.mean[r].coherence;
            vals[b] = detail::window_average(res.times, d, lo, hi);
            m += vals[b];
        }
        m /= K;
        double var = 0.0;
        for (int b = 0; b < K; ++b) var += (vals[b] - m) * (vals[b] - m);
        return var / (K - 1) / K; // squared standard error
    };
    const double v1 = batch_spread(with_noise, baseline);
    const double v2 = batch_spread(baseline, baseline);
    out.std_err = std::sqrt(v1 + v2);
    return out;
}

// Figure-4 style metric: (1/OmegaT) int_0^OmegaT [coh(t) - coh0(t)] dt,
// OmegaT = 100 by default (clipped to the available horizon).
inline double protection_metric(const EnsembleResult& with_noise, const EnsembleResult& baseline,
                                double T_window = 100.0) {
    const double hi = std::min(T_window, with_noise.times.back());
    return window_delta_stats(with_noise, baseline, 0.0, hi).value;
}

inline MetricStat protection_metric_stats(const EnsembleResult& with_noise,
                                          const EnsembleResult& baseline,
                                          double T_window = 100.0) {
    const double hi = std::min(T_window, with_noise.times.back());
    return window_delta_stats(with_noise, baseline, 0.0, hi);
}

// Long-format difference surface Delta(sweep, t).
struct SurfaceRow {
    double sweep_value{0.0};
    double t{0.0};
    double coherence{0.0};
    double coherence_std_err{0.0};
    double delta{0.0};
};

inline std::vector<SurfaceRow> difference_surface(const std::vector<double>& sweep_values,
                                                  const std::vector<EnsembleResult>& sweep,
                                                  const EnsembleResult& baseline) {
    if (sweep_values.size() != sweep.size())
        throw std::invalid_argument("difference_surface: sweep label/result count mismatch");
    std::vector<SurfaceRow> rows;
    for (std::size_t s = 0; s < sweep.size(); ++s) {
        detail::check_same_grid(sweep[s], baseline);
        for (std::size_t r = 0; r < sweep[s].times.size(); ++r) {
            SurfaceRow row;
            row.sweep_value = sweep_values[s];
            row.t = sweep[s].times[r];
            row.coherence = sweep[s].mean[r].coherence;
            row.coherence_std_err = sweep[s].std_err.empty() ? 0.0
                                                             : sweep[s].std_err[r].coherence;
            row.delta = sweep[s].mean[r].coherence - baseline.mean[r].coherence;
            rows.push_back(row);
        }
    }
    return rows;
}

} // namespace nmjc
