// evolve.hpp — per-trajectory integration of the stochastic master equation
//   d rho'/dt = -i[H_JC, rho'] + [a, rho' Obar^dag] + [Obar rho', a^dag]
// plus the Markovian Lindblad reference and the eta rotating frame.
//
// Noise paths are sampled on a dt/2 grid so every RK4 stage point reads an
// exact path value. The memory functionals and rho' advance in one joint RK4
// step (the F system never depends on rho', but sharing stages keeps the
// coupling consistent at 4th order).
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nmjc/model.hpp"
#include "nmjc/noise.hpp"
#include "nmjc/o_operator.hpp"
#include "nmjc/operators.hpp"
#include "nmjc/single_excitation.hpp"

namespace nmjc {

enum class SolverKind { Exact1x, MeqHalf, Lindblad };
enum class EtaFrame { Direct, Rotated };

struct DensityMatrix {
    MatrixXcd rho;
    double t{0.0};
    int dim() const { return static_cast<int>(rho.rows()); }
};

struct TrajectorySpec {
    ModelParams params;
    CorrelationSpec alpha1;
    NoiseChannel channel{NoiseChannel::None};
    EtaFrame eta_frame{EtaFrame::Direct};
    SolverKind solver{SolverKind::MeqHalf};
    double T{100.0};
    double dt{0.01};
    int record_stride{10};
    double lindblad_Gamma3{0.0};

    int n_steps() const {
        const double n = T / dt;
        const int ni = static_cast<int>(std::lround(n));
        if (std::abs(n - ni) > 1e-9 || ni < 1)
            throw std::invalid_argument("TrajectorySpec: T must be an integer multiple of dt");
        return ni;
    }
    void validate() const {
        params.validate();
        alpha1.validate();
        if (!(dt > 0.0) || !(T > 0.0))
            throw std::invalid_argument("TrajectorySpec: T and dt must be > 0");
        if (record_stride < 1 || n_steps() % record_stride != 0)
            throw std::invalid_argument("TrajectorySpec: record_stride must divide T/dt");
        if (solver == SolverKind::Lindblad && channel != NoiseChannel::None)
            throw std::invalid_argument("TrajectorySpec: lindblad solver requires channel None");
        if (solver == SolverKind::Exact1x && alpha1.kind != CorrelationKind::OU)
            throw std::invalid_argument("TrajectorySpec: exact1x solver requires a single OU kernel");
    }
};

struct TrajectoryDiagnostics {
    double max_trace_dev{0.0};
    double max_herm_dev{0.0};
    double max_offsector_pop{0.0};
    void merge(const TrajectoryDiagnostics& o) {
        max_trace_dev = std::max(max_trace_dev, o.max_trace_dev);
        max_herm_dev = std::max(max_herm_dev, o.max_herm_dev);
        max_offsector_pop = std::max(max_offsector_pop, o.max_offsector_pop);
    }
};

// Phase integral Phi(t) = int_0^t eta ds accumulated on the dt/2 grid with the
// Newton-Cotes pair (Simpson across a full step, the cubic-consistent
// half-panel rule to the midpoint). This matches the quadrature an RK4 stage
// sequence effectively applies to the phase, which is what makes the rotated
// frame agree with the direct frame at integrator accuracy.
inline NoisePath rotate_frame_eta(const NoisePath& noise, double coupling_amplitude) {
    noise.check();
    const int n = noise.grid.n_samples();
    const double h = noise.grid.dt;
    std::vector<double> phi(n, 0.0);
    int j = 0;
    while (j + 2 < n) {
        const double e0 = noise.values[j].real();
        const double e1 = noise.values[j + 1].real();
        const double e2 = noise.values[j + 2].real();
        phi[j + 1] = phi[j] + h / 12.0 * (5.0 * e0 + 8.0 * e1 - e2);
        phi[j + 2] = phi[j] + h / 3.0 * (e0 + 4.0 * e1 + e2);
        j += 2;
    }
    if (j + 1 < n) { // odd tail: trapezoid
        phi[j + 1] = phi[j] + 0.5 * h * (noise.values[j].real() + noise.values[j + 1].real());
    }
    NoisePath out;
    out.grid = noise.grid;
    out.values.resize(n);
    for (int k = 0; k < n; ++k)
        out.values[k] = coupling_amplitude * complexd(std::cos(phi[k]), std::sin(phi[k]));
    out.spec_tag = noise.spec_tag;
    return out;
}

namespace detail {

// Control series on the half-step grid: instantaneous coupling G and atomic
// frequency omega at every stage point.
struct ControlSeries {
    std::vector<complexd> G;
    std::vector<double> omega;
};

inline ControlSeries build_control(const TrajectorySpec& spec, const NoisePath* path) {
    const int n_half = 2 * spec.n_steps() + 1;
    const double g_static = coupling_of(spec.params, 0.0);
    ControlSeries cs;
    cs.G.assign(n_half, complexd(g_static, 0.0));
    cs.omega.assign(n_half, spec.params.omega0);
    if (spec.channel == NoiseChannel::None) return cs;

    if (path == nullptr)
        throw std::invalid_argument("run_trajectory: classical channel requires a noise path");
    path->check();
    if (std::abs(path->grid.dt - 0.5 * spec.dt) > 1e-12 * spec.dt ||
        path->grid.n_steps < 2 * spec.n_steps())
        throw std::invalid_argument("run_trajectory: noise grid must cover [0,T] at dt/2 resolution");

    switch (spec.channel) {
    case NoiseChannel::XiCoupling:
        for (int j = 0; j < n_half; ++j)
            cs.G[j] = coupling_of(spec.params, path->values[j].real());
        break;
    case NoiseChannel::EtaFrequency:
        if (spec.eta_frame == EtaFrame::Direct) {
            for (int j = 0; j < n_half; ++j)
                cs.omega[j] = frequency_of(spec.params, path->values[j].real());
        } else {
            const NoisePath rot = rotate_frame_eta(*path, g_static);
            for (int j = 0; j < n_half; ++j) cs.G[j] = rot.values[j];
        }
        break;
    case NoiseChannel::None:
        break;
    }
    return cs;
}

// fixed-size operator set for the joint stepper
template <class MatT>
struct MeqOps {
    MatT a, sigma_z, num, sp_a, sm_adag, sm_aad, sm_ada, sz_a;
    static MeqOps from(const SpaceOps& ops) {
        MeqOps m;
        m.a = ops.a;
        m.sigma_z = ops.sigma_z;
        m.num = ops.num;
        m.sp_a = ops.sp_a;
        m.sm_adag = ops.sm_adag;
        m.sm_aad = ops.sm_aad;
        m.sm_ada = ops.sm_ada;
        m.sz_a = ops.sz_a;
        return m;
    }
};

// dissipator + commutator right-hand side; rho is Hermitian on entry and the
// result is Hermitian by construction
template <class MatT>
inline MatT meq_half_rhs(const MatT& rho, const MatT& H, const MatT& Obar, const MatT& a) {
    const complexd i1(0.0, 1.0);
    const MatT Hr = H * rho;
    const MatT rOd = rho * Obar.adjoint();
    const MatT X = a * rOd;  // a rho Obar^dag
    const MatT Y = rOd * a;  // rho Obar^dag a
    return -i1 * (Hr - Hr.adjoint()) + (X + X.adjoint()) - (Y + Y.adjoint());
}

template <class MatT>
struct JointState {
    complexd F1{}, F2{}, F3{}, F4{};
    MatT rho;
};

template <class MatT>
struct JointDeriv {
    FDeriv dF;
    MatT drho;
};

template <class MatT>
inline JointDeriv<MatT> joint_rhs(const JointState<MatT>& y, complexd G, double w,
                                  const TrajectorySpec& spec, const MeqOps<MatT>& m) {
    JointDeriv<MatT> d;
    d.dF = f_closed_rhs(y.F1, y.F2, y.F3, y.F4, G, w, spec.params.Omega, spec.alpha1.Gamma,
                        spec.alpha1.gamma);
    const MatT H = 0.5 * w * m.sigma_z + spec.params.Omega * m.num + G * m.sp_a +
                   std::conj(G) * m.sm_adag;
    const MatT Obar = y.F1 * m.a + y.F2 * m.sm_aad + y.F3 * m.sm_ada + y.F4 * m.sz_a;
    d.drho = meq_half_rhs(y.rho, H, Obar, m.a);
    return d;
}

} // namespace detail

// One RK4 step of the master equation with frozen H and Obar (the production
// trajectory loop advances H, Obar and rho jointly; this entry point serves
// constant-coefficient uses and tests). Throws on trace drift beyond 1e-6.
inline DensityMatrix step_meq_half(const DensityMatrix& rho, const MatrixXcd& H,
                                   const MatrixXcd& Obar, const SpaceOps& ops, double dt) {
    if (rho.rho.rows() != H.rows() || H.rows() != Obar.rows() || H.rows() != ops.a.rows())
        throw std::invalid_argument("step_meq_half: dimension mismatch");
    using detail::meq_half_rhs;
    const MatrixXcd& a = ops.a;
    const MatrixXcd k1 = meq_half_rhs<MatrixXcd>(rho.rho, H, Obar, a);
    const MatrixXcd k2 = meq_half_rhs<MatrixXcd>(rho.rho + 0.5 * dt * k1, H, Obar, a);
    const MatrixXcd k3 = meq_half_rhs<MatrixXcd>(rho.rho + 0.5 * dt * k2, H, Obar, a);
    const MatrixXcd k4 = meq_half_rhs<MatrixXcd>(rho.rho + dt * k3, H, Obar, a);
    DensityMatrix out;
    out.rho = rho.rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.t = rho.t + dt;
    const double drift = std::abs(out.rho.trace() - rho.rho.trace());
    if (!(drift <= 1e-6))
        throw std::runtime_error("step_meq_half: integrator failure, trace drift " +
                                 std::to_string(drift));
    return out;
}

namespace detail {

template <class MatT, class Sink>
void run_meqhalf_impl(const TrajectorySpec& spec, const ControlSeries& cs, Sink&& sink,
                      TrajectoryDiagnostics* diag) {
    const SpaceOps ops = SpaceOps::make(spec.params.n_max);
    const MeqOps<MatT> m = MeqOps<MatT>::from(ops);
    const int nsteps = spec.n_steps();
    const int dim = ops.dim;

    // off-sector diagonal indices (excitation >= 2)
    std::vector<int> offsector;
    for (int atom = 0; atom < 2; ++atom)
        for (int n = 0; n <= spec.params.n_max; ++n)
            if ((atom == 0 ? 1 : 0) + n >= 2) offsector.push_back(ops.idx(atom, n));

    JointState<MatT> y;
    y.rho = MatT::Zero(dim, dim);
    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(dim);
    psi0(ops.idx(0, 0)) = spec.params.init_ce;
    psi0(ops.idx(1, 0)) = spec.params.init_cg;
    y.rho = (psi0 * psi0.adjoint()).eval();

    auto record = [&](int rec_idx, double t) {
        if (diag) {
            const double tr_dev = std::abs(complexd(y.rho.trace()) - complexd(1.0, 0.0));
            const double herm = (y.rho - y.rho.adjoint()).cwiseAbs().maxCoeff();
            double off = 0.0;
            for (int idx : offsector) off += y.rho(idx, idx).real();
            diag->max_trace_dev = std::max(diag->max_trace_dev, tr_dev);
            diag->max_herm_dev = std::max(diag->max_herm_dev, herm);
            diag->max_offsector_pop = std::max(diag->max_offsector_pop, off);
            if (!(tr_dev <= 1e-6))
                throw std::runtime_error("run_trajectory: integrator failure, trace deviation " +
                                         std::to_string(tr_dev));
        }
        sink(rec_idx, t, y.rho);
    };

    int rec = 0;
    record(rec++, 0.0);
    for (int k = 0; k < nsteps; ++k) {
        const std::array<complexd, 3> G{cs.G[2 * k], cs.G[2 * k + 1], cs.G[2 * k + 2]};
        const std::array<double, 3> w{cs.omega[2 * k], cs.omega[2 * k + 1],
                                      cs.omega[2 * k + 2]};
        const auto k1 = joint_rhs(y, G[0], w[0], spec, m);
        JointState<MatT> ys;
        auto mix = [&](const JointDeriv<MatT>& kd, double h) {
            ys.F1 = y.F1 + h * kd.dF.d1;
            ys.F2 = y.F2 + h * kd.dF.d2;
            ys.F3 = y.F3 + h * kd.dF.d3;
            ys.F4 = y.F4 + h * kd.dF.d4;
            ys.rho = y.rho + h * kd.drho;
        };
        mix(k1, 0.5 * spec.dt);
        const auto k2 = joint_rhs(ys, G[1], w[1], spec, m);
        mix(k2, 0.5 * spec.dt);
        const auto k3 = joint_rhs(ys, G[1], w[1], spec, m);
        mix(k3, spec.dt);
        const auto k4 = joint_rhs(ys, G[2], w[2], spec, m);

        const double c = spec.dt / 6.0;
        y.F1 += c * (k1.dF.d1 + 2.0 * k2.dF.d1 + 2.0 * k3.dF.d1 + k4.dF.d1);
        y.F2 += c * (k1.dF.d2 + 2.0 * k2.dF.d2 + 2.0 * k3.dF.d2 + k4.dF.d2);
        y.F3 += c * (k1.dF.d3 + 2.0 * k2.dF.d3 + 2.0 * k3.dF.d3 + k4.dF.d3);
        y.F4 += c * (k1.dF.d4 + 2.0 * k2.dF.d4 + 2.0 * k3.dF.d4 + k4.dF.d4);
        y.rho += c * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho);

        if ((k + 1) % spec.record_stride == 0) record(rec++, (k + 1) * spec.dt);
    }
}

// Grid-kernel variant (SumOU / tabulated kernels): the F rows advance on the
// full-step grid and the dissipator uses midpoint-interpolated coefficients,
// which costs one order on the rho stage but keeps the two-time rows exact.
template <class Sink>
void run_meqhalf_grid_impl(const TrajectorySpec& spec, const ControlSeries& cs, Sink&& sink,
                           TrajectoryDiagnostics* diag) {
    const SpaceOps ops = SpaceOps::make(spec.params.n_max);
    const auto m = MeqOps<MatrixXcd>::from(ops);
    const int nsteps = spec.n_steps();
    const int dim = ops.dim;

    std::vector<int> offsector;
    for (int atom = 0; atom < 2; ++atom)
        for (int n = 0; n <= spec.params.n_max; ++n)
            if ((atom == 0 ? 1 : 0) + n >= 2) offsector.push_back(ops.idx(atom, n));

    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(dim);
    psi0(ops.idx(0, 0)) = spec.params.init_ce;
    psi0(ops.idx(1, 0)) = spec.params.init_cg;
    MatrixXcd rho = psi0 * psi0.adjoint();

    FGrid grid = FGrid::start(spec.alpha1, spec.params.Omega, spec.dt, false);

    auto record = [&](int rec_idx, double t) {
        if (diag) {
            const double tr_dev = std::abs(complexd(rho.trace()) - complexd(1.0, 0.0));
            const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
            double off = 0.0;
            for (int idx : offsector) off += rho(idx, idx).real();
            diag->max_trace_dev = std::max(diag->max_trace_dev, tr_dev);
            diag->max_herm_dev = std::max(diag->max_herm_dev, herm);
            diag->max_offsector_pop = std::max(diag->max_offsector_pop, off);
            if (!(tr_dev <= 1e-6))
                throw std::runtime_error("run_trajectory: integrator failure, trace deviation " +
                                         std::to_string(tr_dev));
        }
        sink(rec_idx, t, rho);
    };

    auto obar_of = [&](const FCoefficients& F) -> MatrixXcd {
        return F.F1 * m.a + F.F2 * m.sm_aad + F.F3 * m.sm_ada + F.F4 * m.sz_a;
    };
    auto hjc_of = [&](complexd G, double w) -> MatrixXcd {
        return 0.5 * w * m.sigma_z + spec.params.Omega * m.num + G * m.sp_a +
               std::conj(G) * m.sm_adag;
    };

    int rec = 0;
    record(rec++, 0.0);
    FCoefficients F0 = grid.F();
    for (int k = 0; k < nsteps; ++k) {
        const std::array<complexd, 3> G{cs.G[2 * k], cs.G[2 * k + 1], cs.G[2 * k + 2]};
        const std::array<double, 3> w{cs.omega[2 * k], cs.omega[2 * k + 1],
                                      cs.omega[2 * k + 2]};
        grid = step_f_grid(grid, G, w, spec.params.Omega, spec.dt);
        const FCoefficients F1c = grid.F();
        FCoefficients Fm;
        Fm.F1 = 0.5 * (F0.F1 + F1c.F1);
        Fm.F2 = 0.5 * (F0.F2 + F1c.F2);
        Fm.F3 = 0.5 * (F0.F3 + F1c.F3);
        Fm.F4 = 0.5 * (F0.F4 + F1c.F4);

        const MatrixXcd O0 = obar_of(F0), Om = obar_of(Fm), O2 = obar_of(F1c);
        const MatrixXcd H0 = hjc_of(G[0], w[0]), Hm = hjc_of(G[1], w[1]), H2 = hjc_of(G[2], w[2]);
        const MatrixXcd k1 = meq_half_rhs<MatrixXcd>(rho, H0, O0, m.a);
        const MatrixXcd k2 = meq_half_rhs<MatrixXcd>(rho + 0.5 * spec.dt * k1, Hm, Om, m.a);
        const MatrixXcd k3 = meq_half_rhs<MatrixXcd>(rho + 0.5 * spec.dt * k2, Hm, Om, m.a);
        const MatrixXcd k4 = meq_half_rhs<MatrixXcd>(rho + spec.dt * k3, H2, O2, m.a);
        rho += spec.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        F0 = F1c;

        if ((k + 1) % spec.record_stride == 0) record(rec++, (k + 1) * spec.dt);
    }
}

template <class Sink>
void run_exact1x_impl(const TrajectorySpec& spec, const ControlSeries& cs, Sink&& sink,
                      TrajectoryDiagnostics* diag) {
    const SpaceOps ops = SpaceOps::make(spec.params.n_max);
    const int nsteps = spec.n_steps();
    Amplitudes s;
    s.A = spec.params.init_ce;
    s.B = complexd(0.0, 0.0);
    s.C = spec.params.init_cg;

    auto record = [&](int rec_idx, double t) {
        const MatrixXcd rho = density_from_amplitudes(s, ops);
        if (diag) {
            const double tr_dev = std::abs(complexd(rho.trace()) - complexd(1.0, 0.0));
            diag->max_trace_dev = std::max(diag->max_trace_dev, tr_dev);
        }
        sink(rec_idx, t, rho);
    };

    int rec = 0;
    record(rec++, 0.0);
    for (int k = 0; k < nsteps; ++k) {
        const std::array<complexd, 3> G{cs.G[2 * k], cs.G[2 * k + 1], cs.G[2 * k + 2]};
        s = step_single_excitation(s, G, spec.alpha1.gamma, spec.alpha1.Gamma, spec.dt);
        if ((k + 1) % spec.record_stride == 0) record(rec++, (k + 1) * spec.dt);
    }
}

} // namespace detail

// Markovian Lindblad reference: drho/dt = -i[H0, rho]
//   + (Gamma1/2)([a, rho a+] + [a rho, a+]) + (Gamma3/2)([sz, rho sz] + [sz rho, sz])
// with H0 the J-C Hamiltonian at the balanced coupling G0 sin(kx0).
template <class Sink>
void run_lindblad(const ModelParams& params, double Gamma1, double Gamma3, double T, double dt,
                  int record_stride, Sink&& sink) {
    params.validate();
    const SpaceOps ops = SpaceOps::make(params.n_max);
    const double g = coupling_of(params, 0.0);
    const MatrixXcd H = hjc_matrix(ops, g, params.omega0, params.Omega);
    const MatrixXcd& a = ops.a;
    const MatrixXcd adag = ops.a.adjoint();
    const MatrixXcd nphot = adag * a;
    const MatrixXcd& sz = ops.sigma_z;

    const int nsteps = static_cast<int>(std::lround(T / dt));
    if (std::abs(T / dt - nsteps) > 1e-9 || nsteps < 1 || record_stride < 1 ||
        nsteps % record_stride != 0)
        throw std::invalid_argument("run_lindblad: T/dt must be a multiple of record_stride");

    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(ops.dim);
    psi0(ops.idx(0, 0)) = params.init_ce;
    psi0(ops.idx(1, 0)) = params.init_cg;
    MatrixXcd rho = psi0 * psi0.adjoint();

    const complexd i1(0.0, 1.0);
    auto rhs = [&](const MatrixXcd& r) -> MatrixXcd {
        const MatrixXcd Hr = H * r;
        MatrixXcd d = -i1 * (Hr - Hr.adjoint());
        if (Gamma1 != 0.0) {
            const MatrixXcd ar = a * r;
            const MatrixXcd X = ar * adag;
            const MatrixXcd Nr = nphot * r;
            d += Gamma1 * X - 0.5 * Gamma1 * (Nr + Nr.adjoint());
        }
        if (Gamma3 != 0.0) d += Gamma3 * (sz * r * sz - r);
        return d;
    };

    int rec = 0;
    sink(rec++, 0.0, rho);
    for (int k = 0; k < nsteps; ++k) {
        const MatrixXcd k1 = rhs(rho);
        const MatrixXcd k2 = rhs(rho + 0.5 * dt * k1);
        const MatrixXcd k3 = rhs(rho + 0.5 * dt * k2);
        const MatrixXcd k4 = rhs(rho + dt * k3);
        rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if ((k + 1) % record_stride == 0) sink(rec++, (k + 1) * dt, rho);
    }
}

// Integrate one trajectory. The sink is called as
//   sink(record_index, t, rho)   with rho on the truncated product space
// at t = 0 and then every record_stride steps. The noise path (when the
// classical channel is active) must cover [0, T] at dt/2 resolution.
template <class Sink>
void run_trajectory(const TrajectorySpec& spec, const NoisePath* path, Sink&& sink,
                    TrajectoryDiagnostics* diag = nullptr) {
    spec.validate();
    const detail::ControlSeries cs = detail::build_control(spec, path);
    switch (spec.solver) {
    case SolverKind::Exact1x:
        detail::run_exact1x_impl(spec, cs, sink, diag);
        return;
    case SolverKind::MeqHalf:
        if (spec.alpha1.kind == CorrelationKind::OU) {
            if (spec.params.n_max == 1)
                detail::run_meqhalf_impl<Eigen::Matrix4cd>(spec, cs, sink, diag);
            else
                detail::run_meqhalf_impl<MatrixXcd>(spec, cs, sink, diag);
        } else {
            detail::run_meqhalf_grid_impl(spec, cs, sink, diag);
        }
        return;
    case SolverKind::Lindblad:
        run_lindblad(spec.params, spec.alpha1.Gamma, spec.lindblad_Gamma3, spec.T, spec.dt,
                     spec.record_stride, sink);
        return;
    }
}

// Convenience wrapper returning the recorded series.
inline std::vector<DensityMatrix> run_trajectory_series(const TrajectorySpec& spec,
                                                        const NoisePath* path,
                                                        TrajectoryDiagnostics* diag = nullptr) {
    std::vector<DensityMatrix> out;
    out.reserve(static_cast<std::size_t>(spec.n_steps() / spec.record_stride) + 1);
    run_trajectory(
        spec, path,
        [&](int, double t, const Eigen::Ref<const MatrixXcd>& rho) {
            out.push_back(DensityMatrix{MatrixXcd(rho), t});
        },
        diag);
    return out;
}

} // namespace nmjc
