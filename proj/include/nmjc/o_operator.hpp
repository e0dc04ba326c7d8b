// o_operator.hpp — memory functionals F1..F4 (and diagnostic F5) of the
// effective dissipator Obar(t) = F1 a + F2 s-aa+ + F3 s-a+a + F4 sz a
//
// Conventions. The functionals are integrated against the bath kernel in the
// cavity frame, alpha(tau) * exp(-i Omega tau): the Lorentzian bath spectrum
// is centered on the cavity frequency, which is the convention under which
// the dissipator reproduces the exact single-excitation dynamics (the
// cross-solver suite checks this at 1e-3). The quadratic f*F terms carry the
// sign required by the consistency condition on the single-excitation sector,
//   d(f1 - f4)/dt = i Omega (f1 - f4) + i G f2 + (f1 - f4)(F1 - F4),
//   d f2/dt       = i omega f2 + i conj(G) (f1 - f4) + (f1 - f4) F2,
// and for complex coupling the f2/f3 source terms take conj(G), the unique
// placement that keeps the coefficients covariant under a constant phase
// rotation of the coupling.
//
// Two backends compute the same coefficients:
//  * step_F_closed — closed ODE system for a single OU kernel (production).
//  * step_f_grid   — evolves the two-time rows f_i(t, s) and recovers F_i by
//    trapezoid quadrature; works for any stationary kernel and optionally
//    carries the noise-sector f5(t, s, s') diagnostic.
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nmjc/model.hpp"
#include "nmjc/operators.hpp"

namespace nmjc {

struct FCoefficients {
    double t{0.0};
    complexd F1{0.0, 0.0};
    complexd F2{0.0, 0.0};
    complexd F3{0.0, 0.0};
    complexd F4{0.0, 0.0};
    std::optional<complexd> F5{};
};

namespace detail {

struct FDeriv {
    complexd d1, d2, d3, d4;
};

// Closed system under a single OU kernel, O5 neglected.
inline FDeriv f_closed_rhs(complexd F1, complexd F2, complexd F3, complexd F4, complexd G,
                           double omega, double Omega, double Gamma1, double gamma1) {
    const complexd i1(0.0, 1.0);
    const complexd gc = std::conj(G);
    const complexd det = i1 * (omega - Omega) - gamma1; // detuned, kernel-damped diagonal
    FDeriv d;
    d.d1 = 0.5 * Gamma1 * gamma1 - gamma1 * F1 + 0.5 * i1 * G * (F2 - F3) + F1 * F1 +
           F4 * F4;
    d.d2 = det * F2 + i1 * gc * (F1 - F4) + F1 * F2 - F4 * F2;
    d.d3 = det * F3 - i1 * gc * (F1 + F4) - F1 * F2 - F4 * F2 + 2.0 * F3 * F4;
    d.d4 = -gamma1 * F4 - 0.5 * i1 * G * (F2 + F3) + 2.0 * F1 * F4;
    return d;
}

} // namespace detail

// One RK4 step of the closed F system; G and omega supplied at the stage
// times {t, t+dt/2, t+dt}. Only valid for a single OU kernel (the
// nonlinearity forbids superposing per-component solutions).
inline FCoefficients step_F_closed(const FCoefficients& F, const std::array<complexd, 3>& G,
                                   const std::array<double, 3>& omega, double Omega,
                                   double Gamma1, double gamma1, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_F_closed: dt must be > 0");
    using detail::f_closed_rhs;
    const auto k1 = f_closed_rhs(F.F1, F.F2, F.F3, F.F4, G[0], omega[0], Omega, Gamma1, gamma1);
    const auto k2 = f_closed_rhs(F.F1 + 0.5 * dt * k1.d1, F.F2 + 0.5 * dt * k1.d2,
                                 F.F3 + 0.5 * dt * k1.d3, F.F4 + 0.5 * dt * k1.d4, G[1],
                                 omega[1], Omega, Gamma1, gamma1);
    const auto k3 = f_closed_rhs(F.F1 + 0.5 * dt * k2.d1, F.F2 + 0.5 * dt * k2.d2,
                                 F.F3 + 0.5 * dt * k2.d3, F.F4 + 0.5 * dt * k2.d4, G[1],
                                 omega[1], Omega, Gamma1, gamma1);
    const auto k4 = f_closed_rhs(F.F1 + dt * k3.d1, F.F2 + dt * k3.d2, F.F3 + dt * k3.d3,
                                 F.F4 + dt * k3.d4, G[2], omega[2], Omega, Gamma1, gamma1);
    FCoefficients out = F;
    out.F1 += dt / 6.0 * (k1.d1 + 2.0 * k2.d1 + 2.0 * k3.d1 + k4.d1);
    out.F2 += dt / 6.0 * (k1.d2 + 2.0 * k2.d2 + 2.0 * k3.d2 + k4.d2);
    out.F3 += dt / 6.0 * (k1.d3 + 2.0 * k2.d3 + 2.0 * k3.d3 + k4.d3);
    out.F4 += dt / 6.0 * (k1.d4 + 2.0 * k2.d4 + 2.0 * k3.d4 + k4.d4);
    out.t = F.t + dt;
    return out;
}

// ---------------------------------------------------------------------------
// Two-time grid backend
// ---------------------------------------------------------------------------

struct FGrid {
    CorrelationSpec alpha;
    double Omega{1.0}; // kernel frame frequency
    double dt{0.01};
    double t{0.0};
    bool with_f5{false};
    // node j holds f_i(t, s_j) with s_j = j*dt; the last node is the boundary
    std::vector<complexd> f1{complexd(1.0, 0.0)};
    std::vector<complexd> f2{complexd(0.0, 0.0)};
    std::vector<complexd> f3{complexd(0.0, 0.0)};
    std::vector<complexd> f4{complexd(0.0, 0.0)};
    Eigen::MatrixXcd f5; // f5(t, s_row, s'_col)

    static FGrid start(const CorrelationSpec& alpha, double Omega, double dt,
                       bool with_f5 = false) {
        if (!(dt > 0.0)) throw std::invalid_argument("FGrid: dt must be > 0");
        alpha.validate();
        FGrid g;
        g.alpha = alpha;
        g.Omega = Omega;
        g.dt = dt;
        g.with_f5 = with_f5;
        if (with_f5) g.f5 = Eigen::MatrixXcd::Zero(1, 1);
        return g;
    }

    int nodes() const { return static_cast<int>(f1.size()); }

    // cavity-frame kernel alpha(tau) e^{-i Omega tau}
    complexd kernel(double tau) const {
        const double a = ou_correlation(alpha, tau);
        return a * complexd(std::cos(Omega * tau), -std::sin(Omega * tau));
    }

    // F_i(t) by trapezoid against the kernel; F5 double quadrature when the
    // diagnostic rows are carried.
    FCoefficients F() const {
        FCoefficients out;
        out.t = t;
        if (alpha.kind == CorrelationKind::Delta) {
            // delta kernel picks the boundary values: F1 = Gamma/2, rest 0
            out.F1 = 0.5 * alpha.Gamma;
            if (with_f5) out.F5 = complexd(0.0, 0.0);
            return out;
        }
        const int k = nodes() - 1;
        if (k < 1) {
            if (with_f5) out.F5 = complexd(0.0, 0.0);
            return out; // empty integral
        }
        std::vector<complexd> av(k + 1);
        for (int j = 0; j <= k; ++j)
            av[j] = ((j == 0 || j == k) ? 0.5 : 1.0) * dt * kernel(t - j * dt);
        complexd s1{}, s2{}, s3{}, s4{};
        for (int j = 0; j <= k; ++j) {
            s1 += av[j] * f1[j];
            s2 += av[j] * f2[j];
            s3 += av[j] * f3[j];
            s4 += av[j] * f4[j];
        }
        out.F1 = s1;
        out.F2 = s2;
        out.F3 = s3;
        out.F4 = s4;
        if (with_f5) {
            complexd acc{};
            for (int l = 0; l <= k; ++l) {
                complexd fp{};
                for (int j = 0; j <= k; ++j) fp += av[j] * f5(j, l);
                acc += av[l] * fp;
            }
            out.F5 = acc;
        }
        return out;
    }
};

namespace detail {

struct GridDeriv {
    std::vector<complexd> d1, d2, d3, d4;
    Eigen::MatrixXcd d5;
};

// Quadrature of kernel(tau - s) * f(s) over stored nodes plus a virtual
// boundary node at s = tau (value fb) once the stage time has moved past the
// last stored node.
inline complexd stage_quad(const std::vector<complexd>& f, const std::vector<complexd>& av,
                           double ds, double tail, complexd fb_times_alpha0) {
    const int k = static_cast<int>(f.size()) - 1;
    complexd acc{};
    for (int j = 0; j < k; ++j) acc += 0.5 * ds * (av[j] * f[j] + av[j + 1] * f[j + 1]);
    if (tail > 0.0) acc += 0.5 * tail * (av[k] * f[k] + fb_times_alpha0);
    return acc;
}

inline GridDeriv grid_rhs(const FGrid& g, const std::vector<complexd>& f1,
                          const std::vector<complexd>& f2, const std::vector<complexd>& f3,
                          const std::vector<complexd>& f4, const Eigen::MatrixXcd& f5,
                          double tau, complexd G, double omega, double Omega) {
    const complexd i1(0.0, 1.0);
    const complexd gc = std::conj(G);
    const int k = static_cast<int>(f1.size()) - 1;
    const double tail = tau - k * g.dt;

    std::vector<complexd> av(k + 1);
    for (int j = 0; j <= k; ++j) av[j] = g.kernel(tau - j * g.dt);
    const complexd a0 = g.kernel(0.0);

    // F_i at the stage time; boundary values f1 = 1, f2..f4 = 0
    const complexd F1 = stage_quad(f1, av, g.dt, tail, a0);
    const complexd F2 = stage_quad(f2, av, g.dt, tail, complexd(0.0, 0.0));
    const complexd F4 = stage_quad(f4, av, g.dt, tail, complexd(0.0, 0.0));

    std::vector<complexd> F5p; // F5'(tau, s'_l); boundary row f5(tau, tau, .) = 0
    if (g.with_f5) {
        F5p.resize(k + 1);
        std::vector<complexd> col(k + 1);
        for (int l = 0; l <= k; ++l) {
            for (int j = 0; j <= k; ++j) col[j] = f5(j, l);
            F5p[l] = stage_quad(col, av, g.dt, tail, complexd(0.0, 0.0));
        }
    }

    GridDeriv d;
    d.d1.resize(k + 1);
    d.d2.resize(k + 1);
    d.d3.resize(k + 1);
    d.d4.resize(k + 1);
    for (int j = 0; j <= k; ++j) {
        const complexd a = f1[j], b = f2[j], c = f3[j], e = f4[j];
        d.d1[j] = i1 * Omega * a + 0.5 * i1 * G * (b - c) + a * F1 + e * F4;
        d.d2[j] = i1 * omega * b + i1 * gc * (a - e) + a * F2 - e * F2;
        d.d3[j] = i1 * omega * c - i1 * gc * (a + e) - a * F2 - e * F2 + 2.0 * c * F4;
        d.d4[j] = i1 * Omega * e - 0.5 * i1 * G * (b + c) + e * F1 + a * F4;
        if (g.with_f5) d.d3[j] -= F5p[j];
    }
    if (g.with_f5) {
        d.d5.resize(k + 1, k + 1);
        const complexd diag = i1 * (omega + Omega) + F1 + F4;
        for (int j = 0; j <= k; ++j)
            for (int l = 0; l <= k; ++l)
                d.d5(j, l) = diag * f5(j, l) - (f1[j] - f4[j]) * F5p[l];
    }
    return d;
}

inline void axpy(std::vector<complexd>& out, const std::vector<complexd>& x,
                 const std::vector<complexd>& d, double h) {
    const std::size_t n = x.size();
    out.resize(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = x[j] + h * d[j];
}

} // namespace detail

// Advance every stored row one step in t (joint RK4 with the memory
// functionals recomputed at each stage), then append the new boundary column.
// G and omega are supplied at the stage times {t, t+dt/2, t+dt}.
inline FGrid step_f_grid(const FGrid& grid, const std::array<complexd, 3>& G,
                         const std::array<double, 3>& omega, double Omega, double dt) {
    if (dt != grid.dt)
        throw std::invalid_argument("step_f_grid: dt must match the grid spacing");
    FGrid out = grid;
    if (grid.alpha.kind == CorrelationKind::Delta) {
        // delta kernel: F is boundary-selected, rows never feed back
        out.t += dt;
        out.f1.push_back(complexd(1.0, 0.0));
        out.f2.push_back(complexd(0.0, 0.0));
        out.f3.push_back(complexd(0.0, 0.0));
        out.f4.push_back(complexd(0.0, 0.0));
        return out;
    }

    using namespace detail;
    const double t = grid.t;
    const auto k1 = grid_rhs(grid, grid.f1, grid.f2, grid.f3, grid.f4, grid.f5, t, G[0],
                             omega[0], Omega);
    std::vector<complexd> y1, y2, y3, y4;
    Eigen::MatrixXcd y5;

    auto stage = [&](const GridDeriv& kd, double h) {
        axpy(y1, grid.f1, kd.d1, h);
        axpy(y2, grid.f2, kd.d2, h);
        axpy(y3, grid.f3, kd.d3, h);
        axpy(y4, grid.f4, kd.d4, h);
        if (grid.with_f5) y5 = grid.f5 + h * kd.d5;
    };

    stage(k1, 0.5 * dt);
    const auto k2 = grid_rhs(grid, y1, y2, y3, y4, y5, t + 0.5 * dt, G[1], omega[1], Omega);
    stage(k2, 0.5 * dt);
    const auto k3 = grid_rhs(grid, y1, y2, y3, y4, y5, t + 0.5 * dt, G[1], omega[1], Omega);
    stage(k3, dt);
    const auto k4 = grid_rhs(grid, y1, y2, y3, y4, y5, t + dt, G[2], omega[2], Omega);

    const int n = grid.nodes();
    for (int j = 0; j < n; ++j) {
        out.f1[j] += dt / 6.0 * (k1.d1[j] + 2.0 * k2.d1[j] + 2.0 * k3.d1[j] + k4.d1[j]);
        out.f2[j] += dt / 6.0 * (k1.d2[j] + 2.0 * k2.d2[j] + 2.0 * k3.d2[j] + k4.d2[j]);
        out.f3[j] += dt / 6.0 * (k1.d3[j] + 2.0 * k2.d3[j] + 2.0 * k3.d3[j] + k4.d3[j]);
        out.f4[j] += dt / 6.0 * (k1.d4[j] + 2.0 * k2.d4[j] + 2.0 * k3.d4[j] + k4.d4[j]);
    }
    if (grid.with_f5)
        out.f5 = grid.f5 + dt / 6.0 * (k1.d5 + 2.0 * k2.d5 + 2.0 * k3.d5 + k4.d5);

    out.t = t + dt;
    // new boundary node at s = t + dt: f1 = 1, f2..f4 = 0; f5 gains a zero row
    // f5(t, t, s') = 0 and a column f5(t, s, t) = f3 - f2 at the advanced time
    out.f1.push_back(complexd(1.0, 0.0));
    out.f2.push_back(complexd(0.0, 0.0));
    out.f3.push_back(complexd(0.0, 0.0));
    out.f4.push_back(complexd(0.0, 0.0));
    if (grid.with_f5) {
        Eigen::MatrixXcd grown = Eigen::MatrixXcd::Zero(n + 1, n + 1);
        grown.topLeftCorner(n, n) = out.f5;
        for (int j = 0; j < n; ++j) grown(j, n) = out.f3[j] - out.f2[j];
        out.f5 = std::move(grown);
    }
    return out;
}

// Obar assembled on the truncated product space.
inline MatrixXcd obar_matrix(const FCoefficients& F, const SpaceOps& ops) {
    return F.F1 * ops.a + F.F2 * ops.sm_aad + F.F3 * ops.sm_ada + F.F4 * ops.sz_a;
}

inline MatrixXcd obar_matrix(const FCoefficients& F, int n_max) {
    return obar_matrix(F, SpaceOps::make(n_max));
}

} // namespace nmjc
