// single_excitation.hpp — exact reduced dynamics in the one-excitation subspace
//
// For a state A|e,0> + B|g,1> + C|g,0> (+ bath amplitudes) with an OU bath
// kernel, the reduced dynamics closes on (A, B) plus one memory integral I:
//   dA/dt = -i G B
//   dB/dt = -i G* A - I
//   dI/dt = (Gamma1 gamma1 / 2) B - gamma1 I
// C is constant. Real G reduces to the textbook system; complex G covers the
// eta rotating frame (the conjugate keeps the underlying Hamiltonian Hermitian).
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "nmjc/model.hpp"
#include "nmjc/operators.hpp"

namespace nmjc {

struct Amplitudes {
    complexd A{0.0, 0.0};
    complexd B{0.0, 0.0};
    complexd C{0.0, 0.0};
    complexd I{0.0, 0.0}; // bath memory integral, I(0) = 0
    double t{0.0};

    bool finite() const {
        auto ok = [](complexd z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
        return ok(A) && ok(B) && ok(C) && ok(I);
    }
};

namespace detail {
struct AmpDeriv {
    complexd dA, dB, dI;
};
inline AmpDeriv amp_rhs(complexd A, complexd B, complexd I, complexd G, double Gamma1,
                        double gamma1) {
    const complexd i1(0.0, 1.0);
    return {-i1 * G * B, -i1 * std::conj(G) * A - I, 0.5 * Gamma1 * gamma1 * B - gamma1 * I};
}
} // namespace detail

// One explicit RK4 step with the coupling supplied at the three stage times
// {t, t + dt/2, t + dt}.
inline Amplitudes step_single_excitation(const Amplitudes& state,
                                         const std::array<complexd, 3>& G, double gamma1,
                                         double Gamma1, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_single_excitation: dt must be > 0");
    if (!state.finite())
        throw std::runtime_error("step_single_excitation: numeric overflow in amplitudes");

    using detail::amp_rhs;
    const auto k1 = amp_rhs(state.A, state.B, state.I, G[0], Gamma1, gamma1);
    const auto k2 = amp_rhs(state.A + 0.5 * dt * k1.dA, state.B + 0.5 * dt * k1.dB,
                            state.I + 0.5 * dt * k1.dI, G[1], Gamma1, gamma1);
    const auto k3 = amp_rhs(state.A + 0.5 * dt * k2.dA, state.B + 0.5 * dt * k2.dB,
                            state.I + 0.5 * dt * k2.dI, G[1], Gamma1, gamma1);
    const auto k4 = amp_rhs(state.A + dt * k3.dA, state.B + dt * k3.dB, state.I + dt * k3.dI,
                            G[2], Gamma1, gamma1);

    Amplitudes next = state;
    next.A += dt / 6.0 * (k1.dA + 2.0 * k2.dA + 2.0 * k3.dA + k4.dA);
    next.B += dt / 6.0 * (k1.dB + 2.0 * k2.dB + 2.0 * k3.dB + k4.dB);
    next.I += dt / 6.0 * (k1.dI + 2.0 * k2.dI + 2.0 * k3.dI + k4.dI);
    next.t = state.t + dt;
    if (!next.finite())
        throw std::runtime_error("step_single_excitation: numeric overflow in amplitudes");
    return next;
}

// |rho_a(e,g)| = |A C*|
inline double coherence_1x(const Amplitudes& s) { return std::abs(s.A * std::conj(s.C)); }

// Pure-state atom-cavity concurrence 2|A||B| (its square 4|A|^2|B|^2 is the
// tangle sometimes quoted for this model).
inline double concurrence_1x(const Amplitudes& s) { return 2.0 * std::abs(s.A) * std::abs(s.B); }

// Population lost to the bath: 1 - |A|^2 - |B|^2 - |C|^2, clamped at 0.
inline double bath_population(const Amplitudes& s) {
    const double p = 1.0 - std::norm(s.A) - std::norm(s.B) - std::norm(s.C);
    return p > 0.0 ? p : 0.0;
}

// Exact atom-cavity density matrix of the single-excitation state: the pure
// part |phi><phi| plus the traced-out bath weight on |g,0>.
inline MatrixXcd density_from_amplitudes(const Amplitudes& s, const SpaceOps& ops) {
    Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(ops.dim);
    phi(ops.idx(0, 0)) = s.A;
    phi(ops.idx(1, 1)) = s.B;
    phi(ops.idx(1, 0)) = s.C;
    MatrixXcd rho = phi * phi.adjoint();
    rho(ops.idx(1, 0), ops.idx(1, 0)) += bath_population(s);
    return rho;
}

} // namespace nmjc
