// model.hpp — physical parameters, noise correlation functions, spectral densities
//
// Units: all frequencies and rates are in units of a reference frequency (the
// cavity frequency in the default figures), time in its inverse. The coupling
// noise xi is stored pre-multiplied by the standing-wave number k, i.e. as a
// dimensionless phase offset on the same scale as kx0.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmjc {

using complexd = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279;

// ---------------------------------------------------------------------------
// ModelParams — deterministic constants of the atom-cavity-bath system
// ---------------------------------------------------------------------------

struct ModelParams {
    double omega0{1.0}; // atomic frequency
    double Omega{1.0};  // cavity frequency
    double G0{1.0};     // bare coupling amplitude
    double kx0{0.08};   // balanced standing-wave phase k*x0
    int n_max{1};       // cavity Fock truncation (>= 1)
    complexd init_ce{0.7071067811865475244, 0.0}; // excited amplitude
    complexd init_cg{0.7071067811865475244, 0.0}; // ground amplitude

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        if (!finite(omega0) || !finite(Omega) || !finite(G0) || !finite(kx0))
            throw std::invalid_argument("ModelParams: frequencies and G0 must be finite");
        if (n_max < 1)
            throw std::invalid_argument("ModelParams: n_max must be >= 1");
        const double norm = std::norm(init_ce) + std::norm(init_cg);
        if (std::abs(norm - 1.0) > 1e-12)
            throw std::invalid_argument("ModelParams: |c_e|^2 + |c_g|^2 must be 1 (got " +
                                        std::to_string(norm) + ")");
    }

    int dim() const { return 2 * (n_max + 1); }
};

// ---------------------------------------------------------------------------
// CorrelationSpec — stationary two-time statistics alpha(tau)
// ---------------------------------------------------------------------------

enum class CorrelationKind { OU, Delta, SumOU, Tabulated };

struct OUComponent {
    double weight{1.0};
    double Gamma{1.0};
    double gamma{1.0};
};

struct CorrelationSpec {
    CorrelationKind kind{CorrelationKind::OU};
    double Gamma{1.0}; // overall strength (OU, Delta)
    double gamma{1.0}; // inverse memory time (OU)
    std::vector<OUComponent> components;          // SumOU
    std::vector<double> tab_tau;                  // Tabulated: monotone tau >= 0 grid
    std::vector<double> tab_alpha;                // Tabulated: alpha values on tab_tau

    static CorrelationSpec ou(double Gamma, double gamma) {
        CorrelationSpec s;
        s.kind = CorrelationKind::OU;
        s.Gamma = Gamma;
        s.gamma = gamma;
        s.validate();
        return s;
    }
    static CorrelationSpec delta(double Gamma) {
        CorrelationSpec s;
        s.kind = CorrelationKind::Delta;
        s.Gamma = Gamma;
        s.gamma = 0.0;
        s.validate();
        return s;
    }
    static CorrelationSpec sum_ou(std::vector<OUComponent> comps) {
        CorrelationSpec s;
        s.kind = CorrelationKind::SumOU;
        s.components = std::move(comps);
        s.validate();
        return s;
    }
    static CorrelationSpec tabulated(std::vector<double> tau, std::vector<double> alpha) {
        CorrelationSpec s;
        s.kind = CorrelationKind::Tabulated;
        s.tab_tau = std::move(tau);
        s.tab_alpha = std::move(alpha);
        s.validate();
        return s;
    }

    void validate() const {
        switch (kind) {
        case CorrelationKind::OU:
            if (Gamma < 0.0) throw std::invalid_argument("CorrelationSpec: Gamma must be >= 0");
            if (!(gamma > 0.0)) throw std::invalid_argument("CorrelationSpec: gamma must be > 0 for OU");
            break;
        case CorrelationKind::Delta:
            if (Gamma < 0.0) throw std::invalid_argument("CorrelationSpec: Gamma must be >= 0");
            break;
        case CorrelationKind::SumOU:
            if (components.empty())
                throw std::invalid_argument("CorrelationSpec: SumOU needs at least one component");
            for (const auto& c : components) {
                if (c.weight < 0.0) throw std::invalid_argument("CorrelationSpec: SumOU weights must be >= 0");
                if (c.Gamma < 0.0) throw std::invalid_argument("CorrelationSpec: SumOU Gamma must be >= 0");
                if (!(c.gamma > 0.0)) throw std::invalid_argument("CorrelationSpec: SumOU gamma must be > 0");
            }
            break;
        case CorrelationKind::Tabulated:
            if (tab_tau.size() < 2 || tab_tau.size() != tab_alpha.size())
                throw std::invalid_argument("CorrelationSpec: tabulated grid needs matching tau/alpha arrays");
            for (std::size_t i = 1; i < tab_tau.size(); ++i)
                if (!(tab_tau[i] > tab_tau[i - 1]))
                    throw std::invalid_argument("CorrelationSpec: tabulated tau grid must be strictly increasing");
            if (tab_tau.front() != 0.0)
                throw std::invalid_argument("CorrelationSpec: tabulated tau grid must start at 0");
            break;
        }
    }

    // alpha(0): marginal variance of the associated process.
    double at_zero() const {
        switch (kind) {
        case CorrelationKind::OU: return 0.5 * Gamma * gamma;
        case CorrelationKind::SumOU: {
            double v = 0.0;
            for (const auto& c : components) v += 0.5 * c.weight * c.Gamma * c.gamma;
            return v;
        }
        case CorrelationKind::Tabulated: return tab_alpha.front();
        case CorrelationKind::Delta:
            throw std::invalid_argument("CorrelationSpec: delta correlation has no pointwise value");
        }
        return 0.0;
    }

    // Longest memory time 1/gamma of the kernel; used for burn-in margins.
    double memory_time() const {
        switch (kind) {
        case CorrelationKind::OU: return 1.0 / gamma;
        case CorrelationKind::SumOU: {
            double m = 0.0;
            for (const auto& c : components) m = std::max(m, 1.0 / c.gamma);
            return m;
        }
        case CorrelationKind::Tabulated: return tab_tau.back();
        case CorrelationKind::Delta: return 0.0;
        }
        return 0.0;
    }
};

// alpha(tau) = (Gamma*gamma/2) exp(-gamma|tau|), or the weighted SumOU sum,
// or linear interpolation on a tabulated grid (even in tau).
inline double ou_correlation(const CorrelationSpec& spec, double tau) {
    if (!std::isfinite(tau))
        throw std::invalid_argument("ou_correlation: tau must be finite");
    const double at = std::abs(tau);
    switch (spec.kind) {
    case CorrelationKind::OU:
        return 0.5 * spec.Gamma * spec.gamma * std::exp(-spec.gamma * at);
    case CorrelationKind::SumOU: {
        double v = 0.0;
        for (const auto& c : spec.components)
            v += 0.5 * c.weight * c.Gamma * c.gamma * std::exp(-c.gamma * at);
        return v;
    }
    case CorrelationKind::Tabulated: {
        if (at > spec.tab_tau.back())
            throw std::out_of_range("ou_correlation: tau outside tabulated grid");
        auto it = std::lower_bound(spec.tab_tau.begin(), spec.tab_tau.end(), at);
        const std::size_t hi = static_cast<std::size_t>(it - spec.tab_tau.begin());
        if (hi == 0) return spec.tab_alpha.front();
        const double t0 = spec.tab_tau[hi - 1], t1 = spec.tab_tau[hi];
        const double w = (at - t0) / (t1 - t0);
        return (1.0 - w) * spec.tab_alpha[hi - 1] + w * spec.tab_alpha[hi];
    }
    case CorrelationKind::Delta:
        throw std::invalid_argument("ou_correlation: delta correlation is not pointwise evaluable");
    }
    return 0.0;
}

// Lorentzian spectral density g(omega) = (1/2pi) Gamma gamma^2 / (omega^2 + gamma^2),
// the Fourier pair of the OU correlation.
inline double lorentzian_spectrum(const CorrelationSpec& spec, double omega) {
    switch (spec.kind) {
    case CorrelationKind::OU:
        return (0.5 / kPi) * spec.Gamma * spec.gamma * spec.gamma /
               (omega * omega + spec.gamma * spec.gamma);
    case CorrelationKind::SumOU: {
        double v = 0.0;
        for (const auto& c : spec.components)
            v += (0.5 / kPi) * c.weight * c.Gamma * c.gamma * c.gamma /
                 (omega * omega + c.gamma * c.gamma);
        return v;
    }
    default:
        throw std::invalid_argument("lorentzian_spectrum: requires an OU or SumOU spec");
    }
}

// 1/f spectrum from a continuum of Lorentzians weighted by 1/gamma^2 between
// the cutoffs: (Gamma/2pi)(1/omega)[arctan(gH/omega) - arctan(gL/omega)].
// Approaches Gamma/(4 omega) for gL << omega << gH.
inline double one_over_f_spectrum(double Gamma, double gammaL, double gammaH, double omega) {
    if (!(omega > 0.0))
        throw std::domain_error("one_over_f_spectrum: omega must be > 0");
    if (!(gammaL > 0.0) || gammaL > gammaH)
        throw std::invalid_argument("one_over_f_spectrum: need 0 < gammaL <= gammaH");
    return (0.5 / kPi) * Gamma / omega * (std::atan(gammaH / omega) - std::atan(gammaL / omega));
}

// ---------------------------------------------------------------------------
// ClassicalNoiseSpec — which classical channel carries noise and its process
// ---------------------------------------------------------------------------

enum class NoiseChannel { None, XiCoupling, EtaFrequency };
enum class NoiseProcessKind { OU, Telegraph, ConstantOffset, Spectral };

struct ClassicalNoiseSpec {
    NoiseChannel channel{NoiseChannel::None};
    NoiseProcessKind process{NoiseProcessKind::OU};
    double Gamma{1.0};          // OU strength
    double gamma{1.0};          // OU inverse memory
    double p{0.5};              // telegraph flip probability
    double amplitude{1.0};      // telegraph amplitude
    double flip_interval{0.01}; // telegraph boundary spacing
    double offset{0.0};         // frozen-noise constant
    CorrelationSpec spectral_target{}; // Spectral target correlation
    std::uint64_t seed_stream{0};      // stream label mixed into trajectory seeds

    void validate() const {
        if (channel == NoiseChannel::None) return;
        switch (process) {
        case NoiseProcessKind::OU:
            if (Gamma < 0.0) throw std::invalid_argument("ClassicalNoiseSpec: Gamma must be >= 0");
            if (!(gamma > 0.0)) throw std::invalid_argument("ClassicalNoiseSpec: gamma must be > 0");
            break;
        case NoiseProcessKind::Telegraph:
            if (p < 0.0 || p > 1.0)
                throw std::invalid_argument("ClassicalNoiseSpec: telegraph p must be in [0,1]");
            if (!(flip_interval > 0.0))
                throw std::invalid_argument("ClassicalNoiseSpec: flip_interval must be > 0");
            break;
        case NoiseProcessKind::ConstantOffset:
            if (!std::isfinite(offset))
                throw std::invalid_argument("ClassicalNoiseSpec: offset must be finite");
            break;
        case NoiseProcessKind::Spectral:
            spectral_target.validate();
            break;
        }
    }
};

// Instantaneous coupling G = G0 sin(kx0 + xi); xi is the dimensionless phase
// offset k*xi(t).
inline double coupling_of(const ModelParams& params, double xi) {
    return params.G0 * std::sin(params.kx0 + xi);
}

// Instantaneous atomic frequency omega = omega0 + eta.
inline double frequency_of(const ModelParams& params, double eta) {
    return params.omega0 + eta;
}

} // namespace nmjc
