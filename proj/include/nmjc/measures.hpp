// measures.hpp — observable extraction: reduced states, coherence, purity,
// negativity, concurrence
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "nmjc/model.hpp"
#include "nmjc/operators.hpp"

namespace nmjc {

struct ObservableRecord {
    double t{0.0};
    double coherence{0.0};
    double purity{0.0};
    double negativity{0.0};
    double pop_e{0.0};
    double pop_photon{0.0};
    double pop_bath_proxy{0.0};
};

// Partial trace over the cavity index (atom-major ordering).
inline Eigen::Matrix2cd partial_trace_cavity(const Eigen::Ref<const MatrixXcd>& rho) {
    const int dim = static_cast<int>(rho.rows());
    if (rho.cols() != dim || dim % 2 != 0 || dim < 4)
        throw std::invalid_argument("partial_trace_cavity: expected a 2(n_max+1) square matrix");
    const int nc = dim / 2;
    Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int n = 0; n < nc; ++n) out(i, j) += rho(i * nc + n, j * nc + n);
    return out;
}

// |<e| rho_a |g>|
inline double coherence(const Eigen::Matrix2cd& rho_a) { return std::abs(rho_a(0, 1)); }

// Tr(rho_a^2)
inline double purity(const Eigen::Matrix2cd& rho_a) {
    return (rho_a * rho_a).trace().real();
}

// Negativity across the atom|cavity split: sum of |negative eigenvalues| of
// the partial transpose on the atom index. Eigenvalues above -1e-10 count as
// numerical noise.
inline double negativity(const Eigen::Ref<const MatrixXcd>& rho) {
    const int dim = static_cast<int>(rho.rows());
    if (rho.cols() != dim || dim % 2 != 0)
        throw std::invalid_argument("negativity: expected a 2(n_max+1) square matrix");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-6)
        throw std::invalid_argument("negativity: input is not Hermitian");
    const int nc = dim / 2;
    MatrixXcd pt(dim, dim);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int n = 0; n < nc; ++n)
                for (int m = 0; m < nc; ++m)
                    pt(i * nc + n, j * nc + m) = rho(j * nc + n, i * nc + m);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (pt + pt.adjoint()),
                                                Eigen::EigenvaluesOnly);
    double neg = 0.0;
    for (int k = 0; k < dim; ++k) {
        const double lam = es.eigenvalues()(k);
        if (lam < -1e-10) neg += -lam;
    }
    return neg;
}

// Wootters concurrence for the two-qubit (n_max = 1) case.
inline double concurrence_2x2(const Eigen::Ref<const MatrixXcd>& rho) {
    if (rho.rows() != 4 || rho.cols() != 4)
        throw std::invalid_argument("concurrence_2x2: requires a 4x4 two-qubit matrix");
    Eigen::Matrix2cd sy = Eigen::Matrix2cd::Zero();
    sy(0, 1) = complexd(0.0, -1.0);
    sy(1, 0) = complexd(0.0, 1.0);
    const Eigen::Matrix4cd YY = kron(sy, sy);
    const Eigen::Matrix4cd rt = rho * YY * rho.conjugate() * YY;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(rt, false);
    std::array<double, 4> lam{};
    for (int k = 0; k < 4; ++k) lam[k] = std::sqrt(std::max(0.0, es.eigenvalues()(k).real()));
    std::sort(lam.begin(), lam.end(), std::greater<double>());
    return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

// Full observable row. pg0_initial is the t=0 population of |g,0>, used to
// separate the bath-fed weight from the initial ground amplitude.
inline ObservableRecord observables_from(const Eigen::Ref<const MatrixXcd>& rho, double t,
                                         double pg0_initial) {
    const int dim = static_cast<int>(rho.rows());
    const int nc = dim / 2;
    ObservableRecord rec;
    rec.t = t;
    const Eigen::Matrix2cd rho_a = partial_trace_cavity(rho);
    rec.coherence = coherence(rho_a);
    rec.purity = purity(rho_a);
    rec.negativity = negativity(rho);
    rec.pop_e = rho_a(0, 0).real();
    double nbar = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int n = 0; n < nc; ++n) nbar += n * rho(i * nc + n, i * nc + n).real();
    rec.pop_photon = nbar;
    rec.pop_bath_proxy = std::max(0.0, rho(nc, nc).real() - pg0_initial);
    return rec;
}

} // namespace nmjc
