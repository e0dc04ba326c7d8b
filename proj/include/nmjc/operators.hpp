// operators.hpp — operator algebra on the truncated atom (x) cavity space
//
// Basis ordering is atom-major: index = atom*(n_max+1) + n with atom 0 = |e>,
// atom 1 = |g>, and cavity Fock index n = 0..n_max.
#pragma once

#include <complex>

#include <Eigen/Dense>

#include "nmjc/model.hpp"

namespace nmjc {

using Eigen::MatrixXcd;

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
    MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Prebuilt operators on the product space, assembled once per dimension.
struct SpaceOps {
    int n_max{1};
    int dim{4};
    MatrixXcd a;       // I (x) a
    MatrixXcd adag;    // I (x) a^dag
    MatrixXcd num;     // I (x) a^dag a
    MatrixXcd sigma_z; // sigma_z (x) I
    MatrixXcd sp_a;    // sigma_+ (x) a           (coupling term a sigma_+)
    MatrixXcd sm_adag; // sigma_- (x) a^dag
    MatrixXcd sm_aad;  // sigma_- (x) a a^dag     (dissipator basis O2)
    MatrixXcd sm_ada;  // sigma_- (x) a^dag a     (dissipator basis O3)
    MatrixXcd sz_a;    // sigma_z (x) a           (dissipator basis O4)

    static SpaceOps make(int n_max) {
        if (n_max < 1) throw std::invalid_argument("SpaceOps: n_max must be >= 1");
        const int nc = n_max + 1;
        MatrixXcd low = MatrixXcd::Zero(nc, nc); // cavity lowering
        for (int n = 1; n < nc; ++n) low(n - 1, n) = std::sqrt(static_cast<double>(n));
        MatrixXcd id2 = MatrixXcd::Identity(2, 2);
        MatrixXcd sz = MatrixXcd::Zero(2, 2);
        sz(0, 0) = 1.0;
        sz(1, 1) = -1.0;
        MatrixXcd sp = MatrixXcd::Zero(2, 2); // |e><g|
        sp(0, 1) = 1.0;
        MatrixXcd sm = sp.adjoint(); // |g><e|
        MatrixXcd idc = MatrixXcd::Identity(nc, nc);

        SpaceOps ops;
        ops.n_max = n_max;
        ops.dim = 2 * nc;
        ops.a = kron(id2, low);
        ops.adag = kron(id2, low.adjoint());
        ops.num = kron(id2, low.adjoint() * low);
        ops.sigma_z = kron(sz, idc);
        ops.sp_a = kron(sp, low);
        ops.sm_adag = kron(sm, low.adjoint());
        ops.sm_aad = kron(sm, low * low.adjoint());
        ops.sm_ada = kron(sm, low.adjoint() * low);
        ops.sz_a = kron(sz, low);
        return ops;
    }

    // index of the basis state |atom, n>; atom 0 = e, 1 = g
    int idx(int atom, int n) const { return atom * (n_max + 1) + n; }
};

// J-C Hamiltonian with instantaneous coupling G (possibly complex) and atomic
// frequency omega: (omega/2) sigma_z + Omega a^dag a + G a sigma_+ + G* a^dag sigma_-.
inline MatrixXcd hjc_matrix(const SpaceOps& ops, complexd G, double omega, double Omega) {
    return 0.5 * omega * ops.sigma_z + Omega * ops.num + G * ops.sp_a +
           std::conj(G) * ops.sm_adag;
}

} // namespace nmjc
