#pragma once

// Brute-force reference constructions shared by the unit tests. They work in
// the full 2^n occupation-number space and never call the library's
// determinant algebra.

#include <qflow/integrals.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

namespace qflow::bruteforce {

using Op = Eigen::SparseMatrix<double>;

/// Creation operator a+_q on 2^n occupation vectors, Jordan-Wigner ordered:
/// index bit p is the occupation of spin orbital p.
inline Op jw_create_sparse(int n, int q) {
    const int dim = 1 << n;
    std::vector<Eigen::Triplet<double>> t;
    for (int s = 0; s < dim; ++s) {
        if ((s >> q) & 1) continue;
        int parity = 0;
        for (int p = 0; p < q; ++p) parity += (s >> p) & 1;
        t.emplace_back(s | (1 << q), s, (parity % 2) ? -1.0 : 1.0);
    }
    Op m(dim, dim);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

inline Eigen::MatrixXd jw_create(int n, int q) { return Eigen::MatrixXd(jw_create_sparse(n, q)); }
inline Eigen::MatrixXd jw_annihilate(int n, int q) { return jw_create(n, q).transpose(); }

/// Second-quantised Hamiltonian built as an explicit operator sum over
/// 2^(2 n_orb) occupation vectors.
inline Eigen::MatrixXd operator_sum_hamiltonian(const IntegralStore& s) {
    const int n = 2 * s.n_orb;
    const int dim = 1 << n;
    std::vector<Op> c(n), a(n);
    for (int p = 0; p < n; ++p) {
        c[p] = jw_create_sparse(n, p);
        a[p] = Op(c[p].transpose());
    }
    Op h(dim, dim);
    h.setIdentity();
    h *= s.e_core;
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
            const double v = (p % 2 == q % 2) ? s.h(p / 2, q / 2) : 0.0;
            if (v != 0.0) h += v * Op(c[p] * a[q]);
        }
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
            const Op cc = c[p] * c[q];
            for (int r = 0; r < n; ++r)
                for (int t = 0; t < n; ++t) {
                    // 1/2 sum <pq|rt> a+p a+q a_t a_r, <pq|rt> = (pr|qt)
                    if (p % 2 != r % 2 || q % 2 != t % 2) continue;
                    const double v = s.eri(p / 2, r / 2, q / 2, t / 2);
                    if (v != 0.0) h += (0.5 * v) * Op(cc * Op(a[t] * a[r]));
                }
        }
    return Eigen::MatrixXd(h);
}

}  // namespace qflow::bruteforce
