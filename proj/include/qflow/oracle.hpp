#pragma once

#include <qflow/common.hpp>
#include <qflow/hamiltonian.hpp>
#include <qflow/integrals.hpp>

#include <cstddef>
#include <functional>
#include <vector>

namespace qflow {

/// Dense solvers refuse matrices above this dimension.
inline constexpr Eigen::Index kOracleDimensionCap = 5000;

struct SpectrumResult {
    Vector eigenvalues;               ///< ascending, all roots
    Matrix vectors;                   ///< unit-norm columns for the requested roots
    std::vector<double> overlaps;     ///< |<ref|root>| per requested root
    std::vector<double> residuals;    ///< ||M v - lambda v|| per requested root
};

/// Lowest `n_roots` eigenpairs of a symmetric matrix by a dense solve.
/// Throws std::invalid_argument if M deviates from symmetry by more than
/// `symmetry_tol` and DimensionMismatch above the dimension cap.
SpectrumResult exact_diagonalize(const Matrix& m, int n_roots = 1, std::size_t reference_index = 0,
                                 double symmetry_tol = 1e-8);

struct NonsymmetricRoot {
    double value = 0.0;
    Vector vector;           ///< right eigenvector, unit norm, positive reference component
    double overlap = 0.0;    ///< |<ref|v>|
    double residual = 0.0;   ///< ||M v - value v||
    Vector spectrum;         ///< real parts of all eigenvalues, ascending
};

/// Right eigenpair of a general real matrix whose eigenvector overlaps most
/// with the reference basis vector. Complex roots are skipped. Throws
/// ConvergenceError if the chosen root misses `residual_tol` (defective or
/// ill-conditioned matrix).
NonsymmetricRoot nonsymmetric_eig(const Matrix& m, std::size_t reference_index = 0, double residual_tol = 1e-8);

/// Rayleigh-Schrodinger quantities for H = H0 + V with diagonal H0 and a
/// reference basis vector, intermediate normalisation.
struct RsOrder2 {
    double e0 = 0.0;
    double e1 = 0.0;
    double e2 = 0.0;
    Vector psi1;  ///< R0 V |ref>
    Vector psi2;  ///< R0 (V - E1) psi1
};

/// Throws std::domain_error if any |E0 - E_k| < degeneracy_tol.
RsOrder2 rs_resolvent_order2(const Vector& h0_diagonal, const Matrix& v, std::size_t reference_index,
                             double degeneracy_tol = 1e-10);

/// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h.
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5);

/// Full-sector ground state of an integral store (dense up to the cap,
/// Davidson above it).
Eigenpair fci_ground_state(const IntegralStore& store);

}  // namespace qflow
