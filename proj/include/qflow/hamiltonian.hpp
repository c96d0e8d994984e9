#pragma once

#include <qflow/common.hpp>
#include <qflow/fock.hpp>
#include <qflow/integrals.hpp>

#include <memory>
#include <vector>

namespace qflow {

/// Symmetric Hamiltonian over an explicit determinant basis (Hartree).
///
/// Stored sparse: Slater-Condon couples each determinant to O(n^4) others,
/// so even the dense-scale sectors are mostly zeros.
struct HamiltonianMatrix {
    BasisPtr basis;
    SparseMatrix entries;
    std::shared_ptr<const IntegralStore> source;  ///< null for matrix-supplied operators

    [[nodiscard]] std::size_t dimension() const { return basis ? basis->size() : 0; }
    [[nodiscard]] double element(std::size_t i, std::size_t j) const {
        return entries.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    [[nodiscard]] Matrix dense() const { return Matrix(entries); }
    /// Principal sub-block on the given row/column indices.
    [[nodiscard]] Matrix block(const std::vector<std::size_t>& indices) const;
    [[nodiscard]] double symmetry_defect() const;
};

/// <bra|H|ket> by the Slater-Condon rules, including the core energy.
double slater_condon(const IntegralStore& store, const Determinant& bra, const Determinant& ket);

HamiltonianMatrix build_matrix(std::shared_ptr<const IntegralStore> store, BasisPtr basis);
HamiltonianMatrix build_matrix(const IntegralStore& store, BasisPtr basis);
/// Wraps an explicitly given symmetric matrix.
HamiltonianMatrix matrix_hamiltonian(BasisPtr basis, const Matrix& m);

/// Diagonal of the Fock operator built from `store` and the occupation of
/// `reference`, one entry per spin orbital.
struct FockDiagonal {
    std::vector<double> f;
    [[nodiscard]] double operator[](int so) const { return f[static_cast<std::size_t>(so)]; }
    [[nodiscard]] std::size_t size() const { return f.size(); }
};

/// f_pp = h_pp + sum_{i in occ} <pi||pi>
FockDiagonal fock_diagonal(const IntegralStore& store, const Determinant& reference);
/// Full spin-orbital Fock matrix f_pq = h_pq + sum_{i in occ} <pi||qi>.
Matrix fock_matrix(const IntegralStore& store, const Determinant& reference);

struct Eigenpair {
    double value = 0.0;
    Vector vector;
    double residual = 0.0;
    int iterations = 0;
};

/// Lowest eigenpair of a symmetric sparse matrix by Davidson iteration with a
/// diagonal preconditioner. Used where the sector is too large for a dense solve.
Eigenpair davidson_lowest(const SparseMatrix& h, const Vector& guess, double tol = 1e-8,
                          int max_iter = 500, int max_subspace = 40);

/// Dense solve up to `dense_cap`, Davidson (started from `guess_index`) above it.
Eigenpair ground_state(const HamiltonianMatrix& h, std::size_t guess_index = 0,
                       std::size_t dense_cap = 5000);

}  // namespace qflow
