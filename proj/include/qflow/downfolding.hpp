#pragma once

#include <qflow/active_space.hpp>
#include <qflow/cluster.hpp>
#include <qflow/hamiltonian.hpp>
#include <qflow/perturbative.hpp>

#include <optional>
#include <string>
#include <vector>

namespace qflow {

enum class HeffMethod { ExactUnitary, Bch, Perturbative, SesNonHermitian };

std::string to_string(HeffMethod m);

/// Active-space block of a transformed Hamiltonian, over the CAS basis.
struct EffectiveHamiltonian {
    ActiveSpace space;
    BasisPtr cas;
    Matrix matrix;
    HeffMethod method = HeffMethod::ExactUnitary;
    int order = 0;  ///< commutator rank for Bch, perturbative order for Perturbative
    bool hermitian = true;
};

/// Positions of the `cas` determinants inside `sector`; throws
/// DimensionMismatch if one is missing.
std::vector<std::size_t> embed_indices(const DeterminantBasis& sector, const DeterminantBasis& cas);

/// P_cas e^{-sigma} H e^{sigma} P_cas, symmetrised. sigma lives on the full
/// sector of `h` and must be antisymmetric.
EffectiveHamiltonian heff_unitary_exact(const HamiltonianMatrix& h, const SparseMatrix& sigma_ext,
                                        const ActiveSpace& space, const BasisPtr& cas, double tol = 1e-12);

/// Nested commutators of H with sigma through rank k, projected and
/// symmetrised by (M + M^T) / 2.
EffectiveHamiltonian heff_bch(const HamiltonianMatrix& h, const SparseMatrix& sigma_ext, const ActiveSpace& space,
                              const BasisPtr& cas, int k);

/// P_cas e^{-T} H e^{T} P_cas with e^{+-T} summed exactly. Throws
/// std::invalid_argument if `t_ext` holds an amplitude internal to `space`.
EffectiveHamiltonian heff_ses_nonhermitian(const HamiltonianMatrix& h, const AmplitudeStore& t_ext,
                                           const ActiveSpace& space, const BasisPtr& cas);

/// heff_ses_nonhermitian with the external amplitudes through order n.
EffectiveHamiltonian heff_perturbative(const HamiltonianMatrix& h, const PerturbationTheory& pt,
                                       const ActiveSpace& space, const BasisPtr& cas, int n);

struct BlochResult {
    double energy = 0.0;
    Vector internal;          ///< CAS coefficients, reference component 1
    double overlap = 0.0;     ///< |<ref|root>| of the unit-norm root
    double residual = 0.0;
    double min_denominator = 0.0;  ///< smallest |D| among the external amplitudes used
    EffectiveHamiltonian heff;
};

/// Diagonalises the order-n perturbative H^eff and keeps the root of largest
/// reference overlap. Throws ConvergenceError when no root overlaps by more
/// than `min_overlap`.
BlochResult bloch_hybrid_solve(const HamiltonianMatrix& h, const PerturbationTheory& pt, const ActiveSpace& space,
                               const BasisPtr& cas, int n, double min_overlap = 0.1);

/// Integrals of the active orbitals with the inactive occupied ones folded
/// into the core energy and one-body term; active orbitals relabelled 0..n-1
/// in ascending order.
IntegralStore frozen_core_store(const IntegralStore& store, const ActiveSpace& space);

/// Synthetic-JSON document for the active space. When `heff` is given its
/// matrix and determinant list are attached as `heff_matrix` and
/// `determinants` (pairs of relabelled alpha/beta masks).
std::string export_heff_json(const IntegralStore& store, const ActiveSpace& space,
                             const EffectiveHamiltonian* heff = nullptr, const std::string& source = "bare");

/// The attached H^eff matrix and determinants of an exported document, if any.
struct ExportedMatrix {
    std::vector<Determinant> determinants;
    Matrix matrix;
};
std::optional<ExportedMatrix> parse_exported_matrix(std::string_view text);

}  // namespace qflow
