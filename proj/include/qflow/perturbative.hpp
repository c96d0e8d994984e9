#pragma once

#include <qflow/active_space.hpp>
#include <qflow/cluster.hpp>
#include <qflow/hamiltonian.hpp>
#include <qflow/integrals.hpp>

#include <string>
#include <vector>

namespace qflow {

/// Moller-Plesset partitioning of a store around its reference determinant:
/// H0 is the diagonal of the Fock operator, everything else (including
/// off-diagonal Fock elements) is the perturbation.
///
/// Diagrams kept (spin-orbital form, f' = off-diagonal Fock, D = difference
/// of occupied and virtual Fock diagonals):
///   first order   t_i^a = f_ai / D,  t_ij^ab = <ab||ij> / D
///   second order  singles and doubles: every term of the coupled-cluster
///                 singles/doubles residual linear in the first-order
///                 amplitudes, excluding the diagonal Fock part;
///   second order  triples: P(i/jk) P(a/bc) [ sum_e t_jk^ae <ei||bc>
///                 - sum_m t_im^bc <ma||jk> ] / D
/// Denominators with |D| < dgen_tol are never divided by: the amplitude is
/// set to zero and a `SKIP rank occ->virt denom=value` line is logged.
class PerturbationTheory {
public:
    explicit PerturbationTheory(const IntegralStore& store, double dgen_tol = 1e-6);

    [[nodiscard]] const IntegralStore& store() const { return *store_; }
    [[nodiscard]] const Determinant& reference() const { return reference_; }
    [[nodiscard]] const FockDiagonal& fock_diagonal() const { return fdiag_; }
    [[nodiscard]] const Matrix& fock() const { return fock_; }
    [[nodiscard]] double dgen_tol() const { return dgen_tol_; }

    /// Denominator sum_occ f - sum_virt f of an excitation.
    [[nodiscard]] double denominator(const Excitation& e) const;
    /// First-order amplitude; zero for rank > 2.
    [[nodiscard]] double first_order(const Excitation& e) const;
    /// Second-order contribution alone; zero for rank > 3.
    [[nodiscard]] double second_order(const Excitation& e) const;
    /// Sum of orders 1..n (n in {1, 2}).
    [[nodiscard]] double through_order(const Excitation& e, int n) const;

    /// sum f_ia t_i^a + sum_{i<j,a<b} <ij||ab> t_ij^ab with first-order amplitudes.
    [[nodiscard]] double second_order_energy() const;
    /// Largest |<pq||rs>| and |f'_pq| of the perturbation.
    [[nodiscard]] double perturbation_norm() const;

    [[nodiscard]] const std::vector<std::string>& degeneracy_log() const { return log_; }

private:
    [[nodiscard]] bool divisible(const Excitation& e, double d) const;
    [[nodiscard]] double t1(int i, int a) const;
    [[nodiscard]] double t2(int i, int j, int a, int b) const;
    [[nodiscard]] double triples_numerator(int i, int j, int k, int a, int b, int c) const;

    std::shared_ptr<const IntegralStore> store_;
    Determinant reference_;
    FockDiagonal fdiag_;
    Matrix fock_;
    double dgen_tol_;
    std::vector<int> occ_;
    std::vector<int> virt_;
    std::vector<int> slot_;  // spin orbital -> position in occ_ or virt_
    Matrix t1_;              // first order, occ x virt
    std::vector<double> t2_; // first order, antisymmetric (i, j, a, b)
    Matrix s1_;              // second-order singles
    std::vector<double> s2_; // second-order doubles
    mutable std::vector<std::string> log_;
};

/// First-order amplitudes for the rank-1 and rank-2 keys, tagged background.
AmplitudeStore first_order_sd(const PerturbationTheory& pt, const std::vector<Excitation>& keys);
/// Second-order amplitudes for the rank-3 keys, tagged background.
AmplitudeStore second_order_triples(const PerturbationTheory& pt, const std::vector<Excitation>& keys);
/// External amplitudes of `space` through order n: ranks 1-2 for n = 1,
/// ranks 1-3 for n = 2. Internal keys never appear.
AmplitudeStore text_order_n(const PerturbationTheory& pt, const ActiveSpace& space, int n);

/// Every spin-conserving excitation out of the reference occupation, rank 1..max_rank.
std::vector<Excitation> all_excitations(const SpinOrbitalBasis& basis, int max_rank);

}  // namespace qflow
