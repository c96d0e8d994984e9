#pragma once

#include <qflow/excitation.hpp>
#include <qflow/fock.hpp>

#include <string>
#include <vector>

namespace qflow {

/// Closed-shell active space: chosen occupied and virtual spatial orbitals,
/// both spins included.
struct ActiveSpace {
    std::vector<int> occ_spatial;
    std::vector<int> virt_spatial;
    int id = 0;

    [[nodiscard]] int n_electrons() const { return 2 * static_cast<int>(occ_spatial.size()); }
    [[nodiscard]] int n_orbitals() const { return static_cast<int>(occ_spatial.size() + virt_spatial.size()); }
    /// Spin-orbital mask of all active orbitals.
    [[nodiscard]] std::uint64_t spin_mask() const;
    [[nodiscard]] std::uint64_t occ_spin_mask() const;
    [[nodiscard]] std::uint64_t virt_spin_mask() const;

    /// `occ:[0,1],virt:[4,5]`
    [[nodiscard]] std::string label() const;
};

/// Parses the `occ:[...],virt:[...]` form. Throws std::invalid_argument.
ActiveSpace parse_space(const std::string& text);

/// Checks `space` against the reference partition of `basis`: occupied
/// orbitals doubly occupied in the reference, virtuals empty, no repeats.
void validate_space(const SpinOrbitalBasis& basis, const ActiveSpace& space);

/// All C(n_occ, n_occ_pick) * C(n_virt, n_virt_pick) spaces, lexicographic with
/// the occupied choice outermost; ids 0, 1, ... in that order.
std::vector<ActiveSpace> enumerate_spaces(const SpinOrbitalBasis& basis, int n_occ_pick, int n_virt_pick);

/// CAS determinants: inactive occupied frozen, active electrons distributed
/// over the active orbitals. The reference comes first, the rest follow in
/// canonical order.
BasisPtr cas_basis(const SpinOrbitalBasis& basis, const ActiveSpace& space);

enum class ExcitationClass { Internal, External };
ExcitationClass classify_excitation(const Excitation& exc, const ActiveSpace& space);

enum class Region { Reference, Internal, External };
/// Which of P, Q_int, Q_ext contains `d`.
Region region_of(const Determinant& d, const Determinant& reference, const ActiveSpace& space);

/// Diagonal 0/1 projector over `sector` onto the given region.
Vector projector_diagonal(const DeterminantBasis& sector, const Determinant& reference,
                          const ActiveSpace& space, Region region);

}  // namespace qflow
