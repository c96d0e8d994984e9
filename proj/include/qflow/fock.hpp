#pragma once

/**
 * @file fock.hpp
 * @brief Bit-encoded determinants, fermionic ladder-operator strings and
 *        state vectors over explicit determinant bases.
 *
 * Spin orbitals are interleaved: spatial orbital p carries spin orbitals
 * 2p (alpha) and 2p+1 (beta). A determinant with occupied spin orbitals
 * p1 < p2 < ... < pn is the ordered product a+_{p1} a+_{p2} ... a+_{pn}|vac>,
 * so a ladder operator acting on spin orbital q picks up (-1)^(number of
 * occupied spin orbitals below q).
 */

#include <qflow/common.hpp>

#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

namespace qflow {

inline constexpr int kMaxSpatialOrbitals = 32;

constexpr int spin_orbital(int spatial, int spin) { return 2 * spatial + spin; }
constexpr int spatial_of(int so) { return so >> 1; }
constexpr int spin_of(int so) { return so & 1; }

/// Occupation bitmasks over spatial orbitals, one per spin.
struct Determinant {
    std::uint64_t alpha = 0;
    std::uint64_t beta = 0;

    constexpr auto operator<=>(const Determinant&) const = default;

    [[nodiscard]] bool occupied(int so) const {
        const std::uint64_t m = spin_of(so) == 0 ? alpha : beta;
        return (m >> spatial_of(so)) & 1U;
    }
    [[nodiscard]] int n_alpha() const { return std::popcount(alpha); }
    [[nodiscard]] int n_beta() const { return std::popcount(beta); }

    /// Interleaved spin-orbital mask (bit 2p = alpha p, bit 2p+1 = beta p).
    [[nodiscard]] std::uint64_t spin_mask() const;
    static Determinant from_spin_mask(std::uint64_t mask);
    static Determinant from_spin_orbitals(const std::vector<int>& occupied);
    [[nodiscard]] std::vector<int> occupied_spin_orbitals() const;
};

/// Orbital space and the closed/open-shell reference it houses.
struct SpinOrbitalBasis {
    int n_spatial = 0;
    int n_alpha = 0;
    int n_beta = 0;

    [[nodiscard]] int n_spin_orbitals() const { return 2 * n_spatial; }
    /// Lowest n_alpha / n_beta spatial orbitals occupied.
    [[nodiscard]] Determinant reference() const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Ladder operators
// ---------------------------------------------------------------------------

/// Sign of moving a ladder operator on spin orbital q through the occupied
/// spin orbitals of `mask` that precede it.
inline int ladder_sign(std::uint64_t mask, int q) {
    const std::uint64_t below = q == 0 ? 0 : (mask & ((std::uint64_t{1} << q) - 1));
    return (std::popcount(below) & 1) ? -1 : 1;
}

enum class Ladder : std::uint8_t { Create, Annihilate };

struct LadderOp {
    int orbital;
    Ladder kind;
};

/// Product of ladder operators in written order; the rightmost acts first.
struct OperatorString {
    std::vector<LadderOp> ops;
    double prefactor = 1.0;

    static OperatorString create(int so) { return {{{so, Ladder::Create}}, 1.0}; }
    static OperatorString annihilate(int so) { return {{{so, Ladder::Annihilate}}, 1.0}; }
    /// a+_{virt[0]} ... a+_{virt[k-1]} a_{occ[k-1]} ... a_{occ[0]}
    static OperatorString excitation(const std::vector<int>& occ, const std::vector<int>& virt);

    /// Operator product: (*this) * rhs, i.e. rhs acts first.
    [[nodiscard]] OperatorString operator*(const OperatorString& rhs) const;
};

struct SignedDeterminant {
    int phase = 0;  ///< -1, 0 (annihilated) or +1
    Determinant det;
};

/// Phase 0 iff the string annihilates `d`. The string's prefactor is not
/// folded into the phase.
SignedDeterminant apply_string(const OperatorString& op, const Determinant& d);

// ---------------------------------------------------------------------------
// Sectors and excitations between determinants
// ---------------------------------------------------------------------------

/// All determinants with the given spin populations, in (alpha, beta) order.
std::vector<Determinant> enumerate_sector(const SpinOrbitalBasis& basis, int n_alpha, int n_beta);

struct ExcitationInfo {
    int rank = 0;
    std::vector<int> occ;   ///< spin orbitals emptied in going d1 -> d2, ascending
    std::vector<int> virt;  ///< spin orbitals filled in going d1 -> d2, ascending
    int phase = 1;          ///< OperatorString::excitation(occ, virt)|d1> = phase |d2>
};

/// Excitation relating d1 to d2. Empty when the rank exceeds `max_rank`.
/// Throws InvalidSector when the spin populations differ.
std::optional<ExcitationInfo> excitation_between(const Determinant& d1, const Determinant& d2,
                                                 int max_rank = 64);

}  // namespace qflow

template <>
struct std::hash<qflow::Determinant> {
    std::size_t operator()(const qflow::Determinant& d) const noexcept {
        const std::size_t ha = std::hash<std::uint64_t>{}(d.alpha);
        const std::size_t hb = std::hash<std::uint64_t>{}(d.beta);
        return ha ^ (hb + 0x9e3779b97f4a7c15ULL + (ha << 6) + (ha >> 2));
    }
};

namespace qflow {

/// Ordered determinant list with O(1) index lookup.
class DeterminantBasis {
public:
    DeterminantBasis() = default;
    explicit DeterminantBasis(std::vector<Determinant> dets);

    [[nodiscard]] std::size_t size() const { return dets_.size(); }
    [[nodiscard]] const Determinant& operator[](std::size_t i) const { return dets_[i]; }
    [[nodiscard]] const std::vector<Determinant>& determinants() const { return dets_; }
    [[nodiscard]] std::optional<std::size_t> find(const Determinant& d) const;
    [[nodiscard]] std::size_t index_of(const Determinant& d) const;

    auto begin() const { return dets_.begin(); }
    auto end() const { return dets_.end(); }

private:
    std::vector<Determinant> dets_;
    std::unordered_map<Determinant, std::size_t> index_;
};

using BasisPtr = std::shared_ptr<const DeterminantBasis>;

inline BasisPtr make_basis(std::vector<Determinant> dets) {
    return std::make_shared<const DeterminantBasis>(std::move(dets));
}

/// Real amplitudes over a determinant basis.
class StateVector {
public:
    StateVector(BasisPtr basis, Vector coeffs);
    static StateVector basis_state(BasisPtr basis, std::size_t index);

    [[nodiscard]] const DeterminantBasis& basis() const { return *basis_; }
    [[nodiscard]] const BasisPtr& basis_ptr() const { return basis_; }
    [[nodiscard]] const Vector& coeffs() const { return coeffs_; }
    Vector& coeffs() { return coeffs_; }
    [[nodiscard]] std::size_t size() const { return coeffs_.size(); }

    /// Coefficient of `d`, zero if `d` is outside the basis.
    [[nodiscard]] double coefficient(const Determinant& d) const;
    [[nodiscard]] double norm() const { return coeffs_.norm(); }
    void normalize();

private:
    BasisPtr basis_;
    Vector coeffs_;
};

}  // namespace qflow
