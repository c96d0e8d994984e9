#pragma once

#include <qflow/fock.hpp>

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace qflow {

/// Pure excitation operator a+_{v1} ... a+_{vk} a_{ok} ... a_{o1} over spin
/// orbitals, stored as two disjoint masks. The lists o and v are ascending.
struct Excitation {
    std::uint64_t occ = 0;
    std::uint64_t virt = 0;

    static Excitation from_lists(const std::vector<int>& occ, const std::vector<int>& virt);

    [[nodiscard]] int rank() const { return std::popcount(occ); }
    [[nodiscard]] std::vector<int> occ_list() const;
    [[nodiscard]] std::vector<int> virt_list() const;
    [[nodiscard]] std::uint64_t support() const { return occ | virt; }

    /// Equal rank, disjoint masks, and the same number of alpha spin
    /// orbitals among occ and virt.
    [[nodiscard]] bool valid() const;

    /// Phase 0 when the operator annihilates `mask`; the resulting mask is
    /// written to `out` otherwise.
    [[nodiscard]] int apply(std::uint64_t mask, std::uint64_t& out) const;
    [[nodiscard]] SignedDeterminant apply(const Determinant& d) const;
    [[nodiscard]] OperatorString to_string_op() const { return OperatorString::excitation(occ_list(), virt_list()); }

    /// "rank o1 o2 ... -> v1 v2 ..."
    [[nodiscard]] std::string label() const;

    /// Ordered by rank, then occ mask, then virt mask.
    friend std::strong_ordering operator<=>(const Excitation& a, const Excitation& b) {
        if (auto c = a.rank() <=> b.rank(); c != 0) return c;
        if (auto c = a.occ <=> b.occ; c != 0) return c;
        return a.virt <=> b.virt;
    }
    friend bool operator==(const Excitation&, const Excitation&) = default;
};

/// All spin-conserving excitations with occ drawn from `occ_pool`, virt drawn
/// from `virt_pool`, and rank in [1, max_rank], in Excitation order.
std::vector<Excitation> enumerate_excitations(std::uint64_t occ_pool, std::uint64_t virt_pool, int max_rank);

/// Excitation E with E|reference> = phase |target>.
Excitation excitation_to(const Determinant& reference, const Determinant& target);

}  // namespace qflow

template <>
struct std::hash<qflow::Excitation> {
    std::size_t operator()(const qflow::Excitation& e) const noexcept {
        const std::size_t a = std::hash<std::uint64_t>{}(e.occ);
        return a ^ (std::hash<std::uint64_t>{}(e.virt) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    }
};
