#include <qflow/excitation.hpp>

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace qflow {

namespace {

std::vector<int> mask_list(std::uint64_t m) {
    std::vector<int> out;
    for (; m; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
}

constexpr std::uint64_t kAlphaBits = 0x5555555555555555ULL;

void subsets(const std::vector<int>& pool, int k, std::size_t start, std::uint64_t acc,
             std::vector<std::uint64_t>& out) {
    if (k == 0) {
        out.push_back(acc);
        return;
    }
    for (std::size_t i = start; i + static_cast<std::size_t>(k) <= pool.size(); ++i) {
        subsets(pool, k - 1, i + 1, acc | (std::uint64_t{1} << pool[i]), out);
    }
}

}  // namespace

Excitation Excitation::from_lists(const std::vector<int>& occ, const std::vector<int>& virt) {
    Excitation e;
    for (int o : occ) e.occ |= std::uint64_t{1} << o;
    for (int v : virt) e.virt |= std::uint64_t{1} << v;
    if (std::popcount(e.occ) != static_cast<int>(occ.size()) ||
        std::popcount(e.virt) != static_cast<int>(virt.size())) {
        throw std::invalid_argument("excitation lists contain repeated orbitals");
    }
    return e;
}

std::vector<int> Excitation::occ_list() const { return mask_list(occ); }
std::vector<int> Excitation::virt_list() const { return mask_list(virt); }

bool Excitation::valid() const {
    return occ != 0 && (occ & virt) == 0 && std::popcount(occ) == std::popcount(virt) &&
           std::popcount(occ & kAlphaBits) == std::popcount(virt & kAlphaBits);
}

int Excitation::apply(std::uint64_t mask, std::uint64_t& out) const {
    if ((mask & occ) != occ) return 0;
    const std::uint64_t removed = mask & ~occ;
    if ((removed & virt) != 0) return 0;
    int parity = 0;
    // annihilate o1 first, then o2, ...; each sees the occupied orbitals below
    // it that are still present
    std::uint64_t m = mask;
    for (std::uint64_t o = occ; o; o &= o - 1) {
        const int q = std::countr_zero(o);
        parity += std::popcount(m & ((std::uint64_t{1} << q) - 1));
        m ^= std::uint64_t{1} << q;
    }
    // create vk first, ..., v1 last
    for (int i = 63 - std::countl_zero(virt); i >= 0; --i) {
        if (!((virt >> i) & 1U)) continue;
        parity += std::popcount(m & ((std::uint64_t{1} << i) - 1));
        m |= std::uint64_t{1} << i;
    }
    out = m;
    return (parity & 1) ? -1 : 1;
}

SignedDeterminant Excitation::apply(const Determinant& d) const {
    std::uint64_t out = 0;
    const int phase = apply(d.spin_mask(), out);
    if (phase == 0) return {0, Determinant{}};
    return {phase, Determinant::from_spin_mask(out)};
}

std::string Excitation::label() const {
    std::ostringstream os;
    os << rank();
    for (int o : occ_list()) os << ' ' << o;
    os << " ->";
    for (int v : virt_list()) os << ' ' << v;
    return os.str();
}

std::vector<Excitation> enumerate_excitations(std::uint64_t occ_pool, std::uint64_t virt_pool, int max_rank) {
    const auto occ = mask_list(occ_pool);
    const auto vir = mask_list(virt_pool);
    std::vector<Excitation> out;
    for (int r = 1; r <= max_rank; ++r) {
        std::vector<std::uint64_t> os;
        std::vector<std::uint64_t> vs;
        subsets(occ, r, 0, 0, os);
        subsets(vir, r, 0, 0, vs);
        for (auto o : os) {
            const int oa = std::popcount(o & kAlphaBits);
            for (auto v : vs) {
                if (std::popcount(v & kAlphaBits) == oa) out.push_back({o, v});
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Excitation excitation_to(const Determinant& reference, const Determinant& target) {
    const std::uint64_t r = reference.spin_mask();
    const std::uint64_t t = target.spin_mask();
    return {r & ~t, t & ~r};
}

}  // namespace qflow
