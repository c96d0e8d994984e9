#include <qflow/fock.hpp>

#include <algorithm>
#include <string>

namespace qflow {

namespace {

std::uint64_t low_bits(int n) {
    return n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
}

// Gosper's hack: next larger integer with the same popcount.
std::uint64_t next_combination(std::uint64_t x) {
    const std::uint64_t u = x & (~x + 1);
    const std::uint64_t v = x + u;
    return v + (((v ^ x) / u) >> 2);
}

std::vector<std::uint64_t> combinations(int n, int k) {
    std::vector<std::uint64_t> out;
    if (k == 0) {
        out.push_back(0);
        return out;
    }
    const std::uint64_t limit = std::uint64_t{1} << n;
    for (std::uint64_t m = low_bits(k); m < limit; m = next_combination(m)) {
        out.push_back(m);
    }
    return out;
}

}  // namespace

std::uint64_t Determinant::spin_mask() const {
    std::uint64_t out = 0;
    for (std::uint64_t a = alpha; a; a &= a - 1) out |= std::uint64_t{1} << (2 * std::countr_zero(a));
    for (std::uint64_t b = beta; b; b &= b - 1) out |= std::uint64_t{1} << (2 * std::countr_zero(b) + 1);
    return out;
}

Determinant Determinant::from_spin_mask(std::uint64_t mask) {
    Determinant d;
    for (; mask; mask &= mask - 1) {
        const int so = std::countr_zero(mask);
        if (spin_of(so) == 0) {
            d.alpha |= std::uint64_t{1} << spatial_of(so);
        } else {
            d.beta |= std::uint64_t{1} << spatial_of(so);
        }
    }
    return d;
}

Determinant Determinant::from_spin_orbitals(const std::vector<int>& occupied) {
    std::uint64_t mask = 0;
    for (int so : occupied) mask |= std::uint64_t{1} << so;
    return from_spin_mask(mask);
}

std::vector<int> Determinant::occupied_spin_orbitals() const {
    std::vector<int> out;
    for (std::uint64_t m = spin_mask(); m; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
}

Determinant SpinOrbitalBasis::reference() const {
    return Determinant{low_bits(n_alpha), low_bits(n_beta)};
}

void SpinOrbitalBasis::validate() const {
    if (n_spatial < 0 || n_spatial > kMaxSpatialOrbitals) {
        throw InvalidSector("spatial orbital count out of range: " + std::to_string(n_spatial));
    }
    if (n_alpha < 0 || n_beta < 0 || n_alpha > n_spatial || n_beta > n_spatial) {
        throw InvalidSector("electron counts (" + std::to_string(n_alpha) + "," +
                            std::to_string(n_beta) + ") exceed " + std::to_string(n_spatial) +
                            " spatial orbitals");
    }
}

OperatorString OperatorString::excitation(const std::vector<int>& occ, const std::vector<int>& virt) {
    OperatorString s;
    s.ops.reserve(occ.size() + virt.size());
    for (int v : virt) s.ops.push_back({v, Ladder::Create});
    for (auto it = occ.rbegin(); it != occ.rend(); ++it) s.ops.push_back({*it, Ladder::Annihilate});
    return s;
}

OperatorString OperatorString::operator*(const OperatorString& rhs) const {
    OperatorString out;
    out.ops = ops;
    out.ops.insert(out.ops.end(), rhs.ops.begin(), rhs.ops.end());
    out.prefactor = prefactor * rhs.prefactor;
    return out;
}

SignedDeterminant apply_string(const OperatorString& op, const Determinant& d) {
    std::uint64_t mask = d.spin_mask();
    int phase = 1;
    for (auto it = op.ops.rbegin(); it != op.ops.rend(); ++it) {
        const std::uint64_t bit = std::uint64_t{1} << it->orbital;
        const bool occ = (mask & bit) != 0;
        if ((it->kind == Ladder::Create) == occ) return {0, Determinant{}};
        phase *= ladder_sign(mask, it->orbital);
        mask ^= bit;
    }
    return {phase, Determinant::from_spin_mask(mask)};
}

std::vector<Determinant> enumerate_sector(const SpinOrbitalBasis& basis, int n_alpha, int n_beta) {
    SpinOrbitalBasis probe = basis;
    probe.n_alpha = n_alpha;
    probe.n_beta = n_beta;
    probe.validate();
    const auto alphas = combinations(basis.n_spatial, n_alpha);
    const auto betas = combinations(basis.n_spatial, n_beta);
    std::vector<Determinant> out;
    out.reserve(alphas.size() * betas.size());
    for (auto a : alphas) {
        for (auto b : betas) out.push_back({a, b});
    }
    return out;
}

std::optional<ExcitationInfo> excitation_between(const Determinant& d1, const Determinant& d2,
                                                 int max_rank) {
    if (d1.n_alpha() != d2.n_alpha() || d1.n_beta() != d2.n_beta()) {
        throw InvalidSector("excitation_between: determinants belong to different sectors");
    }
    const std::uint64_t m1 = d1.spin_mask();
    const std::uint64_t m2 = d2.spin_mask();
    const int rank = std::popcount(m1 ^ m2) / 2;
    if (rank > max_rank) return std::nullopt;

    ExcitationInfo info;
    info.rank = rank;
    for (std::uint64_t m = m1 & ~m2; m; m &= m - 1) info.occ.push_back(std::countr_zero(m));
    for (std::uint64_t m = m2 & ~m1; m; m &= m - 1) info.virt.push_back(std::countr_zero(m));
    info.phase = apply_string(OperatorString::excitation(info.occ, info.virt), d1).phase;
    return info;
}

DeterminantBasis::DeterminantBasis(std::vector<Determinant> dets) : dets_(std::move(dets)) {
    index_.reserve(dets_.size());
    for (std::size_t i = 0; i < dets_.size(); ++i) {
        if (!index_.emplace(dets_[i], i).second) {
            throw std::invalid_argument("DeterminantBasis: duplicate determinant");
        }
    }
}

std::optional<std::size_t> DeterminantBasis::find(const Determinant& d) const {
    const auto it = index_.find(d);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t DeterminantBasis::index_of(const Determinant& d) const {
    const auto it = index_.find(d);
    if (it == index_.end()) throw std::out_of_range("determinant not in basis");
    return it->second;
}

StateVector::StateVector(BasisPtr basis, Vector coeffs) : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (!basis_ || static_cast<std::size_t>(coeffs_.size()) != basis_->size()) {
        throw DimensionMismatch("StateVector: coefficient count does not match basis size");
    }
}

StateVector StateVector::basis_state(BasisPtr basis, std::size_t index) {
    Vector c = Vector::Zero(static_cast<Eigen::Index>(basis->size()));
    c(static_cast<Eigen::Index>(index)) = 1.0;
    return StateVector(std::move(basis), std::move(c));
}

double StateVector::coefficient(const Determinant& d) const {
    const auto i = basis_->find(d);
    return i ? coeffs_(static_cast<Eigen::Index>(*i)) : 0.0;
}

void StateVector::normalize() {
    const double n = coeffs_.norm();
    if (n == 0.0) throw std::domain_error("cannot normalize a zero state");
    coeffs_ /= n;
}

}  // namespace qflow
