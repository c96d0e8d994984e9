#include <qflow/active_space.hpp>

#include <algorithm>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace qflow {

namespace {

std::uint64_t spatial_to_spin(const std::vector<int>& spatial) {
    std::uint64_t m = 0;
    for (int p : spatial) m |= std::uint64_t{3} << (2 * p);
    return m;
}

std::vector<std::vector<int>> choose(const std::vector<int>& pool, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = start; i < pool.size(); ++i) {
            cur.push_back(pool[i]);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

std::vector<int> parse_list(const std::string& body) {
    std::vector<int> out;
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto b = tok.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        std::size_t used = 0;
        const int v = std::stoi(tok.substr(b), &used);
        if (tok.find_first_not_of(" \t", b + used) != std::string::npos) {
            throw std::invalid_argument("bad orbital index '" + tok + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::uint64_t ActiveSpace::spin_mask() const { return occ_spin_mask() | virt_spin_mask(); }
std::uint64_t ActiveSpace::occ_spin_mask() const { return spatial_to_spin(occ_spatial); }
std::uint64_t ActiveSpace::virt_spin_mask() const { return spatial_to_spin(virt_spatial); }

std::string ActiveSpace::label() const {
    std::ostringstream os;
    auto list = [&](const std::vector<int>& v) {
        os << '[';
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
        os << ']';
    };
    os << "occ:";
    list(occ_spatial);
    os << ",virt:";
    list(virt_spatial);
    return os.str();
}

ActiveSpace parse_space(const std::string& text) {
    static const std::regex re(R"(^\s*occ:\[([^\]]*)\]\s*,\s*virt:\[([^\]]*)\]\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) {
        throw std::invalid_argument("active space must look like occ:[i,...],virt:[a,...], got '" + text + "'");
    }
    ActiveSpace s;
    try {
        s.occ_spatial = parse_list(m[1].str());
        s.virt_spatial = parse_list(m[2].str());
    } catch (const std::logic_error& e) {
        throw std::invalid_argument(std::string("active space: ") + e.what());
    }
    return s;
}

void validate_space(const SpinOrbitalBasis& basis, const ActiveSpace& space) {
    if (basis.n_alpha != basis.n_beta) {
        throw InvalidSector("active spaces require a closed-shell reference");
    }
    const int n_occ = basis.n_alpha;
    std::uint64_t seen = 0;
    auto check = [&](int p, bool occupied) {
        if (p < 0 || p >= basis.n_spatial) throw std::invalid_argument("active orbital out of range");
        if ((p < n_occ) != occupied) {
            throw std::invalid_argument("orbital " + std::to_string(p) + " is on the wrong side of the reference");
        }
        if ((seen >> p) & 1U) throw std::invalid_argument("active orbital repeated");
        seen |= std::uint64_t{1} << p;
    };
    for (int p : space.occ_spatial) check(p, true);
    for (int p : space.virt_spatial) check(p, false);
}

std::vector<ActiveSpace> enumerate_spaces(const SpinOrbitalBasis& basis, int n_occ_pick, int n_virt_pick) {
    if (basis.n_alpha != basis.n_beta) {
        throw InvalidSector("active spaces require a closed-shell reference");
    }
    const int n_occ = basis.n_alpha;
    const int n_virt = basis.n_spatial - n_occ;
    if (n_occ_pick < 0 || n_virt_pick < 0 || n_occ_pick > n_occ || n_virt_pick > n_virt) {
        throw std::invalid_argument("active-space template (" + std::to_string(n_occ_pick) + "," +
                                    std::to_string(n_virt_pick) + ") does not fit " + std::to_string(n_occ) +
                                    " occupied / " + std::to_string(n_virt) + " virtual orbitals");
    }
    std::vector<int> occ(static_cast<std::size_t>(n_occ));
    std::vector<int> vir(static_cast<std::size_t>(n_virt));
    for (int i = 0; i < n_occ; ++i) occ[static_cast<std::size_t>(i)] = i;
    for (int a = 0; a < n_virt; ++a) vir[static_cast<std::size_t>(a)] = n_occ + a;
    std::vector<ActiveSpace> out;
    int id = 0;
    for (const auto& o : choose(occ, n_occ_pick)) {
        for (const auto& v : choose(vir, n_virt_pick)) out.push_back({o, v, id++});
    }
    return out;
}

BasisPtr cas_basis(const SpinOrbitalBasis& basis, const ActiveSpace& space) {
    validate_space(basis, space);
    const Determinant ref = basis.reference();
    const std::vector<int> active = [&] {
        std::vector<int> a = space.occ_spatial;
        a.insert(a.end(), space.virt_spatial.begin(), space.virt_spatial.end());
        std::sort(a.begin(), a.end());
        return a;
    }();
    std::uint64_t active_spatial = 0;
    for (int p : active) active_spatial |= std::uint64_t{1} << p;
    const std::uint64_t frozen = ref.alpha & ~active_spatial;

    const int n_act = static_cast<int>(active.size());
    const int n_el = static_cast<int>(space.occ_spatial.size());
    const auto local = enumerate_sector({n_act, n_el, n_el}, n_el, n_el);
    auto expand = [&](std::uint64_t m) {
        std::uint64_t out = frozen;
        for (int k = 0; k < n_act; ++k)
            if ((m >> k) & 1U) out |= std::uint64_t{1} << active[static_cast<std::size_t>(k)];
        return out;
    };
    std::vector<Determinant> dets;
    dets.reserve(local.size());
    for (const auto& d : local) dets.push_back({expand(d.alpha), expand(d.beta)});
    std::sort(dets.begin(), dets.end());
    const auto it = std::find(dets.begin(), dets.end(), ref);
    std::rotate(dets.begin(), it, it + 1);
    return make_basis(std::move(dets));
}

ExcitationClass classify_excitation(const Excitation& exc, const ActiveSpace& space) {
    return (exc.support() & ~space.spin_mask()) == 0 ? ExcitationClass::Internal : ExcitationClass::External;
}

Region region_of(const Determinant& d, const Determinant& reference, const ActiveSpace& space) {
    if (d == reference) return Region::Reference;
    const std::uint64_t diff = d.spin_mask() ^ reference.spin_mask();
    return (diff & ~space.spin_mask()) == 0 ? Region::Internal : Region::External;
}

Vector projector_diagonal(const DeterminantBasis& sector, const Determinant& reference,
                          const ActiveSpace& space, Region region) {
    Vector p(static_cast<Eigen::Index>(sector.size()));
    for (std::size_t i = 0; i < sector.size(); ++i) {
        p(static_cast<Eigen::Index>(i)) = region_of(sector[i], reference, space) == region ? 1.0 : 0.0;
    }
    return p;
}

}  // namespace qflow
