#include <qflow/perturbative.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qflow {

PerturbationTheory::PerturbationTheory(const IntegralStore& store, double dgen_tol)
    : store_(std::make_shared<const IntegralStore>(store)), dgen_tol_(dgen_tol) {
    const IntegralStore& s = *store_;
    const auto sb = s.basis();
    sb.validate();
    reference_ = sb.reference();
    fdiag_ = qflow::fock_diagonal(s, reference_);
    fock_ = fock_matrix(s, reference_);
    const int n_so = 2 * s.n_orb;
    slot_.assign(static_cast<std::size_t>(n_so), -1);
    for (int p = 0; p < n_so; ++p) {
        auto& list = reference_.occupied(p) ? occ_ : virt_;
        slot_[static_cast<std::size_t>(p)] = static_cast<int>(list.size());
        list.push_back(p);
    }
    const auto no = static_cast<Eigen::Index>(occ_.size());
    const auto nv = static_cast<Eigen::Index>(virt_.size());
    const std::size_t n4 = static_cast<std::size_t>(no * no * nv * nv);

    auto at = [&](int i, int j, int a, int b) {
        const auto I = static_cast<std::size_t>(slot_[static_cast<std::size_t>(i)]);
        const auto J = static_cast<std::size_t>(slot_[static_cast<std::size_t>(j)]);
        const auto A = static_cast<std::size_t>(slot_[static_cast<std::size_t>(a)]);
        const auto B = static_cast<std::size_t>(slot_[static_cast<std::size_t>(b)]);
        return ((I * static_cast<std::size_t>(no) + J) * static_cast<std::size_t>(nv) + A) *
                   static_cast<std::size_t>(nv) + B;
    };
    auto fill = [&](std::vector<double>& t, int i, int j, int a, int b, double v) {
        t[at(i, j, a, b)] = v;
        t[at(j, i, a, b)] = -v;
        t[at(i, j, b, a)] = -v;
        t[at(j, i, b, a)] = v;
    };

    t1_ = Matrix::Zero(no, nv);
    t2_.assign(n4, 0.0);
    for (int i : occ_) {
        for (int a : virt_) {
            const Excitation e = Excitation::from_lists({i}, {a});
            if (!e.valid()) continue;
            const double d = denominator(e);
            if (divisible(e, d)) t1_(slot_[static_cast<std::size_t>(i)], slot_[static_cast<std::size_t>(a)]) = fock_(a, i) / d;
        }
    }
    for (std::size_t x = 0; x < occ_.size(); ++x)
        for (std::size_t y = x + 1; y < occ_.size(); ++y)
            for (std::size_t u = 0; u < virt_.size(); ++u)
                for (std::size_t w = u + 1; w < virt_.size(); ++w) {
                    const int i = occ_[x], j = occ_[y], a = virt_[u], b = virt_[w];
                    const Excitation e = Excitation::from_lists({i, j}, {a, b});
                    if (!e.valid()) continue;
                    const double d = denominator(e);
                    if (divisible(e, d)) fill(t2_, i, j, a, b, s.antisym(a, b, i, j) / d);
                }

    auto f = [&](int p, int q) { return p == q ? 0.0 : fock_(p, q); };
    auto g = [&](int p, int q, int r, int t) { return s.antisym(p, q, r, t); };

    s1_ = Matrix::Zero(no, nv);
    for (int i : occ_) {
        for (int a : virt_) {
            const Excitation ex = Excitation::from_lists({i}, {a});
            if (!ex.valid()) continue;
            double v = 0.0;
            for (int e : virt_) v += f(a, e) * t1(i, e);
            for (int m : occ_) v -= f(m, i) * t1(m, a);
            for (int m : occ_)
                for (int e : virt_) {
                    v += fock_(m, e) * t2(i, m, a, e);
                    v += t1(m, e) * g(m, a, e, i);
                }
            for (int m : occ_)
                for (int e : virt_)
                    for (int ff : virt_) v -= 0.5 * t2(i, m, e, ff) * g(m, a, e, ff);
            for (int m : occ_)
                for (int e : virt_)
                    for (int n : occ_) v -= 0.5 * t2(m, n, a, e) * g(n, m, e, i);
            const double d = denominator(ex);
            if (divisible(ex, d)) s1_(slot_[static_cast<std::size_t>(i)], slot_[static_cast<std::size_t>(a)]) = v / d;
        }
    }

    s2_.assign(n4, 0.0);
    for (std::size_t x = 0; x < occ_.size(); ++x)
        for (std::size_t y = x + 1; y < occ_.size(); ++y)
            for (std::size_t u = 0; u < virt_.size(); ++u)
                for (std::size_t w = u + 1; w < virt_.size(); ++w) {
                    const int i = occ_[x], j = occ_[y], a = virt_[u], b = virt_[w];
                    const Excitation ex = Excitation::from_lists({i, j}, {a, b});
                    if (!ex.valid()) continue;
                    double v = 0.0;
                    for (int e : virt_) v += f(b, e) * t2(i, j, a, e) - f(a, e) * t2(i, j, b, e);
                    for (int m : occ_) v -= f(m, j) * t2(i, m, a, b) - f(m, i) * t2(j, m, a, b);
                    for (int m : occ_)
                        for (int n : occ_) v += 0.5 * g(m, n, i, j) * t2(m, n, a, b);
                    for (int e : virt_)
                        for (int ff : virt_) v += 0.5 * g(a, b, e, ff) * t2(i, j, e, ff);
                    auto ring = [&](int p, int q, int r, int t) {
                        double acc = 0.0;
                        for (int m : occ_)
                            for (int e : virt_) acc += g(m, t, e, q) * t2(p, m, r, e);
                        return acc;
                    };
                    v += ring(i, j, a, b) - ring(j, i, a, b) - ring(i, j, b, a) + ring(j, i, b, a);
                    for (int e : virt_) v += g(a, b, e, j) * t1(i, e) - g(a, b, e, i) * t1(j, e);
                    for (int m : occ_) v -= g(m, b, i, j) * t1(m, a) - g(m, a, i, j) * t1(m, b);
                    const double d = denominator(ex);
                    if (divisible(ex, d)) fill(s2_, i, j, a, b, v / d);
                }
}

double PerturbationTheory::denominator(const Excitation& e) const {
    double d = 0.0;
    for (int i : e.occ_list()) d += fdiag_[i];
    for (int a : e.virt_list()) d -= fdiag_[a];
    return d;
}

bool PerturbationTheory::divisible(const Excitation& e, double d) const {
    if (std::abs(d) >= dgen_tol_) return true;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6e", d);
    std::string line = "SKIP " + std::to_string(e.rank());
    for (int o : e.occ_list()) line += ' ' + std::to_string(o);
    line += "->";
    bool first = true;
    for (int v : e.virt_list()) {
        line += (first ? "" : " ") + std::to_string(v);
        first = false;
    }
    line += std::string(" denom=") + buf;
    if (std::find(log_.begin(), log_.end(), line) == log_.end()) log_.push_back(line);
    return false;
}

double PerturbationTheory::t1(int i, int a) const {
    return t1_(slot_[static_cast<std::size_t>(i)], slot_[static_cast<std::size_t>(a)]);
}

double PerturbationTheory::t2(int i, int j, int a, int b) const {
    const auto no = occ_.size();
    const auto nv = virt_.size();
    const auto I = static_cast<std::size_t>(slot_[static_cast<std::size_t>(i)]);
    const auto J = static_cast<std::size_t>(slot_[static_cast<std::size_t>(j)]);
    const auto A = static_cast<std::size_t>(slot_[static_cast<std::size_t>(a)]);
    const auto B = static_cast<std::size_t>(slot_[static_cast<std::size_t>(b)]);
    return t2_[((I * no + J) * nv + A) * nv + B];
}

double PerturbationTheory::triples_numerator(int i, int j, int k, int a, int b, int c) const {
    const IntegralStore& s = *store_;
    auto x = [&](int p, int q, int r, int d, int e2, int f2) {
        double acc = 0.0;
        for (int e : virt_) acc += t2(q, r, d, e) * s.antisym(e, p, e2, f2);
        for (int m : occ_) acc -= t2(p, m, e2, f2) * s.antisym(m, d, q, r);
        return acc;
    };
    const int occ_perm[3][3] = {{i, j, k}, {j, i, k}, {k, j, i}};
    const int virt_perm[3][3] = {{a, b, c}, {b, a, c}, {c, b, a}};
    double v = 0.0;
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
            const double sign = (p == 0 ? 1.0 : -1.0) * (q == 0 ? 1.0 : -1.0);
            v += sign * x(occ_perm[p][0], occ_perm[p][1], occ_perm[p][2], virt_perm[q][0], virt_perm[q][1],
                          virt_perm[q][2]);
        }
    return v;
}

double PerturbationTheory::first_order(const Excitation& e) const {
    if (!e.valid()) return 0.0;
    const auto o = e.occ_list();
    const auto v = e.virt_list();
    for (int p : o)
        if (!reference_.occupied(p)) return 0.0;
    for (int p : v)
        if (reference_.occupied(p)) return 0.0;
    if (e.rank() == 1) return t1(o[0], v[0]);
    if (e.rank() == 2) return t2(o[0], o[1], v[0], v[1]);
    return 0.0;
}

double PerturbationTheory::second_order(const Excitation& e) const {
    if (!e.valid()) return 0.0;
    const auto o = e.occ_list();
    const auto v = e.virt_list();
    for (int p : o)
        if (!reference_.occupied(p)) return 0.0;
    for (int p : v)
        if (reference_.occupied(p)) return 0.0;
    if (e.rank() == 1) return s1_(slot_[static_cast<std::size_t>(o[0])], slot_[static_cast<std::size_t>(v[0])]);
    if (e.rank() == 2) {
        const auto no = occ_.size();
        const auto nv = virt_.size();
        const auto I = static_cast<std::size_t>(slot_[static_cast<std::size_t>(o[0])]);
        const auto J = static_cast<std::size_t>(slot_[static_cast<std::size_t>(o[1])]);
        const auto A = static_cast<std::size_t>(slot_[static_cast<std::size_t>(v[0])]);
        const auto B = static_cast<std::size_t>(slot_[static_cast<std::size_t>(v[1])]);
        return s2_[((I * no + J) * nv + A) * nv + B];
    }
    if (e.rank() == 3) {
        const double d = denominator(e);
        if (!divisible(e, d)) return 0.0;
        return triples_numerator(o[0], o[1], o[2], v[0], v[1], v[2]) / d;
    }
    return 0.0;
}

double PerturbationTheory::through_order(const Excitation& e, int n) const {
    if (n < 1 || n > 2) throw std::invalid_argument("perturbative order must be 1 or 2");
    return n == 1 ? first_order(e) : first_order(e) + second_order(e);
}

double PerturbationTheory::second_order_energy() const {
    const IntegralStore& s = *store_;
    double e = 0.0;
    for (int i : occ_)
        for (int a : virt_) e += fock_(i, a) * t1(i, a);
    for (std::size_t x = 0; x < occ_.size(); ++x)
        for (std::size_t y = x + 1; y < occ_.size(); ++y)
            for (std::size_t u = 0; u < virt_.size(); ++u)
                for (std::size_t w = u + 1; w < virt_.size(); ++w) {
                    const int i = occ_[x], j = occ_[y], a = virt_[u], b = virt_[w];
                    e += s.antisym(i, j, a, b) * t2(i, j, a, b);
                }
    return e;
}

double PerturbationTheory::perturbation_norm() const {
    const IntegralStore& s = *store_;
    const int n_so = 2 * s.n_orb;
    double m = 0.0;
    for (int p = 0; p < n_so; ++p)
        for (int q = 0; q < n_so; ++q) {
            if (p != q) m = std::max(m, std::abs(fock_(p, q)));
            for (int r = 0; r < n_so; ++r)
                for (int t = 0; t < n_so; ++t) m = std::max(m, std::abs(s.antisym(p, q, r, t)));
        }
    return m;
}

AmplitudeStore first_order_sd(const PerturbationTheory& pt, const std::vector<Excitation>& keys) {
    AmplitudeStore out;
    for (const auto& k : keys) {
        if (k.rank() > 2) continue;
        out.set(k, pt.first_order(k), AmplitudeTag::Background);
    }
    return out;
}

AmplitudeStore second_order_triples(const PerturbationTheory& pt, const std::vector<Excitation>& keys) {
    AmplitudeStore out;
    for (const auto& k : keys) {
        if (k.rank() != 3) continue;
        out.set(k, pt.second_order(k), AmplitudeTag::Background);
    }
    return out;
}

AmplitudeStore text_order_n(const PerturbationTheory& pt, const ActiveSpace& space, int n) {
    if (n < 1 || n > 2) throw std::invalid_argument("perturbative order must be 1 or 2");
    const IntegralStore& s = pt.store();
    AmplitudeStore out;
    for (const auto& k : all_excitations(s.basis(), n == 1 ? 2 : 3)) {
        if (classify_excitation(k, space) == ExcitationClass::Internal) continue;
        const double v = pt.through_order(k, n);
        if (v != 0.0) out.set(k, v, AmplitudeTag::Background);
    }
    return out;
}

std::vector<Excitation> all_excitations(const SpinOrbitalBasis& basis, int max_rank) {
    const std::uint64_t occ = basis.reference().spin_mask();
    const int n_so = basis.n_spin_orbitals();
    const std::uint64_t full = n_so >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n_so) - 1);
    return enumerate_excitations(occ, full & ~occ, max_rank);
}

}  // namespace qflow
