#include <qflow/cluster.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qflow {

std::string to_string(AmplitudeTag tag) {
    return tag == AmplitudeTag::Iterative ? "iterative" : "background";
}

void AmplitudeStore::set(const Excitation& e, double value, AmplitudeTag tag) {
    if (!e.valid()) throw std::invalid_argument("not a spin-conserving excitation: " + e.label());
    map_[e] = {value, tag};
}

bool AmplitudeStore::insert(const Excitation& e, double value, AmplitudeTag tag) {
    if (!e.valid()) throw std::invalid_argument("not a spin-conserving excitation: " + e.label());
    return map_.emplace(e, Amplitude{value, tag}).second;
}

double AmplitudeStore::value(const Excitation& e) const {
    const auto it = map_.find(e);
    return it == map_.end() ? 0.0 : it->second.value;
}

std::optional<Amplitude> AmplitudeStore::find(const Excitation& e) const {
    const auto it = map_.find(e);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

std::vector<Excitation> AmplitudeStore::keys() const {
    std::vector<Excitation> out;
    out.reserve(map_.size());
    for (const auto& [k, v] : map_) out.push_back(k);
    return out;
}

std::size_t AmplitudeStore::count(AmplitudeTag tag) const {
    std::size_t n = 0;
    for (const auto& [k, v] : map_) n += v.tag == tag;
    return n;
}

AmplitudeStore AmplitudeStore::internal_to(const ActiveSpace& space) const {
    AmplitudeStore out;
    for (const auto& [k, v] : map_)
        if (classify_excitation(k, space) == ExcitationClass::Internal) out.map_.emplace(k, v);
    return out;
}

AmplitudeStore AmplitudeStore::external_to(const ActiveSpace& space) const {
    AmplitudeStore out;
    for (const auto& [k, v] : map_)
        if (classify_excitation(k, space) == ExcitationClass::External) out.map_.emplace(k, v);
    return out;
}

bool operator==(const AmplitudeStore& a, const AmplitudeStore& b) {
    if (a.size() != b.size()) return false;
    auto ib = b.begin();
    for (const auto& [k, v] : a) {
        if (!(k == ib->first) || v.value != ib->second.value || v.tag != ib->second.tag) return false;
        ++ib;
    }
    return true;
}

AmplitudeStore store_union(const std::vector<AmplitudeStore>& stores) {
    AmplitudeStore out;
    for (const auto& s : stores)
        for (const auto& [k, v] : s) out.insert(k, v.value, v.tag);
    return out;
}

void write_amplitudes(std::ostream& out, const AmplitudeStore& store) {
    char buf[64];
    for (const auto& [k, v] : store) {
        std::snprintf(buf, sizeof buf, "%.17g", v.value);
        out << k.label() << ' ' << buf << ' ' << to_string(v.tag) << '\n';
    }
}

AmplitudeStore read_amplitudes(std::istream& in) {
    AmplitudeStore out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        std::istringstream ls(line);
        auto fail = [&] {
            throw std::invalid_argument("amplitude line " + std::to_string(lineno) + ": '" + line + "'");
        };
        int rank = 0;
        if (!(ls >> rank) || rank < 1) fail();
        std::vector<int> occ(static_cast<std::size_t>(rank));
        std::vector<int> vir(static_cast<std::size_t>(rank));
        for (auto& o : occ)
            if (!(ls >> o)) fail();
        std::string arrow;
        if (!(ls >> arrow) || arrow != "->") fail();
        for (auto& v : vir)
            if (!(ls >> v)) fail();
        double value = 0.0;
        std::string tag;
        if (!(ls >> value >> tag)) fail();
        AmplitudeTag t;
        if (tag == "iterative") {
            t = AmplitudeTag::Iterative;
        } else if (tag == "background") {
            t = AmplitudeTag::Background;
        } else {
            fail();
        }
        const Excitation e = Excitation::from_lists(occ, vir);
        if (!e.valid()) fail();
        out.set(e, value, t);
    }
    return out;
}

std::vector<Excitation> space_excitations(const SpinOrbitalBasis& basis, const ActiveSpace& space, int max_rank) {
    validate_space(basis, space);
    return enumerate_excitations(space.occ_spin_mask(), space.virt_spin_mask(), max_rank);
}

ExcitationTable::ExcitationTable(BasisPtr basis, std::vector<Excitation> keys)
    : basis_(std::move(basis)), keys_(std::move(keys)), links_(keys_.size()) {
    std::vector<std::uint64_t> masks;
    masks.reserve(basis_->size());
    for (const auto& d : *basis_) masks.push_back(d.spin_mask());
    for (std::size_t k = 0; k < keys_.size(); ++k) {
        const Excitation& e = keys_[k];
        for (std::size_t i = 0; i < masks.size(); ++i) {
            std::uint64_t out = 0;
            const int phase = e.apply(masks[i], out);
            if (phase == 0) continue;
            const auto j = basis_->find(Determinant::from_spin_mask(out));
            if (j) links_[k].push_back({static_cast<int>(i), static_cast<int>(*j), phase});
        }
    }
}

std::optional<std::size_t> ExcitationTable::index_of(const Excitation& e) const {
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), e);
    if (it != keys_.end() && *it == e) return static_cast<std::size_t>(it - keys_.begin());
    // keys need not be sorted; fall back to a scan
    for (std::size_t k = 0; k < keys_.size(); ++k)
        if (keys_[k] == e) return k;
    return std::nullopt;
}

SparseMatrix ExcitationTable::excitation_matrix(const std::vector<double>& w) const {
    std::vector<Triplet> trip;
    for (std::size_t k = 0; k < keys_.size(); ++k) {
        if (w[k] == 0.0) continue;
        for (const auto& l : links_[k]) trip.emplace_back(l.dst, l.src, w[k] * l.phase);
    }
    const auto n = static_cast<Eigen::Index>(basis_->size());
    SparseMatrix m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

SparseMatrix ExcitationTable::sigma_matrix(const std::vector<double>& w) const {
    std::vector<Triplet> trip;
    for (std::size_t k = 0; k < keys_.size(); ++k) {
        if (w[k] == 0.0) continue;
        for (const auto& l : links_[k]) {
            trip.emplace_back(l.dst, l.src, w[k] * l.phase);
            trip.emplace_back(l.src, l.dst, -w[k] * l.phase);
        }
    }
    const auto n = static_cast<Eigen::Index>(basis_->size());
    SparseMatrix m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

std::vector<double> ExcitationTable::weights(const AmplitudeStore& store) const {
    std::vector<double> w(keys_.size());
    for (std::size_t k = 0; k < keys_.size(); ++k) w[k] = store.value(keys_[k]);
    return w;
}

Vector ExcitationTable::apply_generator(std::size_t k, const Vector& v) const {
    Vector out = Vector::Zero(v.size());
    for (const auto& l : links_[k]) {
        out(l.dst) += l.phase * v(l.src);
        out(l.src) -= l.phase * v(l.dst);
    }
    return out;
}

SparseMatrix excitation_matrix(const AmplitudeStore& store, const DeterminantBasis& basis) {
    std::vector<Triplet> trip;
    std::vector<std::uint64_t> masks;
    for (const auto& d : basis) masks.push_back(d.spin_mask());
    for (const auto& [e, a] : store) {
        for (std::size_t i = 0; i < masks.size(); ++i) {
            std::uint64_t out = 0;
            const int phase = e.apply(masks[i], out);
            if (phase == 0) continue;
            const auto j = basis.find(Determinant::from_spin_mask(out));
            if (j) trip.emplace_back(static_cast<int>(*j), static_cast<int>(i), a.value * phase);
        }
    }
    const auto n = static_cast<Eigen::Index>(basis.size());
    SparseMatrix m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

SparseMatrix sigma_matrix(const AmplitudeStore& store, const DeterminantBasis& basis) {
    const SparseMatrix t = excitation_matrix(store, basis);
    return t - SparseMatrix(t.transpose());
}

double norm1(const SparseMatrix& m) {
    Vector col = Vector::Zero(m.cols());
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) col(it.col()) += std::abs(it.value());
    return m.cols() ? col.maxCoeff() : 0.0;
}

double norm1(const Matrix& m) {
    return m.cols() ? m.cwiseAbs().colwise().sum().maxCoeff() : 0.0;
}

namespace {

template <class Op>
Matrix taylor_exp_action(const Op& m, Matrix v, double tol, int max_terms) {
    const double nrm = norm1(m);
    if (nrm == 0.0 || v.size() == 0) return v;
    const int steps = std::max(1, static_cast<int>(std::ceil(nrm)));
    const double scale = 1.0 / steps;
    for (int s = 0; s < steps; ++s) {
        Matrix term = v;
        Matrix sum = v;
        const double ref = std::max(v.norm(), 1e-300);
        int k = 1;
        for (;; ++k) {
            if (k > max_terms) throw ConvergenceError("exp_action: Taylor series did not converge");
            term = (m * term) * (scale / k);
            sum += term;
            if (term.norm() <= tol * ref) break;
        }
        v = std::move(sum);
    }
    return v;
}

}  // namespace

Matrix exp_action(const SparseMatrix& m, const Matrix& v, double tol, int max_terms) {
    if (m.rows() != m.cols() || m.cols() != v.rows()) throw DimensionMismatch("exp_action: shape mismatch");
    return taylor_exp_action(m, v, tol, max_terms);
}

Matrix exp_action(const Matrix& m, const Matrix& v, double tol, int max_terms) {
    if (m.rows() != m.cols() || m.cols() != v.rows()) throw DimensionMismatch("exp_action: shape mismatch");
    return taylor_exp_action(m, v, tol, max_terms);
}

Vector exp_action(const SparseMatrix& m, const Vector& v, double tol, int max_terms) {
    return exp_action(m, Matrix(v), tol, max_terms).col(0);
}

Vector exp_action(const Matrix& m, const Vector& v, double tol, int max_terms) {
    return exp_action(m, Matrix(v), tol, max_terms).col(0);
}

Matrix exp_nilpotent(const SparseMatrix& t, const Matrix& v) {
    if (t.rows() != t.cols() || t.cols() != v.rows()) throw DimensionMismatch("exp_nilpotent: shape mismatch");
    Matrix sum = v;
    Matrix term = v;
    for (int k = 1; k <= 64; ++k) {
        term = (t * term) / static_cast<double>(k);
        if (term.cwiseAbs().maxCoeff() == 0.0) return sum;
        sum += term;
    }
    throw ConvergenceError("exp_nilpotent: operator is not nilpotent");
}

Vector trotter_state(const SparseMatrix& sigma_int, const SparseMatrix& sigma_ext, int n, const Vector& ref,
                     double tol) {
    if (n < 1) throw std::invalid_argument("trotter rank must be >= 1");
    const SparseMatrix a = sigma_int / static_cast<double>(n);
    const SparseMatrix b = sigma_ext / static_cast<double>(n);
    Vector v = ref;
    for (int i = 0; i < n; ++i) {
        v = exp_action(a, v, tol);
        v = exp_action(b, v, tol);
    }
    return v;
}

AmplitudeStore cluster_analyze(const StateVector& c, const Determinant& reference, double overlap_tol) {
    const DeterminantBasis& basis = c.basis();
    const double c0 = c.coefficient(reference);
    if (std::abs(c0) < overlap_tol) {
        throw std::domain_error("cluster_analyze: vanishing overlap with the reference");
    }
    const Vector target = c.coeffs() / c0;
    const std::size_t ref_index = basis.index_of(reference);

    std::vector<std::vector<std::size_t>> by_rank;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto info = excitation_between(reference, basis[i]);
        const auto r = static_cast<std::size_t>(info->rank);
        if (by_rank.size() <= r) by_rank.resize(r + 1);
        by_rank[r].push_back(i);
    }

    AmplitudeStore t;
    Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(basis.size()), 1);
    phi(static_cast<Eigen::Index>(ref_index), 0) = 1.0;
    for (std::size_t r = 1; r < by_rank.size(); ++r) {
        if (by_rank[r].empty()) continue;
        const Vector psi = exp_nilpotent(excitation_matrix(t, basis), phi).col(0);
        for (std::size_t i : by_rank[r]) {
            const auto idx = static_cast<Eigen::Index>(i);
            const double amp = target(idx) - psi(idx);
            if (std::abs(amp) < 1e-15) continue;
            const Excitation e = excitation_to(reference, basis[i]);
            const int phase = e.apply(reference).phase;
            t.set(e, phase * amp);
        }
    }
    return t;
}

}  // namespace qflow
