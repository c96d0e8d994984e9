#include <qflow/downfolding.hpp>

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qflow {

std::string to_string(HeffMethod m) {
    switch (m) {
        case HeffMethod::ExactUnitary: return "exact-unitary";
        case HeffMethod::Bch: return "bch";
        case HeffMethod::Perturbative: return "perturbative";
        case HeffMethod::SesNonHermitian: return "ses-nonhermitian";
    }
    return "unknown";
}

std::vector<std::size_t> embed_indices(const DeterminantBasis& sector, const DeterminantBasis& cas) {
    std::vector<std::size_t> out;
    out.reserve(cas.size());
    for (const auto& d : cas) {
        const auto i = sector.find(d);
        if (!i) throw DimensionMismatch("CAS determinant outside the Hamiltonian's sector");
        out.push_back(*i);
    }
    return out;
}

namespace {

Matrix columns(std::size_t n, const std::vector<std::size_t>& idx) {
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) p(static_cast<Eigen::Index>(idx[c]), static_cast<Eigen::Index>(c)) = 1.0;
    return p;
}

Matrix rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

void check_sigma(const HamiltonianMatrix& h, const SparseMatrix& sigma) {
    if (sigma.rows() != static_cast<Eigen::Index>(h.dimension()) || sigma.cols() != sigma.rows()) {
        throw DimensionMismatch("sigma does not match the Hamiltonian's sector");
    }
}

}  // namespace

EffectiveHamiltonian heff_unitary_exact(const HamiltonianMatrix& h, const SparseMatrix& sigma_ext,
                                        const ActiveSpace& space, const BasisPtr& cas, double tol) {
    check_sigma(h, sigma_ext);
    const auto idx = embed_indices(*h.basis, *cas);
    const Matrix u = exp_action(sigma_ext, columns(h.dimension(), idx), tol);
    const Matrix m = u.transpose() * (h.entries * u);
    return {space, cas, 0.5 * (m + m.transpose()), HeffMethod::ExactUnitary, 0, true};
}

EffectiveHamiltonian heff_bch(const HamiltonianMatrix& h, const SparseMatrix& sigma_ext, const ActiveSpace& space,
                              const BasisPtr& cas, int k) {
    if (k < 1) throw std::invalid_argument("commutator rank must be >= 1");
    check_sigma(h, sigma_ext);
    const auto idx = embed_indices(*h.basis, *cas);
    // e^{-s} H e^{s} = sum_{a,b} (s^a P)^T H (s^b P) / (a! b!) since s^T = -s;
    // the nested-commutator truncation at rank k keeps a + b <= k
    std::vector<Matrix> v{columns(h.dimension(), idx)};
    for (int a = 1; a <= k; ++a) v.push_back(sigma_ext * v.back());
    std::vector<Matrix> hv;
    for (const auto& x : v) hv.push_back(h.entries * x);
    std::vector<double> fact{1.0};
    for (int a = 1; a <= k; ++a) fact.push_back(fact.back() * a);
    const auto n = static_cast<Eigen::Index>(idx.size());
    Matrix m = Matrix::Zero(n, n);
    for (int a = 0; a <= k; ++a)
        for (int b = 0; a + b <= k; ++b)
            m += v[static_cast<std::size_t>(a)].transpose() * hv[static_cast<std::size_t>(b)] /
                 (fact[static_cast<std::size_t>(a)] * fact[static_cast<std::size_t>(b)]);
    return {space, cas, 0.5 * (m + m.transpose()), HeffMethod::Bch, k, true};
}

EffectiveHamiltonian heff_ses_nonhermitian(const HamiltonianMatrix& h, const AmplitudeStore& t_ext,
                                           const ActiveSpace& space, const BasisPtr& cas) {
    for (const auto& [e, a] : t_ext) {
        if (classify_excitation(e, space) == ExcitationClass::Internal) {
            throw std::invalid_argument("external cluster operator holds internal excitation " + e.label());
        }
    }
    const auto idx = embed_indices(*h.basis, *cas);
    const SparseMatrix t = excitation_matrix(t_ext, *h.basis);
    const Matrix w = exp_nilpotent(t, columns(h.dimension(), idx));
    const Matrix x = h.entries * w;
    const SparseMatrix minus_t = -t;
    const Matrix y = exp_nilpotent(minus_t, x);
    return {space, cas, rows(y, idx), HeffMethod::SesNonHermitian, 0, false};
}

EffectiveHamiltonian heff_perturbative(const HamiltonianMatrix& h, const PerturbationTheory& pt,
                                       const ActiveSpace& space, const BasisPtr& cas, int n) {
    EffectiveHamiltonian out = heff_ses_nonhermitian(h, text_order_n(pt, space, n), space, cas);
    out.method = HeffMethod::Perturbative;
    out.order = n;
    return out;
}

BlochResult bloch_hybrid_solve(const HamiltonianMatrix& h, const PerturbationTheory& pt, const ActiveSpace& space,
                               const BasisPtr& cas, int n, double min_overlap) {
    const AmplitudeStore t_ext = text_order_n(pt, space, n);
    BlochResult out;
    out.min_denominator = std::numeric_limits<double>::infinity();
    for (const auto& [e, a] : t_ext) out.min_denominator = std::min(out.min_denominator, std::abs(pt.denominator(e)));
    out.heff = heff_ses_nonhermitian(h, t_ext, space, cas);
    out.heff.method = HeffMethod::Perturbative;
    out.heff.order = n;

    Eigen::EigenSolver<Matrix> es(out.heff.matrix);
    const auto& vals = es.eigenvalues();
    Eigen::Index best = -1;
    double best_overlap = 0.0;
    for (Eigen::Index j = 0; j < vals.size(); ++j) {
        if (std::abs(vals(j).imag()) > 1e-10) continue;
        const Vector v = es.eigenvectors().col(j).real().normalized();
        if (std::abs(v(0)) > best_overlap) {
            best_overlap = std::abs(v(0));
            best = j;
        }
    }
    if (best < 0 || best_overlap <= min_overlap) {
        throw ConvergenceError("bloch_hybrid_solve: no root overlaps the reference by more than " +
                               std::to_string(min_overlap));
    }
    const Vector v = es.eigenvectors().col(best).real().normalized();
    out.energy = vals(best).real();
    out.overlap = best_overlap;
    out.internal = v / v(0);
    out.residual = (out.heff.matrix * v - out.energy * v).norm();
    return out;
}

IntegralStore frozen_core_store(const IntegralStore& s, const ActiveSpace& space) {
    validate_space(s.basis(), space);
    std::vector<int> active = space.occ_spatial;
    active.insert(active.end(), space.virt_spatial.begin(), space.virt_spatial.end());
    std::sort(active.begin(), active.end());
    std::vector<int> core;
    for (int c = 0; c < s.n_alpha(); ++c)
        if (std::find(active.begin(), active.end(), c) == active.end()) core.push_back(c);

    const int n = static_cast<int>(active.size());
    IntegralStore out = IntegralStore::zeros(n, space.n_electrons(), 0);
    double e = s.e_core;
    for (int c : core) {
        e += 2 * s.h(c, c);
        for (int d : core) e += 2 * s.eri(c, c, d, d) - s.eri(c, d, d, c);
    }
    out.e_core = e;
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            const int P = active[static_cast<std::size_t>(p)];
            const int Q = active[static_cast<std::size_t>(q)];
            double v = s.h(P, Q);
            for (int c : core) v += 2 * s.eri(P, Q, c, c) - s.eri(P, c, c, Q);
            out.h(p, q) = v;
            for (int r = 0; r < n; ++r)
                for (int t = 0; t < n; ++t)
                    out.g[out.eri_index(p, q, r, t)] =
                        s.eri(P, Q, active[static_cast<std::size_t>(r)], active[static_cast<std::size_t>(t)]);
        }
    }
    return out;
}

std::string export_heff_json(const IntegralStore& store, const ActiveSpace& space, const EffectiveHamiltonian* heff,
                             const std::string& source) {
    const IntegralStore act = frozen_core_store(store, space);
    nlohmann::ordered_json doc = nlohmann::ordered_json::parse(serialize_synthetic(act));
    doc["source"] = source;
    doc["space"] = space.label();
    if (heff) {
        std::vector<int> active = space.occ_spatial;
        active.insert(active.end(), space.virt_spatial.begin(), space.virt_spatial.end());
        std::sort(active.begin(), active.end());
        auto relabel = [&](std::uint64_t m) {
            std::uint64_t out = 0;
            for (std::size_t k = 0; k < active.size(); ++k)
                if ((m >> active[k]) & 1U) out |= std::uint64_t{1} << k;
            return out;
        };
        nlohmann::ordered_json dets = nlohmann::ordered_json::array();
        for (const auto& d : *heff->cas) dets.push_back({relabel(d.alpha), relabel(d.beta)});
        nlohmann::ordered_json rowsj = nlohmann::ordered_json::array();
        for (Eigen::Index i = 0; i < heff->matrix.rows(); ++i) {
            nlohmann::ordered_json r = nlohmann::ordered_json::array();
            for (Eigen::Index j = 0; j < heff->matrix.cols(); ++j) r.push_back(heff->matrix(i, j));
            rowsj.push_back(std::move(r));
        }
        doc["method"] = to_string(heff->method);
        doc["determinants"] = std::move(dets);
        doc["heff_matrix"] = std::move(rowsj);
    }
    return doc.dump(1) + "\n";
}

std::optional<ExportedMatrix> parse_exported_matrix(std::string_view text) {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.contains("heff_matrix")) return std::nullopt;
    ExportedMatrix out;
    for (const auto& d : doc.at("determinants")) {
        out.determinants.push_back({d.at(0).get<std::uint64_t>(), d.at(1).get<std::uint64_t>()});
    }
    const auto& m = doc.at("heff_matrix");
    const auto n = static_cast<Eigen::Index>(m.size());
    if (static_cast<std::size_t>(n) != out.determinants.size()) {
        throw DimensionMismatch("heff_matrix does not match the determinant list");
    }
    out.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = m.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(r.size()) != n) throw DimensionMismatch("heff_matrix is not square");
        for (Eigen::Index j = 0; j < n; ++j) out.matrix(i, j) = r.at(static_cast<std::size_t>(j)).get<double>();
    }
    return out;
}

}  // namespace qflow
