#include <qflow/hamiltonian.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace qflow {

namespace {

std::vector<int> bits(std::uint64_t m) {
    std::vector<int> out;
    for (; m; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
}

double diagonal_element(const IntegralStore& s, const std::vector<int>& occ) {
    double e = s.e_core;
    for (std::size_t a = 0; a < occ.size(); ++a) {
        e += s.one_body(occ[a], occ[a]);
        for (std::size_t b = 0; b < a; ++b) e += s.antisym(occ[a], occ[b], occ[a], occ[b]);
    }
    return e;
}

// <d2|H|d1> with d2 = sign * a+_p a_m |d1>.
double single_element(const IntegralStore& s, const std::vector<int>& occ1, int m, int p) {
    double v = s.one_body(p, m);
    for (int n : occ1) v += s.antisym(p, n, m, n);
    return v;
}

}  // namespace

Matrix HamiltonianMatrix::block(const std::vector<std::size_t>& idx) const {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Matrix out(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) out(a, b) = element(idx[a], idx[b]);
    return out;
}

double HamiltonianMatrix::symmetry_defect() const {
    const SparseMatrix diff = entries - SparseMatrix(entries.transpose());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst;
}

double slater_condon(const IntegralStore& s, const Determinant& bra, const Determinant& ket) {
    const std::uint64_t mb = bra.spin_mask();
    const std::uint64_t mk = ket.spin_mask();
    if (std::popcount(mb) != std::popcount(mk)) return 0.0;
    const int rank = std::popcount(mb ^ mk) / 2;
    if (rank > 2) return 0.0;
    const auto occ = bits(mk);
    if (rank == 0) return diagonal_element(s, occ);
    const auto info = excitation_between(ket, bra, 2);
    if (rank == 1) return info->phase * single_element(s, occ, info->occ[0], info->virt[0]);
    return info->phase * s.antisym(info->virt[0], info->virt[1], info->occ[0], info->occ[1]);
}

HamiltonianMatrix build_matrix(std::shared_ptr<const IntegralStore> store, BasisPtr basis) {
    const IntegralStore& s = *store;
    const int n_so = 2 * s.n_orb;
    const std::uint64_t full = n_so >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n_so) - 1);
    std::vector<Triplet> trip;
    const std::size_t dim = basis->size();
    for (std::size_t j = 0; j < dim; ++j) {
        const Determinant& dj = (*basis)[j];
        if (static_cast<int>(std::bit_width(dj.alpha)) > s.n_orb || static_cast<int>(std::bit_width(dj.beta)) > s.n_orb) {
            throw std::out_of_range("build_matrix: determinant uses orbitals beyond n_orb");
        }
        const std::uint64_t mj = dj.spin_mask();
        const auto occ = bits(mj);
        const auto vir = bits(full & ~mj);
        const auto col = static_cast<int>(j);
        trip.emplace_back(col, col, diagonal_element(s, occ));

        auto emit = [&](std::uint64_t mi, double value) {
            const auto i = basis->find(Determinant::from_spin_mask(mi));
            if (!i || *i >= j || value == 0.0) return;
            const auto row = static_cast<int>(*i);
            trip.emplace_back(row, col, value);
            trip.emplace_back(col, row, value);
        };

        for (int m : occ) {
            for (int p : vir) {
                if (spin_of(m) != spin_of(p)) continue;
                const int sign = ladder_sign(mj, m) * ladder_sign(mj ^ (std::uint64_t{1} << m), p);
                emit(mj ^ (std::uint64_t{1} << m) ^ (std::uint64_t{1} << p), sign * single_element(s, occ, m, p));
            }
        }
        for (std::size_t a = 0; a < occ.size(); ++a) {
            for (std::size_t b = a + 1; b < occ.size(); ++b) {
                const int m = occ[a];
                const int n = occ[b];
                const std::uint64_t removed = mj ^ (std::uint64_t{1} << m) ^ (std::uint64_t{1} << n);
                const int sign_ann = ladder_sign(mj, m) * ladder_sign(mj ^ (std::uint64_t{1} << m), n);
                for (std::size_t c = 0; c < vir.size(); ++c) {
                    for (std::size_t d = c + 1; d < vir.size(); ++d) {
                        const int p = vir[c];
                        const int q = vir[d];
                        if (spin_of(m) + spin_of(n) != spin_of(p) + spin_of(q)) continue;
                        // a+_p a+_q a_n a_m: a_m first, then a_n, then a+_q, then a+_p
                        const int sign = sign_ann * ladder_sign(removed, q) *
                                         ladder_sign(removed | (std::uint64_t{1} << q), p);
                        const std::uint64_t mi = removed | (std::uint64_t{1} << p) | (std::uint64_t{1} << q);
                        emit(mi, sign * s.antisym(p, q, m, n));
                    }
                }
            }
        }
    }
    HamiltonianMatrix out;
    out.basis = std::move(basis);
    out.entries.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    out.entries.setFromTriplets(trip.begin(), trip.end());
    out.source = std::move(store);
    return out;
}

HamiltonianMatrix build_matrix(const IntegralStore& store, BasisPtr basis) {
    return build_matrix(std::make_shared<const IntegralStore>(store), std::move(basis));
}

HamiltonianMatrix matrix_hamiltonian(BasisPtr basis, const Matrix& m) {
    if (static_cast<std::size_t>(m.rows()) != basis->size() || m.rows() != m.cols()) {
        throw DimensionMismatch("matrix_hamiltonian: matrix does not match basis");
    }
    HamiltonianMatrix out;
    out.basis = std::move(basis);
    out.entries = m.sparseView();
    return out;
}

FockDiagonal fock_diagonal(const IntegralStore& s, const Determinant& reference) {
    const int n_so = 2 * s.n_orb;
    const auto occ = reference.occupied_spin_orbitals();
    FockDiagonal f;
    f.f.resize(static_cast<std::size_t>(n_so));
    for (int p = 0; p < n_so; ++p) {
        double v = s.one_body(p, p);
        for (int i : occ) v += s.antisym(p, i, p, i);
        f.f[static_cast<std::size_t>(p)] = v;
    }
    return f;
}

Matrix fock_matrix(const IntegralStore& s, const Determinant& reference) {
    const int n_so = 2 * s.n_orb;
    const auto occ = reference.occupied_spin_orbitals();
    Matrix f(n_so, n_so);
    for (int p = 0; p < n_so; ++p)
        for (int q = 0; q < n_so; ++q) {
            double v = s.one_body(p, q);
            for (int i : occ) v += s.antisym(p, i, q, i);
            f(p, q) = v;
        }
    return f;
}

Eigenpair davidson_lowest(const SparseMatrix& h, const Vector& guess, double tol, int max_iter,
                          int max_subspace) {
    const Eigen::Index n = h.rows();
    const Vector diag = h.diagonal();
    Matrix v(n, 0);
    Matrix hv(n, 0);
    Vector t = guess.normalized();
    Eigenpair out;
    for (int iter = 0; iter < max_iter; ++iter) {
        for (int pass = 0; pass < 2; ++pass) t -= v * (v.transpose() * t);
        const double tn = t.norm();
        if (tn < 1e-12) throw ConvergenceError("davidson: subspace collapsed");
        t /= tn;
        v.conservativeResize(n, v.cols() + 1);
        v.col(v.cols() - 1) = t;
        hv.conservativeResize(n, hv.cols() + 1);
        hv.col(hv.cols() - 1) = h * t;

        const Matrix small = v.transpose() * hv;
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (small + small.transpose()));
        const double theta = es.eigenvalues()(0);
        const Vector s = es.eigenvectors().col(0);
        const Vector x = v * s;
        const Vector r = hv * s - theta * x;
        out = {theta, x, r.norm(), iter + 1};
        if (out.residual < tol) return out;

        t.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double denom = theta - diag(i);
            t(i) = r(i) / (std::abs(denom) > 1e-8 ? denom : 1e-8);
        }
        if (v.cols() >= max_subspace) {
            v = x.normalized();
            hv = h * v;
        }
    }
    throw ConvergenceError("davidson: no convergence, residual " + std::to_string(out.residual));
}

Eigenpair ground_state(const HamiltonianMatrix& h, std::size_t guess_index, std::size_t dense_cap) {
    const auto n = static_cast<Eigen::Index>(h.dimension());
    if (h.dimension() <= dense_cap) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(h.dense());
        Eigenpair out{es.eigenvalues()(0), es.eigenvectors().col(0), 0.0, 1};
        out.residual = (h.entries * out.vector - out.value * out.vector).norm();
        return out;
    }
    Vector guess = Vector::Zero(n);
    guess(static_cast<Eigen::Index>(guess_index)) = 1.0;
    // a little spread keeps the first correction vector away from zero
    guess += 1e-3 * Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    return davidson_lowest(h.entries, guess);
}

}  // namespace qflow
