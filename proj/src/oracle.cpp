#include <qflow/oracle.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qflow {

SpectrumResult exact_diagonalize(const Matrix& m, int n_roots, std::size_t reference_index, double symmetry_tol) {
    if (m.rows() != m.cols()) throw DimensionMismatch("exact_diagonalize: matrix is not square");
    if (m.rows() > kOracleDimensionCap) throw DimensionMismatch("exact_diagonalize: dimension above oracle cap");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > symmetry_tol) {
        throw std::invalid_argument("exact_diagonalize: matrix asymmetric by " + std::to_string(asym));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw ConvergenceError("exact_diagonalize: eigensolver failed");
    const Eigen::Index k = std::min<Eigen::Index>(std::max(n_roots, 0), m.rows());
    SpectrumResult out;
    out.eigenvalues = es.eigenvalues();
    out.vectors = es.eigenvectors().leftCols(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto v = out.vectors.col(j);
        out.overlaps.push_back(std::abs(v(static_cast<Eigen::Index>(reference_index))));
        out.residuals.push_back((m * v - out.eigenvalues(j) * v).norm());
    }
    return out;
}

NonsymmetricRoot nonsymmetric_eig(const Matrix& m, std::size_t reference_index, double residual_tol) {
    if (m.rows() != m.cols()) throw DimensionMismatch("nonsymmetric_eig: matrix is not square");
    if (m.rows() > kOracleDimensionCap) throw DimensionMismatch("nonsymmetric_eig: dimension above oracle cap");
    Eigen::EigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw ConvergenceError("nonsymmetric_eig: eigensolver failed");
    const auto& vals = es.eigenvalues();
    const auto& vecs = es.eigenvectors();
    const auto ref = static_cast<Eigen::Index>(reference_index);

    NonsymmetricRoot out;
    out.spectrum = vals.real();
    std::sort(out.spectrum.begin(), out.spectrum.end());
    Eigen::Index best = -1;
    double best_overlap = -1.0;
    const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < vals.size(); ++j) {
        if (std::abs(vals(j).imag()) > 1e-10 * scale) continue;
        const Vector v = vecs.col(j).real();
        const double n = v.norm();
        if (n == 0.0) continue;
        const double ov = std::abs(v(ref)) / n;
        if (ov > best_overlap) {
            best_overlap = ov;
            best = j;
        }
    }
    if (best < 0) throw ConvergenceError("nonsymmetric_eig: no real eigenvalue");
    out.value = vals(best).real();
    out.vector = vecs.col(best).real().normalized();
    if (out.vector(ref) < 0) out.vector = -out.vector;
    out.overlap = best_overlap;
    out.residual = (m * out.vector - out.value * out.vector).norm();
    if (out.residual > residual_tol * scale) {
        throw ConvergenceError("nonsymmetric_eig: residual " + std::to_string(out.residual) + " above tolerance");
    }
    return out;
}

RsOrder2 rs_resolvent_order2(const Vector& h0, const Matrix& v, std::size_t reference_index, double degeneracy_tol) {
    if (v.rows() != v.cols() || v.rows() != h0.size()) throw DimensionMismatch("rs_resolvent_order2: shape mismatch");
    const auto r = static_cast<Eigen::Index>(reference_index);
    const Eigen::Index n = h0.size();
    RsOrder2 out;
    out.e0 = h0(r);
    Vector resolvent = Vector::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (k == r) continue;
        const double d = out.e0 - h0(k);
        if (std::abs(d) < degeneracy_tol) {
            throw std::domain_error("rs_resolvent_order2: degenerate zeroth-order level");
        }
        resolvent(k) = 1.0 / d;
    }
    out.e1 = v(r, r);
    out.psi1 = resolvent.cwiseProduct(v.col(r));
    out.e2 = v.row(r).dot(out.psi1);
    out.psi2 = resolvent.cwiseProduct(v * out.psi1 - out.e1 * out.psi1);
    return out;
}

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    if (!(h > 0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
    Vector g(x.size());
    Vector y = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        y(k) = x(k) + h;
        const double fp = f(y);
        y(k) = x(k) - h;
        const double fm = f(y);
        y(k) = x(k);
        g(k) = (fp - fm) / (2 * h);
    }
    return g;
}

Eigenpair fci_ground_state(const IntegralStore& store) {
    const auto sb = store.basis();
    auto basis = make_basis(enumerate_sector(sb, sb.n_alpha, sb.n_beta));
    const auto ref = basis->index_of(sb.reference());
    return ground_state(build_matrix(store, basis), ref);
}

}  // namespace qflow
