#include <qflow/cluster.hpp>
#include <qflow/hamiltonian.hpp>
#include <qflow/models.hpp>
#include <qflow/oracle.hpp>
#include <qflow/perturbative.hpp>

#include <gtest/gtest.h>

using namespace qflow;

namespace {

struct Resolvent {
    BasisPtr basis;
    std::size_t ref;
    RsOrder2 rs;
};

// Moller-Plesset H0 over the determinant basis: sum of Fock diagonals of the
// occupied spin orbitals; V = H - H0.
Resolvent resolvent(const IntegralStore& s) {
    const auto sb = s.basis();
    auto basis = make_basis(enumerate_sector(sb, sb.n_alpha, sb.n_beta));
    const Matrix h = build_matrix(s, basis).dense();
    const auto f = fock_diagonal(s, sb.reference());
    Vector h0(h.rows());
    for (std::size_t d = 0; d < basis->size(); ++d) {
        double e = 0.0;
        for (int so : (*basis)[d].occupied_spin_orbitals()) e += f[so];
        h0(static_cast<Eigen::Index>(d)) = e;
    }
    Matrix v = h;
    v.diagonal() -= h0;
    const auto ref = basis->index_of(sb.reference());
    return {basis, ref, rs_resolvent_order2(h0, v, ref)};
}

IntegralStore model(std::uint64_t seed, int n_orb = 4, int n_elec = 4) {
    RandomModelOptions o;
    o.n_orb = n_orb;
    o.n_elec = n_elec;
    o.one_body_noise = 0.1;
    return random_model(o, seed);
}

}  // namespace

TEST(Perturbative, SecondOrderEnergyMatchesResolvent) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto s = model(seed, 4 + static_cast<int>(seed % 2), 4);
        const PerturbationTheory pt(s);
        EXPECT_NEAR(pt.second_order_energy(), resolvent(s).rs.e2, 1e-12) << seed;
    }
}

TEST(Perturbative, FirstOrderAmplitudesReproduceFirstOrderWavefunction) {
    const auto s = model(11);
    const PerturbationTheory pt(s);
    const auto r = resolvent(s);
    const auto keys = all_excitations(s.basis(), 2);
    const AmplitudeStore t1 = first_order_sd(pt, keys);
    Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(r.basis->size()), 1);
    phi(static_cast<Eigen::Index>(r.ref), 0) = 1.0;
    const Vector psi1 = excitation_matrix(t1, *r.basis) * phi.col(0);
    EXPECT_LE((psi1 - r.rs.psi1).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_EQ(t1.count(AmplitudeTag::Background), t1.size());
}

TEST(Perturbative, SecondOrderAmplitudesReproduceSecondOrderWavefunction) {
    for (std::uint64_t seed : {3, 4}) {
        const auto s = model(seed, 5, 4);
        const PerturbationTheory pt(s);
        const auto r = resolvent(s);
        AmplitudeStore t1;
        AmplitudeStore t2;
        for (const auto& e : all_excitations(s.basis(), 3)) {
            t1.set(e, pt.first_order(e));
            t2.set(e, pt.second_order(e));
        }
        const SparseMatrix x1 = excitation_matrix(t1, *r.basis);
        const SparseMatrix x2 = excitation_matrix(t2, *r.basis);
        Vector phi = Vector::Zero(static_cast<Eigen::Index>(r.basis->size()));
        phi(static_cast<Eigen::Index>(r.ref)) = 1.0;
        const Vector model2 = x2 * phi + 0.5 * (x1 * (x1 * phi));
        const auto ref = s.basis().reference();
        double worst = 0.0;
        for (std::size_t d = 0; d < r.basis->size(); ++d) {
            const int rank = excitation_between(ref, (*r.basis)[d])->rank;
            if (rank < 1 || rank > 3) continue;
            worst = std::max(worst, std::abs(model2(static_cast<Eigen::Index>(d)) - r.rs.psi2(static_cast<Eigen::Index>(d))));
        }
        EXPECT_LE(worst, 1e-12) << seed;
    }
}

TEST(Perturbative, OrderSelectionAndRanks) {
    const auto s = model(5);
    const PerturbationTheory pt(s);
    const auto triple = Excitation::from_lists({0, 1, 2}, {4, 5, 6});
    EXPECT_EQ(pt.first_order(triple), 0.0);
    const auto dbl = Excitation::from_lists({0, 1}, {4, 5});
    EXPECT_DOUBLE_EQ(pt.through_order(dbl, 2), pt.first_order(dbl) + pt.second_order(dbl));
    EXPECT_LT(pt.denominator(dbl), 0.0);
    EXPECT_EQ(pt.second_order(Excitation::from_lists({0, 1, 2, 3}, {4, 5, 6, 7})), 0.0);

    const auto space = parse_space("occ:[1],virt:[2]");
    for (int n : {1, 2}) {
        const auto ext = text_order_n(pt, space, n);
        EXPECT_FALSE(ext.empty());
        for (const auto& [e, a] : ext) {
            EXPECT_EQ(classify_excitation(e, space), ExcitationClass::External);
            EXPECT_LE(e.rank(), n + 1);
        }
    }
}

TEST(Perturbative, DegenerateDenominatorsAreSkippedAndLogged) {
    // occupied and virtual orbital energies coincide: 2 orbitals, no two-body term
    auto s = IntegralStore::zeros(2, 2);
    s.set_h(0, 0, -0.5);
    s.set_h(1, 1, -0.5);
    s.set_h(0, 1, 0.1);
    const PerturbationTheory pt(s, 1e-6);
    const auto e = Excitation::from_lists({0}, {2});
    EXPECT_EQ(pt.first_order(e), 0.0);
    ASSERT_FALSE(pt.degeneracy_log().empty());
    EXPECT_EQ(pt.degeneracy_log().front().rfind("SKIP 1 0->2 denom=", 0), 0U);
    const auto n = pt.degeneracy_log().size();
    (void)pt.first_order(e);
    EXPECT_EQ(pt.degeneracy_log().size(), n);
}
