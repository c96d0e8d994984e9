#include <qflow/excitation.hpp>
#include <qflow/fock.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qflow;

namespace {

Eigen::VectorXd occupation_vector(int n, const Determinant& d) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(1 << n);
    v(static_cast<Eigen::Index>(d.spin_mask())) = 1.0;
    return v;
}

}  // namespace

TEST(Fock, SpinMaskRoundTrip) {
    const Determinant d{0b101, 0b011};
    EXPECT_EQ(d.spin_mask(), 0b11011ULL);  // alpha 0,2 -> bits 0,4; beta 0,1 -> bits 1,3
    EXPECT_EQ(Determinant::from_spin_mask(d.spin_mask()), d);
    EXPECT_EQ(d.occupied_spin_orbitals(), (std::vector<int>{0, 1, 3, 4}));
    EXPECT_EQ(Determinant::from_spin_orbitals({0, 1, 3, 4}), d);
}

TEST(Fock, LadderSignCountsOccupiedBelow) {
    EXPECT_EQ(ladder_sign(0b0000, 3), 1);
    EXPECT_EQ(ladder_sign(0b0001, 3), -1);
    EXPECT_EQ(ladder_sign(0b0111, 3), -1);
    EXPECT_EQ(ladder_sign(0b1011, 3), 1);
    EXPECT_EQ(ladder_sign(0b1111, 0), 1);
}

TEST(Fock, SingleExcitationPhases) {
    const Determinant d01 = Determinant::from_spin_orbitals({0, 1});
    // a+_2 a_0 |0,1> = a+_2 |1> = -|1,2>
    auto r = apply_string(OperatorString::create(2) * OperatorString::annihilate(0), d01);
    EXPECT_EQ(r.phase, -1);
    EXPECT_EQ(r.det, Determinant::from_spin_orbitals({1, 2}));
    // a+_3 a_1 |0,1> = +|0,3>
    r = apply_string(OperatorString::create(3) * OperatorString::annihilate(1), d01);
    EXPECT_EQ(r.phase, 1);
    EXPECT_EQ(r.det, Determinant::from_spin_orbitals({0, 3}));
}

TEST(Fock, AnnihilatingEmptyOrCreatingOccupiedGivesZero) {
    const Determinant d = Determinant::from_spin_orbitals({0, 1});
    EXPECT_EQ(apply_string(OperatorString::annihilate(2), d).phase, 0);
    EXPECT_EQ(apply_string(OperatorString::create(1), d).phase, 0);
}

TEST(Fock, RandomStringsMatchJordanWignerMatrices) {
    constexpr int n = 6;
    std::vector<Eigen::MatrixXd> cr, an;
    for (int q = 0; q < n; ++q) {
        cr.push_back(bruteforce::jw_create(n, q));
        an.push_back(bruteforce::jw_annihilate(n, q));
    }
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        OperatorString op;
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(1 << n, 1 << n);
        const int len = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < len; ++i) {
            const int q = static_cast<int>(rng() % n);
            const bool create = rng() % 2;
            op.ops.push_back({q, create ? Ladder::Create : Ladder::Annihilate});
            m = m * (create ? cr[q] : an[q]);
        }
        const auto mask = rng() % (1U << n);
        const Determinant d = Determinant::from_spin_mask(mask);
        const Eigen::VectorXd expect = m * occupation_vector(n, d);
        const auto got = apply_string(op, d);
        if (got.phase == 0) {
            EXPECT_DOUBLE_EQ(expect.norm(), 0.0);
        } else {
            EXPECT_DOUBLE_EQ(expect(static_cast<Eigen::Index>(got.det.spin_mask())), got.phase);
            EXPECT_DOUBLE_EQ(expect.norm(), 1.0);
        }
    }
}

TEST(Fock, CanonicalAnticommutation) {
    constexpr int n = 6;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int p = static_cast<int>(rng() % n);
        const int q = static_cast<int>(rng() % n);
        const Determinant d = Determinant::from_spin_mask(rng() % (1U << n));
        // {a_p, a+_q} d = delta_pq d
        const auto x = apply_string(OperatorString::annihilate(p) * OperatorString::create(q), d);
        const auto y = apply_string(OperatorString::create(q) * OperatorString::annihilate(p), d);
        int coeff_same = 0;
        if (x.phase != 0 && x.det == d) coeff_same += x.phase;
        if (y.phase != 0 && y.det == d) coeff_same += y.phase;
        EXPECT_EQ(coeff_same, p == q ? 1 : 0);
        if (p != q && x.phase != 0) {
            ASSERT_NE(y.phase, 0);
            EXPECT_EQ(x.det, y.det);
            EXPECT_EQ(x.phase, -y.phase);
        }
    }
}

TEST(Fock, SectorEnumerationSizes) {
    EXPECT_EQ(enumerate_sector({4, 2, 2}, 2, 2).size(), 36U);
    EXPECT_EQ(enumerate_sector({6, 3, 3}, 3, 3).size(), 400U);
    EXPECT_EQ(enumerate_sector({5, 3, 2}, 3, 2).size(), 100U);
    const auto dets = enumerate_sector({4, 2, 2}, 2, 2);
    EXPECT_TRUE(std::is_sorted(dets.begin(), dets.end()));
}

TEST(Fock, ExcitationBetweenReproducesTarget) {
    const auto dets = enumerate_sector({4, 2, 2}, 2, 2);
    for (const auto& a : dets)
        for (const auto& b : dets) {
            const auto info = excitation_between(a, b);
            ASSERT_TRUE(info.has_value());
            const auto r = apply_string(OperatorString::excitation(info->occ, info->virt), a);
            EXPECT_EQ(r.det, b);
            EXPECT_EQ(r.phase, info->phase);
        }
    EXPECT_FALSE(excitation_between(dets.front(), dets.back(), 1).has_value());
    EXPECT_THROW(excitation_between(Determinant{1, 1}, Determinant{3, 0}), InvalidSector);
}

TEST(Fock, ExcitationMaskApplyMatchesOperatorString) {
    const auto dets = enumerate_sector({4, 2, 2}, 2, 2);
    const auto excs = enumerate_excitations(0xFF, 0xFF, 2);
    int nonzero = 0;
    for (const auto& e : excs) {
        if (!e.valid()) continue;
        for (const auto& d : dets) {
            const auto a = e.apply(d);
            const auto b = apply_string(e.to_string_op(), d);
            ASSERT_EQ(a.phase, b.phase) << e.label();
            if (a.phase != 0) {
                EXPECT_EQ(a.det, b.det);
                ++nonzero;
            }
        }
    }
    EXPECT_GT(nonzero, 0);
}

TEST(Fock, ExcitationOrderingAndLabels) {
    const auto s = Excitation::from_lists({0}, {4});
    const auto d = Excitation::from_lists({0, 1}, {4, 5});
    EXPECT_LT(s, d);
    EXPECT_EQ(d.label(), "2 0 1 -> 4 5");
    EXPECT_TRUE(d.valid());
    EXPECT_FALSE(Excitation::from_lists({0}, {5}).valid());  // spin flip
    EXPECT_THROW(Excitation::from_lists({0, 0}, {4, 5}), std::invalid_argument);
    const auto ref = Determinant::from_spin_orbitals({0, 1, 2, 3});
    const auto target = d.apply(ref);
    EXPECT_EQ(excitation_to(ref, target.det), d);
}

TEST(Fock, BasisLookup) {
    const auto basis = make_basis(enumerate_sector({3, 1, 1}, 1, 1));
    for (std::size_t i = 0; i < basis->size(); ++i) EXPECT_EQ(basis->index_of((*basis)[i]), i);
    EXPECT_FALSE(basis->find(Determinant{3, 0}).has_value());
    StateVector v = StateVector::basis_state(basis, 2);
    EXPECT_DOUBLE_EQ(v.coefficient((*basis)[2]), 1.0);
    EXPECT_DOUBLE_EQ(v.coefficient(Determinant{3, 0}), 0.0);
}
