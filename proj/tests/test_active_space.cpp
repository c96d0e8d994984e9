#include <qflow/active_space.hpp>

#include <gtest/gtest.h>

using namespace qflow;

TEST(ActiveSpace, ParseAndLabel) {
    const auto s = parse_space("occ:[0,1],virt:[4,5]");
    EXPECT_EQ(s.occ_spatial, (std::vector<int>{0, 1}));
    EXPECT_EQ(s.virt_spatial, (std::vector<int>{4, 5}));
    EXPECT_EQ(s.label(), "occ:[0,1],virt:[4,5]");
    EXPECT_EQ(parse_space(s.label()).label(), s.label());
    EXPECT_EQ(s.n_electrons(), 4);
    EXPECT_EQ(s.n_orbitals(), 4);
    EXPECT_THROW(parse_space("occ:0,1"), std::invalid_argument);
}

TEST(ActiveSpace, Validation) {
    const SpinOrbitalBasis b{6, 3, 3};
    EXPECT_NO_THROW(validate_space(b, parse_space("occ:[1,2],virt:[3,5]")));
    EXPECT_THROW(validate_space(b, parse_space("occ:[1,3],virt:[4,5]")), std::invalid_argument);
    EXPECT_THROW(validate_space(b, parse_space("occ:[1],virt:[2]")), std::invalid_argument);
    EXPECT_THROW(validate_space(b, parse_space("occ:[1,1],virt:[4]")), std::invalid_argument);
    EXPECT_THROW(validate_space(b, parse_space("occ:[0],virt:[6]")), std::invalid_argument);
}

TEST(ActiveSpace, EnumerationCountsAndOrder) {
    const SpinOrbitalBasis b{9, 4, 4};
    const auto spaces = enumerate_spaces(b, 2, 2);
    ASSERT_EQ(spaces.size(), 60U);
    for (std::size_t i = 0; i < spaces.size(); ++i) EXPECT_EQ(spaces[i].id, static_cast<int>(i));
    EXPECT_EQ(spaces.front().label(), "occ:[0,1],virt:[4,5]");
    EXPECT_EQ(spaces[1].label(), "occ:[0,1],virt:[4,6]");
    EXPECT_EQ(spaces.back().label(), "occ:[2,3],virt:[7,8]");
    EXPECT_EQ(enumerate_spaces({4, 2, 2}, 1, 1).size(), 4U);
    EXPECT_THROW(enumerate_spaces({4, 2, 2}, 3, 1), std::invalid_argument);
}

TEST(ActiveSpace, CasBasisSizeAndReferenceFirst) {
    const SpinOrbitalBasis b{6, 3, 3};
    const auto s = parse_space("occ:[1,2],virt:[3,4]");
    const auto cas = cas_basis(b, s);
    EXPECT_EQ(cas->size(), 36U);
    EXPECT_EQ((*cas)[0], b.reference());
    for (const auto& d : *cas) {
        EXPECT_TRUE(d.occupied(0) && d.occupied(1));  // inactive orbital 0 frozen
        EXPECT_FALSE(d.occupied(10) || d.occupied(11));
    }
}

TEST(ActiveSpace, ClassificationAndRegions) {
    const SpinOrbitalBasis b{4, 2, 2};
    const auto s = parse_space("occ:[1],virt:[2]");
    EXPECT_EQ(classify_excitation(Excitation::from_lists({2}, {4}), s), ExcitationClass::Internal);
    EXPECT_EQ(classify_excitation(Excitation::from_lists({2, 3}, {4, 5}), s), ExcitationClass::Internal);
    EXPECT_EQ(classify_excitation(Excitation::from_lists({0}, {4}), s), ExcitationClass::External);
    EXPECT_EQ(classify_excitation(Excitation::from_lists({2}, {6}), s), ExcitationClass::External);
    const auto ref = b.reference();
    EXPECT_EQ(region_of(ref, ref, s), Region::Reference);
    EXPECT_EQ(region_of(Excitation::from_lists({2}, {4}).apply(ref).det, ref, s), Region::Internal);
    EXPECT_EQ(region_of(Excitation::from_lists({0}, {6}).apply(ref).det, ref, s), Region::External);

    const auto sector = make_basis(enumerate_sector(b, 2, 2));
    const Vector p = projector_diagonal(*sector, ref, s, Region::Reference);
    const Vector qi = projector_diagonal(*sector, ref, s, Region::Internal);
    const Vector qe = projector_diagonal(*sector, ref, s, Region::External);
    EXPECT_DOUBLE_EQ(p.sum(), 1.0);
    EXPECT_DOUBLE_EQ(p.sum() + qi.sum(), static_cast<double>(cas_basis(b, s)->size()));
    EXPECT_TRUE(((p + qi + qe).array() == 1.0).all());
}
