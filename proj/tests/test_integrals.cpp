#include <qflow/integrals.hpp>
#include <qflow/models.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qflow;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const std::vector<std::string> kFixtures{"h2_dimer.fcidump", "random_4o4e.fcidump", "hubbard6.fcidump",
                                         "shape_9o8e.fcidump", "handwritten.fcidump"};

}  // namespace

TEST(Integrals, HandwrittenHeaderAndDExponents) {
    const auto s = read_fcidump(std::string(QFLOW_TEST_DATA) + "/handwritten.fcidump");
    EXPECT_EQ(s.n_orb, 2);
    EXPECT_EQ(s.n_elec, 2);
    EXPECT_DOUBLE_EQ(s.eri(0, 0, 0, 0), 0.6746);
    EXPECT_DOUBLE_EQ(s.eri(0, 1, 0, 1), 0.1813);
    EXPECT_DOUBLE_EQ(s.eri(1, 0, 1, 0), 0.1813);
    EXPECT_DOUBLE_EQ(s.eri(0, 0, 1, 1), 0.6636);
    EXPECT_DOUBLE_EQ(s.h(0, 0), -1.2528);
    EXPECT_DOUBLE_EQ(s.e_core, 0.7137);
    EXPECT_LE(s.symmetry_defect(), 0.0);
    EXPECT_LE(s.max_difference(symmetric_dimer()), 1e-15);
}

TEST(Integrals, FixtureRoundTripIsExactAndByteStable) {
    for (const auto& f : kFixtures) {
        SCOPED_TRACE(f);
        const auto a = read_fcidump(std::string(QFLOW_TEST_DATA) + "/" + f);
        const std::string text = serialize_fcidump(a);
        const auto b = parse_fcidump(std::string_view(text));
        EXPECT_EQ(b.max_difference(a), 0.0);
        EXPECT_EQ(serialize_fcidump(b), text);
    }
}

TEST(Integrals, GeneratedFixturesAreCanonicalSerialisations) {
    for (const auto& f : {"h2_dimer.fcidump", "random_4o4e.fcidump", "hubbard6.fcidump", "shape_9o8e.fcidump"}) {
        const std::string path = std::string(QFLOW_TEST_DATA) + "/" + f;
        EXPECT_EQ(serialize_fcidump(read_fcidump(path)), slurp(path)) << f;
    }
}

TEST(Integrals, MalformedRecordsReportKindAndLine) {
    try {
        parse_fcidump(std::string_view("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 0.5 1 1 1\n"));
        FAIL() << "expected a parse error";
    } catch (const IntegralParseError& e) {
        EXPECT_EQ(e.kind(), IntegralParseError::Kind::Malformed);
        EXPECT_EQ(e.line(), 3);
    }
    EXPECT_THROW(parse_fcidump(std::string_view("&FCI NELEC=2,MS2=0,\n&END\n")), IntegralParseError);
    EXPECT_THROW(parse_fcidump(std::string_view("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 0.5 3 1 1 1\n")),
                 IntegralParseError);
    EXPECT_THROW(parse_fcidump(std::string_view("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 0.5 1 1 1 x\n")),
                 IntegralParseError);
    EXPECT_THROW(read_fcidump("/nonexistent/file.fcidump"), std::exception);
}

TEST(Integrals, SyntheticJsonRoundTrip) {
    RandomModelOptions o;
    o.n_orb = 5;
    o.n_elec = 4;
    const auto a = random_model(o, 9);
    const std::string text = serialize_synthetic(a);
    const auto b = parse_synthetic(text);
    EXPECT_EQ(b.max_difference(a), 0.0);
    EXPECT_EQ(serialize_synthetic(b), text);
    const auto c = parse_synthetic(slurp(std::string(QFLOW_TEST_DATA) + "/random_6o4e.json"));
    EXPECT_EQ(c.n_orb, 6);
    EXPECT_THROW(parse_synthetic("{\"n_orb\": 2}"), std::exception);
}

TEST(Integrals, SpinOrbitalAccessors) {
    const auto s = symmetric_dimer();
    // <0a 1a | 0a 1a> = (00|11), exchange vanishes for opposite spins
    EXPECT_DOUBLE_EQ(s.coulomb(0, 2, 0, 2), s.eri(0, 0, 1, 1));
    EXPECT_DOUBLE_EQ(s.coulomb(0, 3, 3, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.coulomb(0, 3, 2, 1), s.eri(0, 1, 1, 0));
    EXPECT_DOUBLE_EQ(s.antisym(0, 2, 0, 2), s.eri(0, 0, 1, 1) - s.eri(0, 1, 1, 0));
    EXPECT_DOUBLE_EQ(s.antisym(0, 2, 2, 0), -s.antisym(0, 2, 0, 2));
    EXPECT_DOUBLE_EQ(s.one_body(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.one_body(2, 2), s.h(1, 1));
}

TEST(Integrals, RandomModelsHaveFullSymmetry) {
    for (std::uint64_t seed = 1; seed < 5; ++seed) {
        RandomModelOptions o;
        o.canonical = seed % 2 == 0;
        EXPECT_LE(random_model(o, seed).symmetry_defect(), 1e-14);
    }
    EXPECT_LE(hubbard_chain(4, 1.5).symmetry_defect(), 1e-12);
}
