#include <qflow/active_space.hpp>
#include <qflow/hamiltonian.hpp>
#include <qflow/integrals.hpp>
#include <qflow/oracle.hpp>

#include <json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string kCli = QFLOW_CLI;
const std::string kData = QFLOW_TEST_DATA;

struct Outcome {
    int code;
    std::string out;
};

Outcome run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("qflow_cli_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Cli, RunWritesArtifactsWithUniqueParameterCount) {
    const auto out = scratch("run");
    const auto r = run("run --in " + kData + "/random_4o4e.fcidump --mode qflow --ne 2 --no 2 --out " + out.string());
    ASSERT_EQ(r.code, 0);
    for (const char* f : {"trace.csv", "trace.json", "summary.json", "manifest.json", "amplitudes.txt"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto sum = nlohmann::json::parse(slurp(out / "summary.json"));
    // (1,1) spaces of 2 occupied x 2 virtual spatial orbitals: 4 spaces with
    // 2 singles + 1 double each, all distinct
    EXPECT_EQ(sum["parameters_optimized"], 12);
    EXPECT_EQ(sum["total_spaces"], 4);
    EXPECT_EQ(sum["schema_version"], 1);
    const auto man = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(man["config_hash"], sum["config_hash"]);
    EXPECT_NE(slurp(out / "trace.csv").find("# config_hash=" + sum["config_hash"].get<std::string>()), std::string::npos);
}

TEST(Cli, ArtifactsAreByteIdenticalAcrossRuns) {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    const std::string args = "run --in " + kData + "/random_4o4e.fcidump --ne 2 --no 2 --cycles 15 --spot-check --seed 3 --out ";
    ASSERT_EQ(run(args + a.string()).code, 0);
    ASSERT_EQ(run(args + b.string()).code, 0);
    for (const char* f : {"trace.csv", "trace.json", "summary.json", "amplitudes.txt", "config.txt"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
    const auto out = scratch("cfg");
    fs::create_directories(out);
    std::ofstream(out / "run.cfg") << "eta=0.05\ncycles_max=3\nn_occ_pick=1\nn_virt_pick=1\n";
    ASSERT_EQ(run("run --in " + kData + "/random_4o4e.fcidump --config " + (out / "run.cfg").string() +
                  " --cycles 2 --out " + out.string())
                  .code,
              0);
    const std::string cfg = slurp(out / "config.txt");
    EXPECT_NE(cfg.find("eta=0.050000000000000003"), std::string::npos);
    EXPECT_NE(cfg.find("cycles_max=2"), std::string::npos);
}

TEST(Cli, SubflowReportsSelection) {
    const auto out = scratch("sub");
    ASSERT_EQ(run("run --in " + kData + "/random_6o4e.json --mode subflow --select-threshold 1e-4 --ne 4 --no 4 --eta 0.05 --out " +
                  out.string())
                  .code,
              0);
    const auto sum = nlohmann::json::parse(slurp(out / "summary.json"));
    EXPECT_TRUE(sum["selected_spaces"].is_array());
    EXPECT_GT(sum["selected_spaces"].size(), 0U);
    EXPECT_EQ(run("run --in " + kData + "/random_6o4e.json --mode subflow --select-threshold 10 --out " + out.string()).code, 1);
}

TEST(Cli, CcflowReportsEquivalenceResidual) {
    const auto out = scratch("cc");
    ASSERT_EQ(run("run --in " + kData + "/random_4o4e.fcidump --mode ccflow --ne 2 --no 2 --cycles 500 --out " + out.string()).code, 0);
    const auto sum = nlohmann::json::parse(slurp(out / "summary.json"));
    ASSERT_TRUE(sum["equivalence_residual"].is_number());
    EXPECT_LE(sum["equivalence_residual"].get<double>(), 1e-7);
}

TEST(Cli, ExitCodes) {
    const auto out = scratch("codes");
    EXPECT_EQ(run("run --in " + kData + "/random_4o4e.fcidump --mode nonsense --out " + out.string()).code, 1);
    EXPECT_EQ(run("run --in " + kData + "/random_4o4e.fcidump --heff bch:x --out " + out.string()).code, 1);
    EXPECT_EQ(run("run --in " + kData + "/random_4o4e.fcidump --ne 3 --out " + out.string()).code, 1);
    EXPECT_EQ(run("run --bogus").code, 1);
    EXPECT_EQ(run("run --in " + kData + "/malformed.fcidump --out " + out.string()).code, 2);
    EXPECT_EQ(run("run --in " + kData + "/bad_header.fcidump --out " + out.string()).code, 2);
    EXPECT_EQ(run("run --in /nonexistent.fcidump --out " + out.string()).code, 2);
    // energy would rise without bound at this step size
    EXPECT_EQ(run("run --in " + kData + "/random_6o4e.json --ne 4 --no 4 --eta 5 --cycles 50 --out " + out.string()).code, 3);
}

TEST(Cli, VerifyIsDeterministicAndFilterable) {
    const auto a = run("verify --seed 7 --instances 2");
    const auto b = run("verify --seed 7 --instances 2");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("PASS ses"), std::string::npos);
    const auto only = run("verify --property ses --instances 1");
    EXPECT_EQ(only.code, 0);
    EXPECT_EQ(only.out.find("gradient"), std::string::npos);
    EXPECT_EQ(run("verify --property nonsense").code, 1);
}

TEST(Cli, ExportHeffRoundTrip) {
    const auto out = scratch("export");
    fs::create_directories(out);
    const auto file = out / "heff.json";
    ASSERT_EQ(run("export-heff --in " + kData + "/random_6o4e.json --space occ:[0,1],virt:[2,3] --out " + file.string()).code, 0);
    const auto small = qflow::parse_synthetic(slurp(file));
    const auto big = qflow::parse_synthetic(slurp(kData + "/random_6o4e.json"));
    const auto sb = big.basis();
    const auto sector = qflow::make_basis(qflow::enumerate_sector(sb, 2, 2));
    const auto h = qflow::build_matrix(big, sector);
    const auto cas = qflow::cas_basis(sb, qflow::parse_space("occ:[0,1],virt:[2,3]"));
    std::vector<std::size_t> idx;
    for (const auto& d : *cas) idx.push_back(sector->index_of(d));
    EXPECT_NEAR(qflow::fci_ground_state(small).value, qflow::exact_diagonalize(h.block(idx)).eigenvalues(0), 1e-12);
    EXPECT_EQ(run("export-heff --in " + kData + "/random_6o4e.json --space occ:[0,4],virt:[5]").code, 2);
    EXPECT_EQ(run("export-heff --in " + kData + "/random_6o4e.json --space garbage").code, 2);
    EXPECT_EQ(run("export-heff --in " + kData + "/random_6o4e.json --space occ:[1],virt:[2] --source pt:2 --out " +
                  (out / "pt.json").string())
                  .code,
              0);
}
