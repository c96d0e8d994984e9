#include <qflow/downfolding.hpp>
#include <qflow/flow.hpp>
#include <qflow/flow_io.hpp>
#include <qflow/integrals.hpp>
#include <qflow/oracle.hpp>
#include <qflow/perturbative.hpp>
#include <qflow/verify.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace qflow;

namespace {

enum Exit { kOk = 0, kBadFlags = 1, kParse = 2, kDiverged = 3, kVerifyFailed = 4 };

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
    const char* env = std::getenv("QFLOW_LOG");
    if (!env) return Level::Warn;
    const std::string v = env;
    if (v == "error" || v == "0") return Level::Error;
    if (v == "info" || v == "2") return Level::Info;
    if (v == "debug" || v == "3") return Level::Debug;
    return Level::Warn;
}

void log(Level l, const std::string& msg) {
    static const Level threshold = log_level();
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (l <= threshold) std::cerr << "qflow[" << names[static_cast<int>(l)] << "] " << msg << "\n";
}

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

IntegralStore load_store(const std::string& path, std::string format, const std::string& bytes) {
    if (format.empty()) format = fs::path(path).extension() == ".json" ? "json" : "fcidump";
    try {
        if (format == "json") return parse_synthetic(bytes);
        return parse_fcidump(std::string_view(bytes));
    } catch (const IntegralParseError& e) {
        throw InputError(path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << text;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunArgs {
    std::string in;
    std::string format;
    std::string config;
    std::string out = ".";
    std::optional<std::string> mode;
    std::optional<int> ne;
    std::optional<int> no;
    std::optional<double> eta;
    std::optional<int> cycles;
    std::optional<double> tol;
    std::optional<int> trotter;
    std::optional<std::string> heff;
    std::optional<double> threshold;
    std::optional<int> topk;
    std::optional<std::string> background;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_rank;
    std::optional<int> threads;
    bool dry_run = false;
    bool jacobi = false;
    bool spot_check = false;
    bool ed = false;
};

FlowConfig build_config(const RunArgs& a) {
    FlowConfig c;
    if (!a.config.empty()) c = parse_config(slurp(a.config), c);
    if (a.mode) c.mode = parse_mode(*a.mode);
    if (a.ne || a.no) {
        const int ne = a.ne.value_or(2 * c.n_occ_pick);
        const int no = a.no.value_or(c.n_occ_pick + c.n_virt_pick);
        if (ne <= 0 || ne % 2 != 0) throw std::invalid_argument("--ne must be a positive even number");
        if (no <= ne / 2) throw std::invalid_argument("--no must exceed --ne / 2");
        c.n_occ_pick = ne / 2;
        c.n_virt_pick = no - ne / 2;
    }
    if (a.eta) c.eta = *a.eta;
    if (a.cycles) c.cycles_max = *a.cycles;
    if (a.tol) c.energy_tol = *a.tol;
    if (a.trotter) c.trotter_rank = *a.trotter;
    if (a.heff) parse_heff(*a.heff, c);
    if (a.threshold) {
        c.select_threshold = *a.threshold;
        c.select_topk.reset();
    }
    if (a.topk) {
        c.select_topk = *a.topk;
        c.select_threshold.reset();
    }
    if (a.background) {
        if (*a.background != "on" && *a.background != "off") throw std::invalid_argument("--background takes on|off");
        c.background = *a.background == "on";
    }
    if (a.seed) c.seed = *a.seed;
    if (a.max_rank) c.max_rank = *a.max_rank;
    if (a.threads) c.threads = *a.threads;
    if (a.dry_run) c.dry_run = true;
    if (a.jacobi) c.jacobi = true;
    if (a.spot_check) c.spot_check = true;
    c.validate();
    return c;
}

int cmd_run(const RunArgs& a) {
    FlowConfig cfg;
    try {
        cfg = build_config(a);
    } catch (const InputError& e) {
        log(Level::Error, e.what());
        return kParse;
    } catch (const std::invalid_argument& e) {
        log(Level::Error, e.what());
        return kBadFlags;
    }
    const std::string started = utc_now();
    std::string bytes;
    std::shared_ptr<const IntegralStore> store;
    try {
        bytes = slurp(a.in);
        store = std::make_shared<const IntegralStore>(load_store(a.in, a.format, bytes));
        store->basis().validate();
    } catch (const InputError& e) {
        log(Level::Error, e.what());
        return kParse;
    } catch (const std::invalid_argument& e) {
        log(Level::Error, a.in + ": " + e.what());
        return kParse;
    }
    const std::string hash = config_hash(cfg, bytes);
    log(Level::Info, "mode=" + to_string(cfg.mode) + " config_hash=" + hash);

    FlowResult result;
    try {
        result = FlowEngine(store, cfg).run();
    } catch (const DivergenceError& e) {
        log(Level::Error, std::string("divergence: ") + e.what());
        return kDiverged;
    } catch (const ConvergenceError& e) {
        log(Level::Error, std::string("no convergence: ") + e.what());
        return kDiverged;
    } catch (const std::invalid_argument& e) {
        log(Level::Error, e.what());
        return kBadFlags;
    }
    for (const auto& s : result.spot_checks) {
        log(Level::Debug, "spot-check cycle=" + std::to_string(s.cycle) + " space=" + std::to_string(s.space_id) +
                              " key=" + s.key + " rel_err=" + std::to_string(s.relative_error));
    }
    std::optional<double> ed;
    if (a.ed) ed = fci_ground_state(*store).value;

    const fs::path out(a.out);
    fs::create_directories(out);
    {
        std::ostringstream csv;
        write_trace_csv(csv, result.trace, result.state.spaces, hash);
        write_file(out / "trace.csv", csv.str());
    }
    write_file(out / "trace.json", trace_json(result.trace, hash));
    write_file(out / "summary.json", summary_json(result, cfg, hash, ed));
    write_file(out / "config.txt", serialize_config(cfg));
    if (!cfg.dry_run) {
        std::ostringstream amps;
        amps << "# config_hash=" << hash << "\n";
        write_amplitudes(amps, result.state.amplitudes);
        write_file(out / "amplitudes.txt", amps.str());
    }
    if (!result.degeneracy_log.empty()) {
        std::string text;
        for (const auto& l : result.degeneracy_log) text += l + "\n";
        write_file(out / "degeneracy.log", text);
        log(Level::Warn, std::to_string(result.degeneracy_log.size()) + " near-degenerate denominators skipped");
    }
    nlohmann::ordered_json m;
    m["input"] = a.in;
    m["format"] = a.format.empty() ? (fs::path(a.in).extension() == ".json" ? "json" : "fcidump") : a.format;
    m["config"] = a.config;
    m["out"] = a.out;
    m["mode"] = to_string(cfg.mode);
    m["version"] = QFLOW_VERSION;
    m["config_hash"] = hash;
    m["started"] = started;
    m["finished"] = utc_now();
    write_file(out / "manifest.json", m.dump(1) + "\n");

    if (cfg.dry_run) {
        std::cout << "spaces " << result.total_spaces << " parameters " << result.parameters_optimized
                  << " background " << result.background_parameters << "\n";
    } else {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12f", result.energy);
        std::cout << "energy " << buf << " cycles " << result.cycles << (result.converged ? " converged" : " not-converged")
                  << "\n";
    }
    return kOk;
}

int cmd_verify(const VerifyOptions& o, const std::string& out) {
    VerifyReport rep;
    try {
        rep = run_verify(o);
    } catch (const std::invalid_argument& e) {
        log(Level::Error, e.what());
        return kBadFlags;
    }
    const std::string text = rep.text();
    std::cout << text;
    if (!out.empty()) write_file(out, text);
    return rep.passed() ? kOk : kVerifyFailed;
}

struct ExportArgs {
    std::string in;
    std::string format;
    std::string space;
    std::string source = "bare";
    std::string out;
};

int cmd_export(const ExportArgs& a) {
    try {
        const std::string bytes = slurp(a.in);
        const IntegralStore store = load_store(a.in, a.format, bytes);
        const auto sb = store.basis();
        sb.validate();
        const ActiveSpace space = parse_space(a.space);
        validate_space(sb, space);
        std::string doc;
        if (a.source == "bare") {
            doc = export_heff_json(store, space, nullptr, "bare");
        } else if (a.source == "pt:1" || a.source == "pt:2") {
            const int n = a.source.back() - '0';
            const auto sector = make_basis(enumerate_sector(sb, sb.n_alpha, sb.n_beta));
            const auto h = build_matrix(store, sector);
            const PerturbationTheory pt(store);
            const auto heff = heff_perturbative(h, pt, space, cas_basis(sb, space), n);
            doc = export_heff_json(store, space, &heff, a.source);
        } else {
            log(Level::Error, "--source takes bare, pt:1 or pt:2");
            return kBadFlags;
        }
        if (a.out.empty()) {
            std::cout << doc;
        } else {
            write_file(a.out, doc);
        }
    } catch (const InputError& e) {
        log(Level::Error, e.what());
        return kParse;
    } catch (const std::invalid_argument& e) {
        log(Level::Error, e.what());
        return kParse;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active-space flow simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", QFLOW_VERSION);

    RunArgs ra;
    auto* run = app.add_subcommand("run", "optimise a flow over all active spaces of a Hamiltonian");
    run->add_option("--in", ra.in, "FCIDUMP or synthetic JSON Hamiltonian")->required();
    run->add_option("--format", ra.format, "input format")->check(CLI::IsMember({"fcidump", "json"}));
    run->add_option("--config", ra.config, "key=value config file (flags override it)");
    run->add_option("--out", ra.out, "output directory");
    run->add_option("--mode", ra.mode, "qflow|subflow|ccflow|bloch");
    run->add_option("--ne", ra.ne, "active electrons per space");
    run->add_option("--no", ra.no, "active orbitals per space");
    run->add_option("--eta", ra.eta, "gradient step");
    run->add_option("--cycles", ra.cycles, "maximum number of cycles");
    run->add_option("--tol", ra.tol, "main-space energy tolerance (Hartree); 0 runs all cycles");
    run->add_option("--trotter", ra.trotter, "Trotter number for the reported global energy");
    run->add_option("--heff", ra.heff, "exact|bch:k");
    run->add_option("--select-threshold", ra.threshold, "sub-flow |dE| threshold (Hartree)");
    run->add_option("--select-topk", ra.topk, "sub-flow: keep the K spaces with largest |dE|");
    run->add_option("--background", ra.background, "on|off");
    run->add_option("--seed", ra.seed, "seed for spot checks");
    run->add_option("--max-rank", ra.max_rank, "highest iterative excitation rank");
    run->add_option("--threads", ra.threads, "Jacobi worker threads");
    run->add_flag("--dry-run", ra.dry_run, "count spaces and parameters only");
    run->add_flag("--jacobi", ra.jacobi, "evaluate all spaces against a per-cycle snapshot");
    run->add_flag("--spot-check", ra.spot_check, "finite-difference check of one gradient component per cycle");
    run->add_flag("--ed", ra.ed, "also diagonalise the full Hamiltonian");
    run->get_option("--select-threshold")->excludes(run->get_option("--select-topk"));

    VerifyOptions vo;
    std::string vout;
    std::optional<std::string> prop;
    auto* verify = app.add_subcommand("verify", "run the built-in property suites on generated models");
    verify->add_option("--seed", vo.seed, "model seed");
    verify->add_option("--instances", vo.instances, "instances per property");
    verify->add_option("--property", prop, "run only one property")
        ->check(CLI::IsMember(verify_properties()));
    verify->add_option("--out", vout, "also write the report to this file");

    ExportArgs ea;
    auto* exp = app.add_subcommand("export-heff", "write an active-space Hamiltonian as synthetic JSON");
    exp->add_option("--in", ea.in, "input Hamiltonian")->required();
    exp->add_option("--format", ea.format, "input format")->check(CLI::IsMember({"fcidump", "json"}));
    exp->add_option("--space", ea.space, "occ:[..],virt:[..]")->required();
    exp->add_option("--source", ea.source, "bare|pt:1|pt:2");
    exp->add_option("--out", ea.out, "output file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kBadFlags;
    }
    try {
        if (*run) return cmd_run(ra);
        if (*verify) {
            vo.property = prop;
            return cmd_verify(vo, vout);
        }
        return cmd_export(ea);
    } catch (const std::exception& e) {
        log(Level::Error, e.what());
        return kBadFlags;
    }
}
