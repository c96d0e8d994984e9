#include <qflow/flow_io.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qflow {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ordered_json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
    return d;
}

long long to_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long d = 0;
    try {
        d = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
    return d;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw std::invalid_argument("config: " + key + " expects on/off, got '" + v + "'");
}

std::string list(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ";" : "") + std::to_string(xs[i]);
    return s;
}

}  // namespace

FlowMode parse_mode(std::string_view text) {
    if (text == "qflow") return FlowMode::Qflow;
    if (text == "subflow") return FlowMode::Subflow;
    if (text == "ccflow") return FlowMode::Ccflow;
    if (text == "bloch") return FlowMode::Bloch;
    throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

void parse_heff(std::string_view text, FlowConfig& config) {
    if (text == "exact") {
        config.heff = HeffMethod::ExactUnitary;
        return;
    }
    if (text.substr(0, 4) == "bch:") {
        const auto k = to_int("heff", std::string(text.substr(4)));
        if (k < 1) throw std::invalid_argument("heff: bch order must be >= 1");
        config.heff = HeffMethod::Bch;
        config.bch_order = static_cast<int>(k);
        return;
    }
    throw std::invalid_argument("heff must be 'exact' or 'bch:k', got '" + std::string(text) + "'");
}

std::string heff_label(const FlowConfig& config) {
    return config.heff == HeffMethod::Bch ? "bch:" + std::to_string(config.bch_order) : "exact";
}

std::string serialize_config(const FlowConfig& c) {
    std::map<std::string, std::string> kv;
    kv["mode"] = to_string(c.mode);
    kv["n_occ_pick"] = std::to_string(c.n_occ_pick);
    kv["n_virt_pick"] = std::to_string(c.n_virt_pick);
    kv["cycles_max"] = std::to_string(c.cycles_max);
    kv["eta"] = num(c.eta);
    kv["energy_tol"] = num(c.energy_tol);
    kv["grad_tol"] = num(c.grad_tol);
    kv["trotter_rank"] = std::to_string(c.trotter_rank);
    kv["heff"] = heff_label(c);
    kv["select_threshold"] = c.select_threshold ? num(*c.select_threshold) : "none";
    kv["select_topk"] = c.select_topk ? std::to_string(*c.select_topk) : "none";
    kv["selection_cycle"] = std::to_string(c.selection_cycle);
    kv["background"] = c.background ? "on" : "off";
    kv["restrict_triples"] = c.restrict_triples ? "on" : "off";
    kv["max_rank"] = std::to_string(c.max_rank);
    kv["dgen_tol"] = num(c.dgen_tol);
    kv["seed"] = std::to_string(c.seed);
    kv["jacobi"] = c.jacobi ? "on" : "off";
    kv["threads"] = std::to_string(c.threads);
    kv["spot_check"] = c.spot_check ? "on" : "off";
    kv["reference_energy"] = c.reference_energy ? num(*c.reference_energy) : "none";
    kv["bloch_order"] = std::to_string(c.bloch_order);
    kv["amplitude_tol"] = num(c.amplitude_tol);
    kv["dry_run"] = c.dry_run ? "on" : "off";
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

FlowConfig parse_config(std::string_view text, FlowConfig c) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string k = trim(std::string_view(line).substr(0, eq));
        const std::string v = trim(std::string_view(line).substr(eq + 1));
        if (k == "mode") c.mode = parse_mode(v);
        else if (k == "n_occ_pick") c.n_occ_pick = static_cast<int>(to_int(k, v));
        else if (k == "n_virt_pick") c.n_virt_pick = static_cast<int>(to_int(k, v));
        else if (k == "cycles_max") c.cycles_max = static_cast<int>(to_int(k, v));
        else if (k == "eta") c.eta = to_double(k, v);
        else if (k == "energy_tol") c.energy_tol = to_double(k, v);
        else if (k == "grad_tol") c.grad_tol = to_double(k, v);
        else if (k == "trotter_rank") c.trotter_rank = static_cast<int>(to_int(k, v));
        else if (k == "heff") parse_heff(v, c);
        else if (k == "select_threshold") c.select_threshold = v == "none" ? std::nullopt : std::optional(to_double(k, v));
        else if (k == "select_topk") c.select_topk = v == "none" ? std::nullopt : std::optional(static_cast<int>(to_int(k, v)));
        else if (k == "selection_cycle") c.selection_cycle = static_cast<int>(to_int(k, v));
        else if (k == "background") c.background = to_bool(k, v);
        else if (k == "restrict_triples") c.restrict_triples = to_bool(k, v);
        else if (k == "max_rank") c.max_rank = static_cast<int>(to_int(k, v));
        else if (k == "dgen_tol") c.dgen_tol = to_double(k, v);
        else if (k == "seed") c.seed = static_cast<std::uint64_t>(to_int(k, v));
        else if (k == "jacobi") c.jacobi = to_bool(k, v);
        else if (k == "threads") c.threads = static_cast<int>(to_int(k, v));
        else if (k == "spot_check") c.spot_check = to_bool(k, v);
        else if (k == "reference_energy") c.reference_energy = v == "none" ? std::nullopt : std::optional(to_double(k, v));
        else if (k == "bloch_order") c.bloch_order = static_cast<int>(to_int(k, v));
        else if (k == "amplitude_tol") c.amplitude_tol = to_double(k, v);
        else if (k == "dry_run") c.dry_run = to_bool(k, v);
        else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + k + "'");
    }
    return c;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const FlowConfig& config, std::string_view input_bytes) {
    return fnv1a_hex(serialize_config(config) + "\n" + fnv1a_hex(input_bytes));
}

void write_trace_csv(std::ostream& out, const FlowTrace& trace, const std::vector<FlowSpace>& spaces,
                     const std::string& hash) {
    std::map<int, const ActiveSpace*> by_id;
    for (const auto& fs : spaces) by_id[fs.space.id] = &fs.space;
    out << "# config_hash=" << hash << (trace.jacobi ? " jacobi=on" : "") << "\n";
    out << "cycle,space_id,occ,virt,e_before,e_after,delta_e,grad_norm,params\n";
    for (const auto& r : trace.records) {
        std::string occ;
        std::string virt;
        if (auto it = by_id.find(r.space_id); it != by_id.end()) {
            occ = list(it->second->occ_spatial);
            virt = list(it->second->virt_spatial);
        } else if (!r.space_label.empty()) {
            const ActiveSpace sp = parse_space(r.space_label);
            occ = list(sp.occ_spatial);
            virt = list(sp.virt_spatial);
        }
        out << r.cycle << ',' << r.space_id << ',' << occ << ',' << virt << ',' << num(r.e_before) << ','
            << num(r.e_after) << ',' << num(r.delta_e) << ',' << num(r.grad_norm) << ',' << r.params << '\n';
    }
}

std::string trace_json(const FlowTrace& trace, const std::string& hash) {
    ordered_json doc;
    doc["schema_version"] = kSummarySchemaVersion;
    doc["config_hash"] = hash;
    doc["jacobi"] = trace.jacobi;
    ordered_json recs = ordered_json::array();
    for (const auto& r : trace.records) {
        ordered_json j;
        j["cycle"] = r.cycle;
        j["space_id"] = r.space_id;
        j["space"] = r.space_label;
        j["step"] = r.step;
        j["e_before"] = json_number(r.e_before);
        j["e_after"] = json_number(r.e_after);
        j["delta_e"] = json_number(r.delta_e);
        j["grad_norm"] = json_number(r.grad_norm);
        j["params"] = r.params;
        recs.push_back(std::move(j));
    }
    doc["records"] = std::move(recs);
    ordered_json ce = ordered_json::array();
    for (double e : trace.cycle_energies) ce.push_back(json_number(e));
    doc["cycle_energies"] = std::move(ce);
    return doc.dump(1) + "\n";
}

std::string summary_json(const FlowResult& r, const FlowConfig& config, const std::string& hash,
                         std::optional<double> ed_energy) {
    ordered_json doc;
    doc["schema_version"] = kSummarySchemaVersion;
    doc["mode"] = to_string(config.mode);
    doc["heff"] = heff_label(config);
    doc["dry_run"] = config.dry_run;
    doc["energy"] = json_number(r.energy);
    doc["cycles"] = r.cycles;
    doc["converged"] = r.converged;
    doc["parameters_optimized"] = r.parameters_optimized;
    doc["background_parameters"] = r.background_parameters;
    doc["total_spaces"] = r.total_spaces;
    doc["selected_spaces"] = r.selected_spaces;
    doc["main_space"] = r.main_space;
    ordered_json ce = ordered_json::array();
    for (double e : r.trace.cycle_energies) ce.push_back(json_number(e));
    doc["cycle_energies"] = std::move(ce);
    doc["trotter_energy"] = config.dry_run ? ordered_json(nullptr) : json_number(r.trotter_energy);
    doc["equivalence_residual"] = r.equivalence_residual ? json_number(*r.equivalence_residual) : ordered_json(nullptr);
    doc["functional_energy"] = r.functional_energy ? json_number(*r.functional_energy) : ordered_json(nullptr);
    doc["ed_energy"] = ed_energy ? json_number(*ed_energy) : ordered_json(nullptr);
    if (!r.spot_checks.empty()) {
        double worst = 0.0;
        for (const auto& s : r.spot_checks) worst = std::max(worst, s.relative_error);
        doc["spot_check_max_relative_error"] = worst;
    }
    doc["degenerate_denominators"] = r.degeneracy_log.size();
    doc["config_hash"] = hash;
    return doc.dump(1) + "\n";
}

}  // namespace qflow
