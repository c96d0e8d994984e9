#include <qflow/flow.hpp>

#include <qflow/oracle.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <thread>

namespace qflow {

std::string to_string(FlowMode m) {
    switch (m) {
        case FlowMode::Qflow: return "qflow";
        case FlowMode::Subflow: return "subflow";
        case FlowMode::Ccflow: return "ccflow";
        case FlowMode::Bloch: return "bloch";
    }
    return "unknown";
}

void FlowConfig::validate() const {
    auto bad = [](const std::string& what) { throw std::invalid_argument("flow config: " + what); };
    if (!(eta > 0)) bad("eta must be positive");
    if (trotter_rank < 1) bad("trotter rank must be >= 1");
    if (cycles_max < 0) bad("cycles must be >= 0");
    if (energy_tol < 0 || grad_tol < 0) bad("tolerances must be >= 0");
    if (n_occ_pick < 0 || n_virt_pick < 0) bad("active-space template must be non-negative");
    if (heff != HeffMethod::ExactUnitary && heff != HeffMethod::Bch) bad("heff must be exact or bch");
    if (heff == HeffMethod::Bch && bch_order < 1) bad("bch order must be >= 1");
    if (max_rank < 1) bad("max rank must be >= 1");
    if (bloch_order < 1 || bloch_order > 2) bad("bloch order must be 1 or 2");
    if (selection_cycle < 1) bad("selection cycle must be >= 1");
    if (mode == FlowMode::Subflow) {
        if (select_threshold.has_value() == select_topk.has_value()) {
            bad("subflow needs exactly one of a selection threshold or top-K");
        }
        if (select_topk && *select_topk < 0) bad("top-K must be >= 0");
        if (select_threshold && *select_threshold < 0) bad("selection threshold must be >= 0");
    }
}

std::vector<FlowSpace> importance_order(const IntegralStore& store, const std::vector<ActiveSpace>& spaces,
                                        int max_rank) {
    const auto sb = store.basis();
    const Determinant ref = sb.reference();
    const double e_ref = slater_condon(store, ref, ref);
    std::vector<std::pair<long long, FlowSpace>> keyed;
    for (const auto& sp : spaces) {
        FlowSpace fs;
        fs.space = sp;
        fs.cas = cas_basis(sb, sp);
        fs.internal = space_excitations(sb, sp, max_rank);
        const auto n = static_cast<Eigen::Index>(fs.cas->size());
        Matrix block(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j)
                block(i, j) = block(j, i) = slater_condon(store, (*fs.cas)[static_cast<std::size_t>(i)],
                                                          (*fs.cas)[static_cast<std::size_t>(j)]);
        Eigen::SelfAdjointEigenSolver<Matrix> es(block, Eigen::EigenvaluesOnly);
        fs.importance = es.eigenvalues()(0) - e_ref;
        keyed.emplace_back(std::llround(fs.importance * 1e10), std::move(fs));
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second.space.id < b.second.space.id;
    });
    std::vector<FlowSpace> out;
    for (auto& [k, fs] : keyed) out.push_back(std::move(fs));
    return out;
}

void assign_ownership(std::vector<FlowSpace>& spaces) {
    std::set<Excitation> taken;
    for (auto& fs : spaces) {
        fs.owned.clear();
        for (const auto& k : fs.internal)
            if (taken.insert(k).second) fs.owned.push_back(k);
    }
}

std::vector<int> select_subflow(const FlowTrace& trace, int cycle, std::optional<double> threshold,
                                std::optional<int> top_k) {
    if (threshold.has_value() == top_k.has_value()) {
        throw std::invalid_argument("select_subflow needs exactly one selection rule");
    }
    std::vector<std::pair<double, int>> de;
    for (const auto& r : trace.records)
        if (r.cycle == cycle) de.emplace_back(std::abs(r.delta_e), r.space_id);
    if (de.empty()) throw std::invalid_argument("select_subflow: trace has no records for cycle " + std::to_string(cycle));
    std::vector<int> ids;
    if (threshold) {
        for (const auto& [v, id] : de)
            if (v >= *threshold) ids.push_back(id);
        if (ids.empty()) {
            throw std::invalid_argument("no active space reached |dE| >= " + std::to_string(*threshold) +
                                        " Hartree in cycle " + std::to_string(cycle) + "; lower the selection threshold");
        }
    } else {
        std::stable_sort(de.begin(), de.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(*top_k), de.size());
        for (std::size_t i = 0; i < k; ++i) ids.push_back(de[i].second);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

namespace {

constexpr double kMaxAmplitude = 100.0;

Vector reference_vector(std::size_t n) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
    v(0) = 1.0;
    return v;
}

Vector internal_state(const ExcitationTable& t, const Vector& theta) {
    std::vector<double> w(theta.data(), theta.data() + theta.size());
    return exp_action(t.sigma_matrix(w), reference_vector(t.basis()->size()));
}

}  // namespace

double internal_energy(const Matrix& heff, const ExcitationTable& cas_table, const Vector& theta) {
    const Vector psi = internal_state(cas_table, theta);
    return psi.dot(heff * psi);
}

Vector commutator_gradient(const Matrix& heff, const ExcitationTable& cas_table, const Vector& theta) {
    const Vector psi = internal_state(cas_table, theta);
    const Vector hpsi = heff * psi;
    Vector g(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        g(k) = 2.0 * hpsi.dot(cas_table.apply_generator(static_cast<std::size_t>(k), psi));
    }
    return g;
}

GradientStep gradient_step(const Matrix& heff, const ExcitationTable& cas_table, const Vector& theta,
                           const std::vector<bool>& owned_mask, double eta) {
    GradientStep out;
    const Vector psi = internal_state(cas_table, theta);
    const Vector hpsi = heff * psi;
    out.e_before = psi.dot(hpsi);
    out.gradient = Vector::Zero(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        if (!owned_mask[static_cast<std::size_t>(k)]) continue;
        out.gradient(k) = 2.0 * hpsi.dot(cas_table.apply_generator(static_cast<std::size_t>(k), psi));
    }
    out.grad_norm = out.gradient.norm();
    if (!std::isfinite(out.grad_norm)) throw DivergenceError("non-finite gradient");
    out.theta = theta - eta * out.gradient;
    // rotation angles this large only arise from a runaway step size
    if (out.theta.cwiseAbs().maxCoeff() > kMaxAmplitude) {
        throw DivergenceError("amplitudes exceeded " + std::to_string(kMaxAmplitude) + "; reduce eta");
    }
    out.e_after = out.grad_norm == 0.0 ? out.e_before : internal_energy(heff, cas_table, out.theta);
    return out;
}

struct FlowEngine::Impl {
    std::shared_ptr<const IntegralStore> store;
    FlowConfig cfg;
    SpinOrbitalBasis sb;
    Determinant ref;
    BasisPtr sector;
    std::optional<HamiltonianMatrix> h;
    std::unique_ptr<PerturbationTheory> pt;
    std::unique_ptr<ExcitationTable> full_table;
    std::map<int, std::unique_ptr<ExcitationTable>> cas_tables;
    std::map<int, std::vector<std::size_t>> internal_slots;  // full-table indices of internal keys
    std::map<int, double> start_energy;                      // first e_before per space

    Impl(std::shared_ptr<const IntegralStore> s, FlowConfig c) : store(std::move(s)), cfg(std::move(c)) {
        sb = store->basis();
        sb.validate();
        ref = sb.reference();
    }

    const BasisPtr& get_sector() {
        if (!sector) sector = make_basis(enumerate_sector(sb, sb.n_alpha, sb.n_beta));
        return sector;
    }
    const HamiltonianMatrix& get_h() {
        if (!h) h = build_matrix(store, get_sector());
        return *h;
    }
    PerturbationTheory& get_pt() {
        if (!pt) pt = std::make_unique<PerturbationTheory>(*store, cfg.dgen_tol);
        return *pt;
    }

    void prepare_tables(const std::vector<FlowSpace>& spaces, const std::vector<Excitation>& extra) {
        std::set<Excitation> keys(extra.begin(), extra.end());
        for (const auto& fs : spaces) keys.insert(fs.internal.begin(), fs.internal.end());
        full_table = std::make_unique<ExcitationTable>(get_sector(), std::vector<Excitation>(keys.begin(), keys.end()));
        for (const auto& fs : spaces) {
            cas_tables[fs.space.id] = std::make_unique<ExcitationTable>(fs.cas, fs.internal);
            auto& slots = internal_slots[fs.space.id];
            slots.clear();
            for (const auto& k : fs.internal) slots.push_back(*full_table->index_of(k));
        }
    }

    SparseMatrix sigma_external(const FlowSpace& fs, const AmplitudeStore& amps) const {
        std::vector<double> w = full_table->weights(amps);
        for (auto s : internal_slots.at(fs.space.id)) w[s] = 0.0;
        return full_table->sigma_matrix(w);
    }

    Matrix heff_for(const FlowSpace& fs, const AmplitudeStore& amps) {
        const SparseMatrix sigma = sigma_external(fs, amps);
        if (cfg.heff == HeffMethod::Bch) return heff_bch(get_h(), sigma, fs.space, fs.cas, cfg.bch_order).matrix;
        return heff_unitary_exact(get_h(), sigma, fs.space, fs.cas).matrix;
    }

    Vector theta_for(const FlowSpace& fs, const AmplitudeStore& amps) const {
        const auto w = cas_tables.at(fs.space.id)->weights(amps);
        return Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    }

    std::vector<bool> owned_mask(const FlowSpace& fs) const {
        std::set<Excitation> owned(fs.owned.begin(), fs.owned.end());
        std::vector<bool> m;
        for (const auto& k : fs.internal) m.push_back(owned.count(k) != 0);
        return m;
    }

    double space_energy(const FlowSpace& fs, const AmplitudeStore& amps) {
        return internal_energy(heff_for(fs, amps), *cas_tables.at(fs.space.id), theta_for(fs, amps));
    }

    double full_energy(const AmplitudeStore& amps) {
        const SparseMatrix sigma = full_table->sigma_matrix(full_table->weights(amps));
        Vector phi = Vector::Zero(static_cast<Eigen::Index>(get_sector()->size()));
        phi(static_cast<Eigen::Index>(get_sector()->index_of(ref))) = 1.0;
        const Vector psi = exp_action(sigma, phi);
        return psi.dot(get_h().entries * psi);
    }

    double trotter_energy(const FlowSpace& fs, const AmplitudeStore& amps, int n) {
        std::vector<double> all = full_table->weights(amps);
        std::vector<double> inner(all.size(), 0.0);
        for (auto s : internal_slots.at(fs.space.id)) {
            inner[s] = all[s];
            all[s] = 0.0;
        }
        Vector phi = Vector::Zero(static_cast<Eigen::Index>(get_sector()->size()));
        phi(static_cast<Eigen::Index>(get_sector()->index_of(ref))) = 1.0;
        const Vector psi = trotter_state(full_table->sigma_matrix(inner), full_table->sigma_matrix(all), n, phi);
        return psi.dot(get_h().entries * psi) / psi.squaredNorm();
    }

    void guard(double e) const {
        if (!std::isfinite(e)) throw DivergenceError("flow energy became non-finite");
        if (cfg.reference_energy && e < *cfg.reference_energy - 1.0) {
            throw DivergenceError("flow energy " + std::to_string(e) + " fell more than 1 Hartree below the reference");
        }
    }

    std::vector<Excitation> background_triples(const std::vector<FlowSpace>& spaces,
                                               const std::set<Excitation>& iterative) const {
        std::vector<Excitation> out;
        std::uint64_t active = 0;
        for (const auto& fs : spaces) active |= fs.space.spin_mask();
        for (const auto& e : all_excitations(sb, 3)) {
            if (e.rank() != 3 || iterative.count(e)) continue;
            if (cfg.restrict_triples && (e.support() & ~active) != 0) continue;
            out.push_back(e);
        }
        return out;
    }

    struct StepOutcome {
        GradientStep step;
        std::optional<SpotCheck> check;
    };

    StepOutcome step_space(const FlowSpace& fs, const AmplitudeStore& amps, int cycle, std::optional<std::size_t> check_key) {
        const Matrix heff = heff_for(fs, amps);
        const ExcitationTable& table = *cas_tables.at(fs.space.id);
        const Vector theta = theta_for(fs, amps);
        StepOutcome out;
        out.step = gradient_step(heff, table, theta, owned_mask(fs), cfg.eta);
        if (check_key) {
            const std::size_t k = *check_key;
            const Vector psi = internal_state(table, theta);
            const SparseMatrix gen = [&] {
                std::vector<double> w(table.keys().size(), 0.0);
                w[k] = 1.0;
                return table.sigma_matrix(w);
            }();
            auto f = [&](const Vector& x) {
                const Vector q = exp_action(SparseMatrix(gen * x(0)), psi);
                return q.dot(heff * q);
            };
            const double fd = finite_diff_gradient(f, Vector::Zero(1), 1e-5)(0);
            const double an = out.step.gradient(static_cast<Eigen::Index>(k));
            out.check = SpotCheck{cycle, fs.space.id, table.keys()[k].label(), an, fd,
                                  std::abs(an - fd) / std::max(std::abs(fd), 1e-3)};
        }
        return out;
    }

    void write_back(const FlowSpace& fs, const GradientStep& s, AmplitudeStore& amps) const {
        const auto mask = owned_mask(fs);
        for (std::size_t k = 0; k < fs.internal.size(); ++k)
            if (mask[k]) amps.set(fs.internal[k], s.theta(static_cast<Eigen::Index>(k)), AmplitudeTag::Iterative);
    }

    /// Runs cycles [first, last]; returns true on convergence.
    bool run_cycles(FlowState& st, FlowTrace& trace, int first, int last, std::mt19937_64& rng,
                    std::vector<SpotCheck>& checks) {
        for (int c = first; c <= last; ++c) {
            st.cycle = c;
            std::optional<std::pair<std::size_t, std::size_t>> pick;
            if (cfg.spot_check) {
                std::vector<std::size_t> candidates;
                for (std::size_t i = 0; i < st.spaces.size(); ++i)
                    if (!st.spaces[i].owned.empty()) candidates.push_back(i);
                if (!candidates.empty()) {
                    const std::size_t si = candidates[rng() % candidates.size()];
                    const auto& fs = st.spaces[si];
                    const auto& okey = fs.owned[rng() % fs.owned.size()];
                    const auto pos = std::find(fs.internal.begin(), fs.internal.end(), okey) - fs.internal.begin();
                    pick = std::make_pair(si, static_cast<std::size_t>(pos));
                }
            }
            std::vector<StepOutcome> outcomes(st.spaces.size());
            double max_grad = 0.0;
            if (cfg.jacobi) {
                const AmplitudeStore snapshot = st.amplitudes;
                get_h();
                unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
                n_threads = std::max(1U, std::min<unsigned>(n_threads, static_cast<unsigned>(st.spaces.size())));
                std::vector<std::thread> pool;
                std::vector<std::exception_ptr> errors(n_threads);
                for (unsigned t = 0; t < n_threads; ++t) {
                    pool.emplace_back([&, t] {
                        try {
                            for (std::size_t i = t; i < st.spaces.size(); i += n_threads) {
                                std::optional<std::size_t> ck;
                                if (pick && pick->first == i) ck = pick->second;
                                outcomes[i] = step_space(st.spaces[i], snapshot, c, ck);
                            }
                        } catch (...) {
                            errors[t] = std::current_exception();
                        }
                    });
                }
                for (auto& th : pool) th.join();
                for (auto& e : errors)
                    if (e) std::rethrow_exception(e);
                for (std::size_t i = 0; i < st.spaces.size(); ++i) write_back(st.spaces[i], outcomes[i].step, st.amplitudes);
            } else {
                for (std::size_t i = 0; i < st.spaces.size(); ++i) {
                    std::optional<std::size_t> ck;
                    if (pick && pick->first == i) ck = pick->second;
                    outcomes[i] = step_space(st.spaces[i], st.amplitudes, c, ck);
                    write_back(st.spaces[i], outcomes[i].step, st.amplitudes);
                }
            }
            for (std::size_t i = 0; i < st.spaces.size(); ++i) {
                const auto& s = outcomes[i].step;
                guard(s.e_after);
                const auto [it, fresh] = start_energy.emplace(st.spaces[i].space.id, s.e_before);
                (void)fresh;
                if (s.e_after > it->second + 1.0) {
                    throw DivergenceError("energy of space " + std::to_string(it->first) +
                                          " rose more than 1 Hartree above its starting value; reduce eta");
                }
                StepRecord r;
                r.cycle = c;
                r.space_id = st.spaces[i].space.id;
                r.space_label = st.spaces[i].space.label();
                r.step = static_cast<int>(trace.records.size());
                r.e_before = s.e_before;
                r.e_after = s.e_after;
                r.delta_e = s.e_after - s.e_before;
                r.grad_norm = s.grad_norm;
                r.params = static_cast<int>(st.spaces[i].owned.size());
                trace.records.push_back(r);
                max_grad = std::max(max_grad, s.grad_norm);
                if (outcomes[i].check) checks.push_back(*outcomes[i].check);
            }
            const double e_main = outcomes.empty() ? st.energy : outcomes.front().step.e_after;
            trace.cycle_energies.push_back(e_main);
            st.energy = e_main;
            const auto n = trace.cycle_energies.size();
            if (n >= 2 && cfg.energy_tol > 0 &&
                std::abs(trace.cycle_energies[n - 1] - trace.cycle_energies[n - 2]) < cfg.energy_tol) {
                return true;
            }
            if (cfg.grad_tol > 0 && max_grad < cfg.grad_tol) return true;
        }
        return false;
    }

    FlowResult run_variational() {
        FlowResult res;
        const auto spaces = enumerate_spaces(sb, cfg.n_occ_pick, cfg.n_virt_pick);
        res.total_spaces = spaces.size();
        FlowState st;
        st.spaces = importance_order(*store, spaces, cfg.max_rank);
        assign_ownership(st.spaces);
        std::set<Excitation> iterative;
        for (const auto& fs : st.spaces) iterative.insert(fs.owned.begin(), fs.owned.end());
        res.parameters_optimized = iterative.size();
        res.main_space = st.spaces.empty() ? -1 : st.spaces.front().space.id;
        res.trace.jacobi = cfg.jacobi;
        for (const auto& fs : st.spaces) res.selected_spaces.push_back(fs.space.id);
        std::sort(res.selected_spaces.begin(), res.selected_spaces.end());

        std::vector<Excitation> triples;
        if (cfg.background) triples = background_triples(st.spaces, iterative);
        res.background_parameters = triples.size();
        if (cfg.dry_run) {
            res.energy = std::numeric_limits<double>::quiet_NaN();
            res.state = std::move(st);
            return res;
        }
        if (st.spaces.empty()) throw std::invalid_argument("no active spaces to flow over");

        std::vector<Excitation> all_triples;
        if (cfg.mode == FlowMode::Subflow) {
            for (const auto& e : all_excitations(sb, 3))
                if (e.rank() == 3 && !iterative.count(e)) all_triples.push_back(e);
        }
        prepare_tables(st.spaces, cfg.mode == FlowMode::Subflow ? all_triples : triples);
        for (const auto& k : iterative) st.amplitudes.set(k, 0.0, AmplitudeTag::Iterative);
        for (const auto& k : triples) st.amplitudes.set(k, get_pt().second_order(k), AmplitudeTag::Background);

        std::mt19937_64 rng(cfg.seed);
        bool converged = false;
        if (cfg.mode == FlowMode::Subflow) {
            const int sel_cycle = std::min(cfg.selection_cycle, std::max(cfg.cycles_max, 0));
            if (sel_cycle < cfg.selection_cycle) throw std::invalid_argument("cycles must reach the selection cycle");
            converged = run_cycles(st, res.trace, 1, sel_cycle, rng, res.spot_checks);
            const auto chosen = select_subflow(res.trace, sel_cycle, cfg.select_threshold, cfg.select_topk);
            res.selected_spaces = chosen;
            apply_selection(st, chosen);
            res.background_parameters = st.amplitudes.count(AmplitudeTag::Background);
            if (st.spaces.empty()) {
                res.energy = full_energy(st.amplitudes);
                guard(res.energy);
                res.cycles = sel_cycle;
                res.converged = true;
                res.main_space = -1;
                res.trotter_energy = res.energy;
                res.state = std::move(st);
                res.degeneracy_log = get_pt().degeneracy_log();
                return res;
            }
            res.main_space = st.spaces.front().space.id;
            if (!converged) converged = run_cycles(st, res.trace, sel_cycle + 1, cfg.cycles_max, rng, res.spot_checks);
        } else {
            converged = run_cycles(st, res.trace, 1, cfg.cycles_max, rng, res.spot_checks);
        }
        res.cycles = static_cast<int>(res.trace.cycle_energies.size());
        res.converged = converged;
        res.energy = space_energy(st.spaces.front(), st.amplitudes);
        guard(res.energy);
        st.energy = res.energy;
        res.trotter_energy = cfg.trotter_rank == 1 ? res.energy
                                                   : trotter_energy(st.spaces.front(), st.amplitudes, cfg.trotter_rank);
        if (pt) res.degeneracy_log = pt->degeneracy_log();
        res.state = std::move(st);
        return res;
    }

    void apply_selection(FlowState& st, const std::vector<int>& chosen) {
        const std::set<int> keep(chosen.begin(), chosen.end());
        std::vector<FlowSpace> selected;
        std::vector<FlowSpace> excluded;
        for (auto& fs : st.spaces) (keep.count(fs.space.id) ? selected : excluded).push_back(fs);
        assign_ownership(selected);
        std::set<Excitation> live;
        for (const auto& fs : selected) live.insert(fs.owned.begin(), fs.owned.end());
        for (const auto& fs : excluded) {
            for (const auto& k : fs.owned) {
                if (live.count(k)) continue;
                const double v = k.rank() <= 2 ? get_pt().first_order(k) : get_pt().second_order(k);
                st.amplitudes.set(k, v, AmplitudeTag::Background);
            }
        }
        if (cfg.restrict_triples) {
            std::uint64_t active = 0;
            for (const auto& fs : selected) active |= fs.space.spin_mask();
            std::vector<Excitation> drop;
            for (const auto& [k, a] : st.amplitudes)
                if (a.tag == AmplitudeTag::Background && k.rank() == 3 && (k.support() & ~active) != 0) drop.push_back(k);
            for (const auto& k : drop) st.amplitudes.erase(k);
        }
        st.spaces = std::move(selected);
    }

    FlowResult run_ccflow() {
        FlowResult res;
        const auto spaces = enumerate_spaces(sb, cfg.n_occ_pick, cfg.n_virt_pick);
        res.total_spaces = spaces.size();
        FlowState st;
        st.spaces = importance_order(*store, spaces, 2 * cfg.n_occ_pick);
        assign_ownership(st.spaces);
        std::set<Excitation> keys;
        for (const auto& fs : st.spaces) keys.insert(fs.owned.begin(), fs.owned.end());
        res.parameters_optimized = keys.size();
        for (const auto& fs : st.spaces) res.selected_spaces.push_back(fs.space.id);
        std::sort(res.selected_spaces.begin(), res.selected_spaces.end());
        res.main_space = st.spaces.empty() ? -1 : st.spaces.front().space.id;
        if (cfg.dry_run) {
            res.energy = std::numeric_limits<double>::quiet_NaN();
            res.state = std::move(st);
            return res;
        }
        if (st.spaces.empty()) throw std::invalid_argument("no active spaces to flow over");
        for (const auto& k : keys) st.amplitudes.set(k, 0.0);
        const HamiltonianMatrix& hm = get_h();

        std::map<int, double> last_energy;
        auto solve_space = [&](const FlowSpace& fs, const AmplitudeStore& amps) {
            const EffectiveHamiltonian heff = heff_ses_nonhermitian(hm, amps.external_to(fs.space), fs.space, fs.cas);
            const NonsymmetricRoot root = nonsymmetric_eig(heff.matrix, 0, 1e-8);
            if (root.overlap <= 0.1) throw ConvergenceError("ccflow: no root overlaps the reference");
            return std::make_pair(root, heff.matrix(0, 0));
        };

        for (int c = 1; c <= cfg.cycles_max; ++c) {
            st.cycle = c;
            double max_change = 0.0;
            for (std::size_t i = 0; i < st.spaces.size(); ++i) {
                const auto& fs = st.spaces[i];
                const auto [root, diag] = solve_space(fs, st.amplitudes);
                const Vector cvec = root.vector / root.vector(0);
                const AmplitudeStore t_int = cluster_analyze(StateVector(fs.cas, cvec), ref);
                double change2 = 0.0;
                for (const auto& k : fs.internal) {
                    const double v = t_int.value(k);
                    const double d = v - st.amplitudes.value(k);
                    change2 += d * d;
                    max_change = std::max(max_change, std::abs(d));
                    st.amplitudes.set(k, v);
                }
                StepRecord r;
                r.cycle = c;
                r.space_id = fs.space.id;
                r.space_label = fs.space.label();
                r.step = static_cast<int>(res.trace.records.size());
                r.e_before = last_energy.count(fs.space.id) ? last_energy[fs.space.id] : diag;
                r.e_after = root.value;
                r.delta_e = r.e_after - r.e_before;
                r.grad_norm = std::sqrt(change2);
                r.params = static_cast<int>(fs.internal.size());
                guard(r.e_after);
                last_energy[fs.space.id] = root.value;
                res.trace.records.push_back(r);
            }
            res.trace.cycle_energies.push_back(last_energy[st.spaces.front().space.id]);
            if (max_change < cfg.amplitude_tol) {
                res.converged = true;
                break;
            }
        }
        res.cycles = static_cast<int>(res.trace.cycle_energies.size());
        if (!res.converged) {
            throw ConvergenceError("ccflow: amplitudes still changing after " + std::to_string(cfg.cycles_max) + " cycles");
        }
        res.energy = solve_space(st.spaces.front(), st.amplitudes).first.value;

        const auto& basis = *get_sector();
        const SparseMatrix t = excitation_matrix(st.amplitudes, basis);
        Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(basis.size()), 1);
        const auto r0 = static_cast<Eigen::Index>(basis.index_of(ref));
        phi(r0, 0) = 1.0;
        const Matrix x = hm.entries * exp_nilpotent(t, phi);
        const SparseMatrix mt = -t;
        const Vector v = exp_nilpotent(mt, x).col(0);
        double q2 = 0.0;
        for (const auto& [k, a] : st.amplitudes) {
            const auto target = k.apply(ref);
            q2 += std::pow(v(static_cast<Eigen::Index>(basis.index_of(target.det))), 2);
        }
        res.equivalence_residual = std::sqrt(q2);
        res.functional_energy = v(r0);
        res.trotter_energy = res.energy;
        st.energy = res.energy;
        res.state = std::move(st);
        return res;
    }

    FlowResult run_bloch() {
        FlowResult res;
        const auto spaces = enumerate_spaces(sb, cfg.n_occ_pick, cfg.n_virt_pick);
        res.total_spaces = spaces.size();
        FlowState st;
        st.spaces = importance_order(*store, spaces, cfg.max_rank);
        if (st.spaces.empty()) throw std::invalid_argument("no active spaces");
        st.spaces.resize(1);
        const auto& fs = st.spaces.front();
        res.main_space = fs.space.id;
        res.selected_spaces = {fs.space.id};
        res.parameters_optimized = 0;
        if (cfg.dry_run) {
            res.energy = std::numeric_limits<double>::quiet_NaN();
            res.state = std::move(st);
            return res;
        }
        const BlochResult b = bloch_hybrid_solve(get_h(), get_pt(), fs.space, fs.cas, cfg.bloch_order);
        StepRecord r;
        r.cycle = 1;
        r.space_id = fs.space.id;
        r.space_label = fs.space.label();
        r.e_before = b.heff.matrix(0, 0);
        r.e_after = b.energy;
        r.delta_e = r.e_after - r.e_before;
        res.trace.records.push_back(r);
        res.trace.cycle_energies.push_back(b.energy);
        res.energy = b.energy;
        guard(res.energy);
        res.trotter_energy = b.energy;
        res.cycles = 1;
        res.converged = true;
        res.degeneracy_log = get_pt().degeneracy_log();
        st.energy = b.energy;
        res.state = std::move(st);
        return res;
    }
};

FlowEngine::FlowEngine(std::shared_ptr<const IntegralStore> store, FlowConfig config)
    : impl_(std::make_shared<Impl>(std::move(store), config)), config_(std::move(config)) {
    config_.validate();
}

const BasisPtr& FlowEngine::sector() { return impl_->get_sector(); }
const HamiltonianMatrix& FlowEngine::hamiltonian() { return impl_->get_h(); }

FlowResult FlowEngine::run() {
    switch (config_.mode) {
        case FlowMode::Qflow:
        case FlowMode::Subflow: return impl_->run_variational();
        case FlowMode::Ccflow: return impl_->run_ccflow();
        case FlowMode::Bloch: return impl_->run_bloch();
    }
    throw std::logic_error("unknown flow mode");
}

FlowResult run_qflow(const IntegralStore& store, FlowConfig config) {
    config.mode = FlowMode::Qflow;
    return FlowEngine(std::make_shared<const IntegralStore>(store), config).run();
}

FlowResult run_subflow(const IntegralStore& store, FlowConfig config) {
    config.mode = FlowMode::Subflow;
    return FlowEngine(std::make_shared<const IntegralStore>(store), config).run();
}

FlowResult run_ccflow_nonhermitian(const IntegralStore& store, FlowConfig config) {
    config.mode = FlowMode::Ccflow;
    return FlowEngine(std::make_shared<const IntegralStore>(store), config).run();
}

}  // namespace qflow
