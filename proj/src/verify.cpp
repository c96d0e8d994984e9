#include <qflow/verify.hpp>

#include <qflow/cluster.hpp>
#include <qflow/downfolding.hpp>
#include <qflow/flow.hpp>
#include <qflow/models.hpp>
#include <qflow/oracle.hpp>
#include <qflow/perturbative.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace qflow {

namespace {

struct Sector {
    BasisPtr basis;
    HamiltonianMatrix h;
    std::size_t ref_index;
};

Sector full_sector(const IntegralStore& store) {
    const auto sb = store.basis();
    auto basis = make_basis(enumerate_sector(sb, sb.n_alpha, sb.n_beta));
    auto h = build_matrix(store, basis);
    const auto r = basis->index_of(sb.reference());
    return {basis, std::move(h), r};
}

Matrix unit_column(std::size_t n, std::size_t i) {
    Matrix v = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
    v(static_cast<Eigen::Index>(i), 0) = 1.0;
    return v;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

}  // namespace

IntegralStore verify_model(std::uint64_t seed, int instance) {
    RandomModelOptions o;
    o.n_orb = 4;
    o.n_elec = 4;
    return random_model(o, seed * 7919 + static_cast<std::uint64_t>(instance) + 1);
}

double ses_residual(const IntegralStore& store, int n_occ_pick, int n_virt_pick) {
    const auto sb = store.basis();
    const Determinant ref = sb.reference();
    const Sector s = full_sector(store);
    const Eigenpair gs = ground_state(s.h, s.ref_index);
    const Vector c = gs.vector / gs.vector(static_cast<Eigen::Index>(s.ref_index));
    const AmplitudeStore t = cluster_analyze(StateVector(s.basis, c), ref);
    double worst = 0.0;
    for (const auto& space : enumerate_spaces(sb, n_occ_pick, n_virt_pick)) {
        const BasisPtr cas = cas_basis(sb, space);
        const EffectiveHamiltonian heff = heff_ses_nonhermitian(s.h, t.external_to(space), space, cas);
        const Matrix x = exp_nilpotent(excitation_matrix(t.internal_to(space), *cas), unit_column(cas->size(), 0));
        worst = std::max(worst, (heff.matrix * x - gs.value * x).norm());
    }
    return worst;
}

PropertyResult check_ses(std::uint64_t seed, int instances) {
    PropertyResult r{"ses", false, 0.0, 1e-9, 0, {}};
    for (int i = 0; i < instances; ++i) {
        const IntegralStore store = verify_model(seed, i);
        for (auto [o, v] : {std::pair{1, 1}, std::pair{1, 2}, std::pair{2, 1}, std::pair{2, 2}}) {
            r.worst = std::max(r.worst, ses_residual(store, o, v));
            ++r.samples;
        }
    }
    r.pass = r.worst <= r.tolerance;
    r.detail = "templates (1,1) (1,2) (2,1) (2,2)";
    return r;
}

PropertyResult check_equivalence(std::uint64_t seed, int instances) {
    PropertyResult r{"equivalence", false, 0.0, 1e-7, 0, {}};
    double worst_gap = 0.0;
    for (int i = 0; i < instances; ++i) {
        FlowConfig cfg;
        cfg.mode = FlowMode::Ccflow;
        cfg.n_occ_pick = 1;
        cfg.n_virt_pick = 1;
        cfg.cycles_max = 500;
        cfg.energy_tol = 1e-12;
        const FlowResult res = run_ccflow_nonhermitian(verify_model(seed, i), cfg);
        r.worst = std::max(r.worst, *res.equivalence_residual);
        worst_gap = std::max(worst_gap, std::abs(res.energy - *res.functional_energy));
        ++r.samples;
    }
    r.pass = r.worst <= r.tolerance && worst_gap <= 1e-9;
    r.detail = "energy_gap=" + fmt(worst_gap) + " gap_tol=1.000e-09";
    return r;
}

PropertyResult check_gradient(std::uint64_t seed, int samples) {
    PropertyResult r{"gradient", false, 0.0, 1e-6, 0, {}};
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> amp(-0.15, 0.15);
    constexpr int kPerInstance = 10;
    for (int inst = 0; r.samples < samples; ++inst) {
        const IntegralStore store = verify_model(seed, 1000 + inst);
        const auto sb = store.basis();
        const Sector s = full_sector(store);
        const std::pair<int, int> tmpl = inst % 2 == 0 ? std::pair{1, 1} : std::pair{2, 1};
        const auto spaces = enumerate_spaces(sb, tmpl.first, tmpl.second);
        const ActiveSpace space = spaces[rng() % spaces.size()];
        const BasisPtr cas = cas_basis(sb, space);
        const auto internal = space_excitations(sb, space, 3);
        AmplitudeStore ext;
        for (const auto& e : all_excitations(sb, 2))
            if (classify_excitation(e, space) == ExcitationClass::External) ext.set(e, amp(rng));
        const Matrix heff = heff_unitary_exact(s.h, sigma_matrix(ext, *s.basis), space, cas).matrix;
        const ExcitationTable table(cas, internal);
        for (int k = 0; k < kPerInstance && r.samples < samples; ++k, ++r.samples) {
            const bool at_origin = (r.samples % 2) == 0;
            Vector theta = Vector::Zero(static_cast<Eigen::Index>(internal.size()));
            if (!at_origin)
                for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = amp(rng);
            const auto key = static_cast<Eigen::Index>(rng() % internal.size());
            const Vector g = commutator_gradient(heff, table, theta);
            double fd = 0.0;
            if (at_origin) {
                // genuine derivative of E(theta) at theta = 0
                fd = finite_diff_gradient(
                    [&](const Vector& x) {
                        Vector th = theta;
                        th(key) += x(0);
                        return internal_energy(heff, table, th);
                    },
                    Vector::Zero(1))(0);
            } else {
                // derivative along e^{eps tau_k} applied to the current state
                const Vector psi = exp_action(table.sigma_matrix(std::vector<double>(theta.data(), theta.data() + theta.size())),
                                              Vector(unit_column(cas->size(), 0).col(0)));
                std::vector<double> w(internal.size(), 0.0);
                w[static_cast<std::size_t>(key)] = 1.0;
                const SparseMatrix tau = table.sigma_matrix(w);
                fd = finite_diff_gradient(
                    [&](const Vector& x) {
                        const Vector q = exp_action(SparseMatrix(tau * x(0)), psi);
                        return q.dot(heff * q);
                    },
                    Vector::Zero(1))(0);
            }
            r.worst = std::max(r.worst, std::abs(g(key) - fd) / std::max(std::abs(fd), 1e-3));
        }
    }
    r.pass = r.worst <= r.tolerance;
    r.detail = "h=1e-05 denominator=max(|fd|,1e-3)";
    return r;
}

PropertyResult check_trotter(std::uint64_t seed, int instances) {
    PropertyResult r{"trotter", true, 0.0, 0.0, 0, {}};
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::uniform_real_distribution<double> amp(-0.2, 0.2);
    double lo = 1e300;
    double hi = 0.0;
    for (int i = 0; i < instances; ++i) {
        const IntegralStore store = verify_model(seed, 2000 + i);
        const auto sb = store.basis();
        const auto basis = make_basis(enumerate_sector(sb, sb.n_alpha, sb.n_beta));
        const ActiveSpace space = enumerate_spaces(sb, 1, 1)[static_cast<std::size_t>(i) % 4];
        AmplitudeStore in;
        AmplitudeStore out;
        for (const auto& e : all_excitations(sb, 2))
            (classify_excitation(e, space) == ExcitationClass::Internal ? in : out).set(e, amp(rng));
        const SparseMatrix si = sigma_matrix(in, *basis);
        const SparseMatrix se = sigma_matrix(out, *basis);
        const Vector phi = unit_column(basis->size(), basis->index_of(sb.reference())).col(0);
        const Vector exact = exp_action(SparseMatrix(si + se), phi);
        double prev = 0.0;
        for (int n : {1, 2, 4, 8}) {
            const double err = (trotter_state(si, se, n, phi) - exact).norm();
            if (n > 1) {
                const double ratio = prev / err;
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
                if (!(ratio >= 1.6 && ratio <= 2.4)) r.pass = false;
            }
            prev = err;
        }
        ++r.samples;
    }
    r.worst = std::max(std::abs(lo - 2.0), std::abs(hi - 2.0));
    r.tolerance = 0.4;
    r.detail = "ratio_min=" + fmt(lo) + " ratio_max=" + fmt(hi);
    return r;
}

PropertyResult check_variational(std::uint64_t seed, int instances) {
    PropertyResult r{"variational", false, 0.0, 1e-10, 0, {}};
    for (int i = 0; i < instances; ++i) {
        const IntegralStore store = verify_model(seed, 3000 + i);
        const double e_fci = fci_ground_state(store).value;
        FlowConfig cfg;
        cfg.n_occ_pick = 1;
        cfg.n_virt_pick = 1;
        cfg.cycles_max = 30;
        cfg.energy_tol = 1e-10;
        const FlowResult res = run_qflow(store, cfg);
        for (const auto& rec : res.trace.records) {
            r.worst = std::max({r.worst, e_fci - rec.e_before, e_fci - rec.e_after});
            ++r.samples;
        }
        r.worst = std::max(r.worst, e_fci - res.energy);
    }
    r.pass = r.worst <= r.tolerance;
    r.detail = "worst = max(E_FCI - E_step, 0)";
    return r;
}

PropertyResult check_e2(std::uint64_t seed, int instances) {
    PropertyResult r{"e2", false, 0.0, 1e-10, 0, {}};
    for (int i = 0; i < instances; ++i) {
        const IntegralStore store = verify_model(seed, 4000 + i);
        const Sector s = full_sector(store);
        const PerturbationTheory pt(store);
        const Matrix h = s.h.dense();
        Vector h0(h.rows());
        for (std::size_t d = 0; d < s.basis->size(); ++d) {
            double e = 0.0;
            for (int so : (*s.basis)[d].occupied_spin_orbitals()) e += pt.fock_diagonal()[so];
            h0(static_cast<Eigen::Index>(d)) = e;
        }
        Matrix v = h;
        v.diagonal() -= h0;
        const RsOrder2 rs = rs_resolvent_order2(h0, v, s.ref_index);
        r.worst = std::max(r.worst, std::abs(rs.e2 - pt.second_order_energy()));
        r.worst = std::max(r.worst, std::abs(rs.e1 + rs.e0 - h(static_cast<Eigen::Index>(s.ref_index),
                                                               static_cast<Eigen::Index>(s.ref_index))));
        ++r.samples;
    }
    r.pass = r.worst <= r.tolerance;
    r.detail = "E(2) from first-order amplitudes vs resolvent";
    return r;
}

const std::vector<std::string>& verify_properties() {
    static const std::vector<std::string> names{"ses", "equivalence", "gradient", "trotter", "variational", "e2"};
    return names;
}

bool VerifyReport::passed() const {
    return std::all_of(results.begin(), results.end(), [](const PropertyResult& p) { return p.pass; });
}

std::string VerifyReport::text() const {
    std::string out;
    for (const auto& p : results) {
        out += (p.pass ? "PASS " : "FAIL ") + p.name + " samples=" + std::to_string(p.samples) +
               " worst=" + fmt(p.worst) + " tol=" + fmt(p.tolerance) + (p.detail.empty() ? "" : " " + p.detail) + "\n";
    }
    out += passed() ? "all properties passed\n" : "some properties failed\n";
    return out;
}

VerifyReport run_verify(const VerifyOptions& o) {
    const auto& names = verify_properties();
    if (o.property && std::find(names.begin(), names.end(), *o.property) == names.end()) {
        throw std::invalid_argument("unknown property '" + *o.property + "'");
    }
    if (o.instances < 1) throw std::invalid_argument("instances must be >= 1");
    VerifyReport rep;
    auto want = [&](const std::string& n) { return !o.property || *o.property == n; };
    if (want("ses")) rep.results.push_back(check_ses(o.seed, o.instances));
    if (want("equivalence")) rep.results.push_back(check_equivalence(o.seed, o.instances));
    if (want("gradient")) rep.results.push_back(check_gradient(o.seed, 10 * o.instances));
    if (want("trotter")) rep.results.push_back(check_trotter(o.seed, o.instances));
    if (want("variational")) rep.results.push_back(check_variational(o.seed, o.instances));
    if (want("e2")) rep.results.push_back(check_e2(o.seed, o.instances));
    return rep;
}

}  // namespace qflow
