#pragma once

#include <qflow/active_space.hpp>
#include <qflow/cluster.hpp>
#include <qflow/downfolding.hpp>
#include <qflow/hamiltonian.hpp>
#include <qflow/integrals.hpp>
#include <qflow/perturbative.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qflow {

enum class FlowMode { Qflow, Subflow, Ccflow, Bloch };

std::string to_string(FlowMode m);

struct FlowConfig {
    FlowMode mode = FlowMode::Qflow;
    int n_occ_pick = 2;   ///< occupied spatial orbitals per space (ne = 2 * n_occ_pick)
    int n_virt_pick = 2;  ///< virtual spatial orbitals per space (no = n_occ_pick + n_virt_pick)
    int cycles_max = 50;
    double eta = 0.1;
    double energy_tol = 1e-8;  ///< Hartree; 0 runs exactly cycles_max cycles
    double grad_tol = 0.0;     ///< stop once every gradient norm of a cycle is below this; 0 disables
    int trotter_rank = 1;      ///< rank of the product formula used for the reported global energy
    HeffMethod heff = HeffMethod::ExactUnitary;  ///< ExactUnitary or Bch
    int bch_order = 4;
    std::optional<double> select_threshold;  ///< Hartree, on |dE| of the selection cycle
    std::optional<int> select_topk;
    int selection_cycle = 1;
    bool background = true;        ///< second-order triples outside every space
    bool restrict_triples = false; ///< background triples only over orbitals active in some flow space
    int max_rank = 3;              ///< highest iterative excitation rank (qflow/subflow)
    double dgen_tol = 1e-6;
    std::uint64_t seed = 0;
    bool jacobi = false;
    int threads = 0;               ///< Jacobi workers; 0 = hardware concurrency
    bool spot_check = false;       ///< finite-difference check of one random gradient component per cycle
    std::optional<double> reference_energy;  ///< enables the lower divergence guard
    int bloch_order = 2;
    double amplitude_tol = 1e-10;  ///< ccflow fixed-point tolerance on amplitude changes
    bool dry_run = false;          ///< enumerate spaces and parameters only

    void validate() const;
};

/// One space of the flow with its CAS machinery.
struct FlowSpace {
    ActiveSpace space;
    BasisPtr cas;
    std::vector<Excitation> internal;  ///< internal keys, Excitation order
    std::vector<Excitation> owned;     ///< internal keys this space optimises
    double importance = 0.0;           ///< CAS-projection correlation energy (Hartree)
};

struct StepRecord {
    int cycle = 0;
    int space_id = 0;
    std::string space_label;
    int step = 0;
    double e_before = 0.0;
    double e_after = 0.0;
    double delta_e = 0.0;
    double grad_norm = 0.0;
    int params = 0;
};

struct SpotCheck {
    int cycle = 0;
    int space_id = 0;
    std::string key;
    double analytic = 0.0;
    double finite_difference = 0.0;
    double relative_error = 0.0;
};

struct FlowTrace {
    std::vector<StepRecord> records;
    std::vector<double> cycle_energies;  ///< main-space E_after per cycle
    bool jacobi = false;
};

struct FlowState {
    AmplitudeStore amplitudes;
    std::vector<FlowSpace> spaces;  ///< importance order; after selection only the selected ones
    int cycle = 0;
    double energy = 0.0;
};

struct FlowResult {
    double energy = 0.0;
    bool converged = false;
    int cycles = 0;
    FlowState state;
    FlowTrace trace;
    std::size_t total_spaces = 0;
    std::size_t parameters_optimized = 0;
    std::size_t background_parameters = 0;
    std::vector<int> selected_spaces;
    int main_space = -1;
    double trotter_energy = 0.0;
    std::optional<double> equivalence_residual;
    std::optional<double> functional_energy;
    std::vector<SpotCheck> spot_checks;
    std::vector<std::string> degeneracy_log;
};

/// Raised when the energy becomes non-finite, falls more than 1 Hartree
/// below the configured reference energy, rises more than 1 Hartree above a
/// space's starting energy, or an amplitude exceeds 100.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Descending correlation strength: ascending CAS-projection correlation
/// energy (quantised to 1e-10 Hartree), ties by id. Fills `importance`.
std::vector<FlowSpace> importance_order(const IntegralStore& store, const std::vector<ActiveSpace>& spaces,
                                        int max_rank);

/// Assigns every key to the first space containing it.
void assign_ownership(std::vector<FlowSpace>& spaces);

/// Ids of the spaces selected from the records of one cycle: |dE| >= threshold
/// or the top_k largest |dE|, ties by id. Throws std::invalid_argument when
/// a threshold selects nothing.
std::vector<int> select_subflow(const FlowTrace& trace, int cycle, std::optional<double> threshold,
                                std::optional<int> top_k);

/// Single gradient step on one space.
struct GradientStep {
    Vector theta;       ///< updated internal parameters, aligned with the space's internal keys
    double e_before = 0.0;
    double e_after = 0.0;
    Vector gradient;    ///< aligned with internal keys, zero for keys not owned
    double grad_norm = 0.0;
};

/// <Psi|[H^eff, tau_k]|Psi> for all internal keys, Psi = e^{sigma_int(theta)}|ref>.
Vector commutator_gradient(const Matrix& heff, const ExcitationTable& cas_table, const Vector& theta);
/// <Psi|H^eff|Psi>
double internal_energy(const Matrix& heff, const ExcitationTable& cas_table, const Vector& theta);
/// theta_k -= eta g_k for the keys with mask_k true.
GradientStep gradient_step(const Matrix& heff, const ExcitationTable& cas_table, const Vector& theta,
                           const std::vector<bool>& owned_mask, double eta);

/// Driver for all flow modes over one integral store.
class FlowEngine {
public:
    FlowEngine(std::shared_ptr<const IntegralStore> store, FlowConfig config);

    FlowResult run();

    [[nodiscard]] const FlowConfig& config() const { return config_; }
    [[nodiscard]] const BasisPtr& sector();
    [[nodiscard]] const HamiltonianMatrix& hamiltonian();

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
    FlowConfig config_;
};

FlowResult run_qflow(const IntegralStore& store, FlowConfig config);
FlowResult run_subflow(const IntegralStore& store, FlowConfig config);
FlowResult run_ccflow_nonhermitian(const IntegralStore& store, FlowConfig config);

}  // namespace qflow
