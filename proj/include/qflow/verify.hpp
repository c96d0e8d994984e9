#pragma once

#include <qflow/active_space.hpp>
#include <qflow/hamiltonian.hpp>
#include <qflow/integrals.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qflow {

/// Outcome of one property over a batch of generated instances. `worst` is
/// the largest violation measure seen; the property holds iff worst <= tolerance
/// (for the trotter suite, iff every halving ratio lies in [lower, upper]).
struct PropertyResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    double tolerance = 0.0;
    int samples = 0;
    std::string detail;
};

/// max over spaces of || H^eff e^{T_int}|ref> - E_FCI e^{T_int}|ref> ||, with
/// T the cluster analysis of the FCI vector and H^eff built from T_ext.
double ses_residual(const IntegralStore& store, int n_occ_pick, int n_virt_pick);

/// Random 8-spin-orbital, 4-electron model used by the suites.
IntegralStore verify_model(std::uint64_t seed, int instance);

PropertyResult check_ses(std::uint64_t seed, int instances);
PropertyResult check_equivalence(std::uint64_t seed, int instances);
PropertyResult check_gradient(std::uint64_t seed, int samples);
PropertyResult check_trotter(std::uint64_t seed, int instances);
PropertyResult check_variational(std::uint64_t seed, int instances);
PropertyResult check_e2(std::uint64_t seed, int instances);

const std::vector<std::string>& verify_properties();

struct VerifyOptions {
    std::uint64_t seed = 0;
    int instances = 3;
    std::optional<std::string> property;  ///< run only this suite
};

struct VerifyReport {
    std::vector<PropertyResult> results;
    [[nodiscard]] bool passed() const;
    /// One line per property; byte-identical for identical options.
    [[nodiscard]] std::string text() const;
};

/// Throws std::invalid_argument for an unknown property name.
VerifyReport run_verify(const VerifyOptions& options);

}  // namespace qflow
