#pragma once

#include <qflow/active_space.hpp>
#include <qflow/common.hpp>
#include <qflow/excitation.hpp>
#include <qflow/fock.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qflow {

enum class AmplitudeTag { Iterative, Background };

std::string to_string(AmplitudeTag tag);

struct Amplitude {
    double value = 0.0;
    AmplitudeTag tag = AmplitudeTag::Iterative;
};

/// Excitation -> amplitude map with a deterministic iteration order.
class AmplitudeStore {
public:
    using Map = std::map<Excitation, Amplitude>;

    void set(const Excitation& e, double value, AmplitudeTag tag = AmplitudeTag::Iterative);
    /// Returns false (and leaves the store unchanged) if the key exists.
    bool insert(const Excitation& e, double value, AmplitudeTag tag = AmplitudeTag::Iterative);
    void erase(const Excitation& e) { map_.erase(e); }

    [[nodiscard]] bool contains(const Excitation& e) const { return map_.count(e) != 0; }
    [[nodiscard]] double value(const Excitation& e) const;
    [[nodiscard]] std::optional<Amplitude> find(const Excitation& e) const;
    [[nodiscard]] std::size_t size() const { return map_.size(); }
    [[nodiscard]] bool empty() const { return map_.empty(); }
    [[nodiscard]] std::vector<Excitation> keys() const;
    [[nodiscard]] std::size_t count(AmplitudeTag tag) const;

    [[nodiscard]] AmplitudeStore internal_to(const ActiveSpace& space) const;
    [[nodiscard]] AmplitudeStore external_to(const ActiveSpace& space) const;

    Map::const_iterator begin() const { return map_.begin(); }
    Map::const_iterator end() const { return map_.end(); }

    friend bool operator==(const AmplitudeStore& a, const AmplitudeStore& b);

private:
    Map map_;
};

/// Non-repetitive union: every key once, valued by the earliest store holding it.
AmplitudeStore store_union(const std::vector<AmplitudeStore>& stores);

/// `rank occ... -> virt... value tag` per line, in store order.
void write_amplitudes(std::ostream& out, const AmplitudeStore& store);
AmplitudeStore read_amplitudes(std::istream& in);

/// Every spin-conserving excitation internal to `space`, rank 1..max_rank,
/// relative to the reference of `basis`.
std::vector<Excitation> space_excitations(const SpinOrbitalBasis& basis, const ActiveSpace& space, int max_rank);

/// Precomputed action of a fixed list of excitations on a determinant basis:
/// for key k, every (source, target, phase) with E_k|source> = phase|target>
/// and target in the basis.
class ExcitationTable {
public:
    struct Link {
        int src;
        int dst;
        int phase;
    };

    ExcitationTable(BasisPtr basis, std::vector<Excitation> keys);

    [[nodiscard]] const BasisPtr& basis() const { return basis_; }
    [[nodiscard]] const std::vector<Excitation>& keys() const { return keys_; }
    [[nodiscard]] const std::vector<Link>& links(std::size_t k) const { return links_[k]; }
    [[nodiscard]] std::optional<std::size_t> index_of(const Excitation& e) const;

    /// sum_k w_k E_k over the basis (weights aligned with keys()).
    [[nodiscard]] SparseMatrix excitation_matrix(const std::vector<double>& weights) const;
    /// sum_k w_k (E_k - E_k^T)
    [[nodiscard]] SparseMatrix sigma_matrix(const std::vector<double>& weights) const;
    /// Weights read from `store`, zero for absent keys.
    [[nodiscard]] std::vector<double> weights(const AmplitudeStore& store) const;
    /// (E_k - E_k^T) v
    [[nodiscard]] Vector apply_generator(std::size_t k, const Vector& v) const;

private:
    BasisPtr basis_;
    std::vector<Excitation> keys_;
    std::vector<std::vector<Link>> links_;
};

/// T = sum t_k E_k over `basis`; keys whose image leaves the basis are dropped.
SparseMatrix excitation_matrix(const AmplitudeStore& store, const DeterminantBasis& basis);
/// sigma = T - T^T, exactly antisymmetric.
SparseMatrix sigma_matrix(const AmplitudeStore& store, const DeterminantBasis& basis);

/// Largest absolute column sum.
double norm1(const SparseMatrix& m);
double norm1(const Matrix& m);

/// exp(m) applied to the columns of `v` by scaled Taylor series. Each
/// sub-step is summed until the next term falls below `tol` relative to the
/// current vector; more than `max_terms` terms raise ConvergenceError.
Matrix exp_action(const SparseMatrix& m, const Matrix& v, double tol = 1e-12, int max_terms = 200);
Matrix exp_action(const Matrix& m, const Matrix& v, double tol = 1e-12, int max_terms = 200);
Vector exp_action(const SparseMatrix& m, const Vector& v, double tol = 1e-12, int max_terms = 200);
Vector exp_action(const Matrix& m, const Vector& v, double tol = 1e-12, int max_terms = 200);

/// exp(t) v for nilpotent t (pure excitation or de-excitation operator):
/// the series is summed until a term vanishes identically.
Matrix exp_nilpotent(const SparseMatrix& t, const Matrix& v);

/// (e^{sigma_ext/N} e^{sigma_int/N})^N |ref>
Vector trotter_state(const SparseMatrix& sigma_int, const SparseMatrix& sigma_ext, int n, const Vector& ref,
                     double tol = 1e-12);

/// Cluster amplitudes with e^T|ref> = c / c_ref, determined rank by rank.
/// Throws std::domain_error when |c_ref| < overlap_tol.
AmplitudeStore cluster_analyze(const StateVector& c, const Determinant& reference, double overlap_tol = 1e-12);

}  // namespace qflow
