#pragma once

#include <qflow/common.hpp>
#include <qflow/fock.hpp>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace qflow {

/// One- and two-electron integrals over real spatial orbitals (Hartree).
///
/// Two-electron integrals are held in chemist notation (pq|rs) as a dense
/// n^4 array with all eight permutational images filled. Spin-orbital
/// accessors use the interleaved convention of fock.hpp.
struct IntegralStore {
    int n_orb = 0;
    int n_elec = 0;
    int ms2 = 0;
    double e_core = 0.0;
    Matrix h;
    std::vector<double> g;

    static IntegralStore zeros(int n_orb, int n_elec, int ms2 = 0);

    [[nodiscard]] int n_alpha() const { return (n_elec + ms2) / 2; }
    [[nodiscard]] int n_beta() const { return (n_elec - ms2) / 2; }
    [[nodiscard]] SpinOrbitalBasis basis() const { return {n_orb, n_alpha(), n_beta()}; }

    [[nodiscard]] std::size_t eri_index(int p, int q, int r, int s) const {
        const auto n = static_cast<std::size_t>(n_orb);
        return ((static_cast<std::size_t>(p) * n + q) * n + r) * n + s;
    }
    /// (pq|rs)
    [[nodiscard]] double eri(int p, int q, int r, int s) const { return g[eri_index(p, q, r, s)]; }
    /// Writes (pq|rs) and its seven symmetry images.
    void set_eri(int p, int q, int r, int s, double value);
    void set_h(int p, int q, double value) {
        h(p, q) = value;
        h(q, p) = value;
    }

    /// <p|h|q> over spin orbitals.
    [[nodiscard]] double one_body(int p, int q) const {
        return spin_of(p) == spin_of(q) ? h(spatial_of(p), spatial_of(q)) : 0.0;
    }
    /// <pq|rs> over spin orbitals (physicist notation).
    [[nodiscard]] double coulomb(int p, int q, int r, int s) const {
        if (spin_of(p) != spin_of(r) || spin_of(q) != spin_of(s)) return 0.0;
        return eri(spatial_of(p), spatial_of(r), spatial_of(q), spatial_of(s));
    }
    /// <pq||rs> = <pq|rs> - <pq|sr> over spin orbitals.
    [[nodiscard]] double antisym(int p, int q, int r, int s) const {
        return coulomb(p, q, r, s) - coulomb(p, q, s, r);
    }

    [[nodiscard]] bool has_two_body() const;
    /// Largest violation of h = h^T and the 8-fold (pq|rs) symmetry.
    [[nodiscard]] double symmetry_defect() const;
    /// Largest absolute field-wise difference; infinity on shape mismatch.
    [[nodiscard]] double max_difference(const IntegralStore& other) const;
};

/// Failure while reading an integral file.
class IntegralParseError : public std::runtime_error {
public:
    enum class Kind { Malformed, Consistency, Header, Shape };
    IntegralParseError(Kind kind, int line, const std::string& what);

    [[nodiscard]] Kind kind() const { return kind_; }
    /// 1-based line number, 0 when not tied to a line.
    [[nodiscard]] int line() const { return line_; }

private:
    Kind kind_;
    int line_;
};

/// FCIDUMP text: Fortran namelist header (`&FCI ... &END` or `/`) followed by
/// `value i j k l` records with 1-based orbital indices.
IntegralStore parse_fcidump(std::istream& in);
IntegralStore parse_fcidump(std::string_view text);
IntegralStore read_fcidump(const std::string& path);
/// Emits symmetry-unique nonzero (ij|kl), the lower triangle of h (diagonal
/// always), then the core energy, in a fixed order.
std::string serialize_fcidump(const IntegralStore& store);

/// JSON object `{n_orb, n_elec, ms2, e_core, h:[[..]], g:[[[[..]]]]}`.
IntegralStore parse_synthetic(std::string_view text);
std::string serialize_synthetic(const IntegralStore& store);

}  // namespace qflow
