#pragma once

#include <qflow/integrals.hpp>

#include <cstdint>

namespace qflow {

/// Random real Hamiltonian with a well separated occupied/virtual gap.
struct RandomModelOptions {
    int n_orb = 4;
    int n_elec = 4;
    double gap = 1.0;             ///< spacing of the diagonal orbital energies around the Fermi level
    double one_body_noise = 0.05; ///< off-diagonal one-body scale
    double two_body = 0.1;        ///< two-body scale
    /// Choose h so that the reference Fock matrix is exactly diagonal
    /// (canonical orbitals, Brillouin condition holds).
    bool canonical = false;
};

IntegralStore random_model(const RandomModelOptions& options, std::uint64_t seed);

/// Open Hubbard chain at half filling, expressed in the orbitals of the
/// hopping term (ascending orbital energy).
IntegralStore hubbard_chain(int n_sites, double u, double t = 1.0);

/// Two-electron, two-orbital minimal-basis molecule whose integrals keep
/// gerade/ungerade parity, so singles never mix in.
IntegralStore symmetric_dimer();

/// `copies` non-interacting replicas of a closed-shell fragment. Orbitals
/// are ordered occupied of every replica first, then the virtuals, replica
/// by replica.
IntegralStore replicate_fragments(const IntegralStore& fragment, int copies);

}  // namespace qflow
