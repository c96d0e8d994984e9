#include <qflow/models.hpp>

#include <Eigen/Eigenvalues>

#include <random>
#include <stdexcept>

namespace qflow {

IntegralStore random_model(const RandomModelOptions& o, std::uint64_t seed) {
    if (o.n_elec % 2 != 0 || o.n_elec > 2 * o.n_orb) throw InvalidSector("random_model needs a closed shell");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = o.n_orb;
    const int n_occ = o.n_elec / 2;
    IntegralStore s = IntegralStore::zeros(n, o.n_elec, 0);

    Vector eps(n);
    for (int p = 0; p < n; ++p) eps(p) = o.gap * (p - n_occ + 0.5) + 0.1 * o.gap * u(rng);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q <= p; ++q)
            for (int r = 0; r < n; ++r)
                for (int t = 0; t <= r; ++t) {
                    if (p * n + q < r * n + t) continue;
                    double v = o.two_body * 0.5 * u(rng);
                    if (p == q && r == t) v += o.two_body * (1.5 + 0.25 * u(rng));
                    s.set_eri(p, q, r, t, v);
                }

    for (int p = 0; p < n; ++p) {
        s.h(p, p) = eps(p);
        for (int q = 0; q < p; ++q) s.set_h(p, q, o.one_body_noise * u(rng));
    }
    if (o.canonical) {
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) {
                double mean_field = 0.0;
                for (int c = 0; c < n_occ; ++c) mean_field += 2 * s.eri(p, q, c, c) - s.eri(p, c, c, q);
                s.h(p, q) = (p == q ? eps(p) : 0.0) - mean_field;
            }
    }
    s.e_core = 0.25 * u(rng);
    return s;
}

IntegralStore hubbard_chain(int n_sites, double u, double t) {
    if (n_sites < 2 || n_sites % 2 != 0) throw InvalidSector("hubbard_chain needs an even number of sites");
    Matrix hop = Matrix::Zero(n_sites, n_sites);
    for (int i = 0; i + 1 < n_sites; ++i) hop(i, i + 1) = hop(i + 1, i) = -t;
    Eigen::SelfAdjointEigenSolver<Matrix> es(hop);
    Matrix c = es.eigenvectors();
    for (int k = 0; k < n_sites; ++k) {
        Eigen::Index lead = 0;
        while (std::abs(c(lead, k)) < 1e-12) ++lead;
        if (c(lead, k) < 0) c.col(k) = -c.col(k);
    }
    IntegralStore s = IntegralStore::zeros(n_sites, n_sites, 0);
    for (int p = 0; p < n_sites; ++p) s.h(p, p) = es.eigenvalues()(p);
    for (int p = 0; p < n_sites; ++p)
        for (int q = 0; q < n_sites; ++q)
            for (int r = 0; r < n_sites; ++r)
                for (int w = 0; w < n_sites; ++w) {
                    double v = 0.0;
                    for (int i = 0; i < n_sites; ++i) v += c(i, p) * c(i, q) * c(i, r) * c(i, w);
                    s.g[s.eri_index(p, q, r, w)] = u * v;
                }
    return s;
}

IntegralStore symmetric_dimer() {
    IntegralStore s = IntegralStore::zeros(2, 2, 0);
    s.h(0, 0) = -1.2528;
    s.h(1, 1) = -0.4756;
    s.set_eri(0, 0, 0, 0, 0.6746);
    s.set_eri(1, 1, 1, 1, 0.6975);
    s.set_eri(0, 0, 1, 1, 0.6636);
    s.set_eri(0, 1, 0, 1, 0.1813);
    s.e_core = 0.7137;
    return s;
}

IntegralStore replicate_fragments(const IntegralStore& f, int copies) {
    if (f.ms2 != 0 || f.n_elec % 2 != 0) throw InvalidSector("replicate_fragments needs a closed-shell fragment");
    if (copies < 1 || copies * f.n_orb > kMaxSpatialOrbitals) throw std::invalid_argument("bad replica count");
    const int n_occ = f.n_elec / 2;
    const int n_virt = f.n_orb - n_occ;
    auto map = [&](int copy, int p) {
        return p < n_occ ? copy * n_occ + p : copies * n_occ + copy * n_virt + (p - n_occ);
    };
    IntegralStore s = IntegralStore::zeros(copies * f.n_orb, copies * f.n_elec, 0);
    s.e_core = copies * f.e_core;
    for (int c = 0; c < copies; ++c)
        for (int p = 0; p < f.n_orb; ++p)
            for (int q = 0; q < f.n_orb; ++q) {
                s.h(map(c, p), map(c, q)) = f.h(p, q);
                for (int r = 0; r < f.n_orb; ++r)
                    for (int t = 0; t < f.n_orb; ++t)
                        s.g[s.eri_index(map(c, p), map(c, q), map(c, r), map(c, t))] = f.eri(p, q, r, t);
            }
    return s;
}

}  // namespace qflow
