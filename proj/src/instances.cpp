#include "qpgl/instances.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace qpgl {

namespace {

bool advance_cube(MultiIndex& k, int n) {
    int j = static_cast<int>(k.size()) - 1;
    while (j >= 0 && k[static_cast<std::size_t>(j)] == n) k[static_cast<std::size_t>(j--)] = -n;
    if (j < 0) return false;
    ++k[static_cast<std::size_t>(j)];
    return true;
}

// (Theta, E) with E in [0.05, cap] maximizing the worst diagonal gap;
// `near` sites (if any) are weighted so they clear `near_gap`
struct EnergyPick {
    Eigen::VectorXd theta;
    double energy = 0.0;
    double score = -1.0;
};

EnergyPick pick_energy(const BlockStructure& bs, const Eigen::VectorXd& omega, int n, double base_gap,
                       const std::vector<MultiIndex>& near, double near_gap, double cap,
                       CounterRng& rng) {
    EnergyPick best;
    for (int round = 0; round < 40; ++round) {
        Eigen::VectorXd theta(bs.d);
        for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-2.0, 2.0);
        for (int c = 0; c < 240; ++c) {
            const double e = rng.uniform(0.05, cap);
            double score = min_diagonal_gap(bs, theta, omega, n, e) / base_gap;
            for (const auto& k : near)
                score = std::min(score, std::abs(diagonal_symbol(bs, theta, k, omega) - e) / near_gap);
            if (score > best.score) {
                best.score = score;
                best.energy = e;
                best.theta = theta;
            }
            if (best.score >= 1.5) return best;
        }
    }
    return best;
}

}  // namespace

double min_diagonal_gap(const BlockStructure& bs, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& omega, int N, double E) {
    double best = std::numeric_limits<double>::infinity();
    MultiIndex k(static_cast<std::size_t>(bs.b), -N);
    do {
        best = std::min(best, std::abs(diagonal_symbol(bs, theta, k, omega) - E));
    } while (advance_cube(k, N));
    return best;
}

FirstStepRegime first_step_regime(int N, double c1, int b, double C) {
    FirstStepRegime out;
    out.delta = first_step_delta(N, c1, b, C);
    out.eps = out.delta / (2.0 * std::pow(2.0 * N + 1.0, b));
    return out;
}

Eigen::VectorXd sample_theta_outside(const BlockStructure& bs, int N, double gap, double E,
                                     const Eigen::VectorXd& omega, double box, CounterRng& rng,
                                     int max_tries) {
    for (int t = 0; t < max_tries; ++t) {
        Eigen::VectorXd theta(bs.d);
        for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-box, box);
        if (min_diagonal_gap(bs, theta, omega, N, E) >= gap) return theta;
    }
    throw std::runtime_error("sample_theta_outside: no admissible Theta found");
}

Eigen::VectorXd sample_omega(const BlockStructure& bs, CounterRng& rng) {
    Eigen::VectorXd w(bs.b);
    for (int i = 0; i < bs.b; ++i) w[i] = rng.uniform(0.0, 2.0 * M_PI);
    return w;
}

GateEnergy pick_gate_energy(const BlockStructure& bs, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& omega, const std::vector<int>& scales, double lo,
                            double hi, CounterRng& rng, int candidates) {
    GateEnergy best;
    best.score = -1.0;
    for (int c = 0; c < candidates; ++c) {
        const double e = rng.uniform(lo, hi);
        double score = std::numeric_limits<double>::infinity();
        for (int n : scales) {
            const double gate = 2.0 * std::exp(-std::sqrt(static_cast<double>(n)));
            score = std::min(score, min_diagonal_gap(bs, theta, omega, n, e) / gate);
        }
        if (score > best.score) {
            best.score = score;
            best.energy = e;
        }
        if (best.score >= 2.0) break;
    }
    return best;
}

Region origin_cube(const BlockStructure& bs, int n) {
    return enumerate_region(bs, RegionDescriptor(MultiIndex(static_cast<std::size_t>(bs.b), 0), n,
                                                 std::vector<Restriction>(static_cast<std::size_t>(bs.b),
                                                                          Restriction::None)));
}

GateInstance sample_gate_instance(const BlockStructure& bs, const std::vector<int>& scales,
                                  double theta_box, double e_lo, double e_hi, CounterRng& rng,
                                  int max_rounds) {
    GateInstance out;
    Eigen::VectorXd omega = sample_omega(bs, rng);
    for (int round = 0; round < max_rounds; ++round) {
        if (round > 0 && round % 40 == 0) omega = sample_omega(bs, rng);
        Eigen::VectorXd theta(bs.d);
        for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-theta_box, theta_box);
        const GateEnergy ge = pick_gate_energy(bs, theta, omega, scales, e_lo, e_hi, rng);
        if (ge.score > out.score) {
            out.score = ge.score;
            out.omega = omega;
            out.theta = theta;
            out.energy = ge.energy;
        }
        if (out.score >= 1.05) return out;
    }
    throw std::runtime_error("sample_gate_instance: no admissible (omega, Theta, E) found");
}

PerturbationInstance make_perturbation_instance(const BlockStructure& bs, const PotentialModel& v,
                                                int scale_n, double rho_bar, std::uint64_t seed,
                                                double pert_scale) {
    CounterRng rng(seed, 0x7065ULL);
    PerturbationInstance out;
    out.scale_n = scale_n;
    out.rho_bar = rho_bar;
    out.region = origin_cube(bs, scale_n);

    const double eps = 1e-6;
    Eigen::VectorXd omega = sample_omega(bs, rng);
    Eigen::VectorXd theta(bs.d);
    double energy = 0.0;
    for (int tries = 0;; ++tries) {
        if (tries >= 300) throw std::runtime_error("make_perturbation_instance: no separated energy found");
        if (tries > 0 && tries % 15 == 0) omega = sample_omega(bs, rng);
        for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-3.0, 3.0);
        const GateEnergy ge = pick_gate_energy(bs, theta, omega, {scale_n}, 0.05, 3.0, rng);
        if (ge.score >= 1.05) {
            energy = ge.energy;
            break;
        }
    }

    const DualMatrix hm = assemble(bs, out.region, theta, omega, eps, v);
    out.a = hm.h - energy * Eigen::MatrixXcd::Identity(out.region.size(), out.region.size());

    out.b = out.a;
    const int n = out.region.size();
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const int d = sup_dist(out.region.point(i), out.region.point(j));
            const double cap = std::exp(-3.0 * rho_bar * scale_n - rho_bar * d);
            const double mag = rng.uniform(0.2, 0.9) * pert_scale * cap;
            if (i == j) {
                out.b(i, i) += mag;
            } else {
                const double ph = rng.uniform(0.0, 2.0 * M_PI);
                const std::complex<double> p(mag * std::cos(ph), mag * std::sin(ph));
                out.b(i, j) += p;
                out.b(j, i) += std::conj(p);
            }
        }
    }
    return out;
}

CouplingInstance make_coupling_norm_instance(const BlockStructure& bs, const PotentialModel& v, int scale_n,
                                             int patch_radius, double eps, std::uint64_t seed) {
    CounterRng rng(seed, 0x636FULL);
    CouplingInstance out;
    out.scale_n = scale_n;
    out.eps = eps;
    out.m0 = patch_radius;
    out.m1 = patch_radius;
    out.lambda = origin_cube(bs, scale_n);
    // local norm bound 2 e^{sqrt M} needs diagonal gaps above e^{-sqrt M} / 2
    const double need =
        0.75 * std::exp(-std::sqrt(static_cast<double>(patch_radius))) + 2.0 * eps * v.l1_norm();
    EnergyPick pick;
    for (int w = 0; w < 10 && pick.score < 1.0; ++w) {
        out.omega = sample_omega(bs, rng);
        pick = pick_energy(bs, out.omega, scale_n, need, {}, need, 4.0, rng);
    }
    if (pick.score < 1.0)
        throw std::runtime_error("make_coupling_norm_instance: no well-separated energy found");
    out.theta = pick.theta;
    out.energy = pick.energy;
    out.covering = make_cube_covering(bs, out.lambda, scale_n, patch_radius);
    return out;
}

CouplingInstance make_coupling_decay_instance(const BlockStructure& bs, const PotentialModel& v, int scale_n,
                                              int patch_radius, double eps, std::uint64_t seed,
                                              bool with_hole) {
    CounterRng rng(seed, 0x6465ULL);
    CouplingInstance out;
    out.scale_n = scale_n;
    out.eps = eps;
    out.m0 = 0;
    out.m1 = patch_radius;
    out.lambda = origin_cube(bs, scale_n);

    // a clamped radius-m patch would contain the origin exactly when |n| <= m
    const int hug_margin = patch_radius;
    std::vector<MultiIndex> near_sites;
    if (with_hole) {
        out.lambda1 = Region({MultiIndex(static_cast<std::size_t>(bs.b), 0)});
        MultiIndex k(static_cast<std::size_t>(bs.b), -(hug_margin + 1));
        do {
            if (sup_norm(k) > 0) near_sites.push_back(k);
        } while (advance_cube(k, hug_margin + 1));
    }
    // factor-1 bounds: radius-m patches need gaps above e^{-sqrt m}, the
    // radius-1 hole-hugging patches above 1/e
    const double base_need =
        1.1 * std::exp(-std::sqrt(static_cast<double>(patch_radius))) + 2.0 * eps * v.l1_norm();
    const double near_need = 1.1 * std::exp(-1.0) + 2.0 * eps * v.l1_norm();
    EnergyPick pick;
    for (int w = 0; w < 10 && pick.score < 1.0; ++w) {
        out.omega = sample_omega(bs, rng);
        pick = pick_energy(bs, out.omega, scale_n, base_need, near_sites, near_need, 3.0, rng);
    }
    if (pick.score < 1.0)
        throw std::runtime_error("make_coupling_decay_instance: no well-separated energy found");
    out.theta = pick.theta;
    out.energy = pick.energy;
    out.covering =
        make_cube_covering(bs, out.lambda, scale_n, patch_radius, out.lambda1, with_hole ? hug_margin : -1);
    out.m0 = 0;
    return out;
}

EigenpairSample make_poisson_instance(const BlockStructure& bs, const PotentialModel& v, int inner_n,
                                      std::uint64_t seed, double gap_min) {
    CounterRng rng(seed, 0x706FULL);
    EigenpairSample out;
    const int outer_n = inner_n + 2 * v.k_cut();
    out.large = origin_cube(bs, outer_n);
    out.omega = sample_omega(bs, rng);
    out.theta = Eigen::VectorXd::Zero(bs.d);
    for (int i = 0; i < bs.d; ++i) out.theta[i] = rng.uniform(-2.0, 2.0);
    out.eps = rng.uniform(1e-4, 1e-2);

    const DualMatrix hl = assemble(bs, out.large, out.theta, out.omega, out.eps, v);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hl.h);
    if (es.info() != Eigen::Success) throw std::runtime_error("make_poisson_instance: eigensolve failed");

    const Region inner = origin_cube(bs, inner_n);
    const DualMatrix hi = assemble(bs, inner, out.theta, out.omega, out.eps, v);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ei(hi.h, Eigen::EigenvaluesOnly);

    // eigenvalue well separated from the inner spectrum keeps G_inner tame
    int pick = -1;
    double best = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double d = (ei.eigenvalues().array() - es.eigenvalues()[i]).abs().minCoeff();
        if (d > best) {
            best = d;
            pick = i;
        }
        if (d >= gap_min && i > es.eigenvalues().size() / 4) break;  // prefer interior of the spectrum
    }
    if (pick < 0 || best < gap_min)
        throw std::runtime_error("make_poisson_instance: no well-separated eigenvalue");

    out.energy = es.eigenvalues()[pick];
    std::map<MultiIndex, std::complex<double>> vals;
    for (int i = 0; i < out.large.size(); ++i) vals[out.large.point(i)] = es.eigenvectors()(i, pick);
    out.z = LatticeVector(std::move(vals));
    return out;
}

DualitySample make_bloch_sample(const BlockStructure& bs, const PotentialModel& v, int cube_n, double eps,
                                std::uint64_t seed, int x_count) {
    CounterRng rng(seed, 0x626CULL);
    DualitySample out;
    out.eps = eps;
    out.omega = sample_omega(bs, rng);
    BlochSample& s = out.sample;
    s.support = origin_cube(bs, cube_n);
    s.theta_momentum = Eigen::VectorXd(bs.d);
    for (int i = 0; i < bs.d; ++i) s.theta_momentum[i] = rng.uniform(-1.5, 1.5);
    s.theta_torus = Eigen::VectorXd(bs.b);
    for (int i = 0; i < bs.b; ++i) s.theta_torus[i] = rng.uniform(0.0, 2.0 * M_PI);

    const DualMatrix hm = assemble(bs, s.support, s.theta_momentum, out.omega, eps, v);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hm.h);
    if (es.info() != Eigen::Success) throw std::runtime_error("make_bloch_sample: eigensolve failed");
    const int pick = static_cast<int>(rng.uniform_int(0, s.support.size() - 1));
    s.energy = es.eigenvalues()[pick];
    std::map<MultiIndex, std::complex<double>> vals;
    for (int i = 0; i < s.support.size(); ++i) vals[s.support.point(i)] = es.eigenvectors()(i, pick);
    s.coefficients = LatticeVector(std::move(vals));

    s.x_grid.reserve(static_cast<std::size_t>(x_count));
    for (int i = 0; i < x_count; ++i) {
        Eigen::VectorXd x(bs.d);
        for (int j = 0; j < bs.d; ++j) x[j] = rng.uniform(-2.0, 2.0);
        s.x_grid.push_back(std::move(x));
    }
    return out;
}

}  // namespace qpgl
