#ifndef QPGL_INSTANCES_HPP
#define QPGL_INSTANCES_HPP

#include <cstdint>

#include "qpgl/msa_checks.hpp"
#include "qpgl/resonance.hpp"
#include "qpgl/rng.hpp"

namespace qpgl {

// Seeded instance builders shared by the CLI suites, the self test and the
// acceptance runs.

// delta and the matching admissible coupling eps = delta / (2 (2N+1)^b)
struct FirstStepRegime {
    double delta = 0.0;
    double eps = 0.0;
};
FirstStepRegime first_step_regime(int N, double c1, int b, double C);

// smallest |diagonal_symbol - E| over the cube |k| <= N
double min_diagonal_gap(const BlockStructure& bs, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& omega, int N, double E);

// Theta drawn uniformly in [-box, box]^d until every |k| <= N keeps the
// diagonal symbol at least `gap` away from E
Eigen::VectorXd sample_theta_outside(const BlockStructure& bs, int N, double gap, double E,
                                     const Eigen::VectorXd& omega, double box, CounterRng& rng,
                                     int max_tries = 20000);

Eigen::VectorXd sample_omega(const BlockStructure& bs, CounterRng& rng);

// Energy in [lo, hi] maximizing the worst diagonal margin across the given
// cube scales, scored against the e^{sqrt N}-threshold gate width
// 2 e^{-sqrt N}. A score above 1 clears every gate.
struct GateEnergy {
    double energy = 0.0;
    double score = 0.0;
};
GateEnergy pick_gate_energy(const BlockStructure& bs, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& omega, const std::vector<int>& scales, double lo,
                            double hi, CounterRng& rng, int candidates = 240);

// (omega, Theta, E) with E clearing the e^{sqrt N} norm gate on every listed
// cube scale; Theta is redrawn and, when a frequency is hopeless, omega too
struct GateInstance {
    Eigen::VectorXd omega;
    Eigen::VectorXd theta;
    double energy = 0.0;
    double score = 0.0;
};
GateInstance sample_gate_instance(const BlockStructure& bs, const std::vector<int>& scales,
                                  double theta_box, double e_lo, double e_hi, CounterRng& rng,
                                  int max_rounds = 600);

// full cube of radius n centered at the origin
Region origin_cube(const BlockStructure& bs, int n);

struct PerturbationInstance {
    Region region;
    Eigen::MatrixXcd a;
    Eigen::MatrixXcd b;
    double rho_bar = 0.5;
    int scale_n = 0;
};

// A = h_Lambda(Theta) - E in the perturbative regime, B = A plus a random
// Hermitian perturbation at pert_scale times the admissible size
PerturbationInstance make_perturbation_instance(const BlockStructure& bs, const PotentialModel& v,
                                                int scale_n, double rho_bar, std::uint64_t seed,
                                                double pert_scale = 1.0);

struct CouplingInstance {
    Region lambda;
    Region lambda1;
    Covering covering;
    Eigen::VectorXd theta;
    Eigen::VectorXd omega;
    double energy = 0.0;
    double eps = 0.0;
    int m0 = 0;
    int m1 = 0;
    int scale_n = 0;
};

// cube of radius N covered by clamped radius-m cubes, energy placed in a
// spectral gap so the local Green bounds hold
CouplingInstance make_coupling_norm_instance(const BlockStructure& bs, const PotentialModel& v, int scale_n,
                                             int patch_radius, double eps, std::uint64_t seed);

// same with an optional single-point hole at the origin (singleton patches
// nearby), matching the decay-propagation hypotheses
CouplingInstance make_coupling_decay_instance(const BlockStructure& bs, const PotentialModel& v, int scale_n,
                                              int patch_radius, double eps, std::uint64_t seed,
                                              bool with_hole);

struct EigenpairSample {
    LatticeVector z;      // eigenvector of h over the larger region
    double energy = 0.0;  // its eigenvalue
    Region large;         // the region it was solved on
    Eigen::VectorXd theta;
    Eigen::VectorXd omega;
    double eps = 0.0;
};

// eigenpair of h on the radius-(n + 2 k_cut) cube whose eigenvalue stays
// `gap_min` away from the spectrum of the inner radius-n cube
EigenpairSample make_poisson_instance(const BlockStructure& bs, const PotentialModel& v, int inner_n,
                                      std::uint64_t seed, double gap_min = 1e-2);

struct DualitySample {
    BlochSample sample;
    Eigen::VectorXd omega;
    double eps = 0.0;
};

// Floquet-Bloch sample built from an eigenvector of h_Lambda(Theta)
DualitySample make_bloch_sample(const BlockStructure& bs, const PotentialModel& v, int cube_n, double eps,
                                std::uint64_t seed, int x_count);

}  // namespace qpgl

#endif
