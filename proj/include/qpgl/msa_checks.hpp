#ifndef QPGL_MSA_CHECKS_HPP
#define QPGL_MSA_CHECKS_HPP

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpgl/dual_green.hpp"
#include "qpgl/lattice.hpp"
#include "qpgl/potential.hpp"

namespace qpgl {

struct PolyBound {
    double C = 1.0;
    double degree = 0.0;  // |Z_k| <= C (1 + |k|)^degree
};

// Finitely supported vector on Z^b; absent entries are zero.
class LatticeVector {
public:
    LatticeVector() = default;
    explicit LatticeVector(std::map<MultiIndex, std::complex<double>> values,
                           std::optional<PolyBound> bound = std::nullopt);

    const std::map<MultiIndex, std::complex<double>>& values() const { return values_; }
    std::complex<double> value(const MultiIndex& k) const;
    const std::optional<PolyBound>& poly_bound() const { return bound_; }

    double sup_abs() const;
    double l1() const;

private:
    std::map<MultiIndex, std::complex<double>> values_;
    std::optional<PolyBound> bound_;
};

// Floquet-Bloch datum: Psi(x) = e^{i Theta.x} sum_k Z_k e^{i k.(theta + x w)}
struct BlochSample {
    Eigen::VectorXd theta_momentum;  // Theta in R^d
    Eigen::VectorXd theta_torus;     // theta in T^b
    double energy = 0.0;
    Region support;
    LatticeVector coefficients;  // supported in `support`
    std::vector<Eigen::VectorXd> x_grid;
};

// Gated verification outcome: conclusions are only asserted when the
// hypotheses verify; both flags are always reported.
struct CheckReport {
    std::string check_name;
    bool hypotheses_hold = false;
    bool conclusions_hold = false;
    bool scale_regime_ok = true;  // the asymptotic scale constraints, recorded only
    std::map<std::string, double> margins;
    std::map<std::string, double> budget;
    std::vector<std::string> notes;
};

// Hypotheses: ||A^{-1}|| <= e^{sqrt N}, off-diagonal decay of A^{-1} at rate
// rho_bar beyond N/10, and |B - A| <= e^{-3 rho_bar N - rho_bar |n-n'|}.
// Conclusions: ||B^{-1}|| <= 2 ||A^{-1}|| and
// |B^{-1}| <= |A^{-1}| + e^{-rho_bar |n-n'|} entrywise.
CheckReport verify_perturbation_bound(const Region& region, const Eigen::MatrixXcd& a,
                                      const Eigen::MatrixXcd& b, double rho_bar, int scale_n);

struct CoveringPatch {
    Region w;
    int scale = 0;  // M
};

// patch_of[i] indexes the patch assigned to the i-th covered point
struct Covering {
    std::vector<CoveringPatch> patches;
    std::vector<int> patch_of;
};

// clamped translated cubes of the given radius, one per point of `cube`,
// skipping (and never touching) the points of `hole`; points within
// `singleton_margin` of the hole get singleton patches
Covering make_cube_covering(const BlockStructure& bs, const Region& cube, int cube_radius,
                            int patch_radius, const Region& hole = Region(), int singleton_margin = -1);

// Local Green bounds ||G_W|| <= 2 e^{sqrt M} with decay 2 e^{-rho_bar d}
// beyond M/10 on every patch imply ||G_Lambda|| <= 4 (2 M1 + 1)^b e^{sqrt M1}.
CheckReport verify_coupling_norm(const BlockStructure& bs, const Region& lambda, double E,
                                 const Eigen::VectorXd& theta, const Eigen::VectorXd& omega, double eps,
                                 const PotentialModel& v, const Covering& covering, int m0, int m1,
                                 double rho_bar);

// Local bounds on a covering of Lambda \ Lambda1 plus ||G_Lambda|| <= e^{sqrt N}
// imply |G_Lambda(n,n')| <= e^{-(rho_bar - C/sqrt(M0)) |n-n'|} beyond N/10.
// Always reports the smallest working C; asserts a user C when given.
CheckReport verify_coupling_decay(const BlockStructure& bs, const Region& lambda, const Region& lambda1,
                                  double E, const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                                  double eps, const PotentialModel& v, const Covering& covering, int m0,
                                  double rho_bar, int scale_n, std::optional<double> c_user = std::nullopt);

// Max over n in Lambda of |Z_n + eps sum G(n,n') V_{n'-n''} Z_{n''}| with n''
// running over the exterior collar within k_cut of Lambda. Z must satisfy the
// lattice equation on Lambda (checked against pre_tol * (1 + sup|Z|)).
double poisson_residual(const BlockStructure& bs, const Region& lambda, double E,
                        const Eigen::VectorXd& theta, const Eigen::VectorXd& omega, double eps,
                        const PotentialModel& v, const LatticeVector& z, double pre_tol = 1e-8);

struct WitnessReport {
    bool refused = false;
    std::string refusal;
    double rhs_bound = 0.0;
    double threshold = 0.0;  // e^{-rho N / 20}
    bool pass = false;
    double delta_gate = 0.0;  // resonance gate width 2 e^{-sqrt N}
    double min_gap = 0.0;     // min |diagonal - E| over the cube
    bool used_neumann = false;
    double neumann_ratio = 0.0;
};

// The eigenvalue-absence witness on the cube [-N,N]^b: gated on Theta being
// outside the resonance set at the width that makes ||G|| <= e^{sqrt N}
// attainable, and on the cube passing the norm/decay thresholds; then the
// boundary sum eps * sum |G(0,n)| |V_{n-n'}| C (1+|n'|)^degree is compared
// against e^{-rho N / 20}.
WitnessReport absence_witness(const BlockStructure& bs, int scale_n, double E, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& omega, double eps, const PotentialModel& v,
                              const PolyBound& bound);

struct DualityReport {
    double residual = 0.0;       // max over the x grid
    double interior_term = 0.0;  // sum over Lambda of the lattice residual
    double boundary_term = 0.0;  // coupling leakage across the boundary collar
    double tail_term = 0.0;      // eps * analytic-tail bound * l1(Z)
    double psi_max = 0.0;        // max |Psi| over the grid
    bool within_budget = false;
};

// Evaluates (-Laplacian + eps V(theta + x w) - E) Psi on the x grid with the
// Laplacian applied termwise; the result is bounded by the three reported
// budget terms by the triangle inequality.
DualityReport duality_residual(const BlockStructure& bs, const BlochSample& sample,
                               const Eigen::VectorXd& omega, double eps, const PotentialModel& v);

struct WindowReport {
    double min_dist = 0.0;   // min over the grid of dist(E, spec(h_Lambda(Theta)))
    double bound = 0.0;      // eps * |V|_max + slack
    double grid_term = 0.0;  // min over the grid of ||Theta_g||^2 - E|
    double trunc_term = 0.0; // coupling mass cut off by the region at the probe row
    bool pass = false;
    Eigen::VectorXd best_theta;
};

// Spectrum near any E >= 0: some eigenvalue of h_Lambda(Theta) over the grid
// lies within eps * |V|_max + slack of E.
WindowReport spectral_window_check(const BlockStructure& bs, double E, const Region& lambda,
                                   const Eigen::VectorXd& omega, double eps, const PotentialModel& v,
                                   const std::vector<Eigen::VectorXd>& theta_grid);

// (lambda, K, E, Theta) -> (eps, E/K^2, Theta/K), with the exact inverse
struct RescaleMap {
    double lambda = 1.0;
    double K = 1.0;

    RescaleMap(double lambda_in, double k_in);
    double eps() const { return lambda / (K * K); }
    double forward_energy(double E) const { return E / (K * K); }
    Eigen::VectorXd forward_theta(const Eigen::VectorXd& theta) const { return theta / K; }
    double inverse_energy(double e_tilde) const { return e_tilde * K * K; }
    Eigen::VectorXd inverse_theta(const Eigen::VectorXd& theta_tilde) const { return theta_tilde * K; }
};

// max |eig(h_physical) - K^2 eig(h_dual)| over the shared region; the exact
// statement of the equivalence between the two lattice equations
double rescale_conjugation_gap(const BlockStructure& bs, const Region& lambda, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& omega, double lambda_coupling, double K,
                               const PotentialModel& v);

}  // namespace qpgl

#endif
