#ifndef QPGL_DUAL_GREEN_HPP
#define QPGL_DUAL_GREEN_HPP

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qpgl/lattice.hpp"
#include "qpgl/potential.hpp"

namespace qpgl {

// sum over the d components of (Theta_i + k_i . w_i)^2
double diagonal_symbol(const BlockStructure& bs, const Eigen::VectorXd& theta, const MultiIndex& k,
                       const Eigen::VectorXd& omega);

// Finite-volume dual operator h_Lambda(Theta): diagonal from the shifted
// momenta squared, hopping eps * V_{n-n'}. Hermitian by construction.
struct DualMatrix {
    Region region;
    Eigen::MatrixXcd h;
    Eigen::VectorXd theta;
    Eigen::VectorXd omega;
    double eps = 0.0;
    bool offdiag_zero = true;  // no stored hopping entries (eps == 0 or empty support)
};

DualMatrix assemble(const BlockStructure& bs, const Region& region, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& omega, double eps, const PotentialModel& v);

// matrix with coupling lambda and momenta Theta + K k.w; equals K^2 times the
// rescaled dual matrix at (eps, Theta/K)
DualMatrix assemble_physical(const BlockStructure& bs, const Region& region, const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& omega, double lambda, double K, const PotentialModel& v);

struct DecayFit {
    double rate = 0.0;       // rho_fit in |G| ~ e^{intercept - rate * dist}
    double intercept = 0.0;
    double residual = 0.0;   // rms residual of the least-squares fit
    long pairs = 0;
};

struct GreenReport {
    double energy = 0.0;
    int scale_n = 0;
    double rho = 0.0;
    double op_norm = 0.0;     // largest singular value of the inverse
    double sigma_min = 0.0;   // smallest singular value of h - E
    bool near_singular = false;
    bool norm_ok = false;     // ||G|| <= e^{sqrt(N)}
    bool decay_ok = false;    // |G(n,n')| <= e^{-(rho/10)|n-n'|} for |n-n'| >= N/10
    bool ldt_pass = false;
    DecayFit fit;
    std::vector<double> profile;  // max |G| per sup-distance
};

struct GreenResult {
    GreenReport report;
    std::optional<Eigen::MatrixXcd> inverse;
};

struct NearSingularError : std::runtime_error {
    double sigma_min;
    explicit NearSingularError(double s)
        : std::runtime_error("Green's function near singular (sigma_min = " + std::to_string(s) + ")"),
          sigma_min(s) {}
};

// Inverse of (h - E) by Hermitian eigendecomposition, no imaginary
// regularization. If the smallest singular value falls below
// sing_tol_factor * ||h - E|| the report is flagged near_singular and no
// inverse is returned.
GreenResult green(const DualMatrix& hm, double E, int scale_n, double rho, bool want_inverse = true,
                  double sing_tol_factor = 1e-12);

bool ldt_check(const GreenReport& report, int scale_n, double rho);

struct NormProbe {
    double op_norm = 0.0;
    double sigma_min = 0.0;
    bool near_singular = false;
};

// ||(h - E)^{-1}|| from eigenvalues only; cheaper than green() when the
// entrywise profile is not needed
NormProbe green_norm(const DualMatrix& hm, double E, double sing_tol_factor = 1e-12);

// row-major text dump, %.17g
void dump_matrix(const Eigen::MatrixXcd& m, const std::string& path);

}  // namespace qpgl

#endif
