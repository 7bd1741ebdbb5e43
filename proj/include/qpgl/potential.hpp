#ifndef QPGL_POTENTIAL_HPP
#define QPGL_POTENTIAL_HPP

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "qpgl/lattice.hpp"

namespace qpgl {

struct NamedModelParams {
    double rho = 0.5;
    int k_cut = 1;
    std::uint64_t seed = 0;
};

struct DecayCheck {
    bool ok = true;
    MultiIndex worst_index;     // index maximizing |V_k| e^{rho |k|}
    double worst_excess = 0.0;  // that maximum; > 1 means the bound fails
};

// Analytic quasi-periodic potential as finitely supported Fourier
// coefficients: zero mean, conjugate-symmetric (V real valued), and
// |V_k| <= e^{-rho |k|} with support in |k| <= k_cut.
class PotentialModel {
public:
    PotentialModel(const BlockStructure& bs, std::map<MultiIndex, std::complex<double>> coeffs,
                   double rho, int k_cut);

    // names: "separable-cosine", "two-cosine-surace", "random-analytic"
    static PotentialModel from_named_model(const std::string& name, const BlockStructure& bs,
                                           const NamedModelParams& params);

    const std::map<MultiIndex, std::complex<double>>& coefficients() const { return coeffs_; }
    std::complex<double> coefficient(const MultiIndex& k) const;
    double rho() const { return rho_; }
    int k_cut() const { return k_cut_; }
    int b() const { return b_; }

    // finite Fourier sum at a torus point (real part; tiny imaginary parts
    // from rounding are checked and discarded)
    double evaluate(const Eigen::VectorXd& theta) const;

    DecayCheck verify_decay(double rho) const;

    double l1_norm() const;  // certified upper bound for sup |V|
    double l2_norm() const;
    // bound on the discarded analytic tail sum_{|k| > k_cut} e^{-rho |k|}
    double tail_bound() const;

    // text table, one "k_1 ... k_b re im" line per stored index
    void save(const std::string& path) const;
    static PotentialModel load(const std::string& path, const BlockStructure& bs);

private:
    std::map<MultiIndex, std::complex<double>> coeffs_;
    double rho_;
    int k_cut_;
    int b_;

    void validate() const;
};

}  // namespace qpgl

#endif
