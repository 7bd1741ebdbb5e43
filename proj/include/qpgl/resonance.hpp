#ifndef QPGL_RESONANCE_HPP
#define QPGL_RESONANCE_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpgl/dual_green.hpp"
#include "qpgl/lattice.hpp"
#include "qpgl/potential.hpp"
#include "qpgl/rng.hpp"

namespace qpgl {

// First-step resonance set X_N: momenta Theta for which some |k| <= N brings
// the diagonal symbol delta-close to the energy.
struct ResonanceSpec {
    BlockStructure bs;
    int N = 0;
    double delta = 0.0;
    double E = 0.0;
    Eigen::VectorXd omega;

    ResonanceSpec(BlockStructure structure, int scale, double width, double energy, Eigen::VectorXd freq);
};

struct ResonanceHit {
    bool in_set = false;
    MultiIndex witness;   // first offender in lexicographic order
    double value = 0.0;   // |symbol - E| at the witness
};

ResonanceHit in_resonance(const Eigen::VectorXd& theta, const ResonanceSpec& spec);

// Exact 1-D section of X_N along coordinate j (0-based): a merged union of
// closed-form intervals with endpoints +-sqrt(s_k +- delta).
std::vector<std::pair<double, double>> section_intervals(int j, const Eigen::VectorXd& theta_rest,
                                                         const ResonanceSpec& spec);
double section_measure(int j, const Eigen::VectorXd& theta_rest, const ResonanceSpec& spec);

// width that makes the section-measure bound equal e^{-N^{c1}}
double first_step_delta(int N, double c1, int b, double C);

// Scale bookkeeping for the induction: N1(N) ~ (log N)^{2/c1},
// N2(N) ~ N1^{2/c1}, and the admissible energy window of half-width
// |log eps|^{1/(2 c1)}.
struct ScaleSchedule {
    double c1 = 0.2;
    double c2 = 0.3;
    double c3 = 0.6;
    double c4 = 0.9;
    double C = 4.0;
    int N0 = 3;
    double eps = 1e-8;
    // the (log N)^{2/c1} formula only drops below N at astronomically large
    // N when c1 < 1/4, so desk-scale runs pin N1 explicitly (0 = formula)
    int n1_override = 0;

    void validate() const;
    bool xn_constraint_ok() const { return c1 < c3 / 10.0; }
    int N1(int N) const;
    long long N2(int N) const;
    double energy_halfwidth() const;
};

struct ScanRecord {
    int M = 0;
    long annulus_size = 0;
    long failures = 0;
    std::optional<MultiIndex> first_failure;
};

struct DoubleResonanceScan {
    std::optional<int> M;  // first annulus radius with zero failures
    std::vector<ScanRecord> records;
    double delta = 0.0;
    int N1 = 0;
};

// Scans M strictly between N^{c3}/10 and 10 N^{c4} for an annulus
// [-M,M]^b \ [-M^{1/10b},M^{1/10b}]^b on which no shifted momentum
// Theta + k.w re-enters X_{N1}.
DoubleResonanceScan double_resonance_scan(const Eigen::VectorXd& theta, double E, const Frequency& omega,
                                          int N, const ScaleSchedule& sched, const BlockStructure& bs,
                                          double delta_override = 0.0);

struct FarFieldCheck {
    bool applicable = false;  // requires |y| > 200 b N^2
    bool ok = false;
    std::optional<MultiIndex> witness;
    double min_restricted = 0.0;  // min over tested k of the I-block sum minus E
    double min_full = 0.0;
    double required = 0.0;  // N^4
};

// Large shifts on a block subset push the diagonal symbol at least N^4 away
// from the energy for every tested k.
FarFieldCheck no_resonance_far_field(const BlockStructure& bs, const Eigen::VectorXd& theta, double E,
                                     const Frequency& omega, int N, const std::vector<int>& block_subset,
                                     const Eigen::VectorXd& y, int k_range);

struct CartanSample {
    double y = 0.0;
    double norm = 0.0;  // ||G_Lambda|| at (y, Theta_j^not); inf if near singular
    bool is_bad = false;
};

struct CartanProbe {
    double estimate = 0.0;         // bad fraction times interval length
    double interval_length = 0.0;  // 2 e^{-10 rho N1}
    double threshold = 0.0;        // e^{sqrt(Ntilde)}
    double wilson_lo = 0.0;        // 95% interval on the measure estimate
    double wilson_hi = 0.0;
    long samples = 0;
    long bad = 0;
    std::vector<CartanSample> trace;
    std::string note;
};

// Monte-Carlo measure estimate of the bad set Y_Theta: y near Theta_j where
// ||G_Lambda(E; (y, Theta_j^not))|| >= e^{sqrt(Ntilde)}. Near-singular draws
// count as bad. The covering/resonance hypotheses behind the Cartan bound
// are the caller's responsibility and are only recorded in the note.
CartanProbe cartan_probe(const BlockStructure& bs, const Region& lambda, const Region& lambda_bar,
                         const Eigen::VectorXd& theta, int j, double E, const Frequency& omega, double eps,
                         const PotentialModel& v, int n_tilde, int n1, long samples, CounterRng& rng);

// interval-union helper shared by the section engine and its tests
std::vector<std::pair<double, double>> merge_intervals(std::vector<std::pair<double, double>> intervals);

}  // namespace qpgl

#endif
