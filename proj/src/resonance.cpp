#include "qpgl/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qpgl {

namespace {

// odometer over the cube [-n, n]^b; returns false when exhausted
bool advance_cube(MultiIndex& k, int n) {
    int j = static_cast<int>(k.size()) - 1;
    while (j >= 0 && k[static_cast<std::size_t>(j)] == n) k[static_cast<std::size_t>(j--)] = -n;
    if (j < 0) return false;
    ++k[static_cast<std::size_t>(j)];
    return true;
}

}  // namespace

ResonanceSpec::ResonanceSpec(BlockStructure structure, int scale, double width, double energy,
                             Eigen::VectorXd freq)
    : bs(std::move(structure)), N(scale), delta(width), E(energy), omega(std::move(freq)) {
    if (N < 0) throw std::invalid_argument("ResonanceSpec: N must be >= 0");
    if (!(delta > 0.0)) throw std::invalid_argument("ResonanceSpec: delta must be positive");
    if (omega.size() != bs.b) throw std::invalid_argument("ResonanceSpec: omega must have b entries");
}

ResonanceHit in_resonance(const Eigen::VectorXd& theta, const ResonanceSpec& spec) {
    ResonanceHit hit;
    MultiIndex k(static_cast<std::size_t>(spec.bs.b), -spec.N);
    do {
        const double gap = std::abs(diagonal_symbol(spec.bs, theta, k, spec.omega) - spec.E);
        if (gap < spec.delta) {
            hit.in_set = true;
            hit.witness = k;
            hit.value = gap;
            return hit;
        }
    } while (advance_cube(k, spec.N));
    return hit;
}

std::vector<std::pair<double, double>> merge_intervals(std::vector<std::pair<double, double>> intervals) {
    std::sort(intervals.begin(), intervals.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& iv : intervals) {
        if (!merged.empty() && iv.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, iv.second);
        else
            merged.push_back(iv);
    }
    return merged;
}

std::vector<std::pair<double, double>> section_intervals(int j, const Eigen::VectorXd& theta_rest,
                                                         const ResonanceSpec& spec) {
    if (j < 0 || j >= spec.bs.d) throw std::invalid_argument("section_intervals: coordinate out of range");
    if (theta_rest.size() != spec.bs.d - 1)
        throw std::invalid_argument("section_intervals: theta_rest must have d-1 entries");
    std::vector<std::pair<double, double>> intervals;
    MultiIndex k(static_cast<std::size_t>(spec.bs.b), -spec.N);
    do {
        const Eigen::VectorXd shift = block_dot(spec.bs, k, spec.omega);
        double off_j = 0.0;
        for (int i = 0, t = 0; i < spec.bs.d; ++i) {
            if (i == j) continue;
            const double c = theta_rest[t++] + shift[i];
            off_j += c * c;
        }
        // section in u = Theta_j + t_j: |u^2 - s| < delta
        const double s = spec.E - off_j;
        const double tj = shift[j];
        if (s + spec.delta <= 0.0) continue;
        const double hi = std::sqrt(s + spec.delta);
        if (s - spec.delta <= 0.0) {
            intervals.emplace_back(-hi - tj, hi - tj);
        } else {
            const double lo = std::sqrt(s - spec.delta);
            intervals.emplace_back(-hi - tj, -lo - tj);
            intervals.emplace_back(lo - tj, hi - tj);
        }
    } while (advance_cube(k, spec.N));
    return merge_intervals(std::move(intervals));
}

double section_measure(int j, const Eigen::VectorXd& theta_rest, const ResonanceSpec& spec) {
    double total = 0.0;
    for (const auto& [lo, hi] : section_intervals(j, theta_rest, spec)) total += hi - lo;
    return total;
}

double first_step_delta(int N, double c1, int b, double C) {
    if (N < 1) throw std::invalid_argument("first_step_delta: N must be >= 1");
    if (!(c1 > 0.0 && c1 < 0.25)) throw std::invalid_argument("first_step_delta: c1 must lie in (0, 1/4)");
    if (!(C > 0.0)) throw std::invalid_argument("first_step_delta: C must be positive");
    return std::pow(C, -2.0) * std::pow(2.0 * N + 1.0, -2.0 * b) * std::exp(-2.0 * std::pow(N, c1));
}

void ScaleSchedule::validate() const {
    if (!(c1 > 0.0 && c1 < 0.25)) throw std::invalid_argument("ScaleSchedule: c1 must lie in (0, 1/4)");
    if (!(0.0 < c2 && c2 < c3 && c3 < c4 && c4 < 1.0))
        throw std::invalid_argument("ScaleSchedule: need 0 < c2 < c3 < c4 < 1");
    if (!(C > 0.0)) throw std::invalid_argument("ScaleSchedule: C must be positive");
    if (N0 < 1) throw std::invalid_argument("ScaleSchedule: N0 must be >= 1");
    if (!(eps >= 0.0)) throw std::invalid_argument("ScaleSchedule: eps must be >= 0");
    if (n1_override < 0) throw std::invalid_argument("ScaleSchedule: n1_override must be >= 0");
}

int ScaleSchedule::N1(int N) const {
    if (n1_override > 0) return n1_override;
    const double v = std::ceil(std::pow(std::log(static_cast<double>(N)), 2.0 / c1));
    if (!(v < 1e9)) throw std::invalid_argument("ScaleSchedule::N1: formula value out of range; set n1_override");
    return std::max(1, static_cast<int>(v));
}

long long ScaleSchedule::N2(int N) const {
    const double n1 = static_cast<double>(N1(N));
    const double v = std::ceil(std::pow(n1, 2.0 / c1));
    if (!(v < 9e18)) return 9000000000000000000LL;
    return std::max(1LL, static_cast<long long>(v));
}

double ScaleSchedule::energy_halfwidth() const {
    if (eps == 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(std::abs(std::log(eps)), 1.0 / (2.0 * c1));
}

DoubleResonanceScan double_resonance_scan(const Eigen::VectorXd& theta, double E, const Frequency& omega,
                                          int N, const ScaleSchedule& sched, const BlockStructure& bs,
                                          double delta_override) {
    sched.validate();
    if (std::abs(E) > sched.energy_halfwidth())
        throw std::invalid_argument("double_resonance_scan: |E| outside the admissible energy window");
    if (theta.cwiseAbs().maxCoeff() > 100.0 * bs.b * static_cast<double>(N) * N)
        throw std::invalid_argument("double_resonance_scan: |Theta| exceeds 100 b N^2");

    DoubleResonanceScan out;
    out.N1 = sched.N1(N);
    out.delta = delta_override > 0.0 ? delta_override : first_step_delta(out.N1, sched.c1, bs.b, sched.C);
    const ResonanceSpec spec(bs, out.N1, out.delta, E, omega.entries);

    const double lo_real = std::pow(static_cast<double>(N), sched.c3) / 10.0;
    const double hi_real = 10.0 * std::pow(static_cast<double>(N), sched.c4);
    const int m_lo = static_cast<int>(std::floor(lo_real)) + 1;  // smallest integer strictly above
    const int m_hi = static_cast<int>(std::ceil(hi_real)) - 1;
    if (m_lo > m_hi)
        throw std::invalid_argument("double_resonance_scan: empty candidate range for M at N = " +
                                    std::to_string(N));

    for (int M = m_lo; M <= m_hi; ++M) {
        ScanRecord rec;
        rec.M = M;
        const int inner = static_cast<int>(std::floor(std::pow(static_cast<double>(M), 1.0 / (10.0 * bs.b))));
        MultiIndex k(static_cast<std::size_t>(bs.b), -M);
        do {
            if (sup_norm(k) <= inner) continue;
            ++rec.annulus_size;
            const Eigen::VectorXd shifted = theta + block_dot(bs, k, omega.entries);
            const ResonanceHit hit = in_resonance(shifted, spec);
            if (hit.in_set) {
                if (rec.failures == 0) rec.first_failure = k;
                ++rec.failures;
            }
        } while (advance_cube(k, M));
        // an empty annulus cannot witness the conclusion; recorded and skipped
        const bool success = rec.annulus_size > 0 && rec.failures == 0;
        out.records.push_back(std::move(rec));
        if (success) {
            out.M = M;
            break;
        }
    }
    return out;
}

FarFieldCheck no_resonance_far_field(const BlockStructure& bs, const Eigen::VectorXd& theta, double E,
                                     const Frequency& omega, int N, const std::vector<int>& block_subset,
                                     const Eigen::VectorXd& y, int k_range) {
    if (theta.cwiseAbs().maxCoeff() > 100.0 * bs.b * static_cast<double>(N) * N)
        throw std::invalid_argument("no_resonance_far_field: |Theta| exceeds 100 b N^2");
    if (std::abs(E) > static_cast<double>(N))
        throw std::invalid_argument("no_resonance_far_field: |E| exceeds N");
    if (block_subset.empty() || static_cast<int>(block_subset.size()) != y.size())
        throw std::invalid_argument("no_resonance_far_field: y must match the block subset");
    for (int i : block_subset)
        if (i < 0 || i >= bs.d) throw std::invalid_argument("no_resonance_far_field: block index out of range");

    FarFieldCheck out;
    out.required = std::pow(static_cast<double>(N), 4.0);
    out.applicable = y.cwiseAbs().maxCoeff() > 200.0 * bs.b * static_cast<double>(N) * N;
    if (!out.applicable) return out;

    Eigen::VectorXd shift_full = theta;
    for (std::size_t t = 0; t < block_subset.size(); ++t)
        shift_full[block_subset[t]] += y[static_cast<Eigen::Index>(t)];

    out.min_restricted = std::numeric_limits<double>::infinity();
    out.min_full = std::numeric_limits<double>::infinity();
    MultiIndex k(static_cast<std::size_t>(bs.b), -k_range);
    do {
        const Eigen::VectorXd dots = block_dot(bs, k, omega.entries);
        double restricted = 0.0;
        for (int i : block_subset) {
            const double c = shift_full[i] + dots[i];
            restricted += c * c;
        }
        double full = restricted;
        for (int i = 0; i < bs.d; ++i) {
            if (std::find(block_subset.begin(), block_subset.end(), i) != block_subset.end()) continue;
            const double c = shift_full[i] + dots[i];
            full += c * c;
        }
        if (restricted - E < out.min_restricted) {
            out.min_restricted = restricted - E;
            out.witness = k;
        }
        out.min_full = std::min(out.min_full, full - E);
    } while (advance_cube(k, k_range));
    out.ok = out.min_restricted >= out.required;
    if (out.ok) out.witness.reset();
    return out;
}

CartanProbe cartan_probe(const BlockStructure& bs, const Region& lambda, const Region& lambda_bar,
                         const Eigen::VectorXd& theta, int j, double E, const Frequency& omega, double eps,
                         const PotentialModel& v, int n_tilde, int n1, long samples, CounterRng& rng) {
    if (!lambda.contains_all(lambda_bar))
        throw std::invalid_argument("cartan_probe: lambda_bar must be contained in lambda");
    if (lambda_bar.diameter() > 4.0 * std::pow(static_cast<double>(n_tilde), 1.0 / (10.0 * bs.b)))
        throw std::invalid_argument("cartan_probe: diam(lambda_bar) exceeds 4 Ntilde^{1/(10b)}");
    if (j < 0 || j >= bs.d) throw std::invalid_argument("cartan_probe: coordinate out of range");
    if (samples < 1) throw std::invalid_argument("cartan_probe: needs at least one sample");

    CartanProbe out;
    const double hw = std::exp(-10.0 * v.rho() * static_cast<double>(n1));
    out.interval_length = 2.0 * hw;
    out.threshold = std::exp(std::sqrt(static_cast<double>(n_tilde)));
    out.samples = samples;
    out.note = "local Green bounds on the covering assumed, recorded only";
    out.trace.reserve(static_cast<std::size_t>(samples));

    Eigen::VectorXd probe = theta;
    for (long s = 0; s < samples; ++s) {
        CartanSample rec;
        rec.y = theta[j] + rng.uniform(-hw, hw);
        probe[j] = rec.y;
        const DualMatrix hm = assemble(bs, lambda, probe, omega.entries, eps, v);
        const NormProbe np = green_norm(hm, E);
        rec.norm = np.op_norm;
        rec.is_bad = np.near_singular || np.op_norm >= out.threshold;
        if (rec.is_bad) ++out.bad;
        out.trace.push_back(rec);
    }

    const double n = static_cast<double>(samples);
    const double p = static_cast<double>(out.bad) / n;
    out.estimate = p * out.interval_length;
    const double z = 1.959963984540054;  // 95% Wilson interval
    const double denom = 1.0 + z * z / n;
    const double center = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    out.wilson_lo = std::max(0.0, center - half) * out.interval_length;
    out.wilson_hi = std::min(1.0, center + half) * out.interval_length;
    return out;
}

}  // namespace qpgl
