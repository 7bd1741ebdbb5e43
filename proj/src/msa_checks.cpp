#include "qpgl/msa_checks.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qpgl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double spectral_norm(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.adjoint() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

bool advance_cube(MultiIndex& k, int n) {
    int j = static_cast<int>(k.size()) - 1;
    while (j >= 0 && k[static_cast<std::size_t>(j)] == n) k[static_cast<std::size_t>(j--)] = -n;
    if (j < 0) return false;
    ++k[static_cast<std::size_t>(j)];
    return true;
}

MultiIndex shifted_index(const MultiIndex& a, const MultiIndex& m) {
    MultiIndex out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + m[i];
    return out;
}

// (h Z)_n - E Z_n with Z extended by zero
std::complex<double> lattice_residual_at(const BlockStructure& bs, const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& omega, double eps, const PotentialModel& v,
                                         const LatticeVector& z, const MultiIndex& n, double E) {
    std::complex<double> s = (diagonal_symbol(bs, theta, n, omega) - E) * z.value(n);
    for (const auto& [m, c] : v.coefficients()) {
        MultiIndex src(n.size());
        for (std::size_t i = 0; i < n.size(); ++i) src[i] = n[i] - m[i];
        const auto zv = z.value(src);
        if (zv != std::complex<double>(0.0, 0.0)) s += eps * c * zv;
    }
    return s;
}

void require(bool ok, std::vector<std::string>& offenders, const std::string& what) {
    if (!ok) offenders.push_back(what);
}

void throw_if_offenders(const std::string& who, const std::vector<std::string>& offenders) {
    if (offenders.empty()) return;
    std::ostringstream os;
    os << who << ": covering violates geometric preconditions:";
    const std::size_t shown = std::min<std::size_t>(offenders.size(), 6);
    for (std::size_t i = 0; i < shown; ++i) os << " [" << offenders[i] << "]";
    if (offenders.size() > shown) os << " (+" << offenders.size() - shown << " more)";
    throw std::invalid_argument(os.str());
}

struct PatchBounds {
    bool ok = true;
    double norm_slack = kInf;   // min over patches of bound - ||G_W||
    double decay_slack = kInf;  // min over patches/pairs of bound - |G_W|
    std::string first_bad;
};

PatchBounds check_patch_bounds(const BlockStructure& bs, double E, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& omega, double eps, const PotentialModel& v,
                               const Covering& covering, double rho_bar, double factor) {
    PatchBounds out;
    for (std::size_t p = 0; p < covering.patches.size(); ++p) {
        const auto& patch = covering.patches[p];
        const DualMatrix hw = assemble(bs, patch.w, theta, omega, eps, v);
        const GreenResult gr = green(hw, E, patch.scale, rho_bar, /*want_inverse=*/false);
        if (gr.report.near_singular) {
            out.ok = false;
            if (out.first_bad.empty()) out.first_bad = "patch " + std::to_string(p) + " near singular";
            continue;
        }
        const double norm_bound = factor * std::exp(std::sqrt(static_cast<double>(patch.scale)));
        out.norm_slack = std::min(out.norm_slack, norm_bound - gr.report.op_norm);
        if (gr.report.op_norm > norm_bound) {
            out.ok = false;
            if (out.first_bad.empty()) out.first_bad = "patch " + std::to_string(p) + " norm bound fails";
        }
        for (std::size_t d = 0; d < gr.report.profile.size(); ++d) {
            if (10 * static_cast<int>(d) < patch.scale || d == 0) continue;
            const double bound = factor * std::exp(-rho_bar * static_cast<double>(d));
            out.decay_slack = std::min(out.decay_slack, bound - gr.report.profile[d]);
            if (gr.report.profile[d] > bound) {
                out.ok = false;
                if (out.first_bad.empty()) out.first_bad = "patch " + std::to_string(p) + " decay bound fails";
            }
        }
    }
    return out;
}

void validate_covering(const std::string& who, const Region& covered, const Region& ambient,
                       const Covering& covering, int m0, int m1) {
    std::vector<std::string> offenders;
    require(static_cast<int>(covering.patch_of.size()) == covered.size(), offenders,
            "assignment size != covered point count");
    throw_if_offenders(who, offenders);
    for (int i = 0; i < covered.size(); ++i) {
        const MultiIndex& n = covered.point(i);
        const int p = covering.patch_of[static_cast<std::size_t>(i)];
        if (p < 0 || p >= static_cast<int>(covering.patches.size())) {
            require(false, offenders, "point " + to_string(n) + " has no patch");
            continue;
        }
        const auto& patch = covering.patches[static_cast<std::size_t>(p)];
        require(patch.w.contains(n), offenders, "patch misses " + to_string(n));
        require(covered.contains_all(patch.w), offenders, "patch at " + to_string(n) + " leaves the region");
        require(patch.scale >= m0 && (m1 < 0 || patch.scale <= m1), offenders,
                "patch scale out of range at " + to_string(n));
        const int d = dist_excluding(n, covered, patch.w);
        require(d == kInfiniteDistance || 2.0 * d >= patch.scale, offenders,
                "patch too close to its complement at " + to_string(n));
        (void)ambient;
    }
    throw_if_offenders(who, offenders);
}

}  // namespace

LatticeVector::LatticeVector(std::map<MultiIndex, std::complex<double>> values, std::optional<PolyBound> bound)
    : values_(std::move(values)), bound_(bound) {
    for (auto it = values_.begin(); it != values_.end();) {
        if (it->second == std::complex<double>(0.0, 0.0))
            it = values_.erase(it);
        else
            ++it;
    }
    if (bound_) {
        for (const auto& [k, zv] : values_) {
            const double cap = bound_->C * std::pow(1.0 + sup_norm(k), bound_->degree);
            if (std::abs(zv) > cap)
                throw std::invalid_argument("LatticeVector: polynomial bound violated at " + to_string(k));
        }
    }
}

std::complex<double> LatticeVector::value(const MultiIndex& k) const {
    auto it = values_.find(k);
    return it == values_.end() ? std::complex<double>(0.0, 0.0) : it->second;
}

double LatticeVector::sup_abs() const {
    double m = 0.0;
    for (const auto& [k, zv] : values_) m = std::max(m, std::abs(zv));
    return m;
}

double LatticeVector::l1() const {
    double s = 0.0;
    for (const auto& [k, zv] : values_) s += std::abs(zv);
    return s;
}

CheckReport verify_perturbation_bound(const Region& region, const Eigen::MatrixXcd& a,
                                      const Eigen::MatrixXcd& b, double rho_bar, int scale_n) {
    const int n = region.size();
    if (a.rows() != n || a.cols() != n || b.rows() != n || b.cols() != n)
        throw std::invalid_argument("verify_perturbation_bound: matrices must match the region");
    if (!(rho_bar > 0.0)) throw std::invalid_argument("verify_perturbation_bound: rho_bar must be positive");

    CheckReport rep;
    rep.check_name = "perturbation_bound";

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_a(a);
    if (lu_a.rcond() < 1e-14) throw std::invalid_argument("verify_perturbation_bound: A is singular");
    const Eigen::MatrixXcd ainv = lu_a.inverse();
    const double ainv_norm = spectral_norm(ainv);

    double hyp_norm_slack = std::exp(std::sqrt(static_cast<double>(scale_n))) - ainv_norm;
    double hyp_decay_slack = kInf;
    double hyp_pert_slack = kInf;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int d = sup_dist(region.point(i), region.point(j));
            if (10 * d >= scale_n)
                hyp_decay_slack = std::min(hyp_decay_slack, std::exp(-rho_bar * d) - std::abs(ainv(i, j)));
            const double pert_bound = std::exp(-3.0 * rho_bar * scale_n - rho_bar * d);
            hyp_pert_slack = std::min(hyp_pert_slack, pert_bound - std::abs(b(i, j) - a(i, j)));
        }
    }
    rep.margins["hyp_norm"] = hyp_norm_slack;
    rep.margins["hyp_decay"] = hyp_decay_slack;
    rep.margins["hyp_perturbation"] = hyp_pert_slack;
    rep.hypotheses_hold = hyp_norm_slack >= 0.0 && hyp_decay_slack >= 0.0 && hyp_pert_slack >= 0.0;
    if (!rep.hypotheses_hold) {
        rep.notes.push_back("hypotheses fail; conclusions not asserted");
        return rep;
    }

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_b(b);
    if (lu_b.rcond() < 1e-15) {
        rep.conclusions_hold = false;
        rep.notes.push_back("B numerically singular");
        return rep;
    }
    const Eigen::MatrixXcd binv = lu_b.inverse();
    const double margin_norm = 2.0 * ainv_norm - spectral_norm(binv);
    double margin_decay = kInf;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int d = sup_dist(region.point(i), region.point(j));
            margin_decay =
                std::min(margin_decay, std::abs(ainv(i, j)) + std::exp(-rho_bar * d) - std::abs(binv(i, j)));
        }
    rep.margins["norm"] = margin_norm;
    rep.margins["decay"] = margin_decay;
    rep.conclusions_hold = margin_norm >= 0.0 && margin_decay >= 0.0;
    return rep;
}

Covering make_cube_covering(const BlockStructure& bs, const Region& cube, int cube_radius,
                            int patch_radius, const Region& hole, int singleton_margin) {
    Covering out;
    std::map<MultiIndex, int> patch_index;  // keyed by patch center; hole-hugging patches by their point
    const int clamp_to = std::max(0, cube_radius - patch_radius);
    const std::vector<Restriction> none(static_cast<std::size_t>(bs.b), Restriction::None);
    const MultiIndex origin(static_cast<std::size_t>(bs.b), 0);
    const bool origin_hole = hole.size() == 1 && hole.contains(origin);
    for (int i = 0; i < cube.size(); ++i) {
        const MultiIndex& n = cube.point(i);
        if (!hole.empty() && hole.contains(n)) continue;
        const bool near_hole = !hole.empty() && singleton_margin >= 0 && dist(n, hole) <= singleton_margin;
        MultiIndex center(n.size());
        int scale = patch_radius;
        if (near_hole) {
            center = n;
            scale = origin_hole ? 1 : 0;
        } else {
            for (std::size_t j = 0; j < n.size(); ++j)
                center[j] = std::clamp(n[j], -clamp_to, clamp_to);
        }
        auto it = patch_index.find(near_hole ? n : center);
        int p;
        if (it != patch_index.end()) {
            p = it->second;
        } else {
            Region w;
            if (near_hole && origin_hole) {
                // radius-1 quarter region anchored at n and opening away from
                // the origin, so it hugs the hole without touching it
                std::vector<Restriction> tags(static_cast<std::size_t>(bs.b));
                for (int j = 0; j < bs.b; ++j)
                    tags[static_cast<std::size_t>(j)] = n[static_cast<std::size_t>(j)] < 0
                                                            ? Restriction::RemovePositive
                                                            : Restriction::RemoveNegative;
                w = enumerate_region(bs, RegionDescriptor(n, 1, tags));
            } else if (near_hole) {
                w = Region({n});
                scale = 0;
            } else {
                w = enumerate_region(bs, RegionDescriptor(center, scale, none));
            }
            if (!hole.empty() && scale > 0) {
                bool clash = false;
                for (const auto& hp : hole.points())
                    if (w.contains(hp)) clash = true;
                if (clash) {  // fall back to a singleton rather than touch the hole
                    w = Region({n});
                    scale = 0;
                }
            }
            p = static_cast<int>(out.patches.size());
            out.patches.push_back({std::move(w), scale});
            patch_index.emplace(near_hole ? n : center, p);
        }
        out.patch_of.push_back(p);
    }
    return out;
}

CheckReport verify_coupling_norm(const BlockStructure& bs, const Region& lambda, double E,
                                 const Eigen::VectorXd& theta, const Eigen::VectorXd& omega, double eps,
                                 const PotentialModel& v, const Covering& covering, int m0, int m1,
                                 double rho_bar) {
    validate_covering("verify_coupling_norm", lambda, lambda, covering, m0, m1);

    CheckReport rep;
    rep.check_name = "coupling_norm";
    const PatchBounds pb = check_patch_bounds(bs, E, theta, omega, eps, v, covering, rho_bar, 2.0);
    rep.margins["hyp_norm"] = pb.norm_slack;
    rep.margins["hyp_decay"] = pb.decay_slack;
    rep.hypotheses_hold = pb.ok;
    if (!pb.ok) {
        rep.notes.push_back(pb.first_bad);
        rep.notes.push_back("hypotheses fail; conclusions not asserted");
        return rep;
    }

    const NormProbe np = green_norm(assemble(bs, lambda, theta, omega, eps, v), E);
    const double bound =
        4.0 * std::pow(2.0 * m1 + 1.0, bs.b) * std::exp(std::sqrt(static_cast<double>(m1)));
    rep.margins["norm"] = bound - np.op_norm;
    rep.margins["global_norm"] = np.op_norm;
    rep.conclusions_hold = !np.near_singular && np.op_norm <= bound;
    return rep;
}

CheckReport verify_coupling_decay(const BlockStructure& bs, const Region& lambda, const Region& lambda1,
                                  double E, const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                                  double eps, const PotentialModel& v, const Covering& covering, int m0,
                                  double rho_bar, int scale_n, std::optional<double> c_user) {
    std::vector<std::string> offenders;
    require(lambda.contains_all(lambda1), offenders, "lambda1 not contained in lambda");
    require(lambda.diameter() <= 2 * scale_n + 1, offenders, "diam(lambda) exceeds 2N+1");
    require(lambda1.diameter() <= std::pow(static_cast<double>(scale_n), 1.0 / (3.0 * bs.b)), offenders,
            "diam(lambda1) exceeds N^{1/(3b)}");
    throw_if_offenders("verify_coupling_decay", offenders);

    std::vector<MultiIndex> kept;
    for (const auto& p : lambda.points())
        if (!lambda1.contains(p)) kept.push_back(p);
    const Region covered(std::move(kept));
    validate_covering("verify_coupling_decay", covered, lambda, covering, m0, -1);

    CheckReport rep;
    rep.check_name = "coupling_decay";
    int max_scale = 0;
    for (const auto& p : covering.patches) max_scale = std::max(max_scale, p.scale);
    const double logn = std::log(static_cast<double>(scale_n));
    rep.scale_regime_ok = static_cast<double>(m0) >= logn * logn &&
                          static_cast<double>(max_scale) <= std::pow(static_cast<double>(scale_n), 1.0 / 3.0);
    if (!rep.scale_regime_ok)
        rep.notes.push_back("asymptotic scale window not met at this size; bounds probed empirically");

    const PatchBounds pb = check_patch_bounds(bs, E, theta, omega, eps, v, covering, rho_bar, 1.0);
    rep.margins["hyp_norm"] = pb.norm_slack;
    rep.margins["hyp_decay"] = pb.decay_slack;

    const GreenResult gl = green(assemble(bs, lambda, theta, omega, eps, v), E, scale_n, rho_bar);
    const double global_bound = std::exp(std::sqrt(static_cast<double>(scale_n)));
    const bool global_ok = !gl.report.near_singular && gl.report.op_norm <= global_bound;
    rep.margins["hyp_global_norm"] = global_bound - gl.report.op_norm;

    rep.hypotheses_hold = pb.ok && global_ok;
    if (!rep.hypotheses_hold) {
        if (!pb.first_bad.empty()) rep.notes.push_back(pb.first_bad);
        rep.notes.push_back("hypotheses fail; conclusions not asserted");
        return rep;
    }

    const Eigen::MatrixXcd& g = *gl.inverse;
    const double sqrt_m0 = std::sqrt(static_cast<double>(std::max(m0, 1)));
    double c_eff = -kInf;
    double assert_margin = kInf;
    for (int i = 0; i < lambda.size(); ++i) {
        for (int j = 0; j < lambda.size(); ++j) {
            const int d = sup_dist(lambda.point(i), lambda.point(j));
            if (10 * d < scale_n || d == 0) continue;
            const double a = std::abs(g(i, j));
            if (a > 1e-300) c_eff = std::max(c_eff, (rho_bar + std::log(a) / d) * sqrt_m0);
            if (c_user) {
                const double bound = std::exp(-(rho_bar - *c_user / sqrt_m0) * d);
                assert_margin = std::min(assert_margin, bound - a);
            }
        }
    }
    rep.margins["C_eff"] = c_eff;
    if (c_user) {
        rep.margins["assert"] = assert_margin;
        rep.conclusions_hold = assert_margin >= 0.0;
    } else {
        rep.conclusions_hold = true;
        rep.notes.push_back("calibration mode: smallest working C reported");
    }
    return rep;
}

double poisson_residual(const BlockStructure& bs, const Region& lambda, double E,
                        const Eigen::VectorXd& theta, const Eigen::VectorXd& omega, double eps,
                        const PotentialModel& v, const LatticeVector& z, double pre_tol) {
    if (lambda.empty()) throw std::invalid_argument("poisson_residual: region must be nonempty");
    const double tol = pre_tol * (1.0 + z.sup_abs());
    for (const auto& n : lambda.points()) {
        const double r = std::abs(lattice_residual_at(bs, theta, omega, eps, v, z, n, E));
        if (r > tol)
            throw std::invalid_argument("poisson_residual: lattice equation violated at " + to_string(n) +
                                        " (residual " + std::to_string(r) + ")");
    }

    const GreenResult gr = green(assemble(bs, lambda, theta, omega, eps, v), E, lambda.diameter(), v.rho());
    if (gr.report.near_singular) throw NearSingularError(gr.report.sigma_min);
    const Eigen::MatrixXcd& g = *gr.inverse;

    // boundary source: src(n') = sum over exterior n'' within k_cut of V_{n'-n''} Z_{n''}
    Eigen::VectorXcd src = Eigen::VectorXcd::Zero(lambda.size());
    for (int i = 0; i < lambda.size(); ++i) {
        const MultiIndex& np = lambda.point(i);
        for (const auto& [m, c] : v.coefficients()) {
            MultiIndex npp(np.size());
            for (std::size_t t = 0; t < np.size(); ++t) npp[t] = np[t] - m[t];
            if (lambda.contains(npp)) continue;
            const auto zv = z.value(npp);
            if (zv != std::complex<double>(0.0, 0.0)) src[i] += c * zv;
        }
    }
    const Eigen::VectorXcd rhs = -eps * (g * src);
    double worst = 0.0;
    for (int i = 0; i < lambda.size(); ++i)
        worst = std::max(worst, std::abs(z.value(lambda.point(i)) - rhs[i]));
    return worst;
}

WitnessReport absence_witness(const BlockStructure& bs, int scale_n, double E, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& omega, double eps, const PotentialModel& v,
                              const PolyBound& bound) {
    WitnessReport rep;
    rep.threshold = std::exp(-v.rho() * static_cast<double>(scale_n) / 20.0);
    rep.delta_gate = 2.0 * std::exp(-std::sqrt(static_cast<double>(scale_n)));

    // gate 1: Theta outside the resonance set at the width that makes
    // ||G|| <= e^{sqrt N} attainable
    {
        MultiIndex k(static_cast<std::size_t>(bs.b), -scale_n);
        double min_gap = kInf;
        MultiIndex witness;
        do {
            const double gap = std::abs(diagonal_symbol(bs, theta, k, omega) - E);
            if (gap < min_gap) {
                min_gap = gap;
                witness = k;
            }
        } while (advance_cube(k, scale_n));
        rep.min_gap = min_gap;
        if (min_gap < rep.delta_gate) {
            rep.refused = true;
            rep.refusal = "Theta resonant at the gate width (witness " + to_string(witness) + ")";
            return rep;
        }
    }

    const Region cube =
        enumerate_region(bs, RegionDescriptor(MultiIndex(static_cast<std::size_t>(bs.b), 0), scale_n,
                                              std::vector<Restriction>(static_cast<std::size_t>(bs.b),
                                                                       Restriction::None)));
    const DualMatrix hm = assemble(bs, cube, theta, omega, eps, v);
    rep.neumann_ratio = v.l1_norm() > 0.0 && rep.min_gap > 0.0 ? eps * v.l1_norm() / rep.min_gap : 0.0;
    rep.used_neumann = rep.neumann_ratio <= 0.5;

    const GreenResult gr = green(hm, E, scale_n, v.rho(), /*want_inverse=*/!rep.used_neumann);
    if (!ldt_check(gr.report, scale_n, v.rho())) {
        rep.refused = true;
        rep.refusal = gr.report.near_singular ? "cube Green's function near singular"
                                              : "cube fails the norm/decay thresholds";
        return rep;
    }

    const int origin_idx = cube.index_of(MultiIndex(static_cast<std::size_t>(bs.b), 0));
    Eigen::VectorXcd column(cube.size());
    if (rep.used_neumann) {
        // perturbative column: relative accuracy survives down to the
        // smallest representable magnitudes, which the dense inverse loses
        // to rounding noise
        Eigen::VectorXd dinv(cube.size());
        for (int i = 0; i < cube.size(); ++i) dinv[i] = 1.0 / (hm.h(i, i).real() - E);
        Eigen::VectorXcd term = Eigen::VectorXcd::Zero(cube.size());
        term[origin_idx] = dinv[origin_idx];
        column = term;
        for (int it = 0; it < 500; ++it) {
            Eigen::VectorXcd next = Eigen::VectorXcd::Zero(cube.size());
            for (int i = 0; i < cube.size(); ++i) {
                const MultiIndex& n = cube.point(i);
                std::complex<double> s = 0.0;
                for (const auto& [m, c] : v.coefficients()) {
                    const int j = cube.index_of(shifted_index(n, m));
                    if (j >= 0) s += c * term[j];
                }
                next[i] = -dinv[i] * eps * s;
            }
            term.swap(next);
            column += term;
            if (term.cwiseAbs().maxCoeff() < 1e-318) break;
        }
    } else {
        column = gr.inverse->col(origin_idx);
    }

    // boundary pairs: n' just outside the cube, n = n' + m back inside
    double sum = 0.0;
    const int outer = scale_n + v.k_cut();
    MultiIndex np(static_cast<std::size_t>(bs.b), -outer);
    do {
        if (sup_norm(np) <= scale_n) continue;
        const double weight = bound.C * std::pow(1.0 + sup_norm(np), bound.degree);
        for (const auto& [m, c] : v.coefficients()) {
            const MultiIndex n = shifted_index(np, m);
            const int i = cube.index_of(n);
            if (i < 0) continue;
            sum += std::abs(column[i]) * std::abs(c) * weight;
        }
    } while (advance_cube(np, outer));

    rep.rhs_bound = eps * sum;
    rep.pass = rep.rhs_bound <= rep.threshold;
    return rep;
}

DualityReport duality_residual(const BlockStructure& bs, const BlochSample& sample,
                               const Eigen::VectorXd& omega, double eps, const PotentialModel& v) {
    for (const auto& [k, zv] : sample.coefficients.values())
        if (!sample.support.contains(k))
            throw std::invalid_argument("duality_residual: coefficients must be supported in the region");
    if (sample.theta_momentum.size() != bs.d || sample.theta_torus.size() != bs.b)
        throw std::invalid_argument("duality_residual: phase dimensions do not match the block structure");

    DualityReport rep;
    const double E = sample.energy;
    const LatticeVector& z = sample.coefficients;

    for (const auto& n : sample.support.points())
        rep.interior_term +=
            std::abs(lattice_residual_at(bs, sample.theta_momentum, omega, eps, v, z, n, E));

    // exterior rows within reach of the support carry only the coupling term
    std::map<MultiIndex, bool> seen;
    for (const auto& [p, zv] : z.values()) {
        for (const auto& [m, c] : v.coefficients()) {
            const MultiIndex n = shifted_index(p, m);
            if (sample.support.contains(n) || seen.count(n)) continue;
            seen[n] = true;
            rep.boundary_term +=
                std::abs(lattice_residual_at(bs, sample.theta_momentum, omega, eps, v, z, n, E));
        }
    }

    rep.tail_term = eps * v.tail_bound() * z.l1();

    for (const auto& x : sample.x_grid) {
        if (x.size() != bs.d) throw std::invalid_argument("duality_residual: grid point has wrong dimension");
        // torus point theta + x w, flat over the blocks
        Eigen::VectorXd torus(bs.b);
        for (int i = 0; i < bs.d; ++i)
            for (int j = 0; j < bs.blocks[static_cast<std::size_t>(i)]; ++j) {
                const int f = bs.offsets[static_cast<std::size_t>(i)] + j;
                torus[f] = sample.theta_torus[f] + x[i] * omega[f];
            }
        const double vx = v.evaluate(torus);
        std::complex<double> psi = 0.0;
        std::complex<double> resid = 0.0;
        for (const auto& [k, zv] : z.values()) {
            double phase = 0.0;
            for (int f = 0; f < bs.b; ++f) phase += k[static_cast<std::size_t>(f)] * sample.theta_torus[f];
            const Eigen::VectorXd momentum = sample.theta_momentum + block_dot(bs, k, omega);
            phase += momentum.dot(x);
            const std::complex<double> mode = zv * std::complex<double>(std::cos(phase), std::sin(phase));
            psi += mode;
            resid += (momentum.squaredNorm() - E) * mode;  // termwise -Laplacian
        }
        resid += eps * vx * psi;
        rep.residual = std::max(rep.residual, std::abs(resid));
        rep.psi_max = std::max(rep.psi_max, std::abs(psi));
    }
    rep.within_budget = rep.residual <= rep.interior_term + rep.boundary_term + rep.tail_term;
    return rep;
}

WindowReport spectral_window_check(const BlockStructure& bs, double E, const Region& lambda,
                                   const Eigen::VectorXd& omega, double eps, const PotentialModel& v,
                                   const std::vector<Eigen::VectorXd>& theta_grid) {
    if (E < 0.0) throw std::invalid_argument("spectral_window_check: E must be >= 0");
    if (theta_grid.empty()) throw std::invalid_argument("spectral_window_check: empty grid");

    WindowReport rep;
    rep.min_dist = kInf;
    rep.grid_term = kInf;
    for (const auto& th : theta_grid) {
        rep.grid_term = std::min(rep.grid_term, std::abs(th.squaredNorm() - E));
        const DualMatrix hm = assemble(bs, lambda, th, omega, eps, v);
        Eigen::VectorXd eigs;
        if (hm.offdiag_zero) {
            eigs.resize(lambda.size());
            for (int i = 0; i < lambda.size(); ++i) eigs[i] = hm.h(i, i).real();
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hm.h, Eigen::EigenvaluesOnly);
            eigs = es.eigenvalues();
        }
        const double d = (eigs.array() - E).abs().minCoeff();
        if (d < rep.min_dist) {
            rep.min_dist = d;
            rep.best_theta = th;
        }
    }

    // coupling mass cut off at the probe row (zero when the neighborhood of
    // the probe site fits inside the region)
    MultiIndex probe(static_cast<std::size_t>(bs.b), 0);
    if (!lambda.contains(probe)) {
        int best = kInfiniteDistance;
        for (const auto& p : lambda.points())
            if (sup_norm(p) < best) {
                best = sup_norm(p);
                probe = p;
            }
    }
    double cut = 0.0;
    for (const auto& [m, c] : v.coefficients())
        if (!lambda.contains(shifted_index(probe, m))) cut += std::norm(c);
    rep.trunc_term = eps * std::sqrt(cut);

    rep.bound = eps * v.l1_norm() + rep.grid_term + rep.trunc_term;
    rep.pass = rep.min_dist <= rep.bound;
    return rep;
}

RescaleMap::RescaleMap(double lambda_in, double k_in) : lambda(lambda_in), K(k_in) {
    if (!(K > 0.0)) throw std::invalid_argument("RescaleMap: K must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("RescaleMap: lambda must be positive");
}

double rescale_conjugation_gap(const BlockStructure& bs, const Region& lambda, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& omega, double lambda_coupling, double K,
                               const PotentialModel& v) {
    const RescaleMap map(lambda_coupling, K);
    const DualMatrix phys = assemble_physical(bs, lambda, theta, omega, lambda_coupling, K, v);
    const DualMatrix dual = assemble(bs, lambda, map.forward_theta(theta), omega, map.eps(), v);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ep(phys.h, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ed(dual.h, Eigen::EigenvaluesOnly);
    return (ep.eigenvalues() - K * K * ed.eigenvalues()).cwiseAbs().maxCoeff();
}

}  // namespace qpgl
