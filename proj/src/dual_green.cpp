#include "qpgl/dual_green.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace qpgl {

double diagonal_symbol(const BlockStructure& bs, const Eigen::VectorXd& theta, const MultiIndex& k,
                       const Eigen::VectorXd& omega) {
    if (theta.size() != bs.d) throw std::invalid_argument("diagonal_symbol: theta must have d entries");
    const Eigen::VectorXd shift = block_dot(bs, k, omega);
    return (theta + shift).squaredNorm();
}

namespace {

DualMatrix build(const BlockStructure& bs, const Region& region, const Eigen::VectorXd& theta,
                 const Eigen::VectorXd& omega, double coupling, double momentum_scale,
                 const PotentialModel& v) {
    if (region.empty()) throw std::invalid_argument("assemble: region must be nonempty");
    const int n = region.size();
    DualMatrix out;
    out.region = region;
    out.theta = theta;
    out.omega = omega;
    out.eps = coupling;
    out.h = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd shift = momentum_scale * block_dot(bs, region.point(i), omega);
        out.h(i, i) = (theta + shift).squaredNorm();
    }
    if (coupling != 0.0 && !v.coefficients().empty()) {
        MultiIndex diff(static_cast<std::size_t>(bs.b));
        for (int i = 0; i < n; ++i) {
            const MultiIndex& a = region.point(i);
            for (int j = i + 1; j < n; ++j) {
                const MultiIndex& b = region.point(j);
                if (sup_dist(a, b) > v.k_cut()) continue;
                for (int t = 0; t < bs.b; ++t)
                    diff[static_cast<std::size_t>(t)] = a[static_cast<std::size_t>(t)] - b[static_cast<std::size_t>(t)];
                const std::complex<double> c = v.coefficient(diff);
                if (c == std::complex<double>(0.0, 0.0)) continue;
                out.h(i, j) = coupling * c;
                out.h(j, i) = std::conj(coupling * c);
                out.offdiag_zero = false;
            }
        }
    }
    return out;
}

}  // namespace

DualMatrix assemble(const BlockStructure& bs, const Region& region, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& omega, double eps, const PotentialModel& v) {
    if (eps < 0.0) throw std::invalid_argument("assemble: eps must be >= 0");
    return build(bs, region, theta, omega, eps, 1.0, v);
}

DualMatrix assemble_physical(const BlockStructure& bs, const Region& region, const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& omega, double lambda, double K, const PotentialModel& v) {
    if (!(K > 0.0)) throw std::invalid_argument("assemble_physical: K must be positive");
    return build(bs, region, theta, omega, lambda, K, v);
}

GreenResult green(const DualMatrix& hm, double E, int scale_n, double rho, bool want_inverse,
                  double sing_tol_factor) {
    const int n = static_cast<int>(hm.h.rows());
    GreenResult out;
    GreenReport& r = out.report;
    r.energy = E;
    r.scale_n = scale_n;
    r.rho = rho;

    Eigen::MatrixXcd g;
    if (hm.offdiag_zero) {
        Eigen::VectorXd gap(n);
        for (int i = 0; i < n; ++i) gap[i] = hm.h(i, i).real() - E;
        const double norm = gap.cwiseAbs().maxCoeff();
        r.sigma_min = gap.cwiseAbs().minCoeff();
        if (r.sigma_min <= sing_tol_factor * norm) {
            r.near_singular = true;
            r.op_norm = std::numeric_limits<double>::infinity();
            return out;
        }
        r.op_norm = 1.0 / r.sigma_min;
        g = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) g(i, i) = 1.0 / gap[i];
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hm.h);
        if (es.info() != Eigen::Success) throw std::runtime_error("green: eigendecomposition failed");
        const Eigen::VectorXd shifted = es.eigenvalues().array() - E;
        const double norm = shifted.cwiseAbs().maxCoeff();
        r.sigma_min = shifted.cwiseAbs().minCoeff();
        if (r.sigma_min <= sing_tol_factor * norm) {
            r.near_singular = true;
            r.op_norm = std::numeric_limits<double>::infinity();
            return out;
        }
        r.op_norm = 1.0 / r.sigma_min;
        g.resize(n, n);
        g.noalias() = es.eigenvectors() * shifted.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
        // averaging with the adjoint makes G Hermitian exactly
        const Eigen::MatrixXcd gt = g.adjoint();
        g = 0.5 * (g + gt);
    }

    const int diam = hm.region.diameter();
    r.profile.assign(static_cast<std::size_t>(diam) + 1, 0.0);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long pairs = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int d = sup_dist(hm.region.point(i), hm.region.point(j));
            const double a = std::abs(g(i, j));
            r.profile[static_cast<std::size_t>(d)] = std::max(r.profile[static_cast<std::size_t>(d)], a);
            if (10 * d >= scale_n && d > 0 && a > 1e-300) {
                const double y = std::log(a);
                sx += d;
                sy += y;
                sxx += static_cast<double>(d) * d;
                sxy += d * y;
                ++pairs;
            }
        }
    }
    if (pairs >= 2 && pairs * sxx != sx * sx) {
        const double det = static_cast<double>(pairs) * sxx - sx * sx;
        const double slope = (static_cast<double>(pairs) * sxy - sx * sy) / det;
        const double intercept = (sy * sxx - sx * sxy) / det;
        r.fit.rate = -slope;
        r.fit.intercept = intercept;
        r.fit.pairs = pairs;
        double ss = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int d = sup_dist(hm.region.point(i), hm.region.point(j));
                const double a = std::abs(g(i, j));
                if (10 * d >= scale_n && d > 0 && a > 1e-300) {
                    const double e = std::log(a) - (intercept + slope * d);
                    ss += e * e;
                }
            }
        r.fit.residual = std::sqrt(ss / static_cast<double>(pairs));
    }

    r.norm_ok = r.op_norm <= std::exp(std::sqrt(static_cast<double>(scale_n)));
    r.decay_ok = true;
    for (int d = 0; d <= diam; ++d) {
        if (10 * d < scale_n) continue;
        if (r.profile[static_cast<std::size_t>(d)] > std::exp(-(rho / 10.0) * d)) {
            r.decay_ok = false;
            break;
        }
    }
    r.ldt_pass = r.norm_ok && r.decay_ok;

    if (want_inverse) out.inverse = std::move(g);
    return out;
}

NormProbe green_norm(const DualMatrix& hm, double E, double sing_tol_factor) {
    NormProbe out;
    Eigen::VectorXd shifted;
    if (hm.offdiag_zero) {
        shifted.resize(hm.h.rows());
        for (Eigen::Index i = 0; i < hm.h.rows(); ++i) shifted[i] = hm.h(i, i).real() - E;
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hm.h, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw std::runtime_error("green_norm: eigendecomposition failed");
        shifted = es.eigenvalues().array() - E;
    }
    const double norm = shifted.cwiseAbs().maxCoeff();
    out.sigma_min = shifted.cwiseAbs().minCoeff();
    if (out.sigma_min <= sing_tol_factor * norm) {
        out.near_singular = true;
        out.op_norm = std::numeric_limits<double>::infinity();
    } else {
        out.op_norm = 1.0 / out.sigma_min;
    }
    return out;
}

bool ldt_check(const GreenReport& report, int scale_n, double rho) {
    if (report.near_singular) return false;
    if (report.op_norm > std::exp(std::sqrt(static_cast<double>(scale_n)))) return false;
    for (std::size_t d = 0; d < report.profile.size(); ++d) {
        if (10 * static_cast<int>(d) < scale_n) continue;
        if (report.profile[d] > std::exp(-(rho / 10.0) * static_cast<double>(d))) return false;
    }
    return true;
}

void dump_matrix(const Eigen::MatrixXcd& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("dump_matrix: cannot open " + path);
    char buf[64];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j).real());
            f << (j ? " " : "") << buf;
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j).imag());
            f << " " << buf;
        }
        f << "\n";
    }
}

}  // namespace qpgl
