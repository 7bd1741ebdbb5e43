#ifndef QPGL_TESTS_ORACLES_HPP
#define QPGL_TESTS_ORACLES_HPP

// Test-only reference implementations, independent of the library paths they
// are used to check.

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

namespace qpgl_test {

// dense inverse by Gaussian elimination with partial pivoting
inline Eigen::MatrixXcd gauss_inverse(Eigen::MatrixXcd a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXcd inv = Eigen::MatrixXcd::Identity(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index pivot = c;
        for (Eigen::Index r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
        if (std::abs(a(pivot, c)) == 0.0) throw std::runtime_error("gauss_inverse: singular");
        if (pivot != c) {
            a.row(pivot).swap(a.row(c));
            inv.row(pivot).swap(inv.row(c));
        }
        const std::complex<double> d = a(c, c);
        a.row(c) /= d;
        inv.row(c) /= d;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (r == c) continue;
            const std::complex<double> f = a(r, c);
            if (f == std::complex<double>(0.0, 0.0)) continue;
            a.row(r) -= f * a.row(c);
            inv.row(r) -= f * inv.row(c);
        }
    }
    return inv;
}

}  // namespace qpgl_test

#endif
