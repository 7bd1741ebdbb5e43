#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qpgl/dual_green.hpp"
#include "qpgl/instances.hpp"
#include "qpgl/rng.hpp"

using namespace qpgl;

namespace {

const BlockStructure& bs2() {
    static const BlockStructure bs(std::vector<int>{2});
    return bs;
}

const PotentialModel& cosine2() {
    static const PotentialModel v = PotentialModel::from_named_model("separable-cosine", bs2(), {0.5, 1, 0});
    return v;
}

Eigen::VectorXd vec1(double x) {
    Eigen::VectorXd v(1);
    v << x;
    return v;
}

Eigen::VectorXd vec2(double x, double y) {
    Eigen::VectorXd v(2);
    v << x, y;
    return v;
}

}  // namespace

TEST_CASE("diagonal_symbol") {
    CHECK(diagonal_symbol(bs2(), vec1(0.3), {2, -1}, vec2(0.7, 0.5)) == doctest::Approx(1.44).epsilon(1e-14));
    const BlockStructure b11(std::vector<int>{1, 1});
    CHECK(diagonal_symbol(b11, vec2(0.1, 0.2), {1, 1}, vec2(0.5, 0.25)) ==
          doctest::Approx(0.5625).epsilon(1e-14));
    const Eigen::VectorXd theta = vec2(0.3, -0.8);
    CHECK(diagonal_symbol(b11, theta, {0, 0}, vec2(1.0, 2.0)) ==
          doctest::Approx(theta.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("assemble structure") {
    const Region cube = origin_cube(bs2(), 1);

    SUBCASE("zero coupling is diagonal") {
        const DualMatrix hm = assemble(bs2(), cube, vec1(0.3), vec2(0.7, 0.5), 0.0, cosine2());
        CHECK(hm.offdiag_zero);
        for (int i = 0; i < cube.size(); ++i) {
            CHECK(hm.h(i, i).real() ==
                  doctest::Approx(diagonal_symbol(bs2(), vec1(0.3), cube.point(i), vec2(0.7, 0.5))));
            for (int j = 0; j < cube.size(); ++j)
                if (i != j) CHECK(hm.h(i, j) == std::complex<double>(0.0, 0.0));
        }
    }

    SUBCASE("hopping only on the coefficient support") {
        const DualMatrix hm = assemble(bs2(), cube, vec1(0.3), vec2(0.7, 0.5), 1e-3, cosine2());
        for (int i = 0; i < cube.size(); ++i)
            for (int j = 0; j < cube.size(); ++j) {
                if (i == j) continue;
                MultiIndex d{cube.point(i)[0] - cube.point(j)[0], cube.point(i)[1] - cube.point(j)[1]};
                const bool unit = sup_norm(d) == 1 && std::abs(d[0]) + std::abs(d[1]) == 1;
                if (unit)
                    CHECK(hm.h(i, j) == std::complex<double>(5e-4, 0.0));
                else
                    CHECK(hm.h(i, j) == std::complex<double>(0.0, 0.0));
            }
        CHECK((hm.h - hm.h.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("single point restriction") {
        const Region single({MultiIndex{2, -1}});
        const DualMatrix hm = assemble(bs2(), single, vec1(0.3), vec2(0.7, 0.5), 0.5, cosine2());
        REQUIRE(hm.h.rows() == 1);
        CHECK(hm.h(0, 0).real() == doctest::Approx(1.44));
    }
}

TEST_CASE("green on the zero-coupling diagonal") {
    const Region single({MultiIndex{2, -1}});
    const DualMatrix hm = assemble(bs2(), single, vec1(0.3), vec2(0.7, 0.5), 0.0, cosine2());
    const GreenResult gr = green(hm, 0.0, 0, 0.5);
    REQUIRE(gr.inverse);
    CHECK((*gr.inverse)(0, 0).real() == doctest::Approx(1.0 / 1.44).epsilon(1e-15));

    const Region cube = origin_cube(bs2(), 1);
    const DualMatrix hc = assemble(bs2(), cube, vec1(0.3), vec2(0.7, 0.5), 0.0, cosine2());
    const double hit = hc.h(4, 4).real();
    const GreenResult sing = green(hc, hit, 1, 0.5);
    CHECK(sing.report.near_singular);
    CHECK_FALSE(sing.inverse.has_value());
    CHECK_FALSE(ldt_check(sing.report, 1, 0.5));

    const GreenResult fine = green(hc, hit + 0.37, 1, 0.5);
    REQUIRE(fine.inverse);
    for (int i = 0; i < cube.size(); ++i)
        for (int j = 0; j < cube.size(); ++j) {
            if (i == j)
                CHECK((*fine.inverse)(i, i).real() ==
                      doctest::Approx(1.0 / (hc.h(i, i).real() - hit - 0.37)).epsilon(1e-15));
            else
                CHECK((*fine.inverse)(i, j) == std::complex<double>(0.0, 0.0));
        }
}

TEST_CASE("green matches the elimination oracle on seeded instances") {
    CounterRng rng(2024, 0);
    int done = 0;
    for (int t = 0; done < 20 && t < 200; ++t) {
        const Eigen::VectorXd omega = sample_omega(bs2(), rng);
        const Eigen::VectorXd theta = vec1(rng.uniform(-3.0, 3.0));
        const double eps = rng.uniform(0.0, 0.2);
        const double E = rng.uniform(-1.0, 4.0);
        const auto descs = elementary_regions_at_scale(t % 2 ? 3 : 4, bs2());
        const Region region = enumerate_region(bs2(), descs[static_cast<std::size_t>(
                                                         rng.uniform_int(0, static_cast<int>(descs.size()) - 1))]);
        REQUIRE(region.size() <= 200);
        const DualMatrix hm = assemble(bs2(), region, theta, omega, eps, cosine2());
        const GreenResult gr = green(hm, E, 4, 0.5);
        if (gr.report.near_singular || gr.report.sigma_min < 5e-2) continue;
        const Eigen::MatrixXcd oracle = qpgl_test::gauss_inverse(
            hm.h - E * Eigen::MatrixXcd::Identity(region.size(), region.size()));
        const double rel =
            ((*gr.inverse) - oracle).cwiseAbs().maxCoeff() / oracle.cwiseAbs().maxCoeff();
        CHECK(rel <= 1e-9);
        ++done;
    }
    CHECK(done == 20);
}

TEST_CASE("green invariants") {
    CounterRng rng(77, 0);
    const Eigen::VectorXd omega = sample_omega(bs2(), rng);
    const Eigen::VectorXd theta = vec1(0.37);
    const Region cube = origin_cube(bs2(), 2);
    const double E = 0.45;

    SUBCASE("solve residual and exact Hermitian symmetry") {
        const DualMatrix hm = assemble(bs2(), cube, theta, omega, 0.1, cosine2());
        const GreenResult gr = green(hm, E, 2, 0.5);
        REQUIRE(gr.inverse);
        const Eigen::MatrixXcd shifted =
            hm.h - E * Eigen::MatrixXcd::Identity(cube.size(), cube.size());
        CHECK((shifted * *gr.inverse - Eigen::MatrixXcd::Identity(cube.size(), cube.size()))
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
        CHECK((*gr.inverse - gr.inverse->adjoint()).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("first-order shrinkage as eps tends to zero") {
        const DualMatrix h0 = assemble(bs2(), cube, theta, omega, 0.0, cosine2());
        const GreenResult g0 = green(h0, E, 2, 0.5);
        REQUIRE(g0.inverse);
        double prev = -1.0;
        for (double eps : {1e-2, 1e-4, 1e-6}) {
            const DualMatrix hm = assemble(bs2(), cube, theta, omega, eps, cosine2());
            const GreenResult gr = green(hm, E, 2, 0.5);
            REQUIRE(gr.inverse);
            const double diff = (*gr.inverse - *g0.inverse).cwiseAbs().maxCoeff();
            if (prev > 0.0) {
                const double ratio = prev / diff;
                CHECK(ratio > 100.0 / 3.0);
                CHECK(ratio < 100.0 * 3.0);
            }
            prev = diff;
        }
    }
}

TEST_CASE("ldt_check thresholds") {
    CounterRng rng(5150, 0);
    const Eigen::VectorXd omega = sample_omega(bs2(), rng);

    SUBCASE("diagonal case with comfortable gaps passes") {
        // all diagonal values at least E + 1 at scale 4: norm <= 1 <= e^2
        const Region cube = origin_cube(bs2(), 1);
        Eigen::VectorXd theta = vec1(30.0);
        const DualMatrix hm = assemble(bs2(), cube, theta, omega, 0.0, cosine2());
        double dmin = 1e300;
        for (int i = 0; i < cube.size(); ++i) dmin = std::min(dmin, hm.h(i, i).real());
        const double E = dmin - 1.0;
        const GreenResult gr = green(hm, E, 4, 0.5);
        CHECK(gr.report.ldt_pass);
        CHECK(ldt_check(gr.report, 4, 0.5));
    }

    SUBCASE("first-step regime passes at the theorem thresholds") {
        const int n = 6;
        const FirstStepRegime regime = first_step_regime(n, 0.2, 2, 4.0);
        int done = 0;
        for (int t = 0; t < 40 && done < 5; ++t) {
            const Eigen::VectorXd w = sample_omega(bs2(), rng);
            const Eigen::VectorXd theta = vec1(rng.uniform(-3.0, 3.0));
            const GateEnergy ge = pick_gate_energy(bs2(), theta, w, {n}, 0.05, 2.0, rng);
            if (ge.score < 1.05) continue;
            const DualMatrix hm = assemble(bs2(), origin_cube(bs2(), n), theta, w, regime.eps, cosine2());
            const GreenResult gr = green(hm, ge.energy, n, 0.5, false);
            CHECK(gr.report.ldt_pass);
            ++done;
        }
        CHECK(done == 5);
    }
}

TEST_CASE("norm probe agrees with the full report") {
    CounterRng rng(31, 0);
    const Eigen::VectorXd omega = sample_omega(bs2(), rng);
    const Region cube = origin_cube(bs2(), 2);
    const DualMatrix hm = assemble(bs2(), cube, vec1(0.4), omega, 0.05, cosine2());
    const GreenResult gr = green(hm, 0.3, 2, 0.5, false);
    const NormProbe np = green_norm(hm, 0.3);
    CHECK(np.op_norm == doctest::Approx(gr.report.op_norm).epsilon(1e-12));
    CHECK(np.sigma_min == doctest::Approx(gr.report.sigma_min).epsilon(1e-12));
}
