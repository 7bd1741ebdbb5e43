#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "qpgl/potential.hpp"
#include "qpgl/rng.hpp"

using namespace qpgl;

TEST_CASE("separable cosine coefficients") {
    const BlockStructure bs(std::vector<int>{2});
    const PotentialModel v = PotentialModel::from_named_model("separable-cosine", bs, {0.5, 1, 0});
    CHECK(v.coefficient({1, 0}) == std::complex<double>(0.5, 0.0));
    CHECK(v.coefficient({0, 1}) == std::complex<double>(0.5, 0.0));
    CHECK(v.coefficient({-1, 0}) == std::complex<double>(0.5, 0.0));
    CHECK(v.coefficient({0, -1}) == std::complex<double>(0.5, 0.0));
    CHECK(v.coefficient({1, 1}) == std::complex<double>(0.0, 0.0));
    CHECK(v.coefficients().size() == 4);
}

TEST_CASE("coefficient bound rejects rho above log 2") {
    const BlockStructure bs(std::vector<int>{2});
    CHECK_THROWS_AS(PotentialModel::from_named_model("separable-cosine", bs, {0.8, 1, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(PotentialModel::from_named_model("no-such-model", bs, {0.5, 1, 0}),
                    std::invalid_argument);
}

TEST_CASE("two-cosine model requires b = 2") {
    CHECK_THROWS_AS(
        PotentialModel::from_named_model("two-cosine-surace", BlockStructure(std::vector<int>{3}), {0.5, 1, 0}),
        std::invalid_argument);
    const PotentialModel v =
        PotentialModel::from_named_model("two-cosine-surace", BlockStructure(std::vector<int>{1, 1}), {0.5, 1, 0});
    CHECK(v.coefficients().size() == 4);
}

TEST_CASE("random-analytic is deterministic and valid") {
    const BlockStructure bs(std::vector<int>{1, 1});
    const PotentialModel a = PotentialModel::from_named_model("random-analytic", bs, {0.4, 2, 99});
    const PotentialModel b = PotentialModel::from_named_model("random-analytic", bs, {0.4, 2, 99});
    REQUIRE(a.coefficients().size() == b.coefficients().size());
    for (const auto& [k, c] : a.coefficients()) CHECK(b.coefficient(k) == c);
    CHECK(a.verify_decay(0.4).ok);

    const PotentialModel c = PotentialModel::from_named_model("random-analytic", bs, {0.4, 2, 100});
    bool same = true;
    for (const auto& [k, cc] : a.coefficients())
        if (c.coefficient(k) != cc) same = false;
    CHECK_FALSE(same);
}

TEST_CASE("evaluate matches a direct trigonometric recomputation") {
    const BlockStructure bs(std::vector<int>{2});
    const PotentialModel v = PotentialModel::from_named_model("separable-cosine", bs, {0.5, 1, 0});
    Eigen::VectorXd th(2);
    th << 0.0, 0.0;
    CHECK(v.evaluate(th) == doctest::Approx(2.0).epsilon(1e-14));
    th << M_PI, M_PI / 2.0;
    CHECK(v.evaluate(th) == doctest::Approx(-1.0).epsilon(1e-12));

    const PotentialModel r = PotentialModel::from_named_model("random-analytic", bs, {0.4, 2, 5});
    CounterRng rng(3, 0);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd theta(2);
        theta << rng.uniform(0, 2 * M_PI), rng.uniform(0, 2 * M_PI);
        // independent oracle: sum 2 Re(V_k) cos - 2 Im(V_k) sin over half the support
        double direct = 0.0;
        for (const auto& [k, c] : r.coefficients()) {
            if (k > MultiIndex{0, 0}) {
                const double phase = k[0] * theta[0] + k[1] * theta[1];
                direct += 2.0 * (c.real() * std::cos(phase) - c.imag() * std::sin(phase));
            }
        }
        CHECK(r.evaluate(theta) == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("zero mean over a full period grid") {
    const BlockStructure bs(std::vector<int>{2});
    const PotentialModel v = PotentialModel::from_named_model("random-analytic", bs, {0.4, 1, 17});
    const int g = 4 * v.k_cut();
    double mean = 0.0;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            Eigen::VectorXd th(2);
            th << 2.0 * M_PI * i / g, 2.0 * M_PI * j / g;
            mean += v.evaluate(th);
        }
    mean /= g * g;
    CHECK(std::abs(mean) < 1e-10);
}

TEST_CASE("sup of |V| stays below the Fourier l1 bound") {
    const BlockStructure bs(std::vector<int>{2});
    const PotentialModel v = PotentialModel::from_named_model("random-analytic", bs, {0.3, 2, 23});
    const double cap = v.l1_norm();
    CounterRng rng(5, 0);
    for (int t = 0; t < 400; ++t) {
        Eigen::VectorXd th(2);
        th << rng.uniform(0, 2 * M_PI), rng.uniform(0, 2 * M_PI);
        CHECK(std::abs(v.evaluate(th)) <= cap + 1e-12);
    }
}

TEST_CASE("verify_decay finds the worst offender") {
    const BlockStructure bs(std::vector<int>{2});
    const PotentialModel v = PotentialModel::from_named_model("separable-cosine", bs, {0.5, 1, 0});
    CHECK(v.verify_decay(0.5).ok);
    const DecayCheck bad = v.verify_decay(0.7);
    CHECK_FALSE(bad.ok);
    CHECK(sup_norm(bad.worst_index) == 1);
    CHECK(bad.worst_excess == doctest::Approx(0.5 * std::exp(0.7)));

    // empty support satisfies any decay rate
    const PotentialModel empty(bs, {}, 0.5, 1);
    CHECK(empty.verify_decay(0.9).ok);
}

TEST_CASE("tail bound dominates the discarded shells") {
    const BlockStructure bs(std::vector<int>{2});
    const PotentialModel v = PotentialModel::from_named_model("separable-cosine", bs, {0.5, 1, 0});
    double direct = 0.0;
    for (int m = 2; m < 200; ++m)
        direct += (std::pow(2.0 * m + 1.0, 2) - std::pow(2.0 * m - 1.0, 2)) * std::exp(-0.5 * m);
    CHECK(v.tail_bound() == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("save and load round trip revalidates") {
    const BlockStructure bs(std::vector<int>{1, 1});
    const PotentialModel v = PotentialModel::from_named_model("random-analytic", bs, {0.35, 2, 41});
    const std::string path = (std::filesystem::temp_directory_path() / "qpgl_potential_test.txt").string();
    v.save(path);
    const PotentialModel w = PotentialModel::load(path, bs);
    CHECK(w.rho() == v.rho());
    CHECK(w.k_cut() == v.k_cut());
    REQUIRE(w.coefficients().size() == v.coefficients().size());
    for (const auto& [k, c] : v.coefficients()) {
        CHECK(w.coefficient(k).real() == c.real());
        CHECK(w.coefficient(k).imag() == c.imag());
    }
    std::filesystem::remove(path);
}

TEST_CASE("model invariants are enforced") {
    const BlockStructure bs(std::vector<int>{2});
    // nonzero mean
    CHECK_THROWS_AS(PotentialModel(bs, {{{0, 0}, {0.1, 0.0}}}, 0.5, 1), std::invalid_argument);
    // broken conjugate symmetry
    CHECK_THROWS_AS(PotentialModel(bs, {{{1, 0}, {0.1, 0.05}}, {{-1, 0}, {0.1, 0.05}}}, 0.5, 1),
                    std::invalid_argument);
    // support outside k_cut
    CHECK_THROWS_AS(PotentialModel(bs, {{{2, 0}, {0.1, 0.0}}, {{-2, 0}, {0.1, 0.0}}}, 0.5, 1),
                    std::invalid_argument);
}
