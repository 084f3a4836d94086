#include <doctest.h>

#include <cmath>

#include <stdexcept>

#include "selltime/quadrature.hpp"

using namespace selltime;

TEST_CASE("gauss-legendre nodes reproduce known 5-point rule") {
    const auto& r = GaussLegendre::rule(5);
    REQUIRE(r.nodes.size() == 5);
    CHECK(r.nodes[2] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r.nodes[4] == doctest::Approx(0.9061798459386640).epsilon(1e-13));
    CHECK(r.weights[2] == doctest::Approx(128.0 / 225.0).epsilon(1e-13));
}

TEST_CASE("polynomials integrate exactly") {
    // n nodes are exact through degree 2n-1.
    const double v = gl_integrate([](double x) { return x * x * x - 2 * x + 1; }, 0.0, 1.0, 2);
    CHECK(v == doctest::Approx(0.25 - 1.0 + 1.0).epsilon(1e-14));
    const double s = gl_integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 24);
    CHECK(s == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("split integration handles kinks") {
    const auto f = [](double x) { return std::max(x - 0.3, 0.0); };
    const double breaks[] = {0.3};
    const double v = gl_integrate_split(f, 0.0, 1.0, 16, breaks);
    CHECK(v == doctest::Approx(0.5 * 0.7 * 0.7).epsilon(1e-14));
}

TEST_CASE("pairwise sum matches plain sum on benign data") {
    std::vector<double> xs(1001);
    for (size_t i = 0; i < xs.size(); ++i) xs[i] = 1.0 / (1.0 + i);
    double plain = 0.0;
    for (double x : xs) plain += x;
    CHECK(pairwise_sum(xs) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("bisection root") {
    const double r = bisect_root([](double x) { return x * x - 2.0; }, 0.0, 2.0);
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(bisect_root([](double x) { return x + 3.0; }, 0.0, 1.0), std::invalid_argument);
}
