#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "bbm/rate.hpp"
#include "oracles.hpp"

using namespace bbm;
using namespace bbm::rate;

namespace {

GridPath line(double c, std::size_t n) {
    return GridPath::from_function([c](double s) { return c * s; }, n);
}

std::vector<double> random_walk(std::mt19937_64& gen, std::size_t n, double scale) {
    std::normal_distribution<double> z;
    std::vector<double> v(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) v[k] = v[k - 1] + scale * z(gen) / std::sqrt(double(n));
    return v;
}

double sum_abs_steps(const GridPath& p, double theta) {
    std::size_t n = p.resolution();
    double s = 0.0;
    for (std::size_t k = 0; k < n && double(k) / double(n) < theta; ++k) s += std::abs(p.knot(k + 1) - p.knot(k));
    return s;
}

}  // namespace

TEST_SUITE("rate_function") {

TEST_CASE("energy worked examples") {
    CHECK(energy(GridPath::zero(4), 1.0) == 0.0);
    CHECK(energy(line(0.7, 5), 1.0) == doctest::Approx(0.245));
    CHECK(energy(GridPath({0.0, 0.0, 1.5}), 1.0) == doctest::Approx(2.25));
    CHECK(energy(GridPath({0.0, 0.0, 1.5}), 0.75) == doctest::Approx(1.125));
    SmoothPath smooth = SmoothPath::from_function([](double s) { return 0.5 * s; }, 8, SplineBoundary::natural);
    CHECK(energy(smooth, 1.0) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("energy profile is nondecreasing and convex piecewise linear") {
    std::mt19937_64 gen(1);
    GridPath p(random_walk(gen, 12, 1.0));
    RateReport r = rate_report(p, 1.0, 1.0);
    REQUIRE(r.energy_profile.size() == 13);
    for (std::size_t k = 1; k < r.energy_profile.size(); ++k) CHECK(r.energy_profile[k] >= r.energy_profile[k - 1]);
}

TEST_CASE("extinction time worked examples") {
    CHECK(theta0(GridPath::zero(6), 1.0).is_plus_infinity());
    ExtendedReal steep = theta0(line(1.6, 4), 1.0);  // 1.28 > 1
    REQUIRE(steep.is_finite());
    CHECK(steep.value() == 0.0);
    ExtendedReal kinked = theta0(GridPath({0.0, 0.0, 1.5}), 1.0);
    REQUIRE(kinked.is_finite());
    CHECK(kinked.value() == doctest::Approx(2.25 / 3.5).epsilon(1e-15));
}

TEST_CASE("exact extinction time against a dense scan") {
    std::mt19937_64 gen(2);
    int finite = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v = random_walk(gen, 3 + trial % 9, 2.0);
        double growth = 0.5 + 0.1 * trial;
        ExtendedReal exact = theta0(GridPath(v), growth);
        std::optional<double> scan = oracle::theta0_scan(v, growth, 100000);
        CHECK(exact.is_plus_infinity() == !scan.has_value());
        if (scan && exact.is_finite()) {
            ++finite;
            CHECK(std::abs(exact.value() - *scan) <= 1e-9);
        }
    }
    CHECK(finite > 0);
}

TEST_CASE("K and J") {
    CHECK(k_value(GridPath::zero(3), 1.0, 1.0) == ExtendedReal(1.0));
    CHECK(k_value(line(2.0, 3), 1.0, 1.0).is_minus_infinity());
    ExtendedReal unit = k_value(line(1.0, 3), 1.0, 1.0);
    REQUIRE(unit.is_finite());
    CHECK(unit.value() == doctest::Approx(0.5));
    CHECK(theta0(line(1.0, 3), 1.0).is_plus_infinity());

    // K at theta0 itself is J (the definition's theta <= theta0).
    GridPath kinked({0.0, 0.0, 1.5});
    double th = theta0(kinked, 1.0).value();
    ExtendedReal at = k_value(kinked, th, 1.0);
    REQUIRE(at.is_finite());
    CHECK(at.value() == doctest::Approx(j_value(kinked, th, 1.0)));

    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 50; ++trial) {
        GridPath p(random_walk(gen, 8, 2.0));
        double theta = (trial % 10 + 1) / 10.0;
        ExtendedReal k = k_value(p, theta, 1.0);
        double j = j_value(p, theta, 1.0);
        ExtendedReal t0 = theta0(p, 1.0);
        bool alive = t0.is_plus_infinity() || (t0.is_finite() && theta <= t0.value());
        CHECK(alive == k.is_finite());
        if (k.is_finite()) CHECK(k.value() == doctest::Approx(j));
    }
}

TEST_CASE("sup K over balls: worked examples") {
    BallOptimum zero = sup_k_over_ball(BallQuery(GridPath::zero(16), 0.3, 1.0), 1.0);
    REQUIRE(zero.value.is_finite());
    CHECK(zero.value.value() == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : zero.argmax.values()) CHECK(std::abs(v) < 1e-12);

    BallOptimum wide = sup_k_over_ball(BallQuery(line(0.4, 16), 0.5, 1.0), 1.0);
    REQUIRE(wide.value.is_finite());
    CHECK(wide.value.value() == doctest::Approx(1.0).epsilon(1e-10));
    for (double v : wide.argmax.values()) CHECK(std::abs(v) < 1e-8);

    BallOptimum steep = sup_k_over_ball(BallQuery(line(2.0, 16), 0.5, 1.0), 1.0);
    CHECK(steep.value.is_minus_infinity());

    SchilderResult s = schilder_inf(BallQuery(line(2.0, 16), 0.5, 1.0));
    CHECK(s.value == doctest::Approx(1.125).epsilon(1e-9));
    CHECK(s.status.converged);
    CHECK(schilder_inf(BallQuery(GridPath::zero(8), 0.1, 1.0)).value == 0.0);
    CHECK(schilder_inf(BallQuery(line(3.0, 8), 100.0, 1.0)).value == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("sup K over balls against exhaustive lattice search") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
        std::size_t n = 2 + trial % 4;  // 2..5 here; 6 runs in the acceptance binary
        std::vector<double> g(n + 1, 0.0);
        for (std::size_t k = 1; k <= n; ++k) g[k] = g[k - 1] + 0.8 * u(gen);
        double eps = 0.2 + 0.05 * (trial % 5);
        double theta = trial % 3 == 0 ? 0.5 : 1.0;
        double growth = 1.0;
        BallQuery q(GridPath(g), eps, theta);
        BallOptimum opt = sup_k_over_ball(q, growth);
        SchilderResult sch = schilder_inf(q);
        oracle::LatticeResult lat = oracle::lattice_search(g, eps, theta, growth);

        // The lattice is a subset of the ball: the optimum can only be better.
        CHECK(sch.value <= lat.min_energy + 1e-9);
        double bound = oracle::lattice_energy_bound(n, eps, sum_abs_steps(sch.argmin, theta));
        CHECK(lat.min_energy <= sch.value + bound + 1e-9);
        if (lat.any_alive) {
            REQUIRE(opt.value.is_finite());
            CHECK(opt.value.value() >= lat.best_k - 1e-9);
        }
        if (opt.value.is_finite() && lat.any_alive) {
            double kb = oracle::lattice_energy_bound(n, eps, sum_abs_steps(opt.argmax, theta));
            CHECK(lat.best_k >= opt.value.value() - kb - 1e-9);
        }
    }
}

TEST_CASE("the steep ball is empty under brute force too") {
    oracle::LatticeResult lat = oracle::lattice_search({0.0, 2.0 / 6, 4.0 / 6, 1.0, 8.0 / 6, 10.0 / 6, 2.0}, 0.5, 1.0, 1.0);
    CHECK_FALSE(lat.any_alive);
    CHECK(lat.min_energy >= 1.125 - 1e-12);
}

TEST_CASE("sup K is nondecreasing in the radius and dominates the centre") {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 10; ++trial) {
        GridPath g(random_walk(gen, 10, 1.5));
        ExtendedReal prev = ExtendedReal::minus_infinity();
        for (double eps : {0.05, 0.1, 0.2, 0.4, 0.8}) {
            BallOptimum o = sup_k_over_ball(BallQuery(g, eps, 1.0), 1.0);
            if (prev.is_finite()) {
                REQUIRE(o.value.is_finite());
                CHECK(o.value.value() >= prev.value() - 1e-9);
            }
            ExtendedReal kc = k_value(g, 1.0, 1.0);
            if (kc.is_finite()) {
                REQUIRE(o.value.is_finite());
                CHECK(o.value.value() >= kc.value() - 1e-9);
            }
            if (!prev.is_finite() && o.value.is_finite()) prev = o.value;
            else if (o.value.is_finite()) prev = o.value;
        }
    }
}

TEST_CASE("optimizer reports its status") {
    BallOptimum o = sup_k_over_ball(BallQuery(line(0.8, 32), 0.5, 1.0), 1.0);
    CHECK(o.status.converged);
    CHECK(o.status.residual < 1e-10);
    REQUIRE(o.value.is_finite());
    CHECK(o.value.value() == doctest::Approx(1.0 - 0.5 * 0.3 * 0.3).epsilon(1e-9));
    CHECK(o.status.active_lower + o.status.active_upper >= 1);
    CHECK_THROWS_AS(BallQuery(line(1.0, 4), 0.0, 1.0), std::invalid_argument);
}

}  // TEST_SUITE
