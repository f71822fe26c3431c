#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "bbm/offspring.hpp"
#include "bbm/path.hpp"
#include "bbm/rate.hpp"
#include "bbm/rng.hpp"

using namespace bbm;

TEST_SUITE("model_core") {

TEST_CASE("size biasing a point mass is the identity") {
    CHECK(size_biased(OffspringLaw::dyadic()) == OffspringLaw::dyadic());
}

TEST_CASE("size biasing two-point laws") {
    OffspringLaw a({{2, 0.5}, {3, 0.5}});
    OffspringLaw qa = size_biased(a);
    CHECK(qa.probability(2) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(qa.probability(3) == doctest::Approx(0.6).epsilon(1e-14));

    OffspringLaw b({{2, 0.25}, {4, 0.75}});
    OffspringLaw qb = size_biased(b);
    CHECK(qb.probability(2) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
    CHECK(qb.probability(4) == doctest::Approx(6.0 / 7.0).epsilon(1e-14));
    CHECK(qb.probability(3) == 0.0);

    // A second application is not the identity for non-point masses.
    OffspringLaw qqa = size_biased(qa);
    CHECK(qqa.probability(2) == doctest::Approx(2 * 0.4 / (2 * 0.4 + 3 * 0.6)));
    CHECK_FALSE(qqa == qa);
}

TEST_CASE("size biasing never lowers the mean") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<int, double> pmf;
        double total = 0.0;
        int kmax = 2 + static_cast<int>(u(gen) * 6);
        for (int k = 2; k <= kmax; ++k) total += pmf[k] = u(gen);
        for (auto& [k, p] : pmf) p /= total;
        // Renormalise exactly so the sum check is met.
        double s = 0.0;
        for (auto& [k, p] : pmf) s += p;
        pmf.rbegin()->second += 1.0 - s;
        OffspringLaw law(pmf);
        CHECK(size_biased(law).mean() >= law.mean() - 1e-12);
    }
}

TEST_CASE("offspring law validation") {
    CHECK_THROWS_AS(OffspringLaw({{1, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(OffspringLaw({{2, 0.5}, {3, 0.4}}), std::invalid_argument);
    CHECK_THROWS_AS(OffspringLaw({{2, 1.2}, {3, -0.2}}), std::invalid_argument);
    OffspringLaw law({{2, 0.5}, {3, 0.5}});
    CHECK(law.mean() == doctest::Approx(2.5));
    CHECK(law.m() == doctest::Approx(1.5));
    CHECK(law.a_log_a() == doctest::Approx(0.5 * 2 * std::log(2.0) + 0.5 * 3 * std::log(3.0)));
}

TEST_CASE("model parameters") {
    CHECK_THROWS_AS(ModelParams(0.0, OffspringLaw::dyadic()), std::invalid_argument);
    CHECK(ModelParams(1.0, OffspringLaw::dyadic()).low_growth_warning());
    CHECK_FALSE(ModelParams(1.0, OffspringLaw({{3, 1.0}})).low_growth_warning());
    CHECK(ModelParams(2.0, OffspringLaw({{3, 1.0}})).rm() == doctest::Approx(4.0));
}

TEST_CASE("offspring sampling frequencies") {
    RngStream rng(5, 0);
    for (int i = 0; i < 1000; ++i) CHECK(OffspringLaw::dyadic().sample(rng) == 2);

    OffspringLaw law({{2, 0.5}, {3, 0.5}});
    const int n = 100000;
    int twos = 0;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        int a = law.sample(rng);
        twos += a == 2;
        sum += a;
        sumsq += static_cast<double>(a) * a;
    }
    CHECK(std::abs(twos / double(n) - 0.5) <= 3.0 * std::sqrt(0.25 / n));
    double mean = sum / n, var = sumsq / n - mean * mean;
    CHECK(std::abs(mean - law.mean()) <= 3.0 * std::sqrt(var / n));
}

TEST_CASE("rng streams are reproducible and distinct") {
    RngStream a(42, 3, 1), b(42, 3, 1), c(42, 3, 2), d(42, 4, 1);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 100; ++i) {
        double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        differs_c |= x != c.uniform();
        differs_d |= x != d.uniform();
    }
    CHECK(differs_c);
    CHECK(differs_d);
    RngStream e = a.derive(9);
    CHECK(e.id().stream == 9);
    CHECK(e.id().replicate == 3);
}

TEST_CASE("grid path evaluation") {
    GridPath id = GridPath::from_function([](double s) { return s; }, 10);
    CHECK(id.value(0.3) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(id.value(0.0) == 0.0);

    GridPath kink({0.0, 0.5, 0.5});
    CHECK(kink.derivative(0.25) == doctest::Approx(1.0));
    CHECK(kink.derivative(0.75) == doctest::Approx(0.0));
    CHECK(kink.derivative(0.5) == doctest::Approx(1.0));  // left segment at a knot
    CHECK_THROWS_AS(GridPath({0.1, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(eval_path(Path(kink), 1.5), std::out_of_range);
    CHECK_THROWS_AS(eval_path(Path(kink), -0.1), std::out_of_range);
}

TEST_CASE("grid path energy matches the sum of squared slopes") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 1 + trial % 17;
        std::vector<double> v(n + 1, 0.0);
        for (std::size_t k = 1; k <= n; ++k) v[k] = v[k - 1] + z(gen) / std::sqrt(double(n));
        GridPath p(v);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) sum += p.slope(k) * p.slope(k) / double(n);
        CHECK(rate::energy(p, 1.0) == doctest::Approx(0.5 * sum).epsilon(1e-12));
    }
}

TEST_CASE("smooth path interpolation and closed-form integrals") {
    SmoothPath clamped = SmoothPath::from_function([](double s) { return 0.8 * s * s; }, 32,
                                                   SplineBoundary::clamped_start);
    CHECK(clamped.value(0.0) == 0.0);
    CHECK(clamped.derivative(0.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(clamped.value(0.5) == doctest::Approx(0.2).epsilon(1e-4));
    CHECK(clamped.derivative(0.5) == doctest::Approx(0.8).epsilon(1e-3));

    // Closed forms against composite Simpson on a fine grid.
    const int m = 20000;
    for (double phi : {0.1, 0.37, 0.5, 1.0}) {
        double sq = 0.0, ab = 0.0, h = phi / m;
        for (int i = 0; i <= m; ++i) {
            double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            double d = clamped.derivative(i * h);
            sq += w * d * d;
            ab += w * std::abs(clamped.second_derivative(i * h));
        }
        CHECK(clamped.integral_derivative_sq(phi) == doctest::Approx(sq * h / 3.0).epsilon(1e-8));
        CHECK(clamped.integral_abs_second_derivative(phi) == doctest::Approx(ab * h / 3.0).epsilon(1e-4));
    }

    SmoothPath line = SmoothPath::from_function([](double s) { return 0.7 * s; }, 8, SplineBoundary::natural);
    CHECK(line.derivative(0.3) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(line.integral_abs_second_derivative(1.0) == doctest::Approx(0.0).scale(1.0));
    CHECK(SmoothPath::zero(4).max_abs_second_derivative() == 0.0);
    CHECK_THROWS_AS(SmoothPath({0.2, 0.3}, SplineBoundary::natural), std::invalid_argument);
}

TEST_CASE("tube and time grid") {
    Tube tube(GridPath::from_function([](double s) { return s; }, 4), 0.5, 1.0, 10.0);
    CHECK(tube.center(5.0) == doctest::Approx(5.0));
    CHECK(tube.half_width() == 5.0);
    CHECK(tube.strictly_inside(9.99, 5.0));
    CHECK_FALSE(tube.strictly_inside(10.0, 5.0));
    CHECK_THROWS_AS(Tube(GridPath::zero(2), 0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Tube(GridPath::zero(2), 0.1, 1.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Tube(GridPath::zero(2), 0.1, 0.5, 0.0), std::invalid_argument);

    TimeGrid grid(6.0, 60);
    CHECK(grid.time(60) == 6.0);
    CHECK(grid.index_of(1.5) == 15);
    CHECK(grid.last_index_at_or_before(1.55) == 15);
    CHECK_THROWS_AS(grid.index_of(1.55), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 1, 0), std::invalid_argument);
}

}  // TEST_SUITE
