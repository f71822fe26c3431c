#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bbm/count.hpp"
#include "bbm/forest.hpp"

using namespace bbm;

namespace {

ModelParams dyadic() { return ModelParams(1.0, OffspringLaw::dyadic()); }

/// A forest whose root never moves and never branches before the horizon.
Forest still_root(double T, std::size_t steps) {
    TimeGrid grid(T, steps);
    Forest f{dyadic(), grid, T, {}, false, {}};
    ParticleRecord root;
    root.death = T;
    root.censored = true;
    root.grid_first = 0;
    root.grid_x.assign(steps + 1, 0.0);
    f.records.push_back(root);
    return f;
}

}  // namespace

TEST_SUITE("path_count") {

TEST_CASE("membership worked examples") {
    TimeGrid grid(4.0, 40);
    RngStream rng(1, 0);
    Forest f = simulate_forest(dyadic(), grid, 4.0, rng);
    Tube huge(GridPath::zero(4), 1e6, 1.0, 4.0);
    std::vector<char> in = lineage_in_tube(f, huge);
    for (char c : in) CHECK(c == 1);

    Forest still = still_root(2.0, 4);
    CHECK(in_tube(still, 0, Tube(GridPath::zero(2), 1e-3, 1.0, 2.0)));

    // A recorded point exactly at distance eps T is outside (strict inequality).
    still.records[0].grid_x[2] = 0.5;
    CHECK_FALSE(in_tube(still, 0, Tube(GridPath::zero(2), 0.25, 1.0, 2.0)));
    CHECK(in_tube(still, 0, Tube(GridPath::zero(2), 0.2500001, 1.0, 2.0)));
    // ...unless that time lies after theta T.
    CHECK(in_tube(still, 0, Tube(GridPath::zero(2), 0.25, 0.4, 2.0)));
}

TEST_CASE("membership needs the forest recorded to theta T") {
    TimeGrid grid(4.0, 8);
    RngStream rng(2, 0);
    Forest f = simulate_forest(dyadic(), grid, 2.0, rng);
    CHECK_THROWS_AS(lineage_in_tube(f, Tube(GridPath::zero(2), 0.5, 1.0, 4.0)), std::invalid_argument);
    CHECK_NOTHROW(lineage_in_tube(f, Tube(GridPath::zero(2), 0.5, 0.5, 4.0)));
}

TEST_CASE("family semantics") {
    TimeGrid grid(3.0, 30);
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        RngStream rng(3, rep);
        Forest f = simulate_forest(dyadic(), grid, 3.0, rng);
        Tube up(GridPath::from_function([](double s) { return 0.5 * s; }, 4), 0.2, 1.0, 3.0);
        Tube down(GridPath::from_function([](double s) { return -0.5 * s; }, 4), 0.2, 1.0, 3.0);
        Tube mid(GridPath::zero(4), 0.3, 1.0, 3.0);

        CountReport single = count_tube(f, mid);
        CountReport fam1 = count_family(f, TubeFamily({mid}));
        CHECK(single.count == fam1.count);

        // Disjoint at theta T (centres 3 apart, radius 0.6 each): union is the sum.
        CountReport disjoint = count_family(f, TubeFamily({up, down}));
        CHECK(disjoint.count == disjoint.per_tube[0] + disjoint.per_tube[1]);

        CountReport overlap = count_family(f, TubeFamily({up, mid}));
        CHECK(overlap.count <= overlap.per_tube[0] + overlap.per_tube[1]);
        CHECK(overlap.count >= std::max(overlap.per_tube[0], overlap.per_tube[1]));
    }
    CHECK_THROWS_AS(TubeFamily({}), std::invalid_argument);
    CHECK_THROWS_AS(TubeFamily({Tube(GridPath::zero(2), 0.1, 1.0, 2.0), Tube(GridPath::zero(2), 0.1, 0.5, 2.0)}),
                    std::invalid_argument);
}

TEST_CASE("counts are monotone in epsilon and theta") {
    TimeGrid grid(4.0, 40);
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        RngStream rng(4, rep);
        Forest f = simulate_forest(dyadic(), grid, 4.0, rng);
        Path p = GridPath::from_function([](double s) { return 0.3 * s; }, 8);
        std::size_t prev = 0;
        for (double eps : {0.05, 0.1, 0.2, 0.4, 1.0}) {
            std::size_t c = count_tube(f, Tube(p, eps, 1.0, 4.0)).count;
            CHECK(c >= prev);
            prev = c;
        }
        // An empty count at theta' forces an empty count at every later theta.
        bool empty = false;
        for (double theta : {0.25, 0.5, 0.75, 1.0}) {
            std::size_t c = count_tube(f, Tube(p, 0.08, theta, 4.0)).count;
            if (empty) CHECK(c == 0);
            empty = empty || c == 0;
        }
    }
}

TEST_CASE("growth rate is integer valued") {
    CHECK(growth_rate_of(0, 5.0).is_minus_infinity());
    CHECK(growth_rate_of(1, 5.0) == ExtendedReal(0.0));
    CHECK(growth_rate_of(20, 2.0).value() == doctest::Approx(std::log(20.0) / 2.0));
}

TEST_CASE("theta zero counts only the root") {
    TubeSpec spec{GridPath::zero(4), 0.5, 0.0};
    GrowthOptions opt;
    opt.replicates = 20;
    std::vector<double> Ts{2.0, 3.0};
    GrowthCurve c = growth_curve(dyadic(), spec, Ts, opt);
    for (const GrowthReplicate& r : c.replicates) {
        CHECK(r.count == 1);
        CHECK(r.growth_rate == ExtendedReal(0.0));
    }
    std::vector<double> bad{3.0, 2.0};
    CHECK_THROWS_AS(growth_curve(dyadic(), spec, bad, opt), std::invalid_argument);
}

TEST_CASE("bridge correction only removes particles") {
    TimeGrid grid(3.0, 15);
    Tube tube(GridPath::zero(4), 0.3, 1.0, 3.0);
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        RngStream rng(5, rep);
        Forest f = simulate_forest(dyadic(), grid, 3.0, rng);
        std::vector<char> plain = lineage_in_tube(f, tube);
        std::vector<char> bridged = lineage_in_tube(f, tube, {true});
        for (std::size_t i = 0; i < plain.size(); ++i) CHECK(bridged[i] <= plain[i]);
        CHECK(bridged == lineage_in_tube(f, tube, {true}));  // reproducible
    }
    CHECK(bridge_survival(0.0, 0.0, 0.0, 0.0, 1.0, 1e-6) == doctest::Approx(1.0));
    CHECK(bridge_survival(0.999, 0.0, 0.999, 0.0, 1.0, 1.0) < 0.01);
}

TEST_CASE("extreme-path diagnostic") {
    std::vector<double> flat(1025, 0.0);
    CHECK(f_n_diagnostic(flat, 4) == FnMembership::outside);
    CHECK(f_n_diagnostic(flat, 32) == FnMembership::outside);

    std::vector<double> jump(1025, 0.0);
    for (std::size_t i = 513; i < jump.size(); ++i) jump[i] = 1.0;
    CHECK(f_n_diagnostic(jump, 4) == FnMembership::inside);

    // ceil(sqrt(1024)) = 32 is the largest decidable n.
    CHECK(f_n_diagnostic(jump, 33) == FnMembership::indeterminate);
    CHECK_THROWS_AS(f_n_diagnostic(std::vector<double>{0.0}, 1), std::invalid_argument);

    // A slope-one line never moves by 1/sqrt(n) within 1/n^2.
    std::vector<double> ramp(4097);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 4096.0;
    CHECK(f_n_diagnostic(ramp, 2) == FnMembership::outside);
}

}  // TEST_SUITE
