#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bbm/extended.hpp"
#include "bbm/path.hpp"

namespace bbm::rate {

/// Path energy E(f, phi) = 1/2 int_0^phi f'(s)^2 ds, in closed form.
double energy(const Path& path, double phi);

/// J(f, theta) = growth * theta - E(f, theta), growth = r m.
double j_value(const Path& path, double theta, double growth);

/// Extinction time inf{theta in [0,1] : growth*theta - E(f,theta) < 0}; the
/// empty infimum is reported as +inf. Exact for GridPath (piecewise-linear
/// root); for SmoothPath a fine scan plus bisection to 1e-14.
ExtendedReal theta0(const Path& path, double growth);

/// K(f, theta) = J(f, theta) if theta <= theta0(f), else -inf.
ExtendedReal k_value(const Path& path, double theta, double growth);

struct RateReport {
    double j = 0.0;
    ExtendedReal k;
    ExtendedReal theta0;
    std::vector<double> energy_profile;  // E(f, k/n), k = 0..n
};

RateReport rate_report(const GridPath& path, double theta, double growth);

/// The sup-norm ball {f : |f(s_k) - g(s_k)| <= epsilon} at the knots of g.
struct BallQuery {
    GridPath center;
    double epsilon;
    double theta;

    BallQuery(GridPath g, double eps, double theta_);
    std::size_t resolution() const { return center.resolution(); }
};

struct OptimizerOptions {
    double gradient_tolerance = 1e-10;
    std::size_t max_iterations = 100'000;
    double feasibility_tolerance = 1e-9;
};

struct OptimizerStatus {
    bool converged = false;
    std::size_t iterations = 0;
    double residual = 0.0;        // final projected-gradient infinity norm
    std::size_t active_lower = 0;  // knots pinned at g - eps
    std::size_t active_upper = 0;  // knots pinned at g + eps
    std::string phase = "energy";  // energy | feasibility | constrained
    double max_violation = 0.0;    // max_phi (E(f,phi) - growth*phi) at the returned path
};

struct BallOptimum {
    ExtendedReal value;  // sup K over the ball; -inf when every feasible path goes extinct before theta
    GridPath argmax;
    double energy = 0.0;  // E(argmax, theta)
    OptimizerStatus status;
};

BallOptimum sup_k_over_ball(const BallQuery& query, double growth, const OptimizerOptions& options = {});

struct SchilderResult {
    double value = 0.0;  // inf over the ball of E(f, theta)
    GridPath argmin;
    OptimizerStatus status;
};

SchilderResult schilder_inf(const BallQuery& query, const OptimizerOptions& options = {});

}  // namespace bbm::rate
