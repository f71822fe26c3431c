#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace bbm {

/// Piecewise-linear rescaled path on the uniform grid s_k = k/n, with f(0) = 0.
/// The derivative is piecewise constant; at interior knots the slope of the
/// left segment is returned.
class GridPath {
public:
    explicit GridPath(std::vector<double> values);

    static GridPath from_function(const std::function<double(double)>& f, std::size_t n);
    static GridPath zero(std::size_t n) { return GridPath(std::vector<double>(n + 1, 0.0)); }

    std::size_t resolution() const { return values_.size() - 1; }
    std::span<const double> values() const { return values_; }
    double knot(std::size_t k) const { return values_[k]; }
    double slope(std::size_t segment) const;

    double value(double s) const;
    double derivative(double s) const;
    /// Closed form of the integral of f'^2 over [0, phi].
    double integral_derivative_sq(double phi) const;

private:
    std::vector<double> values_;
};

enum class SplineBoundary {
    natural,        // f''(0) = f''(1) = 0
    clamped_start,  // f'(0) = 0, f''(1) = 0
};

/// C^2 cubic spline through values at s_k = k/n with f(0) = 0.
class SmoothPath {
public:
    SmoothPath(std::vector<double> knots, SplineBoundary boundary);

    static SmoothPath from_function(const std::function<double(double)>& f, std::size_t n,
                                    SplineBoundary boundary);
    static SmoothPath zero(std::size_t n, SplineBoundary boundary = SplineBoundary::clamped_start) {
        return SmoothPath(std::vector<double>(n + 1, 0.0), boundary);
    }

    std::size_t resolution() const { return knots_.size() - 1; }
    std::span<const double> knots() const { return knots_; }
    SplineBoundary boundary() const { return boundary_; }

    double value(double s) const;
    double derivative(double s) const;
    double second_derivative(double s) const;

    double integral_derivative_sq(double phi) const;
    double integral_abs_second_derivative(double phi) const;
    double max_abs_second_derivative() const;

private:
    struct Segment {
        double a, b, c, d;  // a + b t + c t^2 + d t^3, t = s - s_k
    };
    std::size_t locate(double s) const;

    std::vector<double> knots_;
    SplineBoundary boundary_;
    std::vector<Segment> segments_;
};

using Path = std::variant<GridPath, SmoothPath>;

/// Throws std::out_of_range for s outside [0, 1].
double eval_path(const Path& path, double s);
double eval_derivative(const Path& path, double s);
double integral_derivative_sq(const Path& path, double phi);
bool is_smooth(const Path& path);

/// {(x, t) : |x - T f(t/T)| < eps T, t <= theta T}.
struct Tube {
    Path path;
    double epsilon;
    double theta;
    double T;

    Tube(Path p, double eps, double theta_, double horizon);

    double center(double t) const;
    double half_width() const { return epsilon * T; }
    double stop_time() const { return theta * T; }
    bool strictly_inside(double x, double t) const;
};

/// Recording grid t_k = k T / steps, k = 0..steps.
struct TimeGrid {
    double T;
    std::size_t steps;
    std::size_t spine_substeps = 1;

    TimeGrid(double horizon, std::size_t steps_, std::size_t substeps = 1);

    double dt() const { return T / static_cast<double>(steps); }
    double time(std::size_t k) const;
    /// Index of the grid point equal to t (within 1e-9 relative); throws if t is
    /// not a grid time.
    std::size_t index_of(double t) const;
    /// Largest k with t_k <= t.
    std::size_t last_index_at_or_before(double t) const;
};

}  // namespace bbm
