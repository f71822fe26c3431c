#include "bbm/path.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bbm {

namespace {

void check_unit(double s) {
    if (!(s >= 0.0 && s <= 1.0))
        throw std::out_of_range("path argument s=" + std::to_string(s) + " outside [0,1]");
}

void check_origin(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("path needs at least one segment");
    if (v.front() != 0.0) throw std::invalid_argument("path must start at the origin, f(0)=0");
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("path value is not finite");
}

// Segment index using the left-segment convention at interior knots.
std::size_t left_segment(double s, std::size_t n) {
    double scaled = s * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::max(0.0, std::ceil(scaled) - 1.0));
    return std::min(k, n - 1);
}

}  // namespace

// ---------------------------------------------------------------- GridPath

GridPath::GridPath(std::vector<double> values) : values_(std::move(values)) { check_origin(values_); }

GridPath GridPath::from_function(const std::function<double(double)>& f, std::size_t n) {
    if (n == 0) throw std::invalid_argument("grid resolution must be >= 1");
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k) v[k] = f(static_cast<double>(k) / static_cast<double>(n));
    v[0] = 0.0;
    return GridPath(std::move(v));
}

double GridPath::slope(std::size_t segment) const {
    return (values_[segment + 1] - values_[segment]) * static_cast<double>(resolution());
}

double GridPath::value(double s) const {
    check_unit(s);
    std::size_t n = resolution();
    auto k = std::min(static_cast<std::size_t>(s * static_cast<double>(n)), n - 1);
    double t = s * static_cast<double>(n) - static_cast<double>(k);
    return values_[k] + t * (values_[k + 1] - values_[k]);
}

double GridPath::derivative(double s) const {
    check_unit(s);
    return slope(left_segment(s, resolution()));
}

double GridPath::integral_derivative_sq(double phi) const {
    check_unit(phi);
    std::size_t n = resolution();
    double h = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double start = static_cast<double>(k) * h;
        if (start >= phi) break;
        double len = std::min(h, phi - start);
        double sl = slope(k);
        total += sl * sl * len;
    }
    return total;
}

// -------------------------------------------------------------- SmoothPath

SmoothPath::SmoothPath(std::vector<double> knots, SplineBoundary boundary)
    : knots_(std::move(knots)), boundary_(boundary) {
    check_origin(knots_);
    std::size_t n = resolution();
    double h = 1.0 / static_cast<double>(n);

    // Tridiagonal system for the knot second derivatives M_0..M_n.
    std::vector<double> lower(n + 1, 0.0), diag(n + 1, 0.0), upper(n + 1, 0.0), rhs(n + 1, 0.0);
    if (boundary_ == SplineBoundary::natural) {
        diag[0] = 1.0;
    } else {
        diag[0] = 2.0 * h;
        upper[0] = h;
        rhs[0] = 6.0 * (knots_[1] - knots_[0]) / h;
    }
    for (std::size_t k = 1; k < n; ++k) {
        lower[k] = h;
        diag[k] = 4.0 * h;
        upper[k] = h;
        rhs[k] = 6.0 * (knots_[k + 1] - 2.0 * knots_[k] + knots_[k - 1]) / h;
    }
    diag[n] = 1.0;

    for (std::size_t k = 1; k <= n; ++k) {
        double w = lower[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    std::vector<double> m(n + 1);
    m[n] = rhs[n] / diag[n];
    for (std::size_t k = n; k-- > 0;) m[k] = (rhs[k] - upper[k] * m[k + 1]) / diag[k];

    segments_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        Segment& seg = segments_[k];
        seg.a = knots_[k];
        seg.b = (knots_[k + 1] - knots_[k]) / h - h * (2.0 * m[k] + m[k + 1]) / 6.0;
        seg.c = m[k] / 2.0;
        seg.d = (m[k + 1] - m[k]) / (6.0 * h);
    }
}

SmoothPath SmoothPath::from_function(const std::function<double(double)>& f, std::size_t n,
                                     SplineBoundary boundary) {
    if (n == 0) throw std::invalid_argument("spline resolution must be >= 1");
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k) v[k] = f(static_cast<double>(k) / static_cast<double>(n));
    v[0] = 0.0;
    return SmoothPath(std::move(v), boundary);
}

std::size_t SmoothPath::locate(double s) const {
    std::size_t n = resolution();
    return std::min(static_cast<std::size_t>(s * static_cast<double>(n)), n - 1);
}

double SmoothPath::value(double s) const {
    check_unit(s);
    std::size_t k = locate(s);
    double t = s - static_cast<double>(k) / static_cast<double>(resolution());
    const Segment& g = segments_[k];
    return g.a + t * (g.b + t * (g.c + t * g.d));
}

double SmoothPath::derivative(double s) const {
    check_unit(s);
    std::size_t k = locate(s);
    double t = s - static_cast<double>(k) / static_cast<double>(resolution());
    const Segment& g = segments_[k];
    return g.b + t * (2.0 * g.c + 3.0 * g.d * t);
}

double SmoothPath::second_derivative(double s) const {
    check_unit(s);
    std::size_t k = locate(s);
    double t = s - static_cast<double>(k) / static_cast<double>(resolution());
    const Segment& g = segments_[k];
    return 2.0 * g.c + 6.0 * g.d * t;
}

double SmoothPath::integral_derivative_sq(double phi) const {
    check_unit(phi);
    double h = 1.0 / static_cast<double>(resolution());
    double total = 0.0;
    for (std::size_t k = 0; k < segments_.size(); ++k) {
        double start = static_cast<double>(k) * h;
        if (start >= phi) break;
        double tau = std::min(h, phi - start);
        const Segment& g = segments_[k];
        double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
        total += g.b * g.b * tau + 2.0 * g.b * g.c * t2 + (4.0 * g.c * g.c + 6.0 * g.b * g.d) * t3 / 3.0 +
                 3.0 * g.c * g.d * t4 + 9.0 * g.d * g.d * t5 / 5.0;
    }
    return total;
}

double SmoothPath::integral_abs_second_derivative(double phi) const {
    check_unit(phi);
    double h = 1.0 / static_cast<double>(resolution());
    double total = 0.0;
    for (std::size_t k = 0; k < segments_.size(); ++k) {
        double start = static_cast<double>(k) * h;
        if (start >= phi) break;
        double tau = std::min(h, phi - start);
        const Segment& g = segments_[k];
        // f'' = 2c + 6d t is linear on the segment; split at its root.
        auto antideriv = [&](double t) { return 2.0 * g.c * t + 3.0 * g.d * t * t; };
        double root = g.d != 0.0 ? -g.c / (3.0 * g.d) : -1.0;
        if (root > 0.0 && root < tau)
            total += std::abs(antideriv(root)) + std::abs(antideriv(tau) - antideriv(root));
        else
            total += std::abs(antideriv(tau));
    }
    return total;
}

double SmoothPath::max_abs_second_derivative() const {
    double best = 0.0;
    double h = 1.0 / static_cast<double>(resolution());
    for (const Segment& g : segments_)
        best = std::max({best, std::abs(2.0 * g.c), std::abs(2.0 * g.c + 6.0 * g.d * h)});
    return best;
}

// -------------------------------------------------------------------- Path

double eval_path(const Path& path, double s) {
    return std::visit([s](const auto& p) { return p.value(s); }, path);
}

double eval_derivative(const Path& path, double s) {
    return std::visit([s](const auto& p) { return p.derivative(s); }, path);
}

double integral_derivative_sq(const Path& path, double phi) {
    return std::visit([phi](const auto& p) { return p.integral_derivative_sq(phi); }, path);
}

bool is_smooth(const Path& path) { return std::holds_alternative<SmoothPath>(path); }

// -------------------------------------------------------------------- Tube

Tube::Tube(Path p, double eps, double theta_, double horizon)
    : path(std::move(p)), epsilon(eps), theta(theta_), T(horizon) {
    if (!(eps > 0.0)) throw std::invalid_argument("tube radius epsilon must be positive");
    if (!(theta_ >= 0.0 && theta_ <= 1.0)) throw std::invalid_argument("tube theta must lie in [0,1]");
    if (!(horizon > 0.0)) throw std::invalid_argument("tube horizon T must be positive");
}

double Tube::center(double t) const { return T * eval_path(path, std::clamp(t / T, 0.0, 1.0)); }

bool Tube::strictly_inside(double x, double t) const { return std::abs(x - center(t)) < half_width(); }

// ---------------------------------------------------------------- TimeGrid

TimeGrid::TimeGrid(double horizon, std::size_t steps_, std::size_t substeps)
    : T(horizon), steps(steps_), spine_substeps(substeps) {
    if (!(horizon >= 0.0)) throw std::invalid_argument("time grid horizon must be nonnegative");
    if (steps_ < 1) throw std::invalid_argument("time grid needs steps >= 1");
    if (substeps < 1) throw std::invalid_argument("spine substeps must be >= 1");
}

double TimeGrid::time(std::size_t k) const {
    if (k >= steps) return T;
    return T * static_cast<double>(k) / static_cast<double>(steps);
}

std::size_t TimeGrid::index_of(double t) const {
    if (T == 0.0) {
        if (t == 0.0) return 0;
        throw std::invalid_argument("time " + std::to_string(t) + " is not a recorded grid time");
    }
    double scaled = t / T * static_cast<double>(steps);
    double k = std::round(scaled);
    if (k < 0.0 || k > static_cast<double>(steps) || std::abs(scaled - k) > 1e-9)
        throw std::invalid_argument("time " + std::to_string(t) + " is not a recorded grid time");
    return static_cast<std::size_t>(k);
}

std::size_t TimeGrid::last_index_at_or_before(double t) const {
    if (T == 0.0 || t <= 0.0) return 0;
    double scaled = t / T * static_cast<double>(steps);
    auto k = static_cast<std::size_t>(std::floor(scaled + 1e-12));
    k = std::min(k, steps);
    while (k > 0 && time(k) > t) --k;
    return k;
}

}  // namespace bbm
