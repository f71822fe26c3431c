#pragma once

// Independent reference computations used only by the tests. None of these
// share code with the library routines they check.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

/// Energy 1/2 int_0^phi f'^2 of the piecewise-linear interpolant of `v` on a
/// uniform grid of [0,1], by direct summation.
inline double energy(const std::vector<double>& v, double phi) {
    std::size_t n = v.size() - 1;
    double h = 1.0 / static_cast<double>(n), e = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double a = k * h, b = (k + 1) * h;
        if (a >= phi) break;
        double slope = (v[k + 1] - v[k]) / h;
        e += 0.5 * slope * slope * (std::min(b, phi) - a);
    }
    return e;
}

/// First root of growth*theta - E(theta) by a dense scan with `points` samples,
/// then bisection inside the bracketing cell. nullopt when the function stays
/// >= 0 on [0,1].
inline std::optional<double> theta0_scan(const std::vector<double>& v, double growth, std::size_t points) {
    auto g = [&](double th) { return growth * th - energy(v, th); };
    // Walk segment by segment so each sample costs O(1).
    std::size_t n = v.size() - 1;
    double h = 1.0 / static_cast<double>(n);
    double acc = 0.0;  // energy up to the start of the current segment
    std::size_t seg = 0;
    double prev = 0.0;
    for (std::size_t i = 1; i <= points; ++i) {
        double th = static_cast<double>(i) / static_cast<double>(points);
        while (seg + 1 < n && th > (seg + 1) * h) {
            double s = (v[seg + 1] - v[seg]) / h;
            acc += 0.5 * s * s * h;
            ++seg;
        }
        double s = (v[seg + 1] - v[seg]) / h;
        double val = growth * th - (acc + 0.5 * s * s * (th - seg * h));
        if (val < 0.0) {
            double lo = prev, hi = th;
            for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                double mid = 0.5 * (lo + hi);
                (g(mid) < 0.0 ? hi : lo) = mid;
            }
            return hi;
        }
        prev = th;
    }
    return std::nullopt;
}

struct LatticeResult {
    bool any_alive = false;            // some lattice path survives to theta
    double best_k = -std::numeric_limits<double>::infinity();
    double min_energy = std::numeric_limits<double>::infinity();  // over all lattice paths, no truncation
    double max_abs_step_sum = 0.0;     // sum |delta f| at the energy minimiser
};

/// Exhaustive search over paths with f_0 = 0 and f_k in {g_k + j eps / 4 : j = -4..4}.
/// K is growth*theta - E(theta) when growth*phi - E(phi) >= 0 at every knot phi <= theta
/// and at theta (the function is piecewise linear between knots, so this is exact).
inline LatticeResult lattice_search(const std::vector<double>& g, double eps, double theta, double growth) {
    std::size_t n = g.size() - 1;
    std::vector<int> idx(n, -4);
    std::vector<double> f(n + 1, 0.0);
    LatticeResult out;
    double h = 1.0 / static_cast<double>(n);
    for (;;) {
        for (std::size_t k = 1; k <= n; ++k) f[k] = g[k] + eps * idx[k - 1] / 4.0;
        double e_theta = energy(f, theta);
        if (e_theta < out.min_energy) {
            out.min_energy = e_theta;
            double s = 0.0;
            for (std::size_t k = 0; k < n && k * h < theta; ++k) s += std::abs(f[k + 1] - f[k]);
            out.max_abs_step_sum = s;
        }
        bool alive = growth * theta - e_theta >= 0.0;
        for (std::size_t k = 1; k <= n && alive; ++k) {
            double phi = k * h;
            if (phi > theta) break;
            alive = growth * phi - energy(f, phi) >= 0.0;
        }
        if (alive) {
            out.any_alive = true;
            out.best_k = std::max(out.best_k, growth * theta - e_theta);
        }
        std::size_t pos = 0;
        while (pos < n && ++idx[pos] > 4) idx[pos++] = -4;
        if (pos == n) break;
    }
    return out;
}

/// Worst-case energy gap between the continuous box optimum and its nearest
/// lattice neighbour: rounding moves each knot by at most h/2 (h = eps/4), so each
/// slope moves by at most h n and E changes by at most n (h sum|df| + n h^2 / 2).
inline double lattice_energy_bound(std::size_t n, double eps, double abs_step_sum) {
    double h = eps / 4.0;
    double nn = static_cast<double>(n);
    return nn * (h * abs_step_sum + nn * h * h / 2.0);
}

}  // namespace oracle
