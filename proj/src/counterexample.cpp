#include "bbm/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bbm::counterexample {

namespace {

void validate(const Horizon& T) {
    if (T.whole < 0 || !(T.fraction >= 0.0 && T.fraction <= 1.0))
        throw std::invalid_argument("horizon must be nonnegative with fraction in [0, 1]");
}

// Offsets T - n for the n that can bring T - n near [0, 1]: fraction - 1,
// fraction, fraction + 1 (the last needs n = whole - 1 >= 0).
std::vector<double> candidate_offsets(const Horizon& T) {
    std::vector<double> out{T.fraction - 1.0, T.fraction};
    if (T.whole >= 1) out.push_back(T.fraction + 1.0);
    return out;
}

}  // namespace

Horizon Horizon::from_double(double T) {
    if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be finite and >= 0");
    double w = std::floor(T);
    return {static_cast<std::int64_t>(w), T - w};
}

double XValue::x() const { return std::exp(log_x()); }

XValue eval_x(const Horizon& T, double omega) {
    validate(T);
    if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("omega must lie in [0, 1]");
    double half = std::exp(-4.0 * T.value());
    XValue out{false, T.value()};
    for (double c : candidate_offsets(T)) {
        double d = c - omega;  // exact when c and omega are close
        if (d >= -half && d < half) out.high = true;
    }
    return out;
}

double high_measure(const Horizon& T) {
    validate(T);
    double half = std::exp(-4.0 * T.value());
    std::vector<double> centers = candidate_offsets(T);
    if (2.0 * half <= 1.0) {
        // Centres are 1 apart, so the windows are disjoint.
        double total = 0.0;
        for (double c : centers) total += std::max(0.0, std::min(half, 1.0 - c) + std::min(half, c));
        return std::min(total, 1.0);
    }
    std::vector<std::pair<double, double>> windows;
    for (double c : centers) {
        double lo = std::max(0.0, c - half), hi = std::min(1.0, c + half);
        if (hi > lo) windows.emplace_back(lo, hi);
    }
    std::sort(windows.begin(), windows.end());
    double total = 0.0, cur_lo = 0.0, cur_hi = -1.0;
    for (auto [lo, hi] : windows) {
        if (lo > cur_hi) {
            if (cur_hi > cur_lo) total += cur_hi - cur_lo;
            cur_lo = lo;
            cur_hi = hi;
        } else {
            cur_hi = std::max(cur_hi, hi);
        }
    }
    if (cur_hi > cur_lo) total += cur_hi - cur_lo;
    return total;
}

double log_mean(const Horizon& T) {
    double t = T.value();
    double lambda = high_measure(T);
    return t + std::log1p(lambda * std::expm1(t));
}

Report report(std::span<const double> omegas, std::int64_t n_max, std::span<const double> mean_Ts) {
    Report out;
    for (double omega : omegas) {
        double best = 0.0;
        for (std::int64_t n = 1; n <= n_max; ++n) {
            Horizon T{n, omega};
            double rate = eval_x(T, omega).rate();
            out.rows.push_back({omega, n, T.value(), rate});
            best = std::max(best, rate);
        }
        out.max_rate.push_back(best);
    }
    for (double T : mean_Ts) {
        if (!(T > 0.0)) throw std::invalid_argument("mean table needs T > 0");
        out.mean_T.push_back(T);
        out.mean_rate.push_back(log_mean(Horizon::from_double(T)) / T);
    }
    return out;
}

}  // namespace bbm::counterexample
