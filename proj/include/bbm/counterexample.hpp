#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bbm::counterexample {

/// A horizon T = whole + fraction kept in two parts so that T - n is exact for
/// every integer n (the matching window e^{-4T} is far below double spacing).
struct Horizon {
    std::int64_t whole = 0;
    double fraction = 0.0;  // in [0, 1]

    double value() const { return static_cast<double>(whole) + fraction; }
    static Horizon from_double(double T);
};

/// X_T(omega) = e^{2T} if T - n lies in [omega - e^{-4T}, omega + e^{-4T}) for
/// some n in {0, 1, 2, ...}, else e^T. Only the branch is returned; log X_T is
/// 2T or T exactly.
struct XValue {
    bool high = false;
    double T = 0.0;

    double log_x() const { return high ? 2.0 * T : T; }
    double rate() const { return high ? 2.0 : 1.0; }  // (1/T) log X_T, T > 0
    double x() const;
};

XValue eval_x(const Horizon& T, double omega);
inline XValue eval_x(double T, double omega) { return eval_x(Horizon::from_double(T), omega); }

/// Lebesgue measure of the omega-set in [0, 1] on which X_T = e^{2T}.
double high_measure(const Horizon& T);

/// log E[X_T] = log(e^{2T} lambda + e^T (1 - lambda)).
double log_mean(const Horizon& T);

struct SweepRow {
    double omega;
    std::int64_t n;
    double T;
    double rate;
};

struct Report {
    std::vector<SweepRow> rows;          // (1/T) log X_T(omega) along T = n + omega
    std::vector<double> max_rate;        // per omega, over the sweep
    std::vector<double> mean_T;          // T values for the mean table
    std::vector<double> mean_rate;       // (1/T) log E[X_T]
};

/// Sweeps T = n + omega for n = 1..n_max at each omega, and tabulates the
/// mean growth at each T in `mean_Ts`.
Report report(std::span<const double> omegas, std::int64_t n_max, std::span<const double> mean_Ts);

}  // namespace bbm::counterexample
