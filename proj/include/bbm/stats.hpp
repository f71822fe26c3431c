#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bbm {

/// Running mean and variance (Welford). Merging is associative up to rounding,
/// so callers that need bit-identical output accumulate in a fixed order.
class MeanAccumulator {
public:
    void add(double x);
    void merge(const MeanAccumulator& other);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;  // unbiased
    double standard_error() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;

    /// |mean - target| <= k * se.
    bool within(double target, double k = 3.0) const;
    double z_score(double target) const;
};

Estimate estimate(std::span<const double> xs);

/// z-score of the difference of two independent estimates.
double difference_z(const Estimate& a, const Estimate& b);

/// Two-sided one-sample Kolmogorov-Smirnov test against Exp(rate).
struct KsResult {
    double statistic;
    double p_value;
};
KsResult ks_test_exponential(std::vector<double> samples, double rate);

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_survival(double lambda);

/// Pearson chi-square goodness of fit. Cells with expected count below 5 are
/// pooled into their neighbour.
struct ChiSquareResult {
    double statistic;
    std::size_t dof;
    double p_value;
};
ChiSquareResult chi_square_test(std::span<const std::size_t> observed,
                                std::span<const double> probabilities);

}  // namespace bbm
