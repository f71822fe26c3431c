#pragma once

#include <map>
#include <vector>

#include "bbm/rng.hpp"

namespace bbm {

/// Finite-support offspring distribution on {2, ..., k_max}.
class OffspringLaw {
public:
    /// Throws std::invalid_argument unless the pmf is nonnegative, sums to 1
    /// within 1e-12 and is supported on {2, 3, ...}.
    explicit OffspringLaw(const std::map<int, double>& pmf);

    static OffspringLaw dyadic() { return OffspringLaw({{2, 1.0}}); }

    double probability(int k) const;
    int min_support() const { return min_k_; }
    int max_support() const { return static_cast<int>(probs_.size()) - 1; }
    std::map<int, double> pmf() const;

    double mean() const { return mean_; }
    /// m = E[A] - 1, the expected net gain per branching event.
    double m() const { return mean_ - 1.0; }
    /// E[A log A].
    double a_log_a() const { return a_log_a_; }
    bool is_point_mass() const;

    int sample(RngStream& rng) const;

    friend bool operator==(const OffspringLaw& a, const OffspringLaw& b) {
        return a.probs_ == b.probs_;
    }

private:
    std::vector<double> probs_;  // indexed by k
    std::vector<double> cdf_;    // cumulative over k
    int min_k_ = 2;
    double mean_ = 0.0;
    double a_log_a_ = 0.0;
};

/// Size-biased law q_k = k p_k / E[A].
OffspringLaw size_biased(const OffspringLaw& law);

struct ModelParams {
    double r = 1.0;
    OffspringLaw offspring = OffspringLaw::dyadic();

    ModelParams() = default;
    ModelParams(double rate, OffspringLaw law);

    double m() const { return offspring.m(); }
    double rm() const { return r * offspring.m(); }
    /// Set when m <= 1; the growth results assume m > 1 but dyadic runs are allowed.
    bool low_growth_warning() const { return offspring.m() <= 1.0; }
};

}  // namespace bbm
