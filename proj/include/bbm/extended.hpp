#pragma once

#include <string>

namespace bbm {

/// A real number or one of the sentinels +inf / -inf. Sentinels never take
/// part in arithmetic; callers branch on kind().
class ExtendedReal {
public:
    enum class Kind { finite, plus_infinity, minus_infinity };

    constexpr ExtendedReal() = default;
    constexpr explicit ExtendedReal(double v) : value_(v) {}

    static constexpr ExtendedReal plus_infinity() { return ExtendedReal(Kind::plus_infinity); }
    static constexpr ExtendedReal minus_infinity() { return ExtendedReal(Kind::minus_infinity); }

    constexpr Kind kind() const { return kind_; }
    constexpr bool is_finite() const { return kind_ == Kind::finite; }
    constexpr bool is_plus_infinity() const { return kind_ == Kind::plus_infinity; }
    constexpr bool is_minus_infinity() const { return kind_ == Kind::minus_infinity; }
    /// Only valid when is_finite().
    constexpr double value() const { return value_; }

    /// "inf", "-inf" or the shortest round-trip decimal.
    std::string to_string() const;

    friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
        return a.kind_ == b.kind_ && (a.kind_ != Kind::finite || a.value_ == b.value_);
    }

private:
    constexpr explicit ExtendedReal(Kind k) : kind_(k) {}

    Kind kind_ = Kind::finite;
    double value_ = 0.0;
};

}  // namespace bbm
