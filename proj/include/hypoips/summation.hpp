#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace hypoips {

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
  public:
    void add(double v) noexcept
    {
        const double t = sum_ + v;
        const bool big = std::abs(sum_) >= std::abs(v);
        const double a = big ? sum_ : v;
        const double b = big ? v : sum_;
        comp_ += (a - t) + b;
        sum_ = t;
    }
    void add(const CompensatedSum& other) noexcept
    {
        add(other.sum_);
        add(other.comp_);
    }
    double value() const noexcept { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Accumulates sum_k log(d_k) for positive d_k as a running product split
/// into mantissa and binary exponent; one log at the end instead of one per
/// term.
class LogProduct {
  public:
    void add(double d) noexcept
    {
        const int e = exponent_of(d);
        if (e < -400 || e > 400) {
            // far outside the normal range: fold it in directly
            direct_.add(std::log(d));
            return;
        }
        mantissa_ *= d;
        const int me = exponent_of(mantissa_);
        if (me < -500 || me > 500) {
            int k = 0;
            mantissa_ = std::frexp(mantissa_, &k);
            exponent_ += k;
        }
    }
    void add(const LogProduct& other) noexcept
    {
        mantissa_ *= other.mantissa_;
        int k = 0;
        mantissa_ = std::frexp(mantissa_, &k);
        exponent_ += k + other.exponent_;
        direct_.add(other.direct_);
    }
    double value() const noexcept
    {
        CompensatedSum s;
        s.add(std::log(mantissa_));
        s.add(static_cast<double>(exponent_) * std::numbers::ln2);
        s.add(direct_);
        return s.value();
    }

  private:
    static int exponent_of(double v) noexcept
    {
        return static_cast<int>((std::bit_cast<std::uint64_t>(v) >> 52) & 0x7ff) - 1023;
    }

    double mantissa_ = 1.0;
    std::int64_t exponent_ = 0;
    CompensatedSum direct_;
};

}  // namespace hypoips
