#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hypoips {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    double clamp(double v) const noexcept { return v < lo ? lo : (v > hi ? hi : v); }
    double midpoint() const noexcept { return 0.5 * (lo + hi); }
};

/// Sizes of the three parameter blocks (alpha_S, alpha_R, beta).
struct ParameterLayout {
    int n_alpha_s = 0;
    int n_alpha_r = 1;
    int n_beta = 1;

    int size() const noexcept { return n_alpha_s + n_alpha_r + n_beta; }
    int alpha_r_offset() const noexcept { return n_alpha_s; }
    int beta_offset() const noexcept { return n_alpha_s + n_alpha_r; }
};

/// Read-only view of a flat parameter vector split into its three blocks.
/// Flattening order is (alpha_S, alpha_R, beta).
struct ParamView {
    std::span<const double> alpha_s;
    std::span<const double> alpha_r;
    std::span<const double> beta;

    static ParamView split(std::span<const double> flat, const ParameterLayout& layout)
    {
        return {flat.subspan(0, layout.n_alpha_s),
                flat.subspan(layout.alpha_r_offset(), layout.n_alpha_r),
                flat.subspan(layout.beta_offset(), layout.n_beta)};
    }
};

/// theta = (alpha_S, alpha_R, beta) together with the box it must live in.
class ParameterVector {
  public:
    ParameterVector() = default;
    ParameterVector(ParameterLayout layout, std::vector<double> values, std::vector<Interval> bounds,
                    std::vector<std::string> names = {});

    const ParameterLayout& layout() const noexcept { return layout_; }
    int size() const noexcept { return layout_.size(); }

    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> alpha_s() const noexcept { return view().alpha_s; }
    std::span<const double> alpha_r() const noexcept { return view().alpha_r; }
    std::span<const double> beta() const noexcept { return view().beta; }
    ParamView view() const noexcept { return ParamView::split(values_, layout_); }

    const std::vector<Interval>& bounds() const noexcept { return bounds_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    double operator[](int k) const { return values_.at(static_cast<std::size_t>(k)); }

    /// Copy with new values; throws ShapeError / std::out_of_range when
    /// the size is wrong or a value leaves its interval.
    ParameterVector with_values(std::span<const double> values) const;

    Eigen::VectorXd to_eigen() const;

  private:
    ParameterLayout layout_;
    std::vector<double> values_;
    std::vector<Interval> bounds_;
    std::vector<std::string> names_;
};

/// Box theta_k * (1 -/+ margin), widened to a sensible ordering when theta_k < 0.
std::vector<Interval> margin_bounds(std::span<const double> theta, double margin);

}  // namespace hypoips
