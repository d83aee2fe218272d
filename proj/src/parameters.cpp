#include "hypoips/parameters.hpp"

#include <cmath>
#include <stdexcept>

#include "hypoips/errors.hpp"

namespace hypoips {

ParameterVector::ParameterVector(ParameterLayout layout, std::vector<double> values,
                                 std::vector<Interval> bounds, std::vector<std::string> names)
    : layout_(layout), values_(std::move(values)), bounds_(std::move(bounds)), names_(std::move(names))
{
    if (layout_.n_alpha_s < 0 || layout_.n_alpha_r < 1 || layout_.n_beta < 1) {
        throw ShapeError("parameter layout needs d_alphaS >= 0, d_alphaR >= 1, d_beta >= 1");
    }
    const auto d = static_cast<std::size_t>(layout_.size());
    if (values_.size() != d || bounds_.size() != d) {
        throw ShapeError("parameter vector of size " + std::to_string(values_.size()) +
                         " with " + std::to_string(bounds_.size()) + " bounds, expected " +
                         std::to_string(d));
    }
    if (names_.empty()) {
        for (std::size_t k = 0; k < d; ++k) {
            names_.push_back("theta" + std::to_string(k));
        }
    }
    if (names_.size() != d) {
        throw ShapeError("parameter names do not match the layout");
    }
    for (std::size_t k = 0; k < d; ++k) {
        if (!(bounds_[k].lo <= bounds_[k].hi)) {
            throw std::out_of_range("empty bound interval for " + names_[k]);
        }
        if (!std::isfinite(values_[k]) || !bounds_[k].contains(values_[k])) {
            throw std::out_of_range("parameter " + names_[k] + "=" + std::to_string(values_[k]) +
                                    " outside [" + std::to_string(bounds_[k].lo) + ", " +
                                    std::to_string(bounds_[k].hi) + "]");
        }
    }
}

ParameterVector ParameterVector::with_values(std::span<const double> values) const
{
    return ParameterVector(layout_, std::vector<double>(values.begin(), values.end()), bounds_, names_);
}

Eigen::VectorXd ParameterVector::to_eigen() const
{
    return Eigen::Map<const Eigen::VectorXd>(values_.data(), static_cast<Eigen::Index>(values_.size()));
}

std::vector<Interval> margin_bounds(std::span<const double> theta, double margin)
{
    if (!(margin > 0.0)) {
        throw std::invalid_argument("bound margin must be positive");
    }
    std::vector<Interval> out;
    out.reserve(theta.size());
    for (double t : theta) {
        const double half = std::abs(t) * margin;
        // a zero component still gets a non-empty box
        const double w = half > 0.0 ? half : margin;
        out.push_back({t - w, t + w});
    }
    return out;
}

}  // namespace hypoips
