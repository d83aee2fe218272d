#pragma once

#include <functional>
#include <span>

#include "hypoips/model.hpp"

namespace hypoips::models {

/// Interacting FitzHugh-Nagumo neurons, theta = (a, b, c, kappa, sigma).
///
/// State is (Y, X): the recovery variable Y is the smooth coordinate, the
/// voltage X is the rough one.
///
///   dX = (X - X^3/3 - Y) dt - kappa/N sum_l (X - X^l) dt + sigma dB
///   dY = (X + a - b Y)/c dt
struct InteractingFHN {
    static constexpr int kSmoothDim = 1;
    static constexpr int kRoughDim = 1;
    static constexpr int kNoiseDim = 1;
    static constexpr int kFeatureCount = 1;

    using Tr = Dims<1, 1, 1>;

    ParameterLayout layout() const { return {3, 1, 1}; }

    Tr::SmoothVec smooth_drift(std::span<const double> as, const Tr::State& x) const
    {
        return Tr::SmoothVec((x[1] + as[0] - as[1] * x[0]) / as[2]);
    }
    Tr::SmoothJacobian smooth_jacobian(std::span<const double> as, const Tr::State&) const
    {
        return Tr::SmoothJacobian(-as[1] / as[2], 1.0 / as[2]);
    }
    Tr::HessianStack smooth_rr_hessian(std::span<const double>, const Tr::State&) const
    {
        return {Tr::RoughHessian::Zero()};
    }
    Tr::RoughVec rough_drift_self(std::span<const double>, const Tr::State& x) const
    {
        return Tr::RoughVec(x[1] - x[1] * x[1] * x[1] / 3.0 - x[0]);
    }
    Tr::RoughVec rough_drift_pair(std::span<const double> ar, const Tr::State& x, const Tr::State& w) const
    {
        return Tr::RoughVec(-ar[0] * (x[1] - w[1]));
    }
    Tr::DiffusionMatrix diffusion_self(std::span<const double> beta, const Tr::State&) const
    {
        return Tr::DiffusionMatrix(beta[0]);
    }
    Tr::DiffusionMatrix diffusion_pair(std::span<const double>, const Tr::State&, const Tr::State&) const
    {
        return Tr::DiffusionMatrix::Zero();
    }

    Eigen::Matrix<double, 1, 1> interaction_features(const Tr::State& w) const
    {
        return Eigen::Matrix<double, 1, 1>(w[1]);
    }
    Tr::RoughVec rough_drift_pair_mean(std::span<const double> ar, const Tr::State& x,
                                       const Eigen::Matrix<double, 1, 1>& f) const
    {
        return Tr::RoughVec(-ar[0] * (x[1] - f[0]));
    }
    Tr::DiffusionMatrix diffusion_pair_mean(std::span<const double>, const Tr::State&,
                                            const Eigen::Matrix<double, 1, 1>&) const
    {
        return Tr::DiffusionMatrix::Zero();
    }
};

/// Interacting underdamped Langevin dynamics in one dimension,
/// theta = (lambda, gamma, kappa, sigma), V(q) = lambda (q - 0.5)^2,
/// U(q) = q^2 / 2, state (q, p).
struct InteractingLangevin1D {
    static constexpr int kSmoothDim = 1;
    static constexpr int kRoughDim = 1;
    static constexpr int kNoiseDim = 1;
    static constexpr int kFeatureCount = 1;

    using Tr = Dims<1, 1, 1>;

    ParameterLayout layout() const { return {0, 3, 1}; }

    Tr::SmoothVec smooth_drift(std::span<const double>, const Tr::State& x) const { return Tr::SmoothVec(x[1]); }
    Tr::SmoothJacobian smooth_jacobian(std::span<const double>, const Tr::State&) const
    {
        return Tr::SmoothJacobian(0.0, 1.0);
    }
    Tr::HessianStack smooth_rr_hessian(std::span<const double>, const Tr::State&) const
    {
        return {Tr::RoughHessian::Zero()};
    }
    Tr::RoughVec rough_drift_self(std::span<const double> ar, const Tr::State& x) const
    {
        return Tr::RoughVec(-2.0 * ar[0] * (x[0] - 0.5) - ar[1] * x[1]);
    }
    Tr::RoughVec rough_drift_pair(std::span<const double> ar, const Tr::State& x, const Tr::State& w) const
    {
        return Tr::RoughVec(-ar[2] * (x[0] - w[0]));
    }
    Tr::DiffusionMatrix diffusion_self(std::span<const double> beta, const Tr::State&) const
    {
        return Tr::DiffusionMatrix(beta[0]);
    }
    Tr::DiffusionMatrix diffusion_pair(std::span<const double>, const Tr::State&, const Tr::State&) const
    {
        return Tr::DiffusionMatrix::Zero();
    }

    Eigen::Matrix<double, 1, 1> interaction_features(const Tr::State& w) const
    {
        return Eigen::Matrix<double, 1, 1>(w[0]);
    }
    Tr::RoughVec rough_drift_pair_mean(std::span<const double> ar, const Tr::State& x,
                                       const Eigen::Matrix<double, 1, 1>& f) const
    {
        return Tr::RoughVec(-ar[2] * (x[0] - f[0]));
    }
    Tr::DiffusionMatrix diffusion_pair_mean(std::span<const double>, const Tr::State&,
                                            const Eigen::Matrix<double, 1, 1>&) const
    {
        return Tr::DiffusionMatrix::Zero();
    }
};

/// Elliptic mean-field model with linear attraction, theta = (kappa, sigma):
///   dX = -kappa/N sum_l (X - X^l) dt + sigma dB.
struct MeanFieldEllipticOU {
    static constexpr int kSmoothDim = 0;
    static constexpr int kRoughDim = 1;
    static constexpr int kNoiseDim = 1;
    static constexpr int kFeatureCount = 1;

    using Tr = Dims<0, 1, 1>;

    ParameterLayout layout() const { return {0, 1, 1}; }

    Tr::SmoothVec smooth_drift(std::span<const double>, const Tr::State&) const { return {}; }
    Tr::SmoothJacobian smooth_jacobian(std::span<const double>, const Tr::State&) const { return {}; }
    Tr::HessianStack smooth_rr_hessian(std::span<const double>, const Tr::State&) const { return {}; }
    Tr::RoughVec rough_drift_self(std::span<const double>, const Tr::State&) const { return Tr::RoughVec::Zero(); }
    Tr::RoughVec rough_drift_pair(std::span<const double> ar, const Tr::State& x, const Tr::State& w) const
    {
        return Tr::RoughVec(-ar[0] * (x[0] - w[0]));
    }
    Tr::DiffusionMatrix diffusion_self(std::span<const double> beta, const Tr::State&) const
    {
        return Tr::DiffusionMatrix(beta[0]);
    }
    Tr::DiffusionMatrix diffusion_pair(std::span<const double>, const Tr::State&, const Tr::State&) const
    {
        return Tr::DiffusionMatrix::Zero();
    }

    Eigen::Matrix<double, 1, 1> interaction_features(const Tr::State& w) const
    {
        return Eigen::Matrix<double, 1, 1>(w[0]);
    }
    Tr::RoughVec rough_drift_pair_mean(std::span<const double> ar, const Tr::State& x,
                                       const Eigen::Matrix<double, 1, 1>& f) const
    {
        return Tr::RoughVec(-ar[0] * (x[0] - f[0]));
    }
    Tr::DiffusionMatrix diffusion_pair_mean(std::span<const double>, const Tr::State&,
                                            const Eigen::Matrix<double, 1, 1>&) const
    {
        return Tr::DiffusionMatrix::Zero();
    }
};

/// Model assembled from callables, for programmatic registration. Pair
/// kernels are averaged by the direct loop.
template <int DS, int DR, int DB>
struct CustomModel {
    static constexpr int kSmoothDim = DS;
    static constexpr int kRoughDim = DR;
    static constexpr int kNoiseDim = DB;

    using Tr = Dims<DS, DR, DB>;
    using Params = std::span<const double>;

    ParameterLayout param_layout;
    std::function<typename Tr::SmoothVec(Params, const typename Tr::State&)> smooth_drift_fn;
    std::function<typename Tr::SmoothJacobian(Params, const typename Tr::State&)> smooth_jacobian_fn;
    std::function<typename Tr::HessianStack(Params, const typename Tr::State&)> smooth_rr_hessian_fn;
    std::function<typename Tr::RoughVec(Params, const typename Tr::State&)> rough_drift_self_fn;
    std::function<typename Tr::RoughVec(Params, const typename Tr::State&, const typename Tr::State&)>
        rough_drift_pair_fn;
    std::function<typename Tr::DiffusionMatrix(Params, const typename Tr::State&)> diffusion_self_fn;
    std::function<typename Tr::DiffusionMatrix(Params, const typename Tr::State&, const typename Tr::State&)>
        diffusion_pair_fn;

    ParameterLayout layout() const { return param_layout; }

    typename Tr::SmoothVec smooth_drift(Params p, const typename Tr::State& x) const { return smooth_drift_fn(p, x); }
    typename Tr::SmoothJacobian smooth_jacobian(Params p, const typename Tr::State& x) const
    {
        return smooth_jacobian_fn(p, x);
    }
    typename Tr::HessianStack smooth_rr_hessian(Params p, const typename Tr::State& x) const
    {
        if (!smooth_rr_hessian_fn) {
            typename Tr::HessianStack zero;
            for (auto& h : zero) {
                h.setZero();
            }
            return zero;
        }
        return smooth_rr_hessian_fn(p, x);
    }
    typename Tr::RoughVec rough_drift_self(Params p, const typename Tr::State& x) const
    {
        return rough_drift_self_fn(p, x);
    }
    typename Tr::RoughVec rough_drift_pair(Params p, const typename Tr::State& x, const typename Tr::State& w) const
    {
        return rough_drift_pair_fn ? rough_drift_pair_fn(p, x, w) : Tr::RoughVec::Zero();
    }
    typename Tr::DiffusionMatrix diffusion_self(Params p, const typename Tr::State& x) const
    {
        return diffusion_self_fn(p, x);
    }
    typename Tr::DiffusionMatrix diffusion_pair(Params p, const typename Tr::State& x,
                                                const typename Tr::State& w) const
    {
        return diffusion_pair_fn ? diffusion_pair_fn(p, x, w) : Tr::DiffusionMatrix::Zero();
    }
};

}  // namespace hypoips::models
