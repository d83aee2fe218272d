#pragma once

// Coefficient contract for N weakly interacting hypoelliptic SDEs
//
//   dX_S = V_S0(alpha_S, X) dt
//   dX_R = V_R0(alpha_R, X, mu^N) dt + sum_j V_Rj(beta, X, mu^N) dB_j
//
// with V_R0 = V^I(x) + mean_l V^II(x, X^l) and likewise for each V_Rj.
// State vectors are stored smooth block first.

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "hypoips/errors.hpp"
#include "hypoips/parameters.hpp"

namespace hypoips {

using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Positions of all N particles at one time; row i is X^{[i]}.
struct ParticleSystemState {
    double time = 0.0;
    StateMatrix states;

    Eigen::Index n_particles() const noexcept { return states.rows(); }
    Eigen::Index dim() const noexcept { return states.cols(); }
    bool all_finite() const { return states.allFinite(); }
};

template <int DS, int DR, int DB>
struct Dims {
    static constexpr int ds = DS;
    static constexpr int dr = DR;
    static constexpr int db = DB;
    static constexpr int d = DS + DR;

    using State = Eigen::Matrix<double, d, 1>;
    using SmoothVec = Eigen::Matrix<double, ds, 1>;
    using RoughVec = Eigen::Matrix<double, dr, 1>;
    using SmoothJacobian = Eigen::Matrix<double, ds, d>;
    using RoughHessian = Eigen::Matrix<double, dr, dr>;
    using HessianStack = std::array<RoughHessian, static_cast<std::size_t>(ds)>;
    using DiffusionMatrix = Eigen::Matrix<double, dr, db>;
    using SquareRough = Eigen::Matrix<double, dr, dr>;
    using SquareSmooth = Eigen::Matrix<double, ds, ds>;
    using Square = Eigen::Matrix<double, d, d>;
};

template <class M>
struct ModelTraits : Dims<M::kSmoothDim, M::kRoughDim, M::kNoiseDim> {};

// clang-format off
template <class M>
concept IpsModel = requires {
    { M::kSmoothDim } -> std::convertible_to<int>;
    { M::kRoughDim } -> std::convertible_to<int>;
    { M::kNoiseDim } -> std::convertible_to<int>;
} && (M::kSmoothDim >= 0 && M::kRoughDim >= 1 && M::kNoiseDim >= 1) &&
requires(const M& m, std::span<const double> p, const typename ModelTraits<M>::State& x) {
    { m.layout() } -> std::convertible_to<ParameterLayout>;
    { m.smooth_drift(p, x) } -> std::convertible_to<typename ModelTraits<M>::SmoothVec>;
    { m.smooth_jacobian(p, x) } -> std::convertible_to<typename ModelTraits<M>::SmoothJacobian>;
    { m.smooth_rr_hessian(p, x) } -> std::convertible_to<typename ModelTraits<M>::HessianStack>;
    { m.rough_drift_self(p, x) } -> std::convertible_to<typename ModelTraits<M>::RoughVec>;
    { m.rough_drift_pair(p, x, x) } -> std::convertible_to<typename ModelTraits<M>::RoughVec>;
    { m.diffusion_self(p, x) } -> std::convertible_to<typename ModelTraits<M>::DiffusionMatrix>;
    { m.diffusion_pair(p, x, x) } -> std::convertible_to<typename ModelTraits<M>::DiffusionMatrix>;
};

/// Models whose pair kernels factor through a fixed set of features of the
/// other particle, V^II(x, w) = F(x, phi(w)) with F affine in phi. The
/// empirical mean then costs O(N) per time step instead of O(N^2).
template <class M>
concept SeparableInteraction = IpsModel<M> && requires {
    { M::kFeatureCount } -> std::convertible_to<int>;
} && requires(const M& m, std::span<const double> p, const typename ModelTraits<M>::State& x,
              const Eigen::Matrix<double, M::kFeatureCount, 1>& f) {
    { m.interaction_features(x) } -> std::convertible_to<Eigen::Matrix<double, M::kFeatureCount, 1>>;
    { m.rough_drift_pair_mean(p, x, f) } -> std::convertible_to<typename ModelTraits<M>::RoughVec>;
    { m.diffusion_pair_mean(p, x, f) } -> std::convertible_to<typename ModelTraits<M>::DiffusionMatrix>;
};
// clang-format on

template <class M>
struct FeatureCount {
    static constexpr int value = 0;
};

template <SeparableInteraction M>
struct FeatureCount<M> {
    static constexpr int value = M::kFeatureCount;
};

/// Empirical measure of the particle cloud, self-inclusive.
///
/// `states` always points at the full N x d row-major cloud. For separable
/// models `features` holds the precomputed mean of interaction_features.
template <class M>
struct EmpiricalMeasure {
    using Features = Eigen::Matrix<double, FeatureCount<M>::value, 1>;

    std::span<const double> states;
    Eigen::Index n_particles = 0;
    Features features = Features::Zero();

    typename ModelTraits<M>::State row(Eigen::Index l) const
    {
        constexpr int d = ModelTraits<M>::d;
        return Eigen::Map<const typename ModelTraits<M>::State>(states.data() + l * d);
    }
};

template <IpsModel M>
EmpiricalMeasure<M> make_measure(const M& model, std::span<const double> states, Eigen::Index n_particles)
{
    constexpr int d = ModelTraits<M>::d;
    if (n_particles < 1 || states.size() != static_cast<std::size_t>(n_particles * d)) {
        throw ShapeError("particle cloud has " + std::to_string(states.size()) +
                         " entries, expected N*d with d=" + std::to_string(d));
    }
    EmpiricalMeasure<M> mu;
    mu.states = states;
    mu.n_particles = n_particles;
    if constexpr (SeparableInteraction<M>) {
        typename EmpiricalMeasure<M>::Features acc = EmpiricalMeasure<M>::Features::Zero();
        for (Eigen::Index l = 0; l < n_particles; ++l) {
            acc += model.interaction_features(mu.row(l));
        }
        mu.features = acc / static_cast<double>(n_particles);
    }
    return mu;
}

template <IpsModel M>
EmpiricalMeasure<M> make_measure(const M& model, const ParticleSystemState& state)
{
    if (state.dim() != ModelTraits<M>::d) {
        throw ShapeError("state dimension " + std::to_string(state.dim()) + " does not match model dimension " +
                         std::to_string(ModelTraits<M>::d));
    }
    return make_measure(model, std::span<const double>(state.states.data(), static_cast<std::size_t>(state.states.size())),
                        state.n_particles());
}

/// Pair-kernel average computed by the direct O(N) loop; reference path.
template <IpsModel M>
typename ModelTraits<M>::RoughVec rough_drift_pair_loop(const M& model, std::span<const double> alpha_r,
                                                        const typename ModelTraits<M>::State& x,
                                                        const EmpiricalMeasure<M>& mu)
{
    typename ModelTraits<M>::RoughVec acc = ModelTraits<M>::RoughVec::Zero();
    for (Eigen::Index l = 0; l < mu.n_particles; ++l) {
        acc += model.rough_drift_pair(alpha_r, x, mu.row(l));
    }
    return acc / static_cast<double>(mu.n_particles);
}

template <IpsModel M>
typename ModelTraits<M>::DiffusionMatrix diffusion_pair_loop(const M& model, std::span<const double> beta,
                                                             const typename ModelTraits<M>::State& x,
                                                             const EmpiricalMeasure<M>& mu)
{
    typename ModelTraits<M>::DiffusionMatrix acc = ModelTraits<M>::DiffusionMatrix::Zero();
    for (Eigen::Index l = 0; l < mu.n_particles; ++l) {
        acc += model.diffusion_pair(beta, x, mu.row(l));
    }
    return acc / static_cast<double>(mu.n_particles);
}

/// V_R0(alpha_R, x, mu) = V^I(x) + E_mu[V^II(x, W)].
template <IpsModel M>
typename ModelTraits<M>::RoughVec rough_drift(const M& model, std::span<const double> alpha_r,
                                              const typename ModelTraits<M>::State& x, const EmpiricalMeasure<M>& mu)
{
    if constexpr (SeparableInteraction<M>) {
        return model.rough_drift_self(alpha_r, x) + model.rough_drift_pair_mean(alpha_r, x, mu.features);
    } else {
        return model.rough_drift_self(alpha_r, x) + rough_drift_pair_loop(model, alpha_r, x, mu);
    }
}

/// V_R = [V_R1 ... V_RdB] with the measure terms averaged in.
template <IpsModel M>
typename ModelTraits<M>::DiffusionMatrix diffusion_columns(const M& model, std::span<const double> beta,
                                                           const typename ModelTraits<M>::State& x,
                                                           const EmpiricalMeasure<M>& mu)
{
    if constexpr (SeparableInteraction<M>) {
        return model.diffusion_self(beta, x) + model.diffusion_pair_mean(beta, x, mu.features);
    } else {
        return model.diffusion_self(beta, x) + diffusion_pair_loop(model, beta, x, mu);
    }
}

template <IpsModel M>
typename ModelTraits<M>::SquareRough diffusion_matrix_aR(const M& model, std::span<const double> beta,
                                                         const typename ModelTraits<M>::State& x,
                                                         const EmpiricalMeasure<M>& mu)
{
    const auto v = diffusion_columns(model, beta, x, mu);
    typename ModelTraits<M>::SquareRough a = v * v.transpose();
    if (!a.allFinite()) {
        throw NumericalError("non-finite rough diffusion matrix");
    }
    return a;
}

/// Rough-block columns of the smooth drift Jacobian, d_S x d_R.
template <IpsModel M>
Eigen::Matrix<double, ModelTraits<M>::ds, ModelTraits<M>::dr> smooth_rough_jacobian(
    const typename ModelTraits<M>::SmoothJacobian& jac)
{
    return jac.template rightCols<ModelTraits<M>::dr>();
}

/// a_S = (d_{x_R} V_S0) a_R (d_{x_R} V_S0)^T; must be positive definite.
template <IpsModel M>
typename ModelTraits<M>::SquareSmooth hypo_matrix_aS(const M& model, const ParamView& theta,
                                                     const typename ModelTraits<M>::State& x,
                                                     const EmpiricalMeasure<M>& mu)
{
    if constexpr (ModelTraits<M>::ds == 0) {
        throw EllipticModelError("a_S is undefined for an elliptic model (d_S = 0)");
    } else {
        const auto jr = smooth_rough_jacobian<M>(model.smooth_jacobian(theta.alpha_s, x));
        const auto a_r = diffusion_matrix_aR(model, theta.beta, x, mu);
        typename ModelTraits<M>::SquareSmooth a_s = jr * a_r * jr.transpose();
        Eigen::LLT<typename ModelTraits<M>::SquareSmooth> llt(a_s);
        if (!a_s.allFinite() || llt.info() != Eigen::Success) {
            throw HypoellipticityViolation("a_S is not positive definite at the evaluation point");
        }
        return a_s;
    }
}

// Convenience overloads addressing particle i of a ParticleSystemState.

template <IpsModel M>
typename ModelTraits<M>::State particle_state(const ParticleSystemState& state, Eigen::Index i)
{
    if (state.dim() != ModelTraits<M>::d) {
        throw ShapeError("state has " + std::to_string(state.dim()) + " columns, model expects " +
                         std::to_string(ModelTraits<M>::d));
    }
    if (i < 0 || i >= state.n_particles()) {
        throw ShapeError("particle index " + std::to_string(i) + " out of range");
    }
    return state.states.row(i).transpose();
}

template <IpsModel M>
typename ModelTraits<M>::RoughVec rough_drift(const M& model, std::span<const double> alpha_r,
                                              const ParticleSystemState& state, Eigen::Index i)
{
    const auto x = particle_state<M>(state, i);
    return rough_drift(model, alpha_r, x, make_measure(model, state));
}

template <IpsModel M>
typename ModelTraits<M>::SquareRough diffusion_matrix_aR(const M& model, std::span<const double> beta,
                                                         const ParticleSystemState& state, Eigen::Index i)
{
    const auto x = particle_state<M>(state, i);
    return diffusion_matrix_aR(model, beta, x, make_measure(model, state));
}

template <IpsModel M>
typename ModelTraits<M>::SquareSmooth hypo_matrix_aS(const M& model, const ParamView& theta,
                                                     const ParticleSystemState& state, Eigen::Index i)
{
    const auto x = particle_state<M>(state, i);
    return hypo_matrix_aS(model, theta, x, make_measure(model, state));
}

}  // namespace hypoips
