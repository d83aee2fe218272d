#pragma once

// Locally Gaussian (LG) one-step transition. The rough block is advanced by
// Euler-Maruyama; the smooth block by a second-order Ito-Taylor expansion of
// V_S0 that carries the integrated Brownian noise, which makes the joint
// one-step law non-degenerate.

#include <cmath>
#include <cstddef>
#include <numbers>

#include "hypoips/model.hpp"

namespace hypoips {

struct LgOptions {
    /// Include L_0[V_S0] dt^2 / 2 in the smooth mean. Turning this off
    /// reproduces the biased first-order scheme and exists for demonstrations.
    bool second_order_smooth_drift = true;
};

/// Powers of the observation step used by the standardisation.
struct StepScales {
    double delta = 0.0;
    double sqrt_delta = 0.0;
    double delta_3_2 = 0.0;
    double log_delta = 0.0;

    explicit StepScales(double dt)
        : delta(dt), sqrt_delta(std::sqrt(dt)), delta_3_2(dt * std::sqrt(dt)), log_delta(std::log(dt))
    {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw std::invalid_argument("step size must be positive and finite");
        }
    }
};

/// Coefficients of particle i evaluated once at (theta, x, mu).
template <IpsModel M>
struct LocalCoefficients {
    using Tr = ModelTraits<M>;

    typename Tr::SmoothVec smooth_drift;
    typename Tr::SmoothJacobian jacobian;
    typename Tr::RoughVec rough_drift;
    typename Tr::DiffusionMatrix diffusion;
    typename Tr::SquareRough a_r;

    static LocalCoefficients evaluate(const M& model, const ParamView& theta, const typename Tr::State& x,
                                      const EmpiricalMeasure<M>& mu)
    {
        LocalCoefficients c;
        if constexpr (Tr::ds > 0) {
            c.smooth_drift = model.smooth_drift(theta.alpha_s, x);
            c.jacobian = model.smooth_jacobian(theta.alpha_s, x);
        }
        c.rough_drift = hypoips::rough_drift(model, theta.alpha_r, x, mu);
        c.diffusion = diffusion_columns(model, theta.beta, x, mu);
        c.a_r = c.diffusion * c.diffusion.transpose();
        return c;
    }
};

/// L_m[V_S0] from already evaluated coefficients; m = 0 is the full
/// second-order generator, m >= 1 the first-order operator along V_m.
template <IpsModel M>
typename ModelTraits<M>::SmoothVec generator_from_coefficients(const M& model, const ParamView& theta,
                                                               const typename ModelTraits<M>::State& x,
                                                               const LocalCoefficients<M>& c, int m)
{
    using Tr = ModelTraits<M>;
    const auto jr = smooth_rough_jacobian<M>(c.jacobian);
    if (m > 0) {
        return jr * c.diffusion.col(m - 1);
    }
    typename Tr::SmoothVec out = c.jacobian.template leftCols<Tr::ds>() * c.smooth_drift + jr * c.rough_drift;
    // V_k has a zero smooth block, so the a-contraction only sees x_R x_R.
    const auto hess = model.smooth_rr_hessian(theta.alpha_s, x);
    for (int s = 0; s < Tr::ds; ++s) {
        out[s] += 0.5 * (c.a_r.cwiseProduct(hess[static_cast<std::size_t>(s)])).sum();
    }
    return out;
}

template <IpsModel M>
typename ModelTraits<M>::SmoothVec generator_on_smooth_drift(const M& model, const ParamView& theta,
                                                             const typename ModelTraits<M>::State& x,
                                                             const EmpiricalMeasure<M>& mu, int m)
{
    using Tr = ModelTraits<M>;
    if constexpr (Tr::ds == 0) {
        throw EllipticModelError("generator on the smooth drift needs d_S >= 1");
    } else {
        if (m < 0 || m > Tr::db) {
            throw ShapeError("generator index " + std::to_string(m) + " outside 0.." + std::to_string(Tr::db));
        }
        const auto c = LocalCoefficients<M>::evaluate(model, theta, x, mu);
        return generator_from_coefficients(model, theta, x, c, m);
    }
}

/// Step-size-standardised covariance of the LG residual,
///   [[a_S/3, J_R a_R/2], [(J_R a_R)^T/2, a_R]],
/// or a_R alone when d_S = 0.
template <IpsModel M>
typename ModelTraits<M>::Square sigma_from_coefficients(const LocalCoefficients<M>& c)
{
    using Tr = ModelTraits<M>;
    typename Tr::Square sigma;
    if constexpr (Tr::ds == 0) {
        sigma = c.a_r;
    } else {
        const auto jr = smooth_rough_jacobian<M>(c.jacobian);
        const Eigen::Matrix<double, Tr::ds, Tr::dr> jra = jr * c.a_r;
        sigma.template topLeftCorner<Tr::ds, Tr::ds>() = (jra * jr.transpose()) / 3.0;
        sigma.template topRightCorner<Tr::ds, Tr::dr>() = jra / 2.0;
        sigma.template bottomLeftCorner<Tr::dr, Tr::ds>() = jra.transpose() / 2.0;
        sigma.template bottomRightCorner<Tr::dr, Tr::dr>() = c.a_r;
    }
    return sigma;
}

template <IpsModel M>
typename ModelTraits<M>::Square sigma_matrix(const M& model, const ParamView& theta,
                                             const typename ModelTraits<M>::State& x, const EmpiricalMeasure<M>& mu)
{
    return sigma_from_coefficients(LocalCoefficients<M>::evaluate(model, theta, x, mu));
}

template <IpsModel M>
struct LGMoments {
    using Tr = ModelTraits<M>;

    typename Tr::SmoothVec mean_smooth;
    typename Tr::RoughVec mean_rough;
    typename Tr::Square sigma;
    typename Tr::Square lambda;
    typename Tr::Square chol;  // lower triangular, chol * chol^T = sigma
    double log_det_sigma = 0.0;
};

/// Deterministic LG prediction of the next state: smooth block
/// x_S + V_S0 dt + L_0[V_S0] dt^2/2, rough block x_R + V_R0 dt.
template <IpsModel M>
typename ModelTraits<M>::State lg_mean_from_coefficients(const M& model, const ParamView& theta,
                                                         const typename ModelTraits<M>::State& x,
                                                         const LocalCoefficients<M>& c, double delta,
                                                         const LgOptions& opts = {})
{
    using Tr = ModelTraits<M>;
    typename Tr::State mean;
    if constexpr (Tr::ds > 0) {
        typename Tr::SmoothVec ms = x.template head<Tr::ds>() + c.smooth_drift * delta;
        if (opts.second_order_smooth_drift) {
            ms += generator_from_coefficients(model, theta, x, c, 0) * (0.5 * delta * delta);
        }
        mean.template head<Tr::ds>() = ms;
    }
    mean.template tail<Tr::dr>() = x.template tail<Tr::dr>() + c.rough_drift * delta;
    return mean;
}

template <IpsModel M>
LGMoments<M> lg_moments(const M& model, const ParamView& theta, const typename ModelTraits<M>::State& x,
                        const EmpiricalMeasure<M>& mu, double delta, const LgOptions& opts = {},
                        std::size_t particle = 0, std::size_t step = 0)
{
    using Tr = ModelTraits<M>;
    if (!(delta > 0.0)) {
        throw std::invalid_argument("lg_moments: delta must be positive");
    }
    const auto c = LocalCoefficients<M>::evaluate(model, theta, x, mu);
    LGMoments<M> out;
    const auto mean = lg_mean_from_coefficients(model, theta, x, c, delta, opts);
    if constexpr (Tr::ds > 0) {
        out.mean_smooth = mean.template head<Tr::ds>();
    }
    out.mean_rough = mean.template tail<Tr::dr>();
    out.sigma = sigma_from_coefficients(c);
    Eigen::LLT<typename Tr::Square> llt(out.sigma);
    if (!out.sigma.allFinite() || llt.info() != Eigen::Success) {
        throw DegenerateCovariance(particle, step, "Cholesky factorisation failed");
    }
    out.chol = llt.matrixL();
    out.lambda = llt.solve(Tr::Square::Identity());
    out.log_det_sigma = 2.0 * out.chol.diagonal().array().log().sum();
    return out;
}

template <IpsModel M>
LGMoments<M> lg_moments(const M& model, const ParamView& theta, const ParticleSystemState& state, Eigen::Index i,
                        double delta, const LgOptions& opts = {})
{
    return lg_moments(model, theta, particle_state<M>(state, i), make_measure(model, state), delta, opts,
                      static_cast<std::size_t>(i), 0);
}

/// m = [(x'_S - mean_S)/dt^{3/2}; (x'_R - mean_R)/dt^{1/2}].
template <IpsModel M>
typename ModelTraits<M>::State standardized_residual(const LGMoments<M>& mom,
                                                     const typename ModelTraits<M>::State& x_next, double delta)
{
    using Tr = ModelTraits<M>;
    if (!(delta > 0.0)) {
        throw std::invalid_argument("standardized_residual: delta must be positive");
    }
    typename Tr::State m;
    if constexpr (Tr::ds > 0) {
        m.template head<Tr::ds>() = (x_next.template head<Tr::ds>() - mom.mean_smooth) / (delta * std::sqrt(delta));
    }
    m.template tail<Tr::dr>() = (x_next.template tail<Tr::dr>() - mom.mean_rough) / std::sqrt(delta);
    return m;
}

/// Log of the LG transition density of x_next given the current cloud.
template <IpsModel M>
double lg_log_density(const LGMoments<M>& mom, const typename ModelTraits<M>::State& x_next, double delta)
{
    using Tr = ModelTraits<M>;
    const auto m = standardized_residual(mom, x_next, delta);
    const typename Tr::State z = mom.chol.template triangularView<Eigen::Lower>().solve(m);
    return -0.5 * (z.squaredNorm() + mom.log_det_sigma + (3.0 * Tr::ds + Tr::dr) * std::log(delta) +
                   Tr::d * std::log(2.0 * std::numbers::pi));
}

/// Euler-Maruyama Gaussian log-density of the rough block only:
/// mean x_R + V_R0 dt, covariance dt a_R.
template <IpsModel M>
double em_log_density_rough(const M& model, const ParamView& theta, const typename ModelTraits<M>::State& x,
                            const EmpiricalMeasure<M>& mu, const typename ModelTraits<M>::RoughVec& x_next_rough,
                            double delta)
{
    using Tr = ModelTraits<M>;
    if (!(delta > 0.0)) {
        throw std::invalid_argument("em_log_density_rough: delta must be positive");
    }
    const auto v_r = rough_drift(model, theta.alpha_r, x, mu);
    const auto a_r = diffusion_matrix_aR(model, theta.beta, x, mu);
    Eigen::LLT<typename Tr::SquareRough> llt(a_r);
    if (llt.info() != Eigen::Success) {
        throw DegenerateCovariance(0, 0, "a_R is not positive definite");
    }
    const typename Tr::RoughVec m = (x_next_rough - x.template tail<Tr::dr>() - v_r * delta) / std::sqrt(delta);
    const typename Tr::RoughVec z = llt.matrixL().solve(m);
    const double log_det = 2.0 * typename Tr::SquareRough(llt.matrixL()).diagonal().array().log().sum();
    return -0.5 * (z.squaredNorm() + log_det + Tr::dr * std::log(delta) + Tr::dr * std::log(2.0 * std::numbers::pi));
}

namespace detail {

/// m^T S^{-1} m and det S for a small SPD matrix; the building block of
/// every contrast term. Returns false when S is not SPD.
template <int D>
bool gaussian_parts(const Eigen::Matrix<double, D, D>& s, const Eigen::Matrix<double, D, 1>& m, double& quad,
                    double& det)
{
    if constexpr (D == 1) {
        const double v = s(0, 0);
        if (!(v > 0.0) || !std::isfinite(v)) {
            return false;
        }
        quad = m[0] * m[0] / v;
        det = v;
        return true;
    } else if constexpr (D == 2) {
        // Schur complement on the 2x2 block, no square roots needed
        const double s00 = s(0, 0);
        if (!(s00 > 0.0) || !std::isfinite(s00)) {
            return false;
        }
        const double inv00 = 1.0 / s00;
        const double schur = s(1, 1) - s(1, 0) * s(1, 0) * inv00;
        if (!(schur > 0.0) || !std::isfinite(schur)) {
            return false;
        }
        const double r1 = m[1] - s(1, 0) * inv00 * m[0];
        quad = m[0] * m[0] * inv00 + r1 * r1 / schur;
        det = s00 * schur;
        return true;
    } else {
        Eigen::LLT<Eigen::Matrix<double, D, D>> llt(s);
        if (llt.info() != Eigen::Success || !s.allFinite()) {
            return false;
        }
        const Eigen::Matrix<double, D, 1> z = llt.matrixL().solve(m);
        const auto diag = Eigen::Matrix<double, D, D>(llt.matrixL()).diagonal();
        quad = z.squaredNorm();
        det = diag.array().square().prod();
        return true;
    }
}

template <int D>
bool gaussian_term(const Eigen::Matrix<double, D, D>& s, const Eigen::Matrix<double, D, 1>& m, double& out)
{
    double quad = 0.0;
    double det = 0.0;
    if (!gaussian_parts<D>(s, m, quad, det)) {
        return false;
    }
    out = quad + std::log(det);
    return true;
}

}  // namespace detail

/// A contrast summand split as m^T S^{-1} m and det S, so that sums of
/// log-determinants can be accumulated without a log per term.
struct TermParts {
    double quad = 0.0;
    double det = 1.0;

    double value() const { return quad + std::log(det); }
};

/// Rough-block-only summand with covariance variance_factor * a_R. The
/// theta-independent factor is kept out of det.
template <IpsModel M>
TermParts em_contrast_parts(const M& model, const ParamView& theta, const typename ModelTraits<M>::State& x,
                            const typename ModelTraits<M>::RoughVec& x_next_rough, const EmpiricalMeasure<M>& mu,
                            const StepScales& h, std::size_t particle, std::size_t step, double variance_factor = 1.0)
{
    using Tr = ModelTraits<M>;
    const auto v_r = hypoips::rough_drift(model, theta.alpha_r, x, mu);
    const auto v = diffusion_columns(model, theta.beta, x, mu);
    const typename Tr::SquareRough a_r = v * v.transpose();
    const typename Tr::RoughVec m = (x_next_rough - x.template tail<Tr::dr>() - v_r * h.delta) / h.sqrt_delta;
    TermParts out;
    if (!detail::gaussian_parts<Tr::dr>(a_r, m, out.quad, out.det)) {
        throw DegenerateCovariance(particle, step, "a_R is not positive definite");
    }
    if (variance_factor != 1.0) {
        out.quad /= variance_factor;
    }
    return out;
}

/// Rough-block-only summand m^T a_R^{-1} m + log det a_R.
template <IpsModel M>
double em_contrast_term(const M& model, const ParamView& theta, const typename ModelTraits<M>::State& x,
                        const typename ModelTraits<M>::RoughVec& x_next_rough, const EmpiricalMeasure<M>& mu,
                        const StepScales& h, std::size_t particle, std::size_t step, double variance_factor = 1.0)
{
    return em_contrast_parts(model, theta, x, x_next_rough, mu, h, particle, step, variance_factor).value();
}

template <IpsModel M>
TermParts lg_contrast_parts(const M& model, const ParamView& theta, const typename ModelTraits<M>::State& x,
                            const typename ModelTraits<M>::State& x_next, const EmpiricalMeasure<M>& mu,
                            const StepScales& h, const LgOptions& opts, std::size_t particle, std::size_t step)
{
    using Tr = ModelTraits<M>;
    if constexpr (Tr::ds == 0) {
        // elliptic case: the LG contrast is the Euler contrast
        return em_contrast_parts(model, theta, x, x_next, mu, h, particle, step);
    } else {
        const auto c = LocalCoefficients<M>::evaluate(model, theta, x, mu);
        const auto mean = lg_mean_from_coefficients(model, theta, x, c, h.delta, opts);
        typename Tr::State m;
        m.template head<Tr::ds>() = (x_next.template head<Tr::ds>() - mean.template head<Tr::ds>()) / h.delta_3_2;
        m.template tail<Tr::dr>() = (x_next.template tail<Tr::dr>() - mean.template tail<Tr::dr>()) / h.sqrt_delta;
        TermParts out;
        if (!detail::gaussian_parts<Tr::d>(sigma_from_coefficients(c), m, out.quad, out.det)) {
            throw DegenerateCovariance(particle, step, "Cholesky factorisation failed");
        }
        return out;
    }
}

/// One summand m^T Sigma^{-1} m + log det Sigma of the LG contrast.
template <IpsModel M>
double lg_contrast_term(const M& model, const ParamView& theta, const typename ModelTraits<M>::State& x,
                        const typename ModelTraits<M>::State& x_next, const EmpiricalMeasure<M>& mu,
                        const StepScales& h, const LgOptions& opts, std::size_t particle, std::size_t step)
{
    return lg_contrast_parts(model, theta, x, x_next, mu, h, opts, particle, step).value();
}

}  // namespace hypoips
