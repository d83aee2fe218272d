#pragma once

// Partial observations. When the hidden coordinates enter the LG one-step
// map affinely and the covariance does not see them, each particle is a
// linear-Gaussian state-space model given the observed path, and the
// marginal likelihood follows from a Kalman recursion.

#include <array>
#include <cmath>
#include <numbers>
#include <type_traits>
#include <utility>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypoips/contrast.hpp"
#include "hypoips/lg_transition.hpp"
#include "hypoips/model.hpp"
#include "hypoips/simulator.hpp"
#include "hypoips/summation.hpp"

namespace hypoips {

/// Gaussian prior on the hidden block at t_0, shared by all particles.
struct HiddenPrior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    static HiddenPrior standard(int d_hidden)
    {
        return {Eigen::VectorXd::Zero(d_hidden), Eigen::MatrixXd::Identity(d_hidden, d_hidden)};
    }
};

/// x_{j+1} = affine + loading * hidden_j + N(0, noise_cov), in original units.
struct LinearStep {
    Eigen::VectorXd affine;     // d
    Eigen::MatrixXd loading;    // d x d_h
    Eigen::MatrixXd noise_cov;  // d x d
};

struct ConditionallyLinearCoeffs {
    std::vector<int> observed;
    std::vector<int> hidden;
    int n_particles = 0;
    int n_steps = 0;
    std::vector<LinearStep> steps;  // index j * n_particles + i

    const LinearStep& at(int j, int i) const
    {
        return steps.at(static_cast<std::size_t>(j) * static_cast<std::size_t>(n_particles) +
                        static_cast<std::size_t>(i));
    }
};

enum class FactorValidation { FirstStep, EveryStep };

struct KalmanOptions {
    /// Empty mean means HiddenPrior::standard.
    HiddenPrior prior;
    FactorValidation validation = FactorValidation::FirstStep;
    LgOptions lg;
};

/// Coordinates not in `observed`, ascending.
std::vector<int> hidden_coords(const std::vector<int>& observed, int dim);

/// Log-density of the stacked observations o_1..o_n given o_0 under the
/// affine recursions, built as one dense Gaussian. Independent check of the
/// Kalman recursion; limited to N <= 4 and n <= 32.
double dense_joint_oracle(const ConditionallyLinearCoeffs& coeffs, const TrajectoryDataset& observations,
                          const HiddenPrior& prior);

/// Kalman recursion over a precomputed coefficient sequence.
double kalman_loglik_from_coeffs(const ConditionallyLinearCoeffs& coeffs, const TrajectoryDataset& observations,
                                 const HiddenPrior& prior);

namespace detail {

inline constexpr double kAffineTol = 1e-10;

inline bool close(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b,
                  double scale)
{
    return ((a - b).cwiseAbs().array() <= kAffineTol * (scale + a.cwiseAbs().array() + b.cwiseAbs().array()))
        .all();
}

/// N x d cloud at time j with observed columns from the data and hidden
/// columns set to `fill`.
StateMatrix probe_cloud(const TrajectoryDataset& data, int j, int dim, double fill);

/// Overwrite the observed columns of `cloud` with the data at time j.
void fill_observed(const TrajectoryDataset& data, int j, StateMatrix& cloud);

/// Standardised-to-original scaling of the LG covariance.
template <IpsModel M>
typename ModelTraits<M>::Square unstandardize(const typename ModelTraits<M>::Square& sigma, const StepScales& h)
{
    using Tr = ModelTraits<M>;
    typename Tr::State s;
    s.template head<Tr::ds>().setConstant(h.delta_3_2);
    s.template tail<Tr::dr>().setConstant(h.sqrt_delta);
    return sigma.cwiseProduct(s * s.transpose());
}

template <IpsModel M, int DH>
struct StepFactor {
    using Tr = ModelTraits<M>;
    typename Tr::State affine;
    Eigen::Matrix<double, Tr::d, DH> loading;
    typename Tr::Square noise_cov;
};

/// Factor one (particle, step): probe the LG map at hidden = 0 and e_k; with
/// `validate`, also at 2 e_k, e_k + e_l and under a different hidden fill of
/// the cloud.
template <IpsModel M, int DH>
StepFactor<M, DH> factor_step(const M& model, const ParamView& theta, const typename ModelTraits<M>::State& x0,
                              const EmpiricalMeasure<M>& mu, const std::array<int, DH>& hidden, const StepScales& h,
                              const LgOptions& opts, bool validate, const EmpiricalMeasure<M>* mu_alt)
{
    using Tr = ModelTraits<M>;
    auto lg_mean_at = [&](const typename Tr::State& x, const EmpiricalMeasure<M>& m, LocalCoefficients<M>& c) {
        c = LocalCoefficients<M>::evaluate(model, theta, x, m);
        return typename Tr::State(lg_mean_from_coefficients(model, theta, x, c, h.delta, opts));
    };
    StepFactor<M, DH> out;
    LocalCoefficients<M> c0;
    LocalCoefficients<M> ck;
    const typename Tr::State a = lg_mean_at(x0, mu, c0);
    out.affine = a;
    out.noise_cov = unstandardize<M>(sigma_from_coefficients(c0), h);
    for (int k = 0; k < DH; ++k) {
        const int hk = hidden[static_cast<std::size_t>(k)];
        typename Tr::State xk = x0;
        xk[hk] += 1.0;
        out.loading.col(k) = lg_mean_at(xk, mu, ck) - a;
        if (!validate) {
            continue;
        }
        const double scale = 1.0 + a.cwiseAbs().maxCoeff();
        LocalCoefficients<M> scratch;
        typename Tr::State x2 = x0;
        x2[hk] += 2.0;
        if (!close(lg_mean_at(x2, mu, scratch), a + 2.0 * out.loading.col(k), scale)) {
            throw NotConditionallyLinear(hk, "LG mean is not affine");
        }
        const typename Tr::Square qk = unstandardize<M>(sigma_from_coefficients(ck), h);
        if (!close(qk, out.noise_cov, out.noise_cov.cwiseAbs().maxCoeff())) {
            throw NotConditionallyLinear(hk, "LG covariance depends on it");
        }
        for (int l = 0; l < k; ++l) {
            typename Tr::State xkl = xk;
            xkl[hidden[static_cast<std::size_t>(l)]] += 1.0;
            if (!close(lg_mean_at(xkl, mu, scratch), a + out.loading.col(k) + out.loading.col(l), scale)) {
                throw NotConditionallyLinear(hk, "LG mean has a cross term");
            }
        }
    }
    if (validate && mu_alt != nullptr) {
        LocalCoefficients<M> c_alt;
        const typename Tr::State a_alt = lg_mean_at(x0, *mu_alt, c_alt);
        const typename Tr::Square q_alt = unstandardize<M>(sigma_from_coefficients(c_alt), h);
        if (!close(a_alt, a, 1.0 + a.cwiseAbs().maxCoeff()) ||
            !close(q_alt, out.noise_cov, out.noise_cov.cwiseAbs().maxCoeff())) {
            throw NotConditionallyLinear(hidden.front(), "interaction term depends on hidden coordinates");
        }
    }
    return out;
}

/// Calls f(std::integral_constant<int, DH>{}) with DH = dh in 1..D-1.
template <int D, class F>
decltype(auto) with_hidden_dim(int dh, F&& f)
{
    if (dh < 1 || dh >= D) {
        throw ShapeError("need between 1 and " + std::to_string(D - 1) + " hidden coordinates, got " +
                         std::to_string(dh));
    }
    return [&]<int... K>(std::integer_sequence<int, K...>) -> decltype(auto) {
        using R = decltype(f(std::integral_constant<int, 1>{}));
        if constexpr (std::is_void_v<R>) {
            static_cast<void>(((dh == K + 1 ? (f(std::integral_constant<int, K + 1>{}), true) : false) || ...));
        } else {
            R out{};
            static_cast<void>(((dh == K + 1 ? (out = f(std::integral_constant<int, K + 1>{}), true) : false) || ...));
            return out;
        }
    }(std::make_integer_sequence<int, D - 1>{});
}

/// Per-step measures of a partially observed dataset: hidden columns of
/// the cloud filled with 0, plus a second cloud filled with 1 at steps that
/// are validated.
template <IpsModel M>
class PartialClouds {
  public:
    PartialClouds(const M& model, const TrajectoryDataset& data)
        : model_(model), data_(data), zero_(probe_cloud(data, 0, ModelTraits<M>::d, 0.0)),
          one_(probe_cloud(data, 0, ModelTraits<M>::d, 1.0))
    {
    }

    EmpiricalMeasure<M> at(int j)
    {
        fill_observed(data_, j, zero_);
        return measure(zero_);
    }
    EmpiricalMeasure<M> alternate(int j)
    {
        fill_observed(data_, j, one_);
        return measure(one_);
    }
    typename ModelTraits<M>::State particle(int i) const { return zero_.row(i).transpose(); }

  private:
    EmpiricalMeasure<M> measure(const StateMatrix& c) const
    {
        return make_measure(model_, std::span<const double>(c.data(), static_cast<std::size_t>(c.size())), c.rows());
    }

    const M& model_;
    const TrajectoryDataset& data_;
    StateMatrix zero_;
    StateMatrix one_;
};

template <IpsModel M, int DH>
std::array<int, DH> hidden_array(const std::vector<int>& hidden)
{
    std::array<int, DH> out{};
    std::copy(hidden.begin(), hidden.end(), out.begin());
    return out;
}

template <IpsModel M, int DH>
double kalman_fixed(const M& model, const ParamView& par, const TrajectoryDataset& data, const HiddenPrior& prior,
                    const KalmanOptions& opts)
{
    using Tr = ModelTraits<M>;
    constexpr int d = Tr::d;
    constexpr int DO = d - DH;
    using HVec = Eigen::Matrix<double, DH, 1>;
    using HMat = Eigen::Matrix<double, DH, DH>;
    using OVec = Eigen::Matrix<double, DO, 1>;
    using OMat = Eigen::Matrix<double, DO, DO>;
    using Gain = Eigen::Matrix<double, DH, DO>;

    const std::vector<int>& obs = data.design().observed_coords;
    const auto hid = hidden_array<M, DH>(hidden_coords(obs, d));
    const StepScales h(data.delta());
    const int N = data.n_particles();
    std::vector<HVec> means(static_cast<std::size_t>(N), HVec(prior.mean));
    std::vector<HMat> covs(static_cast<std::size_t>(N), HMat(prior.cov));
    CompensatedSum quad;
    LogProduct logdet;
    PartialClouds<M> clouds(model, data);

    for (int j = 0; j < data.n_obs(); ++j) {
        const auto mu = clouds.at(j);
        const bool validate = j == 0 || opts.validation == FactorValidation::EveryStep;
        EmpiricalMeasure<M> mu_alt;
        if (validate) {
            mu_alt = clouds.alternate(j);
        }
        const double* next = data.at_time(j + 1).data();
        for (int i = 0; i < N; ++i) {
            const auto f = factor_step<M, DH>(model, par, clouds.particle(i), mu, hid, h, opts.lg, validate,
                                              validate ? &mu_alt : nullptr);
            HVec& mean = means[static_cast<std::size_t>(i)];
            HMat& cov = covs[static_cast<std::size_t>(i)];
            const typename Tr::State pm = f.affine + f.loading * mean;
            const typename Tr::Square s = f.loading * cov * f.loading.transpose() + f.noise_cov;
            OMat s_oo;
            Gain s_ho;
            HMat s_hh;
            OVec innov;
            HVec pm_h;
            for (int r = 0; r < DO; ++r) {
                const int orow = obs[static_cast<std::size_t>(r)];
                innov[r] = next[static_cast<std::ptrdiff_t>(i) * DO + r] - pm[orow];
                for (int c = 0; c < DO; ++c) {
                    s_oo(r, c) = s(orow, obs[static_cast<std::size_t>(c)]);
                }
                for (int k = 0; k < DH; ++k) {
                    s_ho(k, r) = s(hid[static_cast<std::size_t>(k)], orow);
                }
            }
            for (int k = 0; k < DH; ++k) {
                pm_h[k] = pm[hid[static_cast<std::size_t>(k)]];
                for (int l = 0; l < DH; ++l) {
                    s_hh(k, l) = s(hid[static_cast<std::size_t>(k)], hid[static_cast<std::size_t>(l)]);
                }
            }
            double q = 0.0;
            double det = 0.0;
            if (!detail::gaussian_parts<DO>(s_oo, innov, q, det)) {
                throw FilterDegeneracy(static_cast<std::size_t>(j + 1), static_cast<std::size_t>(i));
            }
            quad.add(q);
            logdet.add(det);
            Gain gain;
            if constexpr (DO == 1) {
                gain = s_ho / s_oo(0, 0);
            } else {
                gain = s_oo.llt().solve(s_ho.transpose()).transpose();
            }
            // condition the hidden block; P' = [I, -K] S [I, -K]^T
            mean = pm_h + gain * innov;
            const HMat p = s_hh - gain * s_ho.transpose() - s_ho * gain.transpose() +
                           gain * s_oo * gain.transpose();
            cov = 0.5 * (p + p.transpose());
        }
    }
    const double n_terms = static_cast<double>(N) * data.n_obs();
    const double value = -0.5 * (quad.value() + logdet.value() + n_terms * DO * std::log(2.0 * std::numbers::pi));
    if (!std::isfinite(value)) {
        throw NumericalError("marginal log-likelihood is not finite");
    }
    return value;
}

}  // namespace detail

/// (A, B, Q) for every (step, particle) of a partially observed dataset.
template <IpsModel M>
ConditionallyLinearCoeffs factor_conditionally_linear(const M& model, const ParameterVector& theta,
                                                      const TrajectoryDataset& data, const KalmanOptions& opts = {})
{
    using Tr = ModelTraits<M>;
    ConditionallyLinearCoeffs out;
    out.observed = data.design().observed_coords;
    out.hidden = hidden_coords(out.observed, Tr::d);
    out.n_particles = data.n_particles();
    out.n_steps = data.n_obs();
    if constexpr (Tr::d < 2) {
        throw ShapeError("partial observation needs a state of dimension at least 2");
    } else {
        detail::with_hidden_dim<Tr::d>(static_cast<int>(out.hidden.size()), [&](auto dh_tag) {
            constexpr int DH = decltype(dh_tag)::value;
            const auto hid = detail::hidden_array<M, DH>(out.hidden);
            const StepScales h(data.delta());
            const ParamView par = theta.view();
            detail::PartialClouds<M> clouds(model, data);
            for (int j = 0; j < out.n_steps; ++j) {
                const auto mu = clouds.at(j);
                const bool validate = j == 0 || opts.validation == FactorValidation::EveryStep;
                EmpiricalMeasure<M> mu_alt;
                if (validate) {
                    mu_alt = clouds.alternate(j);
                }
                for (int i = 0; i < out.n_particles; ++i) {
                    const auto f = detail::factor_step<M, DH>(model, par, clouds.particle(i), mu, hid, h, opts.lg,
                                                              validate, validate ? &mu_alt : nullptr);
                    out.steps.push_back({f.affine, f.loading, f.noise_cov});
                }
            }
        });
    }
    return out;
}

/// Sum over particles of log p(o_1..o_n | o_0) under the LG transition, with
/// the hidden block at t_0 drawn from the prior.
template <IpsModel M>
double kalman_marginal_loglik(const M& model, const ParameterVector& theta, const TrajectoryDataset& data,
                              const KalmanOptions& opts = {})
{
    using Tr = ModelTraits<M>;
    const std::vector<int> hid = hidden_coords(data.design().observed_coords, Tr::d);
    const int dh = static_cast<int>(hid.size());
    if (dh == 0) {
        throw ShapeError("kalman_marginal_loglik needs at least one hidden coordinate");
    }
    const HiddenPrior prior = opts.prior.mean.size() == 0 ? HiddenPrior::standard(dh) : opts.prior;
    if (prior.mean.size() != dh || prior.cov.rows() != dh || prior.cov.cols() != dh) {
        throw ShapeError("hidden prior has wrong dimension");
    }
    const ParamView par = theta.view();
    if constexpr (Tr::d < 2) {
        throw ShapeError("partial observation needs a state of dimension at least 2");
    } else {
        return detail::with_hidden_dim<Tr::d>(dh, [&](auto dh_tag) {
            return detail::kalman_fixed<M, decltype(dh_tag)::value>(model, par, data, prior, opts);
        });
    }
}

/// Samson-Thieullen style Euler contrast when only the smooth block is
/// observed and dX_S = X_R dt: hidden values are recovered by forward
/// differences p_j = (q_{j+1} - q_j) / dt and the Euler residual of the
/// recovered series is scored with covariance (2/3) dt a_R, the drift taken
/// one step back to decorrelate it from the residual.
template <IpsModel M>
double em_partial_baseline_contrast(const M& model, const ParameterVector& theta, const TrajectoryDataset& data)
{
    using Tr = ModelTraits<M>;
    constexpr int ds = Tr::ds;
    constexpr int d = Tr::d;
    if constexpr (ds != Tr::dr) {
        throw StructureError("the Euler partial baseline needs dX_S = X_R dt (equal block sizes)");
    } else {
        const auto& obs = data.design().observed_coords;
        for (int k = 0; k < ds; ++k) {
            if (static_cast<int>(obs.size()) != ds || obs[static_cast<std::size_t>(k)] != k) {
                throw StructureError("the Euler partial baseline needs exactly the smooth block observed");
            }
        }
        const ParamView par = theta.view();
        // probe dX_S = X_R dt at a few deterministic states
        for (int probe = 0; probe < 3; ++probe) {
            typename Tr::State x;
            for (int k = 0; k < d; ++k) {
                x[k] = 0.37 * (k + 1) - 0.9 * probe + 0.11 * k * probe;
            }
            const typename Tr::SmoothVec v = model.smooth_drift(par.alpha_s, x);
            if (((v - x.template tail<Tr::dr>()).cwiseAbs().array() > 1e-12 * (1.0 + x.cwiseAbs().maxCoeff())).any()) {
                throw StructureError("smooth drift is not the rough coordinate; the Euler baseline does not apply");
            }
        }
        const int N = data.n_particles();
        const int n = data.n_obs();
        if (n < 3) {
            throw ShapeError("the Euler partial baseline needs at least three observation steps");
        }
        const StepScales h(data.delta());
        // reconstructed full states at t_0..t_{n-1}
        std::vector<double> full(static_cast<std::size_t>(n) * static_cast<std::size_t>(N) * d);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < N; ++i) {
                double* row = full.data() + (static_cast<std::size_t>(j) * N + static_cast<std::size_t>(i)) * d;
                for (int k = 0; k < ds; ++k) {
                    row[k] = data.value(j, i, k);
                    row[ds + k] = (data.value(j + 1, i, k) - data.value(j, i, k)) / h.delta;
                }
            }
        }
        auto state = [&](int j, int i) {
            return typename Tr::State(Eigen::Map<const typename Tr::State>(
                full.data() + (static_cast<std::size_t>(j) * N + static_cast<std::size_t>(i)) * d));
        };
        CompensatedSum quad;
        LogProduct logdet;
        for (int j = 1; j + 1 < n; ++j) {
            const auto mu = make_measure(
                model,
                std::span<const double>(full.data() + static_cast<std::size_t>(j - 1) * N * d,
                                        static_cast<std::size_t>(N) * d),
                N);
            for (int i = 0; i < N; ++i) {
                const typename Tr::State lag = state(j - 1, i);
                const typename Tr::State cur = state(j, i);
                const typename Tr::State nxt = state(j + 1, i);
                const auto v_r = hypoips::rough_drift(model, par.alpha_r, lag, mu);
                const auto v = diffusion_columns(model, par.beta, lag, mu);
                const typename Tr::SquareRough a_r = v * v.transpose();
                const typename Tr::RoughVec r =
                    (nxt.template tail<Tr::dr>() - cur.template tail<Tr::dr>() - v_r * h.delta) / h.sqrt_delta;
                double q = 0.0;
                double det = 0.0;
                if (!detail::gaussian_parts<Tr::dr>(typename Tr::SquareRough(a_r * (2.0 / 3.0)), r, q, det)) {
                    throw DegenerateCovariance(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                               "a_R is not positive definite");
                }
                quad.add(q);
                logdet.add(det);
            }
        }
        // drop the theta-free (2/3)^{d_R} from every log det
        const double n_terms = static_cast<double>(N) * (n - 2);
        const double value = quad.value() + logdet.value() - n_terms * Tr::dr * std::log(2.0 / 3.0);
        if (!std::isfinite(value)) {
            throw NumericalError("Euler partial baseline contrast is not finite");
        }
        return value;
    }
}

}  // namespace hypoips
