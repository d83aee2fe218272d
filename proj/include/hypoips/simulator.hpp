#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypoips/lg_transition.hpp"
#include "hypoips/model.hpp"
#include "hypoips/parameters.hpp"
#include "hypoips/rng.hpp"

namespace hypoips {

/// Divergence guard for simulated states.
inline constexpr double kBlowupThreshold = 1e12;

struct ExperimentDesign {
    int n_particles = 1;  // N
    int n_obs = 1;        // n
    double horizon = 1.0; // T
    double fine_step = 0.0005;
    std::uint64_t seed = 0;
    std::vector<int> observed_coords;

    double delta() const noexcept { return horizon / n_obs; }
    /// delta / fine_step; throws std::invalid_argument if not a positive integer.
    int subsample_factor() const;
    void validate(int state_dim) const;
    bool is_complete(int state_dim) const;
};

/// i.i.d. Gaussian initial law, one (mean, variance) pair per coordinate.
struct InitialLaw {
    std::vector<double> mean;
    std::vector<double> variance;

    static InitialLaw standard(int dim)
    {
        return {std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
    }
};

/// Observations X_{t_j}^{[i]}, j = 0..n, restricted to the observed coordinates.
class TrajectoryDataset {
  public:
    TrajectoryDataset() = default;
    TrajectoryDataset(ExperimentDesign design, std::vector<double> values, std::string model_id = {},
                      std::optional<ParameterVector> truth = std::nullopt);

    const ExperimentDesign& design() const noexcept { return design_; }
    const std::string& model_id() const noexcept { return model_id_; }
    const std::optional<ParameterVector>& truth() const noexcept { return truth_; }

    int n_obs() const noexcept { return design_.n_obs; }
    int n_times() const noexcept { return design_.n_obs + 1; }
    int n_particles() const noexcept { return design_.n_particles; }
    int n_coords() const noexcept { return static_cast<int>(design_.observed_coords.size()); }
    double delta() const noexcept { return design_.delta(); }
    double time(int j) const noexcept { return j * design_.delta(); }

    double value(int j, int i, int c) const
    {
        return values_[index(j, i, c)];
    }
    /// Row-major N x m block of observations at time index j.
    std::span<const double> at_time(int j) const
    {
        const auto stride = static_cast<std::size_t>(n_particles() * n_coords());
        return std::span<const double>(values_).subspan(static_cast<std::size_t>(j) * stride, stride);
    }
    std::span<const double> values() const noexcept { return values_; }

    /// Copy keeping only `coords` (indices into the full state vector, which
    /// must all be currently observed).
    TrajectoryDataset restrict_to(const std::vector<int>& coords) const;

    /// Particles in the given order (may repeat).
    TrajectoryDataset select_particles(const std::vector<int>& order) const;

  private:
    std::size_t index(int j, int i, int c) const noexcept
    {
        return (static_cast<std::size_t>(j) * static_cast<std::size_t>(n_particles()) + static_cast<std::size_t>(i)) *
                   static_cast<std::size_t>(n_coords()) +
               static_cast<std::size_t>(c);
    }

    ExperimentDesign design_;
    std::vector<double> values_;
    std::string model_id_;
    std::optional<ParameterVector> truth_;
};

/// (int_0^dt B_u du, B_dt) per noise component.
struct IntegratedNoisePair {
    Eigen::VectorXd db;
    Eigen::VectorXd idb;
};

/// Exact joint draw: Var(idb) = dt^3/3, Cov(idb, db) = dt^2/2, Var(db) = dt.
IntegratedNoisePair sample_correlated_noise(double delta, int d_b, RngStream& stream);

namespace detail {

inline bool diverged(std::span<const double> x)
{
    for (double v : x) {
        if (!std::isfinite(v) || std::abs(v) > kBlowupThreshold) {
            return true;
        }
    }
    return false;
}

}  // namespace detail

template <IpsModel M>
StateMatrix draw_initial_states(const InitialLaw& law, int n_particles, const CounterRng& rng)
{
    constexpr int d = ModelTraits<M>::d;
    if (law.mean.size() != static_cast<std::size_t>(d) || law.variance.size() != static_cast<std::size_t>(d)) {
        throw ShapeError("initial law has wrong dimension");
    }
    StateMatrix x(n_particles, d);
    for (int i = 0; i < n_particles; ++i) {
        auto s = rng.stream(static_cast<std::uint64_t>(i), CounterRng::kInitialStep);
        for (int c = 0; c < d; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            if (law.variance[cu] < 0.0) {
                throw std::invalid_argument("initial variance must be non-negative");
            }
            x(i, c) = law.mean[cu] + std::sqrt(law.variance[cu]) * s.normal();
        }
    }
    return x;
}

/// Euler-Maruyama on the N-particle system at design.fine_step, recording
/// every subsample_factor-th state. `replicate` selects the RNG stream
/// family; states of particle i depend only on (seed, replicate, i, step).
template <IpsModel M>
TrajectoryDataset simulate_ips(const M& model, const ParameterVector& theta, const ExperimentDesign& design,
                               const InitialLaw& init, std::uint64_t replicate = 0, std::string model_id = {})
{
    using Tr = ModelTraits<M>;
    constexpr int d = Tr::d;
    design.validate(d);
    if (theta.size() != model.layout().size()) {
        throw ShapeError("theta has " + std::to_string(theta.size()) + " components, model expects " +
                         std::to_string(model.layout().size()));
    }
    const ParamView par = theta.view();
    const int factor = design.subsample_factor();
    const int N = design.n_particles;
    const double h = design.fine_step;
    const double sqrt_h = std::sqrt(h);
    const CounterRng rng(design.seed, replicate);

    StateMatrix x = draw_initial_states<M>(init, N, rng);
    StateMatrix next(N, d);
    const auto m = static_cast<std::size_t>(design.observed_coords.size());
    std::vector<double> out(static_cast<std::size_t>(design.n_obs + 1) * static_cast<std::size_t>(N) * m);

    auto record = [&](int j) {
        std::size_t k = static_cast<std::size_t>(j) * static_cast<std::size_t>(N) * m;
        for (int i = 0; i < N; ++i) {
            for (int c : design.observed_coords) {
                out[k++] = x(i, c);
            }
        }
    };
    if (detail::diverged(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())))) {
        throw BlowupError(0.0, 0);
    }
    record(0);

    const std::int64_t total = static_cast<std::int64_t>(design.n_obs) * factor;
    for (std::int64_t k = 0; k < total; ++k) {
        const auto mu = make_measure(model, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), N);
        for (int i = 0; i < N; ++i) {
            const typename Tr::State xi = x.row(i).transpose();
            typename Tr::State xn = xi;
            if constexpr (Tr::ds > 0) {
                xn.template head<Tr::ds>() += model.smooth_drift(par.alpha_s, xi) * h;
            }
            const auto v_r = rough_drift(model, par.alpha_r, xi, mu);
            const auto v = diffusion_columns(model, par.beta, xi, mu);
            auto s = rng.stream(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
            typename Tr::RoughVec noise = Tr::RoughVec::Zero();
            for (int b = 0; b < Tr::db; ++b) {
                noise += v.col(b) * (sqrt_h * s.normal());
            }
            xn.template tail<Tr::dr>() += v_r * h + noise;
            for (int c = 0; c < d; ++c) {
                if (!std::isfinite(xn[c]) || std::abs(xn[c]) > kBlowupThreshold) {
                    throw BlowupError(static_cast<double>(k + 1) * h, static_cast<std::size_t>(i));
                }
            }
            next.row(i) = xn.transpose();
        }
        x.swap(next);
        if ((k + 1) % factor == 0) {
            record(static_cast<int>((k + 1) / factor));
        }
    }
    return TrajectoryDataset(design, std::move(out), std::move(model_id), theta);
}

/// One step of the LG scheme for every particle, driven by exact
/// (int B du, dB) draws from stream (i, step).
template <IpsModel M>
ParticleSystemState lg_one_step_sample(const M& model, const ParameterVector& theta, const ParticleSystemState& state,
                                       double delta, const CounterRng& rng, std::uint64_t step = 0,
                                       const LgOptions& opts = {})
{
    using Tr = ModelTraits<M>;
    if (!(delta > 0.0)) {
        throw std::invalid_argument("lg_one_step_sample: delta must be positive");
    }
    const ParamView par = theta.view();
    const auto mu = make_measure(model, state);
    ParticleSystemState out{state.time + delta, StateMatrix(state.n_particles(), Tr::d)};
    for (Eigen::Index i = 0; i < state.n_particles(); ++i) {
        const auto x = particle_state<M>(state, i);
        const auto c = LocalCoefficients<M>::evaluate(model, par, x, mu);
        typename Tr::State xn = lg_mean_from_coefficients(model, par, x, c, delta, opts);
        auto s = rng.stream(static_cast<std::uint64_t>(i), step);
        const auto noise = sample_correlated_noise(delta, Tr::db, s);
        for (int k = 0; k < Tr::db; ++k) {
            if constexpr (Tr::ds > 0) {
                xn.template head<Tr::ds>() += generator_from_coefficients(model, par, x, c, k + 1) * noise.idb[k];
            }
            xn.template tail<Tr::dr>() += c.diffusion.col(k) * noise.db[k];
        }
        for (int k = 0; k < Tr::d; ++k) {
            if (!std::isfinite(xn[k]) || std::abs(xn[k]) > kBlowupThreshold) {
                throw BlowupError(out.time, static_cast<std::size_t>(i));
            }
        }
        out.states.row(i) = xn.transpose();
    }
    return out;
}

/// Full-state view of a complete dataset at time index j.
template <IpsModel M>
EmpiricalMeasure<M> dataset_measure(const M& model, const TrajectoryDataset& data, int j)
{
    return make_measure(model, data.at_time(j), data.n_particles());
}

}  // namespace hypoips
