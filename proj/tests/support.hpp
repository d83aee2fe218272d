#pragma once

#include <random>
#include <vector>

#include "hypoips/models.hpp"
#include "hypoips/simulator.hpp"

namespace hypoips::testing {

inline const std::vector<double> kFhnTruth{0.2, 0.8, 1.5, 2.0, 0.5};
inline const std::vector<double> kLangevinTruth{2.0, 1.5, 2.0, 0.5};

inline ParameterVector fhn_theta(std::vector<double> v = kFhnTruth)
{
    return ParameterVector({3, 1, 1}, v, margin_bounds(kFhnTruth, 0.9));
}

inline ParameterVector langevin_theta(std::vector<double> v = kLangevinTruth)
{
    return ParameterVector({0, 3, 1}, v, margin_bounds(kLangevinTruth, 0.9));
}

inline ParameterVector ou_theta(double kappa = 1.0, double sigma = 0.5)
{
    return ParameterVector({0, 1, 1}, {kappa, sigma}, {{0.01, 10.0}, {0.01, 10.0}});
}

inline ExperimentDesign small_design(int N, int n, double T, int dim, std::uint64_t seed = 7,
                                     double fine = 0.0005)
{
    ExperimentDesign d;
    d.n_particles = N;
    d.n_obs = n;
    d.horizon = T;
    d.fine_step = fine;
    d.seed = seed;
    for (int c = 0; c < dim; ++c) {
        d.observed_coords.push_back(c);
    }
    return d;
}

inline ParticleSystemState random_cloud(std::mt19937_64& gen, int N, int d, double scale = 1.5)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    ParticleSystemState s;
    s.states.resize(N, d);
    for (int i = 0; i < N; ++i) {
        for (int c = 0; c < d; ++c) {
            s.states(i, c) = u(gen);
        }
    }
    return s;
}

/// Uniform draw inside theta*(1 -/+ frac).
inline std::vector<double> jitter(std::mt19937_64& gen, const std::vector<double>& theta, double frac)
{
    std::uniform_real_distribution<double> u(1.0 - frac, 1.0 + frac);
    std::vector<double> out;
    for (double v : theta) {
        out.push_back(v * u(gen));
    }
    return out;
}

}  // namespace hypoips::testing
