#include <doctest.h>

#include <cmath>

#include "hypoips/simulator.hpp"
#include "support.hpp"

using namespace hypoips;
using namespace hypoips::testing;

TEST_CASE("same seed, same dataset; different seed, different dataset")
{
    const models::InteractingFHN m;
    const auto d = small_design(5, 10, 0.1, 2, 42);
    const auto a = simulate_ips(m, fhn_theta(), d, InitialLaw::standard(2));
    const auto b = simulate_ips(m, fhn_theta(), d, InitialLaw::standard(2));
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end()));
    const auto c = simulate_ips(m, fhn_theta(), d, InitialLaw::standard(2), 1);
    CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin(), c.values().end()));
    CHECK(a.values().size() == static_cast<std::size_t>(11 * 5 * 2));
}

TEST_CASE("without noise and with a deterministic start the seed does not matter")
{
    const models::InteractingLangevin1D m;
    const ParameterVector th({0, 3, 1}, {2.0, 1.5, 2.0, 0.0}, {{0, 5}, {0, 5}, {0, 5}, {0, 1}});
    const InitialLaw init{{0.3, -0.2}, {0.0, 0.0}};
    const auto a = simulate_ips(m, th, small_design(3, 5, 0.5, 2, 1), init);
    const auto b = simulate_ips(m, th, small_design(3, 5, 0.5, 2, 999), init);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end()));
}

TEST_CASE("a particle's noise does not depend on the population size")
{
    const models::InteractingLangevin1D m;
    const ParameterVector free({0, 3, 1}, {2.0, 1.5, 0.0, 0.5}, {{0, 5}, {0, 5}, {0, 5}, {0, 1}});
    const auto a = simulate_ips(m, free, small_design(3, 20, 1.0, 2), InitialLaw::standard(2));
    const auto b = simulate_ips(m, free, small_design(6, 20, 1.0, 2), InitialLaw::standard(2));
    for (int j = 0; j <= 20; ++j) {
        for (int i = 0; i < 3; ++i) {
            CHECK(a.value(j, i, 0) == b.value(j, i, 0));
            CHECK(a.value(j, i, 1) == b.value(j, i, 1));
        }
    }
}

TEST_CASE("integrated Brownian pair has the exact joint covariance")
{
    const double dt = 0.01;
    const int n = 1000000;
    double s11 = 0, s12 = 0, s22 = 0, m1 = 0, m2 = 0;
    const CounterRng rng(2024);
    for (int k = 0; k < n; ++k) {
        auto s = rng.stream(0, static_cast<std::uint64_t>(k));
        const auto z = sample_correlated_noise(dt, 1, s);
        m1 += z.idb[0];
        m2 += z.db[0];
        s11 += z.idb[0] * z.idb[0];
        s12 += z.idb[0] * z.db[0];
        s22 += z.db[0] * z.db[0];
    }
    const double v11 = dt * dt * dt / 3.0, v12 = dt * dt / 2.0, v22 = dt;
    // SE of a second moment of a Gaussian product: sqrt((v_aa v_bb + v_ab^2) / n)
    CHECK(std::abs(s11 / n - v11) < 5.0 * std::sqrt(2.0 * v11 * v11 / n));
    CHECK(std::abs(s12 / n - v12) < 5.0 * std::sqrt((v11 * v22 + v12 * v12) / n));
    CHECK(std::abs(s22 / n - v22) < 5.0 * std::sqrt(2.0 * v22 * v22 / n));
    CHECK(std::abs(m1 / n) < 5.0 * std::sqrt(v11 / n));
    CHECK(std::abs(m2 / n) < 5.0 * std::sqrt(v22 / n));
    const double corr = s12 / std::sqrt(s11 * s22);
    CHECK(std::abs(corr - std::sqrt(3.0) / 2.0) < 0.005);
}

TEST_CASE("mean-field OU spread follows the exact Euler variance recursion")
{
    const models::MeanFieldEllipticOU m;
    const int N = 20000;
    const double kappa = 1.0, sigma = 0.5, h = 0.01;
    auto d = small_design(N, 1, 1.0, 1, 3, h);
    const auto data = simulate_ips(m, ou_theta(kappa, sigma), d, InitialLaw::standard(1));
    // Y_i = X_i - mean(X): Y' = (1 - kappa h) Y + sigma sqrt(h) (Z_i - mean Z)
    const double shrink = 1.0 - 1.0 / N;
    double v = shrink;
    for (int k = 0; k < 100; ++k) {
        v = (1.0 - kappa * h) * (1.0 - kappa * h) * v + sigma * sigma * h * shrink;
    }
    double mean = 0.0;
    for (int i = 0; i < N; ++i) {
        mean += data.value(1, i, 0);
    }
    mean /= N;
    double spread = 0.0;
    for (int i = 0; i < N; ++i) {
        spread += (data.value(1, i, 0) - mean) * (data.value(1, i, 0) - mean);
    }
    spread /= N;
    CHECK(std::abs(spread - v) < 5.0 * v * std::sqrt(2.0 / N));
    // the cloud mean is a random walk driven by averaged noise: var = 1/N + sigma^2 T / N
    CHECK(std::abs(mean) < 5.0 * std::sqrt((1.0 + sigma * sigma) / N));
}

TEST_CASE("langevin stays confined over a long horizon")
{
    const models::InteractingLangevin1D m;
    const auto data = simulate_ips(m, langevin_theta(), small_design(20, 100, 50.0, 2, 9, 0.01),
                                   InitialLaw::standard(2));
    double q2 = 0.0;
    for (int j = 50; j <= 100; ++j) {
        for (int i = 0; i < 20; ++i) {
            q2 += data.value(j, i, 0) * data.value(j, i, 0);
        }
    }
    CHECK(q2 / (51.0 * 20.0) < 10.0);
}

TEST_CASE("divergence is reported as BlowupError")
{
    using Tr = Dims<0, 1, 1>;
    models::CustomModel<0, 1, 1> m;
    m.param_layout = {0, 1, 1};
    m.smooth_drift_fn = [](auto, const Tr::State&) { return Tr::SmoothVec(); };
    m.smooth_jacobian_fn = [](auto, const Tr::State&) { return Tr::SmoothJacobian(); };
    m.rough_drift_self_fn = [](std::span<const double> a, const Tr::State& x) {
        return Tr::RoughVec(a[0] * x[0] * x[0] * x[0]);
    };
    m.diffusion_self_fn = [](std::span<const double> b, const Tr::State&) { return Tr::DiffusionMatrix(b[0]); };
    const ParameterVector th({0, 1, 1}, {10.0, 0.1}, {{0, 100}, {0, 1}});
    CHECK_THROWS_AS(simulate_ips(m, th, small_design(2, 10, 1.0, 1, 1, 0.01), InitialLaw{{5.0}, {0.0}}),
                    BlowupError);
}

TEST_CASE("design validation")
{
    auto d = small_design(2, 10, 1.0, 2);
    d.fine_step = 0.03;
    CHECK_THROWS_AS(d.validate(2), std::invalid_argument);
    d = small_design(2, 10, 1.0, 2);
    d.observed_coords = {0, 0};
    CHECK_THROWS_AS(d.validate(2), std::invalid_argument);
    d.observed_coords = {2};
    CHECK_THROWS_AS(d.validate(2), std::invalid_argument);
    d.observed_coords = {0};
    CHECK_NOTHROW(d.validate(2));
    CHECK_FALSE(d.is_complete(2));
}

TEST_CASE("restriction and particle selection")
{
    const models::InteractingFHN m;
    const auto data = simulate_ips(m, fhn_theta(), small_design(3, 4, 0.04, 2), InitialLaw::standard(2));
    const auto obs = data.restrict_to({0});
    CHECK(obs.n_coords() == 1);
    CHECK(obs.value(2, 1, 0) == data.value(2, 1, 0));
    const auto sel = data.select_particles({2, 2, 0});
    CHECK(sel.n_particles() == 3);
    CHECK(sel.value(3, 1, 1) == data.value(3, 2, 1));
    CHECK(sel.value(3, 2, 0) == data.value(3, 0, 0));
}
