#include <doctest.h>

#include <cmath>
#include <random>

#include "hypoips/partial_obs.hpp"
#include "support.hpp"

using namespace hypoips;
using namespace hypoips::testing;

namespace {

template <class M>
TrajectoryDataset observed(const M& m, const ParameterVector& th, int N, int n, double dt, std::vector<int> coords,
                           std::uint64_t seed)
{
    const auto full = simulate_ips(m, th, small_design(N, n, n * dt, 2, seed), InitialLaw::standard(2));
    return full.restrict_to(coords);
}

}  // namespace

TEST_CASE("Kalman recursion matches the dense joint Gaussian")
{
    std::mt19937_64 gen(17);
    for (int rep = 0; rep < 20; ++rep) {
        const int N = 1 + rep % 4;
        const int n = 3 + rep % 10;
        if (rep % 2 == 0) {
            const models::InteractingFHN m;
            const auto th = fhn_theta(jitter(gen, kFhnTruth, 0.3));
            const auto data = observed(m, fhn_theta(), N, n, 0.01, {1}, 100 + rep);
            const auto coeffs = factor_conditionally_linear(m, th, data);
            const auto prior = HiddenPrior::standard(1);
            const double oracle = dense_joint_oracle(coeffs, data, prior);
            CHECK(std::abs(kalman_loglik_from_coeffs(coeffs, data, prior) - oracle) <= 1e-8 * (1 + std::abs(oracle)));
            CHECK(std::abs(kalman_marginal_loglik(m, th, data) - oracle) <= 1e-8 * (1 + std::abs(oracle)));
        } else {
            const models::InteractingLangevin1D m;
            const auto th = langevin_theta(jitter(gen, kLangevinTruth, 0.3));
            const auto data = observed(m, langevin_theta(), N, n, 0.01, {0}, 100 + rep);
            const HiddenPrior prior{Eigen::VectorXd::Constant(1, 0.3), Eigen::MatrixXd::Constant(1, 1, 2.0)};
            KalmanOptions k;
            k.prior = prior;
            k.validation = FactorValidation::EveryStep;
            const auto coeffs = factor_conditionally_linear(m, th, data, k);
            const double oracle = dense_joint_oracle(coeffs, data, prior);
            CHECK(std::abs(kalman_loglik_from_coeffs(coeffs, data, prior) - oracle) <= 1e-8 * (1 + std::abs(oracle)));
            CHECK(std::abs(kalman_marginal_loglik(m, th, data, k) - oracle) <= 1e-8 * (1 + std::abs(oracle)));
        }
    }
}

TEST_CASE("Langevin loadings: velocity drives position with weight dt")
{
    const models::InteractingLangevin1D m;
    const auto data = observed(m, langevin_theta(), 2, 4, 0.01, {0}, 1);
    const auto c = factor_conditionally_linear(m, langevin_theta(), data);
    const auto& s = c.at(0, 0);
    // d(q_next)/dp = dt - gamma dt^2/2, d(p_next)/dp = 1 - gamma dt
    CHECK(s.loading(0, 0) == doctest::Approx(0.01 - 1.5 * 0.0001 / 2.0).epsilon(1e-12));
    CHECK(s.loading(1, 0) == doctest::Approx(1.0 - 1.5 * 0.01).epsilon(1e-12));
    CHECK(s.noise_cov(0, 0) == doctest::Approx(0.25 * 1e-6 / 3.0).epsilon(1e-12));
}

TEST_CASE("hidden coordinates that enter nonlinearly are rejected")
{
    const models::InteractingFHN m;
    // voltage hidden: the cubic term is not affine in it
    const auto data = observed(m, fhn_theta(), 2, 4, 0.01, {0}, 2);
    CHECK_THROWS_AS(kalman_marginal_loglik(m, fhn_theta(), data), NotConditionallyLinear);

    using Tr = Dims<1, 1, 1>;
    models::CustomModel<1, 1, 1> noisy;
    noisy.param_layout = {0, 1, 1};
    noisy.smooth_drift_fn = [](auto, const Tr::State& x) { return Tr::SmoothVec(x[1]); };
    noisy.smooth_jacobian_fn = [](auto, const Tr::State&) { return Tr::SmoothJacobian(0.0, 1.0); };
    noisy.rough_drift_self_fn = [](std::span<const double> a, const Tr::State& x) { return Tr::RoughVec(-a[0] * x[0]); };
    noisy.diffusion_self_fn = [](std::span<const double> b, const Tr::State& x) {
        return Tr::DiffusionMatrix(b[0] * (1.0 + x[1] * x[1]));
    };
    const ParameterVector th({0, 1, 1}, {1.0, 0.5}, {{0, 5}, {0, 5}});
    const auto d2 = simulate_ips(noisy, th, small_design(2, 4, 0.04, 2), InitialLaw::standard(2)).restrict_to({0});
    CHECK_THROWS_AS(kalman_marginal_loglik(noisy, th, d2), NotConditionallyLinear);
}

TEST_CASE("Euler partial baseline needs a position-velocity structure")
{
    const models::InteractingFHN m;
    const auto data = observed(m, fhn_theta(), 2, 6, 0.01, {1}, 3);
    CHECK_THROWS_AS(em_partial_baseline_contrast(m, fhn_theta(), data), StructureError);
    const auto smooth = observed(m, fhn_theta(), 2, 6, 0.01, {0}, 3);
    CHECK_THROWS_AS(em_partial_baseline_contrast(m, fhn_theta(), smooth), StructureError);
}

TEST_CASE("Euler partial baseline recovers the noise level on a profile")
{
    const models::InteractingLangevin1D m;
    const auto data = observed(m, langevin_theta(), 20, 1000, 0.01, {0}, 4);
    double best = 0.0;
    double best_val = std::numeric_limits<double>::infinity();
    for (double s = 0.3; s <= 0.7001; s += 0.005) {
        const double v = em_partial_baseline_contrast(m, langevin_theta({2.0, 1.5, 2.0, s}), data);
        if (v < best_val) {
            best_val = v;
            best = s;
        }
    }
    CHECK(std::abs(best - 0.5) < 0.05);
}

TEST_CASE("dense oracle is limited to small problems")
{
    const models::InteractingLangevin1D m;
    const auto data = observed(m, langevin_theta(), 5, 4, 0.01, {0}, 5);
    const auto c = factor_conditionally_linear(m, langevin_theta(), data);
    CHECK_THROWS_AS(dense_joint_oracle(c, data, HiddenPrior::standard(1)), OracleSizeError);
}

TEST_CASE("partial-observation entry points check shapes")
{
    const models::InteractingLangevin1D m;
    const auto full = simulate_ips(m, langevin_theta(), small_design(2, 4, 0.04, 2), InitialLaw::standard(2));
    CHECK_THROWS_AS(kalman_marginal_loglik(m, langevin_theta(), full), ShapeError);
    KalmanOptions k;
    k.prior = HiddenPrior::standard(2);
    CHECK_THROWS_AS(kalman_marginal_loglik(m, langevin_theta(), full.restrict_to({0}), k), ShapeError);
    CHECK(hidden_coords({1}, 3) == std::vector<int>{0, 2});
}
