#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hypoips/contrast.hpp"
#include "support.hpp"

using namespace hypoips;
using namespace hypoips::testing;

namespace {

/// Term-by-term LG contrast through lg_moments (Cholesky path), no shared
/// measures and plain summation.
template <class M>
double naive_lg(const M& model, const ParameterVector& th, const TrajectoryDataset& data)
{
    double total = 0.0;
    for (int j = 1; j < data.n_times(); ++j) {
        const auto mu = dataset_measure(model, data, j - 1);
        for (int i = 0; i < data.n_particles(); ++i) {
            const Eigen::Vector2d x(data.value(j - 1, i, 0), data.value(j - 1, i, 1));
            const Eigen::Vector2d xn(data.value(j, i, 0), data.value(j, i, 1));
            const auto mom = lg_moments(model, th.view(), x, mu, data.delta());
            const auto m = standardized_residual(mom, xn, data.delta());
            total += m.dot(mom.lambda * m) + mom.log_det_sigma;
        }
    }
    return total;
}

template <class M>
double naive_em(const M& model, const ParameterVector& th, const TrajectoryDataset& data)
{
    const double dt = data.delta();
    double total = 0.0;
    for (int j = 1; j < data.n_times(); ++j) {
        const auto mu = dataset_measure(model, data, j - 1);
        for (int i = 0; i < data.n_particles(); ++i) {
            const Eigen::Vector2d x(data.value(j - 1, i, 0), data.value(j - 1, i, 1));
            const double vr = rough_drift(model, th.alpha_r(), x, mu)[0];
            const double a = diffusion_matrix_aR(model, th.beta(), x, mu)(0, 0);
            const double r = (data.value(j, i, 1) - x[1] - vr * dt) / std::sqrt(dt);
            total += r * r / a + std::log(a);
        }
    }
    return total;
}

TrajectoryDataset fhn_data(int N = 6, int n = 40, std::uint64_t seed = 1)
{
    return simulate_ips(models::InteractingFHN{}, fhn_theta(), small_design(N, n, n * 0.005, 2, seed),
                        InitialLaw::standard(2));
}

}  // namespace

TEST_CASE("optimized contrasts match the term-by-term evaluation")
{
    const models::InteractingFHN m;
    const auto data = fhn_data();
    std::mt19937_64 gen(1);
    for (int rep = 0; rep < 10; ++rep) {
        const auto th = fhn_theta(jitter(gen, kFhnTruth, 0.4));
        const double a = lg_contrast(m, th, data);
        CHECK(std::abs(a - naive_lg(m, th, data)) <= 1e-9 * std::abs(a));
        const double e = em_contrast(m, th, data);
        CHECK(std::abs(e - naive_em(m, th, data)) <= 1e-9 * std::abs(e));
    }
}

TEST_CASE("duplicating every particle doubles the contrast")
{
    const models::InteractingFHN m;
    const auto data = fhn_data(3, 30);
    const auto twice = data.select_particles({0, 1, 2, 0, 1, 2});
    const auto th = fhn_theta();
    CHECK(lg_contrast(m, th, twice) == doctest::Approx(2.0 * lg_contrast(m, th, data)).epsilon(1e-12));
    CHECK(em_contrast(m, th, twice) == doctest::Approx(2.0 * em_contrast(m, th, data)).epsilon(1e-12));
}

TEST_CASE("contrast is invariant to particle relabelling")
{
    const models::InteractingLangevin1D m;
    const auto data = simulate_ips(m, langevin_theta(), small_design(5, 30, 0.3, 2), InitialLaw::standard(2));
    const auto perm = data.select_particles({3, 0, 4, 1, 2});
    const auto th = langevin_theta();
    CHECK(lg_contrast(m, th, perm) == doctest::Approx(lg_contrast(m, th, data)).epsilon(1e-12));
}

TEST_CASE("LG covariance does not depend on the rough drift parameters")
{
    const models::InteractingLangevin1D m;
    std::mt19937_64 gen(2);
    const auto s = random_cloud(gen, 4, 2);
    const auto mu = make_measure(m, s);
    const auto x = particle_state<models::InteractingLangevin1D>(s, 1);
    const auto a = sigma_matrix(m, langevin_theta({1.0, 0.5, 1.0, 0.5}).view(), x, mu);
    const auto b = sigma_matrix(m, langevin_theta({3.0, 2.5, 3.5, 0.5}).view(), x, mu);
    CHECK(a == b);
}

TEST_CASE("the LG contrast prefers the truth over perturbed parameters")
{
    const models::InteractingFHN m;
    const auto data = fhn_data(20, 400, 3);
    const auto th = fhn_theta();
    const double at_truth = lg_contrast(m, th, data);
    for (int k = 0; k < 5; ++k) {
        std::vector<double> v = kFhnTruth;
        v[static_cast<std::size_t>(k)] *= 1.5;
        CHECK(lg_contrast(m, th.with_values(v), data) > at_truth);
    }
}

TEST_CASE("finite-difference gradient of a quadratic")
{
    const Objective f = [](std::span<const double> t) {
        return (t[0] - 1.0) * (t[0] - 1.0) + 3.0 * t[0] * t[1] + 2.0 * t[1] * t[1];
    };
    const std::vector<double> th{0.3, -0.7};
    const auto g = contrast_gradient(f, th, {{-5, 5}, {-5, 5}});
    CHECK(g[0] == doctest::Approx(2.0 * (0.3 - 1.0) + 3.0 * -0.7).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(3.0 * 0.3 + 4.0 * -0.7).epsilon(1e-8));
    // at the box edge the probe is one-sided
    const auto e = contrast_gradient(f, std::vector<double>{5.0, 0.0}, {{-5, 5}, {-5, 5}});
    CHECK(e[0] == doctest::Approx(8.0).epsilon(1e-5));
    const auto rep = fd_step_halving_check(f, th);
    CHECK(rep.passed(1.9));
}

TEST_CASE("step-halving order is two on a smooth non-quadratic objective")
{
    const Objective f = [](std::span<const double> t) { return std::exp(t[0]) * std::sin(t[1]) + t[0] * t[0] * t[0]; };
    const auto rep = fd_step_halving_check(f, std::vector<double>{0.4, 0.9});
    CHECK(rep.min_order() > 1.9);
    CHECK(rep.min_order() < 2.1);
}

TEST_CASE("ADAM reaches an interior minimum and respects the box")
{
    AdamConfig cfg;
    cfg.iterations = 4000;
    const Objective bowl = [](std::span<const double> t) {
        return (t[0] - 1.0) * (t[0] - 1.0) + 4.0 * (t[1] + 0.5) * (t[1] + 0.5);
    };
    const auto r = adam_minimize(bowl, cfg, {0, 1, 1}, {{0.0, 3.0}, {-2.0, 2.0}});
    CHECK(std::abs(r.theta_hat[0] - 1.0) < 1e-3);
    CHECK(std::abs(r.theta_hat[1] + 0.5) < 1e-3);

    const Objective toward_zero = [](std::span<const double> t) { return t[0] * t[0] + t[1] * t[1]; };
    const auto c = adam_minimize(toward_zero, cfg, {0, 1, 1}, {{0.5, 3.0}, {0.5, 3.0}});
    CHECK(c.theta_hat[0] == 0.5);
    CHECK(c.theta_hat[1] == 0.5);
}

TEST_CASE("ADAM initialisation choices")
{
    const Objective f = [](std::span<const double> t) { return (t[0] - 1.0) * (t[0] - 1.0) + t[1] * t[1]; };
    AdamConfig cfg;
    cfg.iterations = 1;
    cfg.step_size = 1e-12;
    cfg.record_trace = true;
    const auto mid = adam_minimize(f, cfg, {0, 1, 1}, {{0.0, 4.0}, {-1.0, 3.0}});
    CHECK(mid.theta_hat[0] == doctest::Approx(2.0));
    CHECK(mid.trace.size() == 1);

    cfg.init = InitKind::Explicit;
    cfg.theta0 = {9.0, 0.5};
    const auto clamped = adam_minimize(f, cfg, {0, 1, 1}, {{0.0, 4.0}, {-1.0, 3.0}});
    CHECK(clamped.theta_hat[0] == doctest::Approx(4.0));
    cfg.theta0 = {1.0};
    CHECK_THROWS_AS(adam_minimize(f, cfg, {0, 1, 1}, {{0.0, 4.0}, {-1.0, 3.0}}), ShapeError);

    cfg.init = InitKind::UniformRestarts;
    cfg.restarts = 3;
    cfg.init_seed = 5;
    const auto u1 = adam_minimize(f, cfg, {0, 1, 1}, {{0.0, 4.0}, {-1.0, 3.0}});
    const auto u2 = adam_minimize(f, cfg, {0, 1, 1}, {{0.0, 4.0}, {-1.0, 3.0}});
    CHECK(u1.theta_hat[0] == u2.theta_hat[0]);

    const Objective bad = [](std::span<const double>) { return std::numeric_limits<double>::quiet_NaN(); };
    cfg.init = InitKind::Midpoint;
    CHECK_THROWS_AS(adam_minimize(bad, cfg, {0, 1, 1}, {{0.0, 4.0}, {-1.0, 3.0}}), InitializationError);
    cfg.iterations = 0;
    CHECK_THROWS_AS(adam_minimize(f, cfg, {0, 1, 1}, {{0.0, 4.0}, {-1.0, 3.0}}), std::invalid_argument);
}

TEST_CASE("contrast on partial data is refused")
{
    const auto data = fhn_data(2, 5).restrict_to({0});
    CHECK_THROWS_AS(lg_contrast(models::InteractingFHN{}, fhn_theta(), data), ShapeError);
}

TEST_CASE("method and mode names round-trip")
{
    CHECK(parse_method(to_string(Method::EM)) == Method::EM);
    CHECK(parse_mode(to_string(ObservationMode::Partial)) == ObservationMode::Partial);
    CHECK_THROWS(parse_method("nope"));
}
