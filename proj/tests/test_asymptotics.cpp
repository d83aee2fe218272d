#include <doctest.h>

#include <cmath>
#include <random>

#include "hypoips/asymptotics.hpp"
#include "support.hpp"

using namespace hypoips;
using namespace hypoips::testing;

TEST_CASE("langevin noise precision: 4T/sigma^2 for LG, half that for Euler")
{
    const models::InteractingLangevin1D m;
    const auto design = small_design(10, 300, 30.0, 2, 1, 0.01);
    const auto p = plugin_precision(m, langevin_theta(), design);
    CHECK(std::abs(p.gamma_beta(0, 0) - 480.0) < 1e-9);
    CHECK(std::abs(p.gamma_beta_em(0, 0) - 240.0) < 1e-9);
    CHECK(p.gamma_beta(0, 0) / p.gamma_beta_em(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(p.regime == Regime::Hypoelliptic);
    CHECK_FALSE(p.gamma_alpha_s.has_value());

    auto other = design;
    other.seed = 77;
    other.n_particles = 3;
    CHECK(std::abs(plugin_precision(m, langevin_theta(), other).gamma_beta(0, 0) - 480.0) < 1e-9);
}

TEST_CASE("rough drift precision equals the direct path average")
{
    const models::InteractingLangevin1D m;
    const auto design = small_design(8, 200, 4.0, 2, 3, 0.005);
    const auto th = langevin_theta();
    const auto p = plugin_precision(m, th, design);
    const auto data = simulate_ips(m, th, design, InitialLaw::standard(2), 0);
    // dV_R/dlambda = -2 (q - 0.5), dV_R/dgamma = -p, dV_R/dkappa = -(q - qbar)
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    for (int j = 0; j < data.n_obs(); ++j) {
        double qbar = 0.0;
        for (int i = 0; i < 8; ++i) {
            qbar += data.value(j, i, 0) / 8.0;
        }
        for (int i = 0; i < 8; ++i) {
            const double q = data.value(j, i, 0);
            const Eigen::Vector3d dv(-2.0 * (q - 0.5), -data.value(j, i, 1), -(q - qbar));
            g += dv * dv.transpose() / 0.25;
        }
    }
    g *= design.delta() / 8.0;
    CHECK((p.gamma_alpha_r - g).cwiseAbs().maxCoeff() <= 1e-7 * g.cwiseAbs().maxCoeff());
}

TEST_CASE("FHN smooth drift precision: constant entry 12 T c^2 / (c^2 sigma^2)")
{
    const models::InteractingFHN m;
    const auto design = small_design(5, 100, 2.0, 2, 4, 0.005);
    const auto p = plugin_precision(m, fhn_theta(), design);
    REQUIRE(p.gamma_alpha_s.has_value());
    // dV_S/da = 1/c and Sigma_SS = sigma^2 / (3 c^2)
    CHECK((*p.gamma_alpha_s)(0, 0) == doctest::Approx(12.0 * 2.0 / 0.25).epsilon(1e-8));
    CHECK(p.gamma_alpha_s->rows() == 3);
    CHECK((p.gamma_alpha_s->transpose() - *p.gamma_alpha_s).norm() == 0.0);
}

TEST_CASE("elliptic model has equal LG and Euler noise precision")
{
    const models::MeanFieldEllipticOU m;
    const auto p = plugin_precision(m, ou_theta(1.0, 0.5), small_design(4, 50, 5.0, 1, 1, 0.01));
    CHECK(p.regime == Regime::Elliptic);
    CHECK(p.gamma_beta(0, 0) == doctest::Approx(p.gamma_beta_em(0, 0)).epsilon(1e-12));
    CHECK(p.gamma_beta(0, 0) == doctest::Approx(2.0 * 5.0 / 0.25).epsilon(1e-9));
}

TEST_CASE("Monte Carlo replicas report a standard error and stay within it")
{
    const models::InteractingLangevin1D m;
    PrecisionOptions o;
    o.mc_replicas = 6;
    o.workers = 2;
    const auto design = small_design(10, 100, 10.0, 2, 5, 0.01);
    const auto p = plugin_precision(m, langevin_theta(), design, o);
    CHECK(p.replicas == 6);
    CHECK(p.mc_particles_times_steps == 6 * 10 * 100);
    CHECK(p.se_alpha_r(1, 1) > 0.0);
    CHECK(p.se_beta(0, 0) < 1e-9);
    o.workers = 1;
    const auto q = plugin_precision(m, langevin_theta(), design, o);
    CHECK(q.gamma_alpha_r == p.gamma_alpha_r);
    o.mc_replicas = 0;
    CHECK_THROWS_AS(plugin_precision(m, langevin_theta(), design, o), std::invalid_argument);
}

TEST_CASE("snapped step is the largest power of two below the nominal step")
{
    for (double v : {0.5, 1.0, 2.0, 123.4, -7.0}) {
        const double h = snapped_step(v, 1e-6);
        int e = 0;
        CHECK(std::frexp(h, &e) == 0.5);
        CHECK(h <= 1e-6 * std::max(1.0, std::abs(v)));
        CHECK(2.0 * h > 1e-6 * std::max(1.0, std::abs(v)));
    }
}

TEST_CASE("CLT diagnostic on draws from the limit law")
{
    const models::InteractingLangevin1D m;
    const auto design = small_design(10, 100, 10.0, 2, 5, 0.01);
    const auto th = langevin_theta();
    const auto p = plugin_precision(m, th, design);
    const Eigen::MatrixXd cov_r = p.gamma_alpha_r.inverse();
    const Eigen::MatrixXd l = cov_r.llt().matrixL();
    const double rate_r = std::sqrt(10.0);
    const double rate_b = std::sqrt(10.0 / design.delta());
    std::mt19937_64 gen(8);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> est;
    for (int r = 0; r < 400; ++r) {
        const Eigen::Vector3d e = l * Eigen::Vector3d(z(gen), z(gen), z(gen)) / rate_r;
        est.push_back({2.0 + e[0], 1.5 + e[1], 2.0 + e[2], 0.5 + z(gen) / std::sqrt(p.gamma_beta(0, 0)) / rate_b});
    }
    const auto rep = clt_diagnostic(est, th, design, p);
    REQUIRE(rep.blocks.size() == 2);
    for (const auto& b : rep.blocks) {
        for (Eigen::Index k = 0; k < b.variance_ratio.size(); ++k) {
            CHECK(b.variance_ratio[k] > 0.8);
            CHECK(b.variance_ratio[k] < 1.25);
        }
    }
    CHECK(rep.blocks[0].rate == doctest::Approx(rate_r));
    CHECK(rep.blocks[1].rate == doctest::Approx(rate_b));

    const auto em = clt_diagnostic(est, th, design, p, Method::EM);
    CHECK(em.blocks[1].variance_ratio[0] == doctest::Approx(rep.blocks[1].variance_ratio[0] / 2.0));
}

TEST_CASE("CLT diagnostic edge cases")
{
    const models::InteractingLangevin1D m;
    const auto design = small_design(10, 100, 10.0, 2, 5, 0.01);
    const auto th = langevin_theta();
    const auto p = plugin_precision(m, th, design);
    std::vector<std::vector<double>> same(12, kLangevinTruth);
    const auto rep = clt_diagnostic(same, th, design, p);
    CHECK(rep.blocks[0].variance_ratio.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.blocks[1].rescaled_mean.norm() == 0.0);
    same.resize(9);
    CHECK_THROWS_AS(clt_diagnostic(same, th, design, p), InsufficientReplicates);
    std::vector<std::vector<double>> short_rows(12, {1.0, 2.0});
    CHECK_THROWS_AS(clt_diagnostic(short_rows, th, design, p), ShapeError);
}
