#include "hypoips/partial_obs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hypoips {

std::vector<int> hidden_coords(const std::vector<int>& observed, int dim)
{
    std::vector<int> out;
    for (int c = 0; c < dim; ++c) {
        if (std::find(observed.begin(), observed.end(), c) == observed.end()) {
            out.push_back(c);
        }
    }
    return out;
}

namespace detail {

StateMatrix probe_cloud(const TrajectoryDataset& data, int j, int dim, double fill)
{
    const auto& obs = data.design().observed_coords;
    StateMatrix cloud = StateMatrix::Constant(data.n_particles(), dim, fill);
    for (int i = 0; i < data.n_particles(); ++i) {
        for (std::size_t k = 0; k < obs.size(); ++k) {
            cloud(i, obs[k]) = data.value(j, i, static_cast<int>(k));
        }
    }
    return cloud;
}

void fill_observed(const TrajectoryDataset& data, int j, StateMatrix& cloud)
{
    const auto& obs = data.design().observed_coords;
    const std::span<const double> row = data.at_time(j);
    const std::size_t m = obs.size();
    for (int i = 0; i < data.n_particles(); ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            cloud(i, obs[k]) = row[static_cast<std::size_t>(i) * m + k];
        }
    }
}

}  // namespace detail

namespace {

void check_coeffs(const ConditionallyLinearCoeffs& coeffs, const TrajectoryDataset& data, const HiddenPrior& prior)
{
    if (coeffs.n_particles != data.n_particles() || coeffs.n_steps != data.n_obs()) {
        throw ShapeError("coefficient sequence does not match the dataset");
    }
    if (coeffs.observed != data.design().observed_coords) {
        throw ShapeError("coefficient sequence was built for different observed coordinates");
    }
    const auto dh = static_cast<Eigen::Index>(coeffs.hidden.size());
    if (prior.mean.size() != dh || prior.cov.rows() != dh || prior.cov.cols() != dh) {
        throw ShapeError("hidden prior has wrong dimension");
    }
}

}  // namespace

double kalman_loglik_from_coeffs(const ConditionallyLinearCoeffs& coeffs, const TrajectoryDataset& data,
                                 const HiddenPrior& prior)
{
    check_coeffs(coeffs, data, prior);
    const auto& obs = coeffs.observed;
    const auto& hid = coeffs.hidden;
    const auto m = static_cast<Eigen::Index>(obs.size());
    double total = 0.0;
    for (int i = 0; i < coeffs.n_particles; ++i) {
        Eigen::VectorXd mean = prior.mean;
        Eigen::MatrixXd cov = prior.cov;
        for (int j = 0; j < coeffs.n_steps; ++j) {
            const LinearStep& st = coeffs.at(j, i);
            const Eigen::VectorXd pm = st.affine + st.loading * mean;
            const Eigen::MatrixXd s = st.loading * cov * st.loading.transpose() + st.noise_cov;
            const Eigen::MatrixXd s_oo = s(obs, obs);
            const Eigen::MatrixXd s_ho = s(hid, obs);
            Eigen::VectorXd innov(m);
            for (Eigen::Index k = 0; k < m; ++k) {
                innov[k] = data.value(j + 1, i, static_cast<int>(k)) - pm[obs[static_cast<std::size_t>(k)]];
            }
            Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
            if (llt.info() != Eigen::Success) {
                throw FilterDegeneracy(static_cast<std::size_t>(j + 1), static_cast<std::size_t>(i));
            }
            const Eigen::VectorXd z = llt.matrixL().solve(innov);
            const Eigen::MatrixXd l = llt.matrixL();
            total += -0.5 * (z.squaredNorm() + 2.0 * l.diagonal().array().log().sum() +
                             static_cast<double>(m) * std::log(2.0 * std::numbers::pi));
            const Eigen::MatrixXd gain = llt.solve(s_ho.transpose()).transpose();
            mean = pm(hid) + gain * innov;
            const Eigen::MatrixXd p = s(hid, hid) - gain * s_ho.transpose();
            cov = 0.5 * (p + p.transpose());
        }
    }
    return total;
}

double dense_joint_oracle(const ConditionallyLinearCoeffs& coeffs, const TrajectoryDataset& data,
                          const HiddenPrior& prior)
{
    if (coeffs.n_particles > 4 || coeffs.n_steps > 32) {
        throw OracleSizeError("dense oracle supports N <= 4 and n <= 32, got N=" +
                              std::to_string(coeffs.n_particles) + ", n=" + std::to_string(coeffs.n_steps));
    }
    check_coeffs(coeffs, data, prior);
    const auto& obs = coeffs.observed;
    const auto& hid = coeffs.hidden;
    const int N = coeffs.n_particles;
    const int n = coeffs.n_steps;
    const auto dh = static_cast<Eigen::Index>(hid.size());
    const auto m = static_cast<Eigen::Index>(obs.size());
    const Eigen::Index d = dh + m;
    const Eigen::Index z_per = dh + n * d;
    const Eigen::Index y_per = n * m;

    // latent z = (h_0, eps_0, ..., eps_{n-1}) per particle, stacked
    Eigen::VectorXd z_mean = Eigen::VectorXd::Zero(N * z_per);
    Eigen::MatrixXd z_cov = Eigen::MatrixXd::Zero(N * z_per, N * z_per);
    Eigen::VectorXd y_const(N * y_per);
    Eigen::MatrixXd y_map = Eigen::MatrixXd::Zero(N * y_per, N * z_per);
    Eigen::VectorXd y_obs(N * y_per);

    for (int i = 0; i < N; ++i) {
        const Eigen::Index z0 = i * z_per;
        z_mean.segment(z0, dh) = prior.mean;
        z_cov.block(z0, z0, dh, dh) = prior.cov;
        // hidden state h_j = h_const + h_map * z_i
        Eigen::VectorXd h_const = Eigen::VectorXd::Zero(dh);
        Eigen::MatrixXd h_map = Eigen::MatrixXd::Zero(dh, z_per);
        h_map.leftCols(dh).setIdentity();
        for (int j = 0; j < n; ++j) {
            const LinearStep& st = coeffs.at(j, i);
            const Eigen::Index e0 = dh + j * d;
            z_cov.block(z0 + e0, z0 + e0, d, d) = st.noise_cov;
            const Eigen::VectorXd x_const = st.affine + st.loading * h_const;
            Eigen::MatrixXd x_map = st.loading * h_map;
            x_map.block(0, e0, d, d) += Eigen::MatrixXd::Identity(d, d);
            const Eigen::Index y0 = i * y_per + j * m;
            y_const.segment(y0, m) = x_const(obs);
            y_map.block(y0, z0, m, z_per) = x_map(obs, Eigen::all);
            for (Eigen::Index k = 0; k < m; ++k) {
                y_obs[y0 + k] = data.value(j + 1, i, static_cast<int>(k));
            }
            h_const = x_const(hid);
            h_map = x_map(hid, Eigen::all);
        }
    }
    const Eigen::VectorXd y_mean = y_const + y_map * z_mean;
    const Eigen::MatrixXd y_cov = y_map * z_cov * y_map.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(y_cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("dense oracle covariance is not positive definite");
    }
    const Eigen::VectorXd z = llt.matrixL().solve(y_obs - y_mean);
    const Eigen::MatrixXd l = llt.matrixL();
    return -0.5 * (z.squaredNorm() + 2.0 * l.diagonal().array().log().sum() +
                   static_cast<double>(y_obs.size()) * std::log(2.0 * std::numbers::pi));
}

}  // namespace hypoips
