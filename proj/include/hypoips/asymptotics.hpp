#pragma once

// Plug-in Monte Carlo estimates of the asymptotic precision matrices of the
// contrast estimator, and a CLT scaling diagnostic for replicate studies.
//
// Integrals int_0^T E_{mu_t}[f] dt are replaced by (dt / (M N)) times the sum
// of f over the particles of M simulated clouds on the observation grid.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hypoips/contrast.hpp"
#include "hypoips/lg_transition.hpp"
#include "hypoips/model.hpp"
#include "hypoips/parallel.hpp"
#include "hypoips/simulator.hpp"
#include "hypoips/summation.hpp"

namespace hypoips {

enum class Regime { Elliptic, Hypoelliptic };

std::string to_string(Regime r);

struct PrecisionMatrices {
    Regime regime = Regime::Hypoelliptic;
    std::optional<Eigen::MatrixXd> gamma_alpha_s;
    Eigen::MatrixXd gamma_alpha_r;
    Eigen::MatrixXd gamma_beta;
    /// Rough-block-only counterpart for the Euler contrast (equals
    /// gamma_beta in the elliptic regime).
    Eigen::MatrixXd gamma_beta_em;

    // entrywise Monte Carlo standard errors across replicas (0 for M = 1)
    std::optional<Eigen::MatrixXd> se_alpha_s;
    Eigen::MatrixXd se_alpha_r;
    Eigen::MatrixXd se_beta;
    Eigen::MatrixXd se_beta_em;

    int replicas = 0;
    std::int64_t mc_particles_times_steps = 0;
};

struct PrecisionOptions {
    int mc_replicas = 1;
    InitialLaw initial;  // empty means InitialLaw::standard
    double rel_step = 1e-6;
    int workers = 1;  // replicas run in parallel; reduction order is fixed
};

/// Central-difference step h = rel_step * max(1, |v|), rounded down to a
/// power of two so that v +/- h is exact for moderate |v|.
double snapped_step(double v, double rel_step);

namespace detail {

/// Blocks of the per-particle integrands, accumulated over a cloud.
struct PrecisionAccumulator {
    std::vector<CompensatedSum> alpha_s;
    std::vector<CompensatedSum> alpha_r;
    std::vector<CompensatedSum> beta;
    std::vector<CompensatedSum> beta_em;

    PrecisionAccumulator(int na_s, int na_r, int nb)
        : alpha_s(static_cast<std::size_t>(na_s * na_s)), alpha_r(static_cast<std::size_t>(na_r * na_r)),
          beta(static_cast<std::size_t>(nb * nb)), beta_em(static_cast<std::size_t>(nb * nb))
    {
    }
};

inline Eigen::MatrixXd to_matrix(const std::vector<CompensatedSum>& acc, int n, double scale)
{
    Eigen::MatrixXd out(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            out(r, c) = scale * acc[static_cast<std::size_t>(r * n + c)].value();
        }
    }
    return 0.5 * (out + out.transpose());
}

template <IpsModel M>
void accumulate_precision(const M& model, const ParameterVector& theta, const typename ModelTraits<M>::State& x,
                          const EmpiricalMeasure<M>& mu, double rel_step, PrecisionAccumulator& acc)
{
    using Tr = ModelTraits<M>;
    const ParameterLayout lay = theta.layout();
    std::vector<double> work(theta.values().begin(), theta.values().end());
    auto view = [&] { return ParamView::split(work, lay); };

    const auto c = LocalCoefficients<M>::evaluate(model, theta.view(), x, mu);
    const typename Tr::Square sigma = sigma_from_coefficients(c);
    const typename Tr::Square lambda = sigma.llt().solve(Tr::Square::Identity());
    const typename Tr::SquareRough lambda_rr = c.a_r.llt().solve(Tr::SquareRough::Identity());

    auto central = [&](int k, auto&& eval) {
        const auto ku = static_cast<std::size_t>(k);
        const double base = work[ku];
        const double h = snapped_step(base, rel_step);
        work[ku] = base + h;
        const auto up = eval();
        work[ku] = base - h;
        const auto down = eval();
        work[ku] = base;
        return decltype(up)((up - down) / ((base + h) - (base - h)));
    };

    // alpha_S block: 4 dV_S^T Sigma_SS^{-1} dV_S
    if constexpr (Tr::ds > 0) {
        const int na = lay.n_alpha_s;
        if (na > 0) {
            const typename Tr::SquareSmooth sss_inv =
                typename Tr::SquareSmooth(sigma.template topLeftCorner<Tr::ds, Tr::ds>())
                    .llt()
                    .solve(Tr::SquareSmooth::Identity());
            std::vector<typename Tr::SmoothVec> dv;
            for (int k = 0; k < na; ++k) {
                dv.push_back(central(k, [&] { return typename Tr::SmoothVec(model.smooth_drift(view().alpha_s, x)); }));
            }
            for (int r = 0; r < na; ++r) {
                for (int s = 0; s < na; ++s) {
                    acc.alpha_s[static_cast<std::size_t>(r * na + s)].add(
                        4.0 * dv[static_cast<std::size_t>(r)].dot(sss_inv * dv[static_cast<std::size_t>(s)]));
                }
            }
        }
    }
    // alpha_R block: dV_R0^T Sigma_RR^{-1} dV_R0
    {
        const int na = lay.n_alpha_r;
        const int off = lay.alpha_r_offset();
        std::vector<typename Tr::RoughVec> dv;
        for (int k = 0; k < na; ++k) {
            dv.push_back(central(off + k, [&] {
                return typename Tr::RoughVec(hypoips::rough_drift(model, view().alpha_r, x, mu));
            }));
        }
        for (int r = 0; r < na; ++r) {
            for (int s = 0; s < na; ++s) {
                acc.alpha_r[static_cast<std::size_t>(r * na + s)].add(
                    dv[static_cast<std::size_t>(r)].dot(lambda_rr * dv[static_cast<std::size_t>(s)]));
            }
        }
    }
    // beta block: Sigma is linear in a_R, so dSigma = L(d a_R) with
    // d a_R = dV V^T + V dV^T and dV from central differences.
    {
        const int nb = lay.n_beta;
        const int off = lay.beta_offset();
        std::vector<typename Tr::Square> dsig;
        std::vector<typename Tr::SquareRough> dar;
        for (int k = 0; k < nb; ++k) {
            const typename Tr::DiffusionMatrix dv = central(off + k, [&] {
                return typename Tr::DiffusionMatrix(diffusion_columns(model, view().beta, x, mu));
            });
            LocalCoefficients<M> dc = c;
            dc.a_r = dv * c.diffusion.transpose() + c.diffusion * dv.transpose();
            dar.push_back(dc.a_r);
            dsig.push_back(sigma_from_coefficients(dc));
        }
        for (int r = 0; r < nb; ++r) {
            for (int s = 0; s < nb; ++s) {
                const auto rs = static_cast<std::size_t>(r * nb + s);
                const auto& dr = dsig[static_cast<std::size_t>(r)];
                const auto& ds = dsig[static_cast<std::size_t>(s)];
                acc.beta[rs].add(0.5 * (dr * lambda * ds * lambda).trace());
                const auto& er = dar[static_cast<std::size_t>(r)];
                const auto& es = dar[static_cast<std::size_t>(s)];
                acc.beta_em[rs].add(0.5 * (er * lambda_rr * es * lambda_rr).trace());
            }
        }
    }
}

}  // namespace detail

/// Plug-in estimate of the precision matrices at theta, from
/// options.mc_replicas independent complete simulations under `design`
/// (observed_coords is ignored; replicate r uses stream family r).
template <IpsModel M>
PrecisionMatrices plugin_precision(const M& model, const ParameterVector& theta, const ExperimentDesign& design,
                                   const PrecisionOptions& options = {})
{
    using Tr = ModelTraits<M>;
    if (options.mc_replicas < 1) {
        throw std::invalid_argument("plugin_precision: mc_replicas must be at least 1");
    }
    for (int k = 0; k < theta.size(); ++k) {
        if (!theta.bounds()[static_cast<std::size_t>(k)].contains(theta[k])) {
            throw std::out_of_range("plugin_precision: theta outside its bounds");
        }
    }
    ExperimentDesign full = design;
    full.observed_coords.clear();
    for (int c = 0; c < Tr::d; ++c) {
        full.observed_coords.push_back(c);
    }
    const InitialLaw init = options.initial.mean.empty() ? InitialLaw::standard(Tr::d) : options.initial;
    const ParameterLayout lay = theta.layout();
    const int na_s = Tr::ds > 0 ? lay.n_alpha_s : 0;
    const int M_rep = options.mc_replicas;
    const double scale = full.delta() / static_cast<double>(full.n_particles);

    std::vector<Eigen::MatrixXd> gs(M_rep), gr(M_rep), gb(M_rep), ge(M_rep);
    auto run_replica = [&](int rep) {
        const TrajectoryDataset data = simulate_ips(model, theta, full, init, static_cast<std::uint64_t>(rep));
        detail::PrecisionAccumulator acc(na_s, lay.n_alpha_r, lay.n_beta);
        for (int j = 0; j < data.n_obs(); ++j) {
            const auto mu = make_measure(model, data.at_time(j), data.n_particles());
            for (int i = 0; i < data.n_particles(); ++i) {
                detail::accumulate_precision(model, theta, mu.row(i), mu, options.rel_step, acc);
            }
        }
        const auto r = static_cast<std::size_t>(rep);
        gs[r] = detail::to_matrix(acc.alpha_s, na_s, scale);
        gr[r] = detail::to_matrix(acc.alpha_r, lay.n_alpha_r, scale);
        gb[r] = detail::to_matrix(acc.beta, lay.n_beta, scale);
        ge[r] = detail::to_matrix(acc.beta_em, lay.n_beta, scale);
    };
    parallel_for(M_rep, options.workers, run_replica);

    auto mean_se = [&](const std::vector<Eigen::MatrixXd>& v, Eigen::MatrixXd& mean, Eigen::MatrixXd& se) {
        mean = Eigen::MatrixXd::Zero(v.front().rows(), v.front().cols());
        for (const auto& m : v) {
            mean += m;
        }
        mean /= static_cast<double>(v.size());
        se = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
        if (v.size() > 1) {
            for (const auto& m : v) {
                se += (m - mean).cwiseProduct(m - mean);
            }
            se = (se / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())).cwiseSqrt();
        }
    };

    PrecisionMatrices out;
    out.regime = Tr::ds == 0 ? Regime::Elliptic : Regime::Hypoelliptic;
    out.replicas = M_rep;
    out.mc_particles_times_steps =
        static_cast<std::int64_t>(M_rep) * full.n_particles * static_cast<std::int64_t>(full.n_obs);
    mean_se(gr, out.gamma_alpha_r, out.se_alpha_r);
    mean_se(gb, out.gamma_beta, out.se_beta);
    mean_se(ge, out.gamma_beta_em, out.se_beta_em);
    if (na_s > 0) {
        Eigen::MatrixXd m, s;
        mean_se(gs, m, s);
        out.gamma_alpha_s = m;
        out.se_alpha_s = s;
    }
    return out;
}

struct CltBlock {
    std::string name;      // "alpha_S", "alpha_R" or "beta"
    double rate = 0.0;     // sqrt(N / dt^2), sqrt(N) or sqrt(N / dt)
    std::vector<int> components;
    Eigen::VectorXd rescaled_mean;
    Eigen::MatrixXd rescaled_cov;
    Eigen::MatrixXd limit_cov;      // Gamma^{-1}
    Eigen::VectorXd variance_ratio; // diag(rescaled_cov) / diag(limit_cov)
};

struct CltReport {
    int replicates = 0;
    std::vector<CltBlock> blocks;
};

/// Rescales replicate estimates by the CLT rate of their block and compares
/// the sample covariance with the inverse precision. `method` selects the
/// beta precision (LG or the rough-block Euler form).
CltReport clt_diagnostic(const std::vector<std::vector<double>>& estimates, const ParameterVector& theta_true,
                         const ExperimentDesign& design, const PrecisionMatrices& precision,
                         Method method = Method::LG);

}  // namespace hypoips
