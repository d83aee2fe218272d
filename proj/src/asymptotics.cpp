#include "hypoips/asymptotics.hpp"

namespace hypoips {

std::string to_string(Regime r)
{
    return r == Regime::Elliptic ? "elliptic" : "hypoelliptic";
}

double snapped_step(double v, double rel_step)
{
    const double h = rel_step * std::max(1.0, std::abs(v));
    int e = 0;
    std::frexp(h, &e);
    // largest power of two not above h
    return std::ldexp(1.0, e - 1);
}

namespace {

CltBlock make_block(const std::string& name, double rate, int offset, const Eigen::MatrixXd& gamma,
                    const std::vector<std::vector<double>>& estimates, const ParameterVector& theta_true)
{
    CltBlock b;
    b.name = name;
    b.rate = rate;
    const auto k = gamma.rows();
    const auto R = static_cast<Eigen::Index>(estimates.size());
    Eigen::MatrixXd z(R, k);
    for (Eigen::Index r = 0; r < R; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
            const int comp = offset + static_cast<int>(c);
            z(r, c) = rate * (estimates[static_cast<std::size_t>(r)][static_cast<std::size_t>(comp)] - theta_true[comp]);
        }
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        b.components.push_back(offset + static_cast<int>(c));
    }
    b.rescaled_mean = z.colwise().mean().transpose();
    const Eigen::MatrixXd centred = z.rowwise() - b.rescaled_mean.transpose();
    b.rescaled_cov = centred.transpose() * centred / static_cast<double>(R - 1);
    Eigen::LLT<Eigen::MatrixXd> llt(gamma);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("precision block " + name + " is not positive definite");
    }
    b.limit_cov = llt.solve(Eigen::MatrixXd::Identity(k, k));
    b.variance_ratio = b.rescaled_cov.diagonal().cwiseQuotient(b.limit_cov.diagonal());
    return b;
}

}  // namespace

CltReport clt_diagnostic(const std::vector<std::vector<double>>& estimates, const ParameterVector& theta_true,
                         const ExperimentDesign& design, const PrecisionMatrices& precision, Method method)
{
    if (estimates.size() < 10) {
        throw InsufficientReplicates("CLT diagnostic needs at least 10 replicates, got " +
                                     std::to_string(estimates.size()));
    }
    for (const auto& e : estimates) {
        if (static_cast<int>(e.size()) != theta_true.size()) {
            throw ShapeError("replicate estimate has " + std::to_string(e.size()) + " components, expected " +
                             std::to_string(theta_true.size()));
        }
    }
    const ParameterLayout lay = theta_true.layout();
    const double n = static_cast<double>(design.n_particles);
    const double dt = design.delta();

    CltReport out;
    out.replicates = static_cast<int>(estimates.size());
    if (precision.gamma_alpha_s && lay.n_alpha_s > 0) {
        out.blocks.push_back(
            make_block("alpha_S", std::sqrt(n / (dt * dt)), 0, *precision.gamma_alpha_s, estimates, theta_true));
    }
    if (lay.n_alpha_r > 0) {
        out.blocks.push_back(make_block("alpha_R", std::sqrt(n), lay.alpha_r_offset(), precision.gamma_alpha_r,
                                        estimates, theta_true));
    }
    if (lay.n_beta > 0) {
        const Eigen::MatrixXd& g = method == Method::EM ? precision.gamma_beta_em : precision.gamma_beta;
        out.blocks.push_back(make_block("beta", std::sqrt(n / dt), lay.beta_offset(), g, estimates, theta_true));
    }
    return out;
}

}  // namespace hypoips
