#include "hypoips/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hypoips/rng.hpp"

namespace hypoips {

std::string to_string(Method m)
{
    return m == Method::LG ? "LG" : "EM";
}

std::string to_string(ObservationMode m)
{
    return m == ObservationMode::Complete ? "complete" : "partial";
}

Method parse_method(const std::string& s)
{
    if (s == "LG" || s == "lg") {
        return Method::LG;
    }
    if (s == "EM" || s == "em") {
        return Method::EM;
    }
    throw std::invalid_argument("unknown method '" + s + "' (expected LG or EM)");
}

ObservationMode parse_mode(const std::string& s)
{
    if (s == "complete") {
        return ObservationMode::Complete;
    }
    if (s == "partial") {
        return ObservationMode::Partial;
    }
    throw std::invalid_argument("unknown observation mode '" + s + "' (expected complete or partial)");
}

namespace {

double checked_eval(const Objective& f, std::span<const double> theta, int component)
{
    const double v = f(theta);
    if (!std::isfinite(v)) {
        throw NumericalError("objective is not finite at a probe for component " + std::to_string(component));
    }
    return v;
}

// Central difference for one component at step h without clipping.
double central_difference(const Objective& f, std::vector<double>& work, int k, double h)
{
    const auto ku = static_cast<std::size_t>(k);
    const double base = work[ku];
    work[ku] = base + h;
    const double up = checked_eval(f, work, k);
    work[ku] = base - h;
    const double down = checked_eval(f, work, k);
    work[ku] = base;
    return (up - down) / ((base + h) - (base - h));
}

}  // namespace

Eigen::VectorXd contrast_gradient(const Objective& f, std::span<const double> theta,
                                  const std::vector<Interval>& bounds, double rel_step)
{
    if (bounds.size() != theta.size()) {
        throw ShapeError("gradient: bounds and theta differ in length");
    }
    std::vector<double> work(theta.begin(), theta.end());
    Eigen::VectorXd g(static_cast<Eigen::Index>(theta.size()));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double base = theta[k];
        const double h = rel_step * std::max(1.0, std::abs(base));
        const double hi = bounds[k].clamp(base + h);
        const double lo = bounds[k].clamp(base - h);
        if (!(hi > lo)) {
            g[static_cast<Eigen::Index>(k)] = 0.0;
            continue;
        }
        work[k] = hi;
        const double up = checked_eval(f, work, static_cast<int>(k));
        work[k] = lo;
        const double down = checked_eval(f, work, static_cast<int>(k));
        work[k] = base;
        g[static_cast<Eigen::Index>(k)] = (up - down) / (hi - lo);
    }
    return g;
}

double FdOrderReport::min_order() const
{
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < observed_order.size(); ++k) {
        if (!exact[k]) {
            m = std::min(m, observed_order[k]);
        }
    }
    return m;
}

bool FdOrderReport::passed(double threshold) const
{
    return min_order() >= threshold;
}

FdOrderReport fd_step_halving_check(const Objective& f, std::span<const double> theta, double rel_step)
{
    std::vector<double> work(theta.begin(), theta.end());
    const double f0 = checked_eval(f, work, -1);
    FdOrderReport report;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const int ki = static_cast<int>(k);
        const double h = rel_step * std::max(1.0, std::abs(theta[k]));
        const double d1 = central_difference(f, work, ki, h);
        const double d2 = central_difference(f, work, ki, h / 2);
        const double d4 = central_difference(f, work, ki, h / 4);
        // rounding noise of a central difference at step h/4, with headroom
        const double floor = 1e-12 * (1.0 + std::abs(f0)) / (h / 4);
        const double e1 = std::abs(d1 - d2);
        const double e2 = std::abs(d2 - d4);
        const bool exact = e1 <= floor;
        report.exact.push_back(exact);
        report.observed_order.push_back(exact ? std::numeric_limits<double>::infinity()
                                              : std::log2(e1 / std::max(e2, std::numeric_limits<double>::min())));
    }
    return report;
}

void AdamConfig::validate() const
{
    if (!(step_size > 0.0)) {
        throw std::invalid_argument("adam: step_size must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("adam: decay rates must lie in [0, 1)");
    }
    if (!(eps_stab > 0.0)) {
        throw std::invalid_argument("adam: eps_stab must be positive");
    }
    if (iterations < 1) {
        throw std::invalid_argument("adam: iterations must be at least 1");
    }
    if (init == InitKind::UniformRestarts && restarts < 1) {
        throw std::invalid_argument("adam: restarts must be at least 1");
    }
}

namespace {

struct AdamRun {
    std::vector<double> theta;
    double value = 0.0;
    std::vector<TraceEntry> trace;
};

AdamRun run_adam(const Objective& f, const AdamConfig& cfg, const std::vector<Interval>& bounds,
                 std::vector<double> theta)
{
    for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] = bounds[k].clamp(theta[k]);
    }
    const double v0 = f(theta);
    if (!std::isfinite(v0)) {
        throw InitializationError("objective is not finite at the initial point");
    }
    AdamRun run;
    const auto d = static_cast<Eigen::Index>(theta.size());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    double b1t = 1.0;
    double b2t = 1.0;
    for (int it = 1; it <= cfg.iterations; ++it) {
        const Eigen::VectorXd g = contrast_gradient(f, theta, bounds);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for (Eigen::Index k = 0; k < d; ++k) {
            const double mhat = m[k] / (1.0 - b1t);
            const double vhat = v[k] / (1.0 - b2t);
            const auto ku = static_cast<std::size_t>(k);
            theta[ku] = bounds[ku].clamp(theta[ku] - cfg.step_size * mhat / (std::sqrt(vhat) + cfg.eps_stab));
        }
        if (cfg.record_trace) {
            run.trace.push_back({theta, f(theta)});
        }
    }
    run.value = f(theta);
    if (!std::isfinite(run.value)) {
        throw NumericalError("objective is not finite at the final iterate");
    }
    run.theta = std::move(theta);
    return run;
}

}  // namespace

EstimationResult adam_minimize(const Objective& f, const AdamConfig& config, const ParameterLayout& layout,
                               const std::vector<Interval>& bounds, const std::vector<std::string>& names)
{
    config.validate();
    if (static_cast<int>(bounds.size()) != layout.size()) {
        throw ShapeError("adam: bounds have " + std::to_string(bounds.size()) + " entries, layout needs " +
                         std::to_string(layout.size()));
    }
    std::vector<std::vector<double>> starts;
    switch (config.init) {
    case InitKind::Midpoint: {
        std::vector<double> s;
        for (const auto& b : bounds) {
            s.push_back(b.midpoint());
        }
        starts.push_back(std::move(s));
        break;
    }
    case InitKind::Explicit:
        if (static_cast<int>(config.theta0.size()) != layout.size()) {
            throw ShapeError("adam: explicit theta0 has wrong length");
        }
        starts.push_back(config.theta0);
        break;
    case InitKind::UniformRestarts: {
        const CounterRng rng(config.init_seed, config.init_stream);
        for (int r = 0; r < config.restarts; ++r) {
            auto s = rng.stream(CounterRng::kGlobalParticle, static_cast<std::uint64_t>(r));
            std::vector<double> start;
            for (const auto& b : bounds) {
                start.push_back(b.lo + (b.hi - b.lo) * s.uniform());
            }
            starts.push_back(std::move(start));
        }
        break;
    }
    }

    std::optional<AdamRun> best;
    for (auto& s : starts) {
        AdamRun run = run_adam(f, config, bounds, std::move(s));
        if (!best || run.value < best->value) {
            best = std::move(run);
        }
    }
    EstimationResult out;
    out.theta_hat = ParameterVector(layout, best->theta, bounds, names);
    out.final_contrast = best->value;
    out.iterations = config.iterations;
    out.trace = std::move(best->trace);
    return out;
}

}  // namespace hypoips
