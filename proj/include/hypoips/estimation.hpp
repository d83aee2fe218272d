#pragma once

// Estimator driver: builds the objective for (method, mode) and runs ADAM.
//
//   complete, LG : lg_contrast
//   complete, EM : em_contrast
//   partial,  LG : -kalman_marginal_loglik
//   partial,  EM : em_partial_baseline_contrast

#include <memory>

#include "hypoips/contrast.hpp"
#include "hypoips/partial_obs.hpp"

namespace hypoips {

struct EstimationOptions {
    LgOptions lg;
    KalmanOptions kalman;
};

inline void check_mode(const TrajectoryDataset& data, ObservationMode mode, int dim)
{
    const bool complete = data.design().is_complete(dim);
    if (mode == ObservationMode::Complete && !complete) {
        throw ShapeError("complete-observation estimation needs all coordinates observed");
    }
    if (mode == ObservationMode::Partial && complete) {
        throw ShapeError("partial-observation estimation needs at least one hidden coordinate");
    }
}

/// Objective on the flat theta. The dataset must outlive the returned callable.
template <IpsModel M>
Objective make_objective(const M& model, const TrajectoryDataset& data, const std::vector<Interval>& bounds,
                         Method method, ObservationMode mode, const EstimationOptions& opts = {})
{
    using Tr = ModelTraits<M>;
    check_mode(data, mode, Tr::d);
    const ParameterLayout layout = model.layout();
    if (static_cast<int>(bounds.size()) != layout.size()) {
        throw ShapeError("bounds have " + std::to_string(bounds.size()) + " entries, model expects " +
                         std::to_string(layout.size()));
    }
    if (mode == ObservationMode::Complete) {
        auto ev = std::make_shared<const ContrastEvaluator<M>>(model, data, opts.lg);
        return [ev, layout, method](std::span<const double> theta) {
            return ev->evaluate(method, ParamView::split(theta, layout));
        };
    }
    if (method == Method::LG) {
        return [model, &data, layout, bounds, k = opts.kalman](std::span<const double> theta) {
            const ParameterVector p(layout, {theta.begin(), theta.end()}, bounds);
            return -kalman_marginal_loglik(model, p, data, k);
        };
    }
    return [model, &data, layout, bounds](std::span<const double> theta) {
        const ParameterVector p(layout, {theta.begin(), theta.end()}, bounds);
        return em_partial_baseline_contrast(model, p, data);
    };
}

template <IpsModel M>
EstimationResult estimate(const M& model, const TrajectoryDataset& data, Method method, ObservationMode mode,
                          const AdamConfig& adam, const std::vector<Interval>& bounds,
                          const std::vector<std::string>& names = {}, const EstimationOptions& opts = {})
{
    const Objective f = make_objective(model, data, bounds, method, mode, opts);
    EstimationResult r = adam_minimize(f, adam, model.layout(), bounds, names);
    r.method = method;
    r.mode = mode;
    return r;
}

}  // namespace hypoips
