#pragma once

// Complete-observation contrasts, finite-difference gradients and the ADAM
// driver.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypoips/lg_transition.hpp"
#include "hypoips/model.hpp"
#include "hypoips/parameters.hpp"
#include "hypoips/simulator.hpp"
#include "hypoips/summation.hpp"

namespace hypoips {

enum class Method { LG, EM };
enum class ObservationMode { Complete, Partial };

std::string to_string(Method m);
std::string to_string(ObservationMode m);
Method parse_method(const std::string& s);
ObservationMode parse_mode(const std::string& s);

/// Objective on the flat parameter vector.
using Objective = std::function<double(std::span<const double>)>;

/// Sums contrast terms over (particle, step) for one complete dataset. The
/// empirical measure at every observation time is built once up front. The
/// dataset must outlive the evaluator.
template <IpsModel M>
class ContrastEvaluator {
  public:
    using Tr = ModelTraits<M>;

    ContrastEvaluator(const M& model, const TrajectoryDataset& data, LgOptions opts = {})
        : model_(model), data_(&data), opts_(opts), scales_(data.delta())
    {
        if (!data.design().is_complete(Tr::d)) {
            throw ShapeError("complete-observation contrast needs all " + std::to_string(Tr::d) +
                             " coordinates observed");
        }
        measures_.reserve(static_cast<std::size_t>(data.n_times()));
        for (int j = 0; j < data.n_times(); ++j) {
            measures_.push_back(make_measure(model_, data.at_time(j), data.n_particles()));
        }
    }

    double lg(const ParamView& theta) const
    {
        return accumulate([&](const typename Tr::State& x, const typename Tr::State& xn, const EmpiricalMeasure<M>& mu,
                              std::size_t i, std::size_t j) {
            return lg_contrast_parts(model_, theta, x, xn, mu, scales_, opts_, i, j);
        });
    }

    double em(const ParamView& theta) const
    {
        return accumulate([&](const typename Tr::State& x, const typename Tr::State& xn, const EmpiricalMeasure<M>& mu,
                              std::size_t i, std::size_t j) {
            return em_contrast_parts(model_, theta, x, typename Tr::RoughVec(xn.template tail<Tr::dr>()), mu, scales_,
                                     i, j);
        });
    }

    double evaluate(Method method, const ParamView& theta) const
    {
        return method == Method::LG ? lg(theta) : em(theta);
    }

    const TrajectoryDataset& data() const noexcept { return *data_; }

  private:
    template <class Term>
    double accumulate(Term&& term) const
    {
        CompensatedSum quad;
        LogProduct logdet;
        const int N = data_->n_particles();
        for (int j = 1; j < data_->n_times(); ++j) {
            const auto& mu = measures_[static_cast<std::size_t>(j - 1)];
            const double* prev = data_->at_time(j - 1).data();
            const double* next = data_->at_time(j).data();
            for (int i = 0; i < N; ++i) {
                const Eigen::Map<const typename Tr::State> x(prev + static_cast<std::ptrdiff_t>(i) * Tr::d);
                const Eigen::Map<const typename Tr::State> xn(next + static_cast<std::ptrdiff_t>(i) * Tr::d);
                const TermParts t = term(x, xn, mu, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                quad.add(t.quad);
                logdet.add(t.det);
            }
        }
        const double value = quad.value() + logdet.value();
        if (!std::isfinite(value)) {
            throw NumericalError("contrast is not finite");
        }
        return value;
    }

    M model_;
    const TrajectoryDataset* data_;
    LgOptions opts_;
    StepScales scales_;
    std::vector<EmpiricalMeasure<M>> measures_;
};

/// l(theta) = sum_i sum_j m^T Lambda m + log det Sigma over a complete dataset.
template <IpsModel M>
double lg_contrast(const M& model, const ParameterVector& theta, const TrajectoryDataset& data,
                   const LgOptions& opts = {})
{
    return ContrastEvaluator<M>(model, data, opts).lg(theta.view());
}

/// Rough-block Euler contrast with covariance a_R.
template <IpsModel M>
double em_contrast(const M& model, const ParameterVector& theta, const TrajectoryDataset& data)
{
    return ContrastEvaluator<M>(model, data).em(theta.view());
}

/// Central differences with h_k = rel_step * max(1, |theta_k|); probes are
/// clipped to the box and the actual probe distance is the denominator.
Eigen::VectorXd contrast_gradient(const Objective& f, std::span<const double> theta,
                                  const std::vector<Interval>& bounds, double rel_step = 1e-6);

/// Step-halving consistency of central differences: with steps h, h/2, h/4
/// the observed order is log2(|D(h) - D(h/2)| / |D(h/2) - D(h/4)|).
/// Components whose difference |D(h) - D(h/2)| is under the rounding floor
/// (objective exactly quadratic in that direction) are flagged as exact.
struct FdOrderReport {
    std::vector<double> observed_order;
    std::vector<bool> exact;

    double min_order() const;
    bool passed(double threshold) const;
};

FdOrderReport fd_step_halving_check(const Objective& f, std::span<const double> theta, double rel_step = 1e-2);

enum class InitKind { Midpoint, Explicit, UniformRestarts };

struct AdamConfig {
    double step_size = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_stab = 1e-8;
    int iterations = 8000;
    InitKind init = InitKind::Midpoint;
    std::vector<double> theta0;  // InitKind::Explicit
    int restarts = 1;            // InitKind::UniformRestarts
    std::uint64_t init_seed = 0;
    std::uint64_t init_stream = 0;
    bool record_trace = false;

    void validate() const;
};

struct TraceEntry {
    std::vector<double> theta;
    double contrast = 0.0;
};

struct EstimationResult {
    ParameterVector theta_hat;
    double final_contrast = 0.0;
    int iterations = 0;
    std::vector<TraceEntry> trace;
    Method method = Method::LG;
    ObservationMode mode = ObservationMode::Complete;
};

/// Fixed-budget ADAM with bias-corrected moments and componentwise clamping
/// to the box after every update. With UniformRestarts the run with the
/// smallest final objective wins.
EstimationResult adam_minimize(const Objective& f, const AdamConfig& config, const ParameterLayout& layout,
                               const std::vector<Interval>& bounds, const std::vector<std::string>& names = {});

}  // namespace hypoips
