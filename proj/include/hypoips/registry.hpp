#pragma once

// Type-erased model handle and the string-id registry used by configs.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "hypoips/asymptotics.hpp"
#include "hypoips/estimation.hpp"
#include "hypoips/models.hpp"

namespace hypoips {

class AnyModel {
  public:
    AnyModel() = default;

    template <IpsModel M>
    AnyModel(std::string id, M model, std::vector<std::string> names)
        : impl_(std::make_shared<const Impl<M>>(std::move(model))), id_(std::move(id)), names_(std::move(names))
    {
        if (static_cast<int>(names_.size()) != layout().size()) {
            throw ShapeError("model '" + id_ + "': " + std::to_string(names_.size()) +
                             " parameter names for a layout of size " + std::to_string(layout().size()));
        }
    }

    const std::string& id() const noexcept { return id_; }
    const std::vector<std::string>& param_names() const noexcept { return names_; }
    ParameterLayout layout() const { return impl().layout(); }
    int smooth_dim() const { return impl().smooth_dim(); }
    int rough_dim() const { return impl().rough_dim(); }
    int noise_dim() const { return impl().noise_dim(); }
    int dim() const { return smooth_dim() + rough_dim(); }

    TrajectoryDataset simulate(const ParameterVector& theta, const ExperimentDesign& design, const InitialLaw& init,
                               std::uint64_t replicate = 0) const
    {
        return impl().simulate(theta, design, init, replicate, id_);
    }
    /// The dataset must outlive the returned callable.
    Objective objective(const TrajectoryDataset& data, const std::vector<Interval>& bounds, Method method,
                        ObservationMode mode, const EstimationOptions& opts = {}) const
    {
        return impl().objective(data, bounds, method, mode, opts);
    }
    EstimationResult estimate(const TrajectoryDataset& data, Method method, ObservationMode mode,
                              const AdamConfig& adam, const std::vector<Interval>& bounds,
                              const EstimationOptions& opts = {}) const
    {
        EstimationResult r = adam_minimize(objective(data, bounds, method, mode, opts), adam, layout(), bounds, names_);
        r.method = method;
        r.mode = mode;
        return r;
    }
    double lg_contrast(const ParameterVector& theta, const TrajectoryDataset& data, const LgOptions& opts = {}) const
    {
        return impl().lg_contrast(theta, data, opts);
    }
    double em_contrast(const ParameterVector& theta, const TrajectoryDataset& data) const
    {
        return impl().em_contrast(theta, data);
    }
    double kalman_loglik(const ParameterVector& theta, const TrajectoryDataset& data,
                         const KalmanOptions& opts = {}) const
    {
        return impl().kalman_loglik(theta, data, opts);
    }
    double em_partial_contrast(const ParameterVector& theta, const TrajectoryDataset& data) const
    {
        return impl().em_partial_contrast(theta, data);
    }
    PrecisionMatrices precision(const ParameterVector& theta, const ExperimentDesign& design,
                                const PrecisionOptions& opts = {}) const
    {
        return impl().precision(theta, design, opts);
    }

    /// theta with this model's layout and names.
    ParameterVector parameters(std::vector<double> values, std::vector<Interval> bounds) const
    {
        return ParameterVector(layout(), std::move(values), std::move(bounds), names_);
    }

    bool empty() const noexcept { return !impl_; }

  private:
    struct Concept {
        virtual ~Concept() = default;
        virtual ParameterLayout layout() const = 0;
        virtual int smooth_dim() const = 0;
        virtual int rough_dim() const = 0;
        virtual int noise_dim() const = 0;
        virtual TrajectoryDataset simulate(const ParameterVector&, const ExperimentDesign&, const InitialLaw&,
                                           std::uint64_t, const std::string&) const = 0;
        virtual Objective objective(const TrajectoryDataset&, const std::vector<Interval>&, Method, ObservationMode,
                                    const EstimationOptions&) const = 0;
        virtual double lg_contrast(const ParameterVector&, const TrajectoryDataset&, const LgOptions&) const = 0;
        virtual double em_contrast(const ParameterVector&, const TrajectoryDataset&) const = 0;
        virtual double kalman_loglik(const ParameterVector&, const TrajectoryDataset&,
                                     const KalmanOptions&) const = 0;
        virtual double em_partial_contrast(const ParameterVector&, const TrajectoryDataset&) const = 0;
        virtual PrecisionMatrices precision(const ParameterVector&, const ExperimentDesign&,
                                            const PrecisionOptions&) const = 0;
    };

    template <IpsModel M>
    struct Impl final : Concept {
        using Tr = ModelTraits<M>;
        M model;
        explicit Impl(M m) : model(std::move(m)) {}

        ParameterLayout layout() const override { return model.layout(); }
        int smooth_dim() const override { return Tr::ds; }
        int rough_dim() const override { return Tr::dr; }
        int noise_dim() const override { return Tr::db; }
        TrajectoryDataset simulate(const ParameterVector& theta, const ExperimentDesign& design,
                                   const InitialLaw& init, std::uint64_t replicate,
                                   const std::string& id) const override
        {
            return simulate_ips(model, theta, design, init, replicate, id);
        }
        Objective objective(const TrajectoryDataset& data, const std::vector<Interval>& bounds, Method method,
                            ObservationMode mode, const EstimationOptions& opts) const override
        {
            return make_objective(model, data, bounds, method, mode, opts);
        }
        double lg_contrast(const ParameterVector& theta, const TrajectoryDataset& data,
                           const LgOptions& opts) const override
        {
            return hypoips::lg_contrast(model, theta, data, opts);
        }
        double em_contrast(const ParameterVector& theta, const TrajectoryDataset& data) const override
        {
            return hypoips::em_contrast(model, theta, data);
        }
        double kalman_loglik(const ParameterVector& theta, const TrajectoryDataset& data,
                             const KalmanOptions& opts) const override
        {
            return kalman_marginal_loglik(model, theta, data, opts);
        }
        double em_partial_contrast(const ParameterVector& theta, const TrajectoryDataset& data) const override
        {
            return em_partial_baseline_contrast(model, theta, data);
        }
        PrecisionMatrices precision(const ParameterVector& theta, const ExperimentDesign& design,
                                    const PrecisionOptions& opts) const override
        {
            return plugin_precision(model, theta, design, opts);
        }
    };

    const Concept& impl() const
    {
        if (!impl_) {
            throw std::logic_error("empty model handle");
        }
        return *impl_;
    }

    std::shared_ptr<const Concept> impl_;
    std::string id_;
    std::vector<std::string> names_;
};

/// Built-ins "ifhn", "ilangevin1d" and "mfou" are always present; further
/// models can be added programmatically.
class ModelRegistry {
  public:
    static ModelRegistry& global();

    void add(AnyModel model);
    /// Throws ConfigError naming the known ids.
    AnyModel get(const std::string& id) const;
    bool contains(const std::string& id) const;
    std::vector<std::string> ids() const;

  private:
    ModelRegistry();

    mutable std::mutex mu_;
    std::map<std::string, AnyModel> models_;
};

inline AnyModel find_model(const std::string& id)
{
    return ModelRegistry::global().get(id);
}

}  // namespace hypoips
