#include "hypoips/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hypoips {

int ExperimentDesign::subsample_factor() const
{
    if (!(fine_step > 0.0) || !(horizon > 0.0) || n_obs < 1) {
        throw std::invalid_argument("design needs positive horizon, fine_step and n_obs");
    }
    const double ratio = delta() / fine_step;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw std::invalid_argument("observation step " + std::to_string(delta()) +
                                    " is not a positive integer multiple of fine_step " + std::to_string(fine_step));
    }
    return static_cast<int>(rounded);
}

void ExperimentDesign::validate(int state_dim) const
{
    if (n_particles < 1) {
        throw std::invalid_argument("design needs at least one particle");
    }
    (void)subsample_factor();
    if (observed_coords.empty()) {
        throw std::invalid_argument("observed_coords must be nonempty");
    }
    std::vector<int> sorted = observed_coords;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("observed_coords contains duplicates");
    }
    if (sorted.front() < 0 || sorted.back() >= state_dim) {
        throw std::invalid_argument("observed coordinate outside 0.." + std::to_string(state_dim - 1));
    }
}

bool ExperimentDesign::is_complete(int state_dim) const
{
    if (static_cast<int>(observed_coords.size()) != state_dim) {
        return false;
    }
    for (int c = 0; c < state_dim; ++c) {
        if (observed_coords[static_cast<std::size_t>(c)] != c) {
            return false;
        }
    }
    return true;
}

TrajectoryDataset::TrajectoryDataset(ExperimentDesign design, std::vector<double> values, std::string model_id,
                                     std::optional<ParameterVector> truth)
    : design_(std::move(design)), values_(std::move(values)), model_id_(std::move(model_id)), truth_(std::move(truth))
{
    const std::size_t expected = static_cast<std::size_t>(n_times()) * static_cast<std::size_t>(n_particles()) *
                                 static_cast<std::size_t>(n_coords());
    if (values_.size() != expected) {
        throw ShapeError("dataset has " + std::to_string(values_.size()) + " values, design implies " +
                         std::to_string(expected));
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            throw DataError("non-finite observation at flat index " + std::to_string(k));
        }
    }
}

TrajectoryDataset TrajectoryDataset::restrict_to(const std::vector<int>& coords) const
{
    std::vector<int> local;
    for (int c : coords) {
        auto it = std::find(design_.observed_coords.begin(), design_.observed_coords.end(), c);
        if (it == design_.observed_coords.end()) {
            throw ShapeError("coordinate " + std::to_string(c) + " is not observed in this dataset");
        }
        local.push_back(static_cast<int>(it - design_.observed_coords.begin()));
    }
    ExperimentDesign d = design_;
    d.observed_coords = coords;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_times()) * static_cast<std::size_t>(n_particles()) * coords.size());
    for (int j = 0; j < n_times(); ++j) {
        for (int i = 0; i < n_particles(); ++i) {
            for (int c : local) {
                out.push_back(value(j, i, c));
            }
        }
    }
    return TrajectoryDataset(std::move(d), std::move(out), model_id_, truth_);
}

TrajectoryDataset TrajectoryDataset::select_particles(const std::vector<int>& order) const
{
    if (order.empty()) {
        throw ShapeError("particle selection is empty");
    }
    ExperimentDesign d = design_;
    d.n_particles = static_cast<int>(order.size());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_times()) * order.size() * static_cast<std::size_t>(n_coords()));
    for (int j = 0; j < n_times(); ++j) {
        for (int i : order) {
            if (i < 0 || i >= n_particles()) {
                throw ShapeError("particle index " + std::to_string(i) + " out of range");
            }
            for (int c = 0; c < n_coords(); ++c) {
                out.push_back(value(j, i, c));
            }
        }
    }
    return TrajectoryDataset(std::move(d), std::move(out), model_id_, truth_);
}

IntegratedNoisePair sample_correlated_noise(double delta, int d_b, RngStream& stream)
{
    if (!(delta > 0.0)) {
        throw std::invalid_argument("sample_correlated_noise: delta must be positive");
    }
    // idb = dt^{3/2} (z1/2 + z2/(2 sqrt 3)), db = dt^{1/2} z1
    const double sd = std::sqrt(delta);
    const double d32 = delta * sd;
    const double c2 = 1.0 / (2.0 * std::sqrt(3.0));
    IntegratedNoisePair out{Eigen::VectorXd(d_b), Eigen::VectorXd(d_b)};
    for (int k = 0; k < d_b; ++k) {
        const double z1 = stream.normal();
        const double z2 = stream.normal();
        out.db[k] = sd * z1;
        out.idb[k] = d32 * (0.5 * z1 + c2 * z2);
    }
    return out;
}

}  // namespace hypoips
