#pragma once

// Dataset files: `t,particle,c0,...,c{m-1}` CSV plus a `.meta.json` sidecar.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hypoips/simulator.hpp"

namespace hypoips {

inline constexpr const char* kDatasetFormatVersion = "1";

/// %.17g, enough digits to round-trip any double.
std::string format_double(double v);

nlohmann::json design_to_json(const ExperimentDesign& d);
ExperimentDesign design_from_json(const nlohmann::json& j);

nlohmann::json parameters_to_json(const ParameterVector& p);
ParameterVector parameters_from_json(const nlohmann::json& j);

void write_dataset_csv(const std::filesystem::path& path, const TrajectoryDataset& data);
/// Values are checked against the design's shape (n+1 times, N particles,
/// |observed_coords| columns); mismatches raise DataError.
TrajectoryDataset read_dataset_csv(const std::filesystem::path& path, const ExperimentDesign& design,
                                   std::string model_id = {}, std::optional<ParameterVector> truth = std::nullopt);

nlohmann::json dataset_meta(const TrajectoryDataset& data);

/// Writes `<stem>.csv` and `<stem>.meta.json` into dir.
void save_dataset(const std::filesystem::path& dir, const std::string& stem, const TrajectoryDataset& data);
/// Loads a dataset CSV together with the sidecar next to it.
TrajectoryDataset load_dataset(const std::filesystem::path& csv_path);

/// Sidecar path for a dataset CSV: rep0.csv -> rep0.meta.json.
std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace hypoips
