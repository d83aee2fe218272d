#include "hypoips/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hypoips {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json design_to_json(const ExperimentDesign& d)
{
    return {{"n_particles", d.n_particles}, {"n_obs", d.n_obs},         {"horizon", d.horizon},
            {"fine_step", d.fine_step},     {"seed", d.seed},           {"observed_coords", d.observed_coords},
            {"delta", d.delta()}};
}

ExperimentDesign design_from_json(const json& j)
{
    ExperimentDesign d;
    d.n_particles = j.at("n_particles").get<int>();
    d.n_obs = j.at("n_obs").get<int>();
    d.horizon = j.at("horizon").get<double>();
    d.fine_step = j.value("fine_step", d.fine_step);
    d.seed = j.value("seed", std::uint64_t{0});
    d.observed_coords = j.at("observed_coords").get<std::vector<int>>();
    return d;
}

json parameters_to_json(const ParameterVector& p)
{
    json bounds = json::array();
    for (const auto& b : p.bounds()) {
        bounds.push_back({b.lo, b.hi});
    }
    const auto& lay = p.layout();
    return {{"values", std::vector<double>(p.values().begin(), p.values().end())},
            {"names", p.names()},
            {"bounds", bounds},
            {"layout", {lay.n_alpha_s, lay.n_alpha_r, lay.n_beta}}};
}

ParameterVector parameters_from_json(const json& j)
{
    const auto lay = j.at("layout").get<std::vector<int>>();
    if (lay.size() != 3) {
        throw DataError("parameter layout must have three entries");
    }
    std::vector<Interval> bounds;
    for (const auto& b : j.at("bounds")) {
        bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    }
    return ParameterVector({lay[0], lay[1], lay[2]}, j.at("values").get<std::vector<double>>(), std::move(bounds),
                           j.value("names", std::vector<std::string>{}));
}

void write_dataset_csv(const fs::path& path, const TrajectoryDataset& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    const int m = data.n_coords();
    std::string line = "t,particle";
    for (int c = 0; c < m; ++c) {
        line += ",c" + std::to_string(c);
    }
    out << line << '\n';
    for (int j = 0; j < data.n_times(); ++j) {
        const std::string t = format_double(data.time(j));
        for (int i = 0; i < data.n_particles(); ++i) {
            line = t;
            line += ',';
            line += std::to_string(i);
            for (int c = 0; c < m; ++c) {
                line += ',';
                line += format_double(data.value(j, i, c));
            }
            out << line << '\n';
        }
    }
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

namespace {

double parse_double(std::string_view s, const fs::path& path, std::size_t line)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw DataError(path.string() + ":" + std::to_string(line) + ": cannot parse '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

TrajectoryDataset read_dataset_csv(const fs::path& path, const ExperimentDesign& design, std::string model_id,
                                   std::optional<ParameterVector> truth)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open dataset " + path.string());
    }
    const auto m = design.observed_coords.size();
    const auto N = static_cast<std::size_t>(design.n_particles);
    const auto rows = static_cast<std::size_t>(design.n_obs + 1) * N;
    std::string line;
    std::getline(in, line);
    std::string header = "t,particle";
    for (std::size_t c = 0; c < m; ++c) {
        header += ",c" + std::to_string(c);
    }
    if (line != header) {
        throw DataError(path.string() + ": expected header '" + header + "'");
    }
    std::vector<double> values;
    values.reserve(rows * m);
    std::size_t r = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (r >= rows) {
            throw DataError(path.string() + ": more rows than the design allows (" + std::to_string(rows) + ")");
        }
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != m + 2) {
            throw DataError(path.string() + ":" + std::to_string(r + 2) + ": expected " + std::to_string(m + 2) +
                            " fields");
        }
        const double particle = parse_double(fields[1], path, r + 2);
        if (particle != static_cast<double>(r % N)) {
            throw DataError(path.string() + ":" + std::to_string(r + 2) + ": rows out of (time, particle) order");
        }
        for (std::size_t c = 0; c < m; ++c) {
            values.push_back(parse_double(fields[c + 2], path, r + 2));
        }
        ++r;
    }
    if (r != rows) {
        throw DataError(path.string() + ": " + std::to_string(r) + " rows, design needs " + std::to_string(rows));
    }
    return TrajectoryDataset(design, std::move(values), std::move(model_id), std::move(truth));
}

json dataset_meta(const TrajectoryDataset& data)
{
    json j = {{"format_version", kDatasetFormatVersion},
              {"model", data.model_id()},
              {"design", design_to_json(data.design())},
              {"seed", data.design().seed}};
    j["truth"] = data.truth() ? parameters_to_json(*data.truth()) : json(nullptr);
    return j;
}

fs::path meta_path_for(const fs::path& csv_path)
{
    fs::path p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

void save_dataset(const fs::path& dir, const std::string& stem, const TrajectoryDataset& data)
{
    fs::create_directories(dir);
    write_dataset_csv(dir / (stem + ".csv"), data);
    write_json_file(dir / (stem + ".meta.json"), dataset_meta(data));
}

TrajectoryDataset load_dataset(const fs::path& csv_path)
{
    const json meta = read_json_file(meta_path_for(csv_path));
    if (meta.value("format_version", std::string{}) != kDatasetFormatVersion) {
        throw DataError(meta_path_for(csv_path).string() + ": unsupported format version");
    }
    std::optional<ParameterVector> truth;
    if (meta.contains("truth") && !meta["truth"].is_null()) {
        truth = parameters_from_json(meta["truth"]);
    }
    return read_dataset_csv(csv_path, design_from_json(meta.at("design")), meta.value("model", std::string{}),
                            std::move(truth));
}

json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
}

}  // namespace hypoips
