#include "hypoips/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "hypoips/io.hpp"
#include "hypoips/parallel.hpp"

namespace hypoips {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {
    "model",          "theta_true", "design",  "initial_law",   "replicates",    "methods",
    "modes",          "adam",       "adam_partial", "bound_margin", "bounds",    "seed",
    "output_dir",     "workers",    "biased-poke09", "kalman",    "dataset",       "mc_replicas",
    "estimates_csv"};

std::string init_name(InitKind k)
{
    switch (k) {
    case InitKind::Midpoint:
        return "midpoint";
    case InitKind::Explicit:
        return "explicit";
    case InitKind::UniformRestarts:
        return "uniform";
    }
    return "midpoint";
}

InitKind parse_init(const std::string& s)
{
    if (s == "midpoint") {
        return InitKind::Midpoint;
    }
    if (s == "explicit") {
        return InitKind::Explicit;
    }
    if (s == "uniform") {
        return InitKind::UniformRestarts;
    }
    throw ConfigError("adam.init must be midpoint, explicit or uniform, got '" + s + "'");
}

json adam_to_json(const AdamConfig& a)
{
    return {{"step_size", a.step_size}, {"beta1", a.beta1},         {"beta2", a.beta2},
            {"eps_stab", a.eps_stab},   {"iterations", a.iterations}, {"init", init_name(a.init)},
            {"theta0", a.theta0},       {"restarts", a.restarts}};
}

AdamConfig adam_from_json(const json& j, AdamConfig a)
{
    for (const auto& [k, v] : j.items()) {
        if (k == "step_size") {
            a.step_size = v.get<double>();
        } else if (k == "beta1") {
            a.beta1 = v.get<double>();
        } else if (k == "beta2") {
            a.beta2 = v.get<double>();
        } else if (k == "eps_stab") {
            a.eps_stab = v.get<double>();
        } else if (k == "iterations") {
            a.iterations = v.get<int>();
        } else if (k == "init") {
            a.init = parse_init(v.get<std::string>());
        } else if (k == "theta0") {
            a.theta0 = v.get<std::vector<double>>();
        } else if (k == "restarts") {
            a.restarts = v.get<int>();
        } else {
            throw ConfigError("unknown adam key '" + k + "'");
        }
    }
    return a;
}

bool same_adam(const AdamConfig& a, const AdamConfig& b)
{
    return a.step_size == b.step_size && a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps_stab == b.eps_stab &&
           a.iterations == b.iterations && a.init == b.init && a.theta0 == b.theta0 && a.restarts == b.restarts;
}

std::string validation_name(FactorValidation v)
{
    return v == FactorValidation::EveryStep ? "every_step" : "first_step";
}

json matrix_json(const Eigen::MatrixXd& m)
{
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        out.push_back(row);
    }
    return out;
}

json vector_json(const Eigen::VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

// JSON has no NaN; missing statistics are null.
json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentDesign full_design(const ExperimentDesign& d, int dim)
{
    ExperimentDesign out = d;
    out.observed_coords.clear();
    for (int c = 0; c < dim; ++c) {
        out.observed_coords.push_back(c);
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ParameterVector ExperimentConfig::truth() const
{
    return find_model(model).parameters(theta_true, bounds);
}

EstimationOptions ExperimentConfig::estimation_options() const
{
    EstimationOptions o;
    o.lg.second_order_smooth_drift = !drop_second_order;
    o.kalman.lg = o.lg;
    o.kalman.validation = validation;
    if (!prior_mean.empty()) {
        const auto dh = static_cast<Eigen::Index>(prior_mean.size());
        o.kalman.prior.mean = Eigen::Map<const Eigen::VectorXd>(prior_mean.data(), dh);
        o.kalman.prior.cov.resize(dh, dh);
        for (Eigen::Index r = 0; r < dh; ++r) {
            for (Eigen::Index c = 0; c < dh; ++c) {
                o.kalman.prior.cov(r, c) = prior_cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            }
        }
    }
    return o;
}

AdamConfig ExperimentConfig::adam_for(ObservationMode mode, int replicate) const
{
    AdamConfig a = mode == ObservationMode::Partial ? adam_partial : adam;
    a.init_seed = seed;
    a.init_stream = static_cast<std::uint64_t>(replicate);
    return a;
}

ExperimentConfig config_from_json(const json& j)
{
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [k, v] : j.items()) {
        if (!kConfigKeys.count(k)) {
            throw ConfigError("unknown config key '" + k + "'");
        }
    }
    ExperimentConfig c;
    try {
        c.model = j.at("model").get<std::string>();
        const AnyModel m = find_model(c.model);
        const int d = m.dim();
        c.theta_true = j.at("theta_true").get<std::vector<double>>();
        if (static_cast<int>(c.theta_true.size()) != m.layout().size()) {
            throw ConfigError("theta_true has " + std::to_string(c.theta_true.size()) + " entries, model '" +
                              c.model + "' has " + std::to_string(m.layout().size()) + " parameters");
        }
        c.seed = j.value("seed", std::uint64_t{0});

        const json& dj = j.at("design");
        for (const auto& [k, v] : dj.items()) {
            if (k != "n_particles" && k != "n_obs" && k != "horizon" && k != "fine_step" && k != "observed_coords" &&
                k != "seed" && k != "delta") {
                throw ConfigError("unknown design key '" + k + "'");
            }
        }
        c.design.n_particles = dj.at("n_particles").get<int>();
        c.design.n_obs = dj.at("n_obs").get<int>();
        c.design.horizon = dj.at("horizon").get<double>();
        c.design.fine_step = dj.value("fine_step", 0.0005);
        c.design.observed_coords = dj.contains("observed_coords") ? dj["observed_coords"].get<std::vector<int>>()
                                                                  : full_design(c.design, d).observed_coords;
        c.design.seed = c.seed;
        try {
            c.design.validate(d);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("design: ") + e.what());
        }

        c.initial = InitialLaw::standard(d);
        if (j.contains("initial_law")) {
            const json& ij = j["initial_law"];
            c.initial.mean = ij.value("mean", c.initial.mean);
            c.initial.variance = ij.value("variance", c.initial.variance);
        }
        if (static_cast<int>(c.initial.mean.size()) != d || static_cast<int>(c.initial.variance.size()) != d) {
            throw ConfigError("initial_law needs mean and variance of length " + std::to_string(d));
        }
        for (double v : c.initial.variance) {
            if (!(v >= 0.0)) {
                throw ConfigError("initial_law variances must be non-negative");
            }
        }

        c.replicates = j.value("replicates", 1);
        if (c.replicates < 0) {
            throw ConfigError("replicates must be non-negative");
        }
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& s : j["methods"]) {
                c.methods.push_back(parse_method(s.get<std::string>()));
            }
        }
        if (j.contains("modes")) {
            c.modes.clear();
            for (const auto& s : j["modes"]) {
                c.modes.push_back(parse_mode(s.get<std::string>()));
            }
        }
        if (c.methods.empty() || c.modes.empty()) {
            throw ConfigError("methods and modes must be nonempty");
        }
        const bool complete_design = c.design.is_complete(d);
        if (std::find(c.modes.begin(), c.modes.end(), ObservationMode::Partial) != c.modes.end() &&
            complete_design) {
            throw ConfigError("partial mode needs design.observed_coords to leave a coordinate hidden");
        }

        if (j.contains("adam")) {
            c.adam = adam_from_json(j["adam"], c.adam);
        }
        c.adam_partial = j.contains("adam_partial") ? adam_from_json(j["adam_partial"], c.adam) : c.adam;
        for (const AdamConfig* a : {&c.adam, &c.adam_partial}) {
            a->validate();
            if (a->init == InitKind::Explicit && a->theta0.size() != c.theta_true.size()) {
                throw ConfigError("adam.theta0 must have one entry per parameter");
            }
        }

        c.bound_margin = j.value("bound_margin", 0.5);
        if (j.contains("bounds")) {
            for (const auto& b : j["bounds"]) {
                c.bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
            }
        } else {
            c.bounds = margin_bounds(c.theta_true, c.bound_margin);
        }
        if (c.bounds.size() != c.theta_true.size()) {
            throw ConfigError("bounds must have one interval per parameter");
        }
        try {
            (void)c.truth();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("theta_true/bounds: ") + e.what());
        }

        c.output_dir = j.value("output_dir", c.output_dir);
        c.workers = j.value("workers", 1);
        if (c.workers < 1) {
            throw ConfigError("workers must be at least 1");
        }
        c.drop_second_order = j.value("biased-poke09", false);

        if (j.contains("kalman")) {
            const json& kj = j["kalman"];
            for (const auto& [k, v] : kj.items()) {
                if (k != "prior_mean" && k != "prior_cov" && k != "validation") {
                    throw ConfigError("unknown kalman key '" + k + "'");
                }
            }
            c.prior_mean = kj.value("prior_mean", std::vector<double>{});
            c.prior_cov = kj.value("prior_cov", std::vector<std::vector<double>>{});
            const std::string v = kj.value("validation", std::string("first_step"));
            if (v == "first_step") {
                c.validation = FactorValidation::FirstStep;
            } else if (v == "every_step") {
                c.validation = FactorValidation::EveryStep;
            } else {
                throw ConfigError("kalman.validation must be first_step or every_step");
            }
        }
        const std::size_t dh = static_cast<std::size_t>(d) - c.design.observed_coords.size();
        if (!c.prior_mean.empty() && !complete_design) {
            if (c.prior_mean.size() != dh || c.prior_cov.size() != dh) {
                throw ConfigError("kalman prior must have hidden dimension " + std::to_string(dh));
            }
            for (const auto& row : c.prior_cov) {
                if (row.size() != dh) {
                    throw ConfigError("kalman.prior_cov must be square");
                }
            }
        } else if (!c.prior_mean.empty() || !c.prior_cov.empty()) {
            throw ConfigError("kalman prior given but the design has no hidden coordinate");
        }

        c.dataset = j.value("dataset", std::string{});
        c.mc_replicas = j.value("mc_replicas", 4);
        if (c.mc_replicas < 1) {
            throw ConfigError("mc_replicas must be at least 1");
        }
        c.estimates_csv = j.value("estimates_csv", std::string{});
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

json config_to_json(const ExperimentConfig& c)
{
    json bounds = json::array();
    for (const auto& b : c.bounds) {
        bounds.push_back({b.lo, b.hi});
    }
    json methods = json::array();
    for (auto m : c.methods) {
        methods.push_back(to_string(m));
    }
    json modes = json::array();
    for (auto m : c.modes) {
        modes.push_back(to_string(m));
    }
    json design = {{"n_particles", c.design.n_particles},
                   {"n_obs", c.design.n_obs},
                   {"horizon", c.design.horizon},
                   {"fine_step", c.design.fine_step},
                   {"observed_coords", c.design.observed_coords}};
    return {{"model", c.model},
            {"theta_true", c.theta_true},
            {"design", design},
            {"initial_law", {{"mean", c.initial.mean}, {"variance", c.initial.variance}}},
            {"replicates", c.replicates},
            {"methods", methods},
            {"modes", modes},
            {"adam", adam_to_json(c.adam)},
            {"adam_partial", adam_to_json(c.adam_partial)},
            {"bound_margin", c.bound_margin},
            {"bounds", bounds},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"workers", c.workers},
            {"biased-poke09", c.drop_second_order},
            {"kalman",
             {{"prior_mean", c.prior_mean},
              {"prior_cov", c.prior_cov},
              {"validation", validation_name(c.validation)}}},
            {"dataset", c.dataset},
            {"mc_replicas", c.mc_replicas},
            {"estimates_csv", c.estimates_csv}};
}

ExperimentConfig load_config(const fs::path& path)
{
    json j;
    try {
        j = read_json_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return config_from_json(j);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b)
{
    auto same_bounds = [](const std::vector<Interval>& x, const std::vector<Interval>& y) {
        return std::equal(x.begin(), x.end(), y.begin(), y.end(),
                          [](const Interval& p, const Interval& q) { return p.lo == q.lo && p.hi == q.hi; });
    };
    const auto& da = a.design;
    const auto& db = b.design;
    return a.model == b.model && a.theta_true == b.theta_true && da.n_particles == db.n_particles &&
           da.n_obs == db.n_obs && da.horizon == db.horizon && da.fine_step == db.fine_step && da.seed == db.seed &&
           da.observed_coords == db.observed_coords && a.initial.mean == b.initial.mean &&
           a.initial.variance == b.initial.variance && a.replicates == b.replicates && a.methods == b.methods &&
           a.modes == b.modes && same_adam(a.adam, b.adam) && same_adam(a.adam_partial, b.adam_partial) &&
           a.bound_margin == b.bound_margin && same_bounds(a.bounds, b.bounds) && a.seed == b.seed &&
           a.output_dir == b.output_dir && a.workers == b.workers && a.drop_second_order == b.drop_second_order &&
           a.prior_mean == b.prior_mean && a.prior_cov == b.prior_cov && a.validation == b.validation &&
           a.dataset == b.dataset && a.mc_replicas == b.mc_replicas && a.estimates_csv == b.estimates_csv;
}

// ---------------------------------------------------------------------------
// estimates table

std::string estimates_csv(const EstimatesTable& t)
{
    std::string out = "replicate,method,mode,status";
    for (const auto& n : t.names) {
        out += "," + n;
    }
    out += ",final_contrast";
    for (const auto& n : t.names) {
        out += ",true_" + n;
    }
    out += '\n';
    for (const auto& r : t.rows) {
        out += std::to_string(r.replicate) + "," + to_string(r.method) + "," + to_string(r.mode) + "," +
               (r.ok ? "ok" : "failed");
        for (std::size_t k = 0; k < t.names.size(); ++k) {
            out += "," + (r.ok ? format_double(r.theta[k]) : std::string("nan"));
        }
        out += "," + (r.ok ? format_double(r.final_contrast) : std::string("nan"));
        for (double v : r.truth) {
            out += "," + format_double(v);
        }
        out += '\n';
    }
    return out;
}

EstimatesTable parse_estimates_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> f;
        std::string cur;
        std::istringstream ss(s);
        while (std::getline(ss, cur, ',')) {
            f.push_back(cur);
        }
        if (!s.empty() && s.back() == ',') {
            f.emplace_back();
        }
        return f;
    };
    auto num = [](const std::string& s) {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            throw DataError("estimates: cannot parse number '" + s + "'");
        }
        return v;
    };
    if (!std::getline(in, line)) {
        throw DataError("estimates: empty file");
    }
    const auto header = split(line);
    if (header.size() < 6 || header[0] != "replicate" || header[1] != "method" || header[2] != "mode" ||
        header[3] != "status" || (header.size() - 5) % 2 != 0) {
        throw DataError("estimates: unexpected header");
    }
    EstimatesTable t;
    const std::size_t k = (header.size() - 5) / 2;
    for (std::size_t c = 0; c < k; ++c) {
        t.names.push_back(header[4 + c]);
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = split(line);
        if (f.size() != header.size()) {
            throw DataError("estimates: row with " + std::to_string(f.size()) + " fields");
        }
        EstimateRow r;
        r.replicate = std::stoi(f[0]);
        r.method = parse_method(f[1]);
        r.mode = parse_mode(f[2]);
        r.ok = f[3] == "ok";
        for (std::size_t c = 0; c < k; ++c) {
            r.theta.push_back(num(f[4 + c]));
            r.truth.push_back(num(f[5 + k + c]));
        }
        r.final_contrast = num(f[4 + k]);
        t.rows.push_back(std::move(r));
    }
    return t;
}

EstimatesTable read_estimates_csv(const fs::path& path)
{
    return parse_estimates_csv(read_text(path));
}

double quantile_sorted(const std::vector<double>& sorted, double p)
{
    if (sorted.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

json summarize(const EstimatesTable& t)
{
    std::vector<std::pair<Method, ObservationMode>> groups;
    for (const auto& r : t.rows) {
        const std::pair g{r.method, r.mode};
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) {
            groups.push_back(g);
        }
    }
    json out = {{"groups", json::array()}};
    std::set<int> reps;
    for (const auto& r : t.rows) {
        reps.insert(r.replicate);
    }
    out["replicates"] = reps.size();
    for (const auto& [method, mode] : groups) {
        std::vector<const EstimateRow*> ok;
        int failed = 0;
        for (const auto& r : t.rows) {
            if (r.method == method && r.mode == mode) {
                if (r.ok) {
                    ok.push_back(&r);
                } else {
                    ++failed;
                }
            }
        }
        json comps = json::array();
        for (std::size_t k = 0; k < t.names.size(); ++k) {
            std::vector<double> rel;
            double truth = std::numeric_limits<double>::quiet_NaN();
            for (const auto* r : ok) {
                truth = r->truth[k];
                rel.push_back((r->theta[k] - r->truth[k]) / r->truth[k]);
            }
            const double n = static_cast<double>(rel.size());
            CompensatedSum s;
            for (double v : rel) {
                s.add(v);
            }
            const double mean = rel.empty() ? std::numeric_limits<double>::quiet_NaN() : s.value() / n;
            CompensatedSum ss;
            for (double v : rel) {
                ss.add((v - mean) * (v - mean));
            }
            const double sd = rel.size() < 2 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(ss.value() / (n - 1));
            std::sort(rel.begin(), rel.end());
            comps.push_back({{"name", t.names[k]},
                             {"truth", number_or_null(truth)},
                             {"mean_rel", number_or_null(mean)},
                             {"sd_rel", number_or_null(sd)},
                             {"min", number_or_null(quantile_sorted(rel, 0.0))},
                             {"q1", number_or_null(quantile_sorted(rel, 0.25))},
                             {"median", number_or_null(quantile_sorted(rel, 0.5))},
                             {"q3", number_or_null(quantile_sorted(rel, 0.75))},
                             {"max", number_or_null(quantile_sorted(rel, 1.0))}});
        }
        out["groups"].push_back({{"method", to_string(method)},
                                 {"mode", to_string(mode)},
                                 {"n_ok", ok.size()},
                                 {"n_failed", failed},
                                 {"components", comps}});
    }
    return out;
}

std::string boxplot_csv(const json& summary)
{
    std::string out = "component,method,mode,min,q1,median,q3,max\n";
    auto cell = [](const json& v) { return v.is_null() ? std::string("nan") : format_double(v.get<double>()); };
    for (const auto& g : summary.at("groups")) {
        for (const auto& c : g.at("components")) {
            out += c.at("name").get<std::string>() + "," + g.at("method").get<std::string>() + "," +
                   g.at("mode").get<std::string>() + "," + cell(c["min"]) + "," + cell(c["q1"]) + "," +
                   cell(c["median"]) + "," + cell(c["q3"]) + "," + cell(c["max"]) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// runs

RunOutcome run_simulate(const ExperimentConfig& cfg, const fs::path& out)
{
    const AnyModel model = find_model(cfg.model);
    const ParameterVector truth = cfg.truth();
    fs::create_directories(out);
    std::vector<std::string> errors(static_cast<std::size_t>(cfg.replicates));
    parallel_for(cfg.replicates, cfg.workers, [&](int k) {
        try {
            const TrajectoryDataset data = model.simulate(truth, cfg.design, cfg.initial, static_cast<std::uint64_t>(k));
            save_dataset(out, "rep" + std::to_string(k), data);
        } catch (const NumericalError& e) {
            errors[static_cast<std::size_t>(k)] = e.what();
        }
    });
    RunOutcome r;
    r.attempted = cfg.replicates;
    json written = json::array();
    json failures = json::array();
    for (int k = 0; k < cfg.replicates; ++k) {
        const auto& e = errors[static_cast<std::size_t>(k)];
        if (e.empty()) {
            written.push_back({{"replicate", k},
                               {"csv", "rep" + std::to_string(k) + ".csv"},
                               {"meta", "rep" + std::to_string(k) + ".meta.json"}});
        } else {
            ++r.failed;
            failures.push_back({{"replicate", k}, {"error", e}});
        }
    }
    write_json_file(out / "manifest.json",
                    {{"command", "simulate"}, {"config", config_to_json(cfg)}, {"datasets", written},
                     {"failures", failures}});
    return r;
}

RunOutcome run_estimate(const ExperimentConfig& cfg, const fs::path& out)
{
    const AnyModel model = find_model(cfg.model);
    TrajectoryDataset data;
    if (cfg.dataset.empty()) {
        data = model.simulate(cfg.truth(), cfg.design, cfg.initial, 0);
    } else {
        if (!fs::exists(cfg.dataset)) {
            throw ConfigError("dataset not found: " + cfg.dataset);
        }
        data = load_dataset(cfg.dataset);
        if (!data.model_id().empty() && data.model_id() != cfg.model) {
            throw ConfigError("dataset was generated by model '" + data.model_id() + "', config names '" +
                              cfg.model + "'");
        }
    }
    const ObservationMode mode =
        data.design().is_complete(model.dim()) ? ObservationMode::Complete : ObservationMode::Partial;
    RunOutcome r;
    json results = json::array();
    for (Method method : cfg.methods) {
        ++r.attempted;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const EstimationResult est =
                model.estimate(data, method, mode, cfg.adam_for(mode, 0), cfg.bounds, cfg.estimation_options());
            json theta = json::object();
            for (int k = 0; k < est.theta_hat.size(); ++k) {
                theta[est.theta_hat.names()[static_cast<std::size_t>(k)]] = est.theta_hat[k];
            }
            results.push_back({{"method", to_string(method)},
                               {"mode", to_string(mode)},
                               {"status", "ok"},
                               {"theta_hat", theta},
                               {"final_contrast", est.final_contrast},
                               {"iterations", est.iterations},
                               {"wall_seconds", seconds_since(t0)}});
        } catch (const Error& e) {
            ++r.failed;
            results.push_back(
                {{"method", to_string(method)}, {"mode", to_string(mode)}, {"status", "failed"}, {"error", e.what()}});
        }
    }
    write_json_file(out / "estimate.json",
                    {{"command", "estimate"},
                     {"config", config_to_json(cfg)},
                     {"dataset", cfg.dataset.empty() ? json("simulated replicate 0") : json(cfg.dataset)},
                     {"results", results}});
    return r;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const fs::path& out)
{
    const AnyModel model = find_model(cfg.model);
    const ParameterVector truth = cfg.truth();
    const ExperimentDesign complete = full_design(cfg.design, model.dim());
    const EstimationOptions opts = cfg.estimation_options();

    struct Task {
        int replicate;
        ObservationMode mode;
        Method method;
    };
    std::vector<Task> tasks;
    for (int k = 0; k < cfg.replicates; ++k) {
        for (auto mode : cfg.modes) {
            for (auto method : cfg.methods) {
                tasks.push_back({k, mode, method});
            }
        }
    }
    struct Done {
        EstimateRow row;
        std::string error;
        double sim_seconds = 0.0;
        double est_seconds = 0.0;
    };
    std::vector<Done> done(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), cfg.workers, [&](int t) {
        const Task& task = tasks[static_cast<std::size_t>(t)];
        Done& d = done[static_cast<std::size_t>(t)];
        d.row.replicate = task.replicate;
        d.row.method = task.method;
        d.row.mode = task.mode;
        d.row.truth = cfg.theta_true;
        d.row.theta.assign(cfg.theta_true.size(), std::numeric_limits<double>::quiet_NaN());
        d.row.final_contrast = std::numeric_limits<double>::quiet_NaN();
        try {
            auto t0 = std::chrono::steady_clock::now();
            TrajectoryDataset data =
                model.simulate(truth, complete, cfg.initial, static_cast<std::uint64_t>(task.replicate));
            if (task.mode == ObservationMode::Partial) {
                data = data.restrict_to(cfg.design.observed_coords);
            }
            d.sim_seconds = seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            const EstimationResult est = model.estimate(data, task.method, task.mode,
                                                        cfg.adam_for(task.mode, task.replicate), cfg.bounds, opts);
            d.est_seconds = seconds_since(t0);
            d.row.theta.assign(est.theta_hat.values().begin(), est.theta_hat.values().end());
            d.row.final_contrast = est.final_contrast;
            d.row.ok = true;
        } catch (const Error& e) {
            d.row.ok = false;
            d.error = e.what();
        }
    });

    fs::create_directories(out);
    EstimatesTable table;
    table.names = model.param_names();
    RunOutcome r;
    json failures = json::array();
    std::string timings = "replicate,method,mode,simulate_seconds,estimate_seconds\n";
    for (const auto& d : done) {
        table.rows.push_back(d.row);
        ++r.attempted;
        if (!d.row.ok) {
            ++r.failed;
            failures.push_back({{"replicate", d.row.replicate},
                                {"method", to_string(d.row.method)},
                                {"mode", to_string(d.row.mode)},
                                {"error", d.error}});
        }
        timings += std::to_string(d.row.replicate) + "," + to_string(d.row.method) + "," + to_string(d.row.mode) +
                   "," + format_double(d.sim_seconds) + "," + format_double(d.est_seconds) + "\n";
    }
    write_text(out / "estimates.csv", estimates_csv(table));
    write_text(out / "timings.csv", timings);
    // summaries are computed from the file as written
    const json summary = summarize(read_estimates_csv(out / "estimates.csv"));
    write_json_file(out / "summary.json", summary);
    write_text(out / "boxplot.csv", boxplot_csv(summary));
    write_json_file(out / "manifest.json",
                    {{"command", "experiment"},
                     {"config", config_to_json(cfg)},
                     {"files", {"estimates.csv", "timings.csv", "summary.json", "boxplot.csv"}},
                     {"runs", r.attempted},
                     {"failed", r.failed},
                     {"failures", failures}});
    return r;
}

RunOutcome run_asymptotics(const ExperimentConfig& cfg, const fs::path& out)
{
    const AnyModel model = find_model(cfg.model);
    const ParameterVector truth = cfg.truth();
    std::optional<EstimatesTable> table;
    if (!cfg.estimates_csv.empty()) {
        if (!fs::exists(cfg.estimates_csv)) {
            throw ConfigError("estimates file for the CLT diagnostic not found: expected " + cfg.estimates_csv);
        }
        table = read_estimates_csv(cfg.estimates_csv);
    }
    PrecisionOptions po;
    po.mc_replicas = cfg.mc_replicas;
    po.initial = cfg.initial;
    po.workers = cfg.workers;
    const PrecisionMatrices p = model.precision(truth, cfg.design, po);

    const auto& names = model.param_names();
    const ParameterLayout lay = model.layout();
    auto block_names = [&](int off, int n) {
        return std::vector<std::string>(names.begin() + off, names.begin() + off + n);
    };
    json blocks = json::object();
    if (p.gamma_alpha_s) {
        blocks["gamma_alpha_S"] = {{"parameters", block_names(0, lay.n_alpha_s)},
                                   {"value", matrix_json(*p.gamma_alpha_s)},
                                   {"mc_se", matrix_json(*p.se_alpha_s)}};
    }
    blocks["gamma_alpha_R"] = {{"parameters", block_names(lay.alpha_r_offset(), lay.n_alpha_r)},
                               {"value", matrix_json(p.gamma_alpha_r)},
                               {"mc_se", matrix_json(p.se_alpha_r)}};
    blocks["gamma_beta"] = {{"parameters", block_names(lay.beta_offset(), lay.n_beta)},
                            {"value", matrix_json(p.gamma_beta)},
                            {"mc_se", matrix_json(p.se_beta)}};
    blocks["gamma_beta_em"] = {{"parameters", block_names(lay.beta_offset(), lay.n_beta)},
                               {"value", matrix_json(p.gamma_beta_em)},
                               {"mc_se", matrix_json(p.se_beta_em)}};

    json report = {{"command", "asymptotics"},
                   {"config", config_to_json(cfg)},
                   {"design", design_to_json(cfg.design)},
                   {"regime", to_string(p.regime)},
                   {"mc_replicas", p.replicas},
                   {"mc_particles_times_steps", p.mc_particles_times_steps},
                   {"blocks", blocks}};

    if (table) {
        json clt = json::array();
        std::vector<Method> seen;
        for (const auto& row : table->rows) {
            if (row.mode == ObservationMode::Complete &&
                std::find(seen.begin(), seen.end(), row.method) == seen.end()) {
                seen.push_back(row.method);
            }
        }
        for (Method m : seen) {
            std::vector<std::vector<double>> est;
            for (const auto& row : table->rows) {
                if (row.ok && row.method == m && row.mode == ObservationMode::Complete) {
                    est.push_back(row.theta);
                }
            }
            json entry = {{"method", to_string(m)}, {"mode", "complete"}, {"replicates", est.size()}};
            try {
                const CltReport rep = clt_diagnostic(est, truth, cfg.design, p, m);
                json bl = json::array();
                for (const auto& b : rep.blocks) {
                    bl.push_back({{"block", b.name},
                                  {"rate", b.rate},
                                  {"components", b.components},
                                  {"rescaled_mean", vector_json(b.rescaled_mean)},
                                  {"rescaled_cov", matrix_json(b.rescaled_cov)},
                                  {"limit_cov", matrix_json(b.limit_cov)},
                                  {"variance_ratio", vector_json(b.variance_ratio)}});
                }
                entry["blocks"] = bl;
            } catch (const Error& e) {
                entry["error"] = e.what();
            }
            clt.push_back(entry);
        }
        report["clt"] = clt;
        report["estimates_csv"] = cfg.estimates_csv;
    }
    write_json_file(out / "asymptotics.json", report);
    RunOutcome r;
    r.attempted = 1;
    return r;
}

}  // namespace hypoips
