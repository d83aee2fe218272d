// Python entry points. Configs travel as JSON text; arrays as numpy.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hypoips/errors.hpp"
#include "hypoips/experiment.hpp"

namespace py = pybind11;
using namespace hypoips;

namespace {

ExperimentConfig parse(const std::string& text)
{
    return config_from_json(nlohmann::json::parse(text));
}

py::array_t<double> matrix(const Eigen::MatrixXd& m)
{
    py::array_t<double> out({m.rows(), m.cols()});
    auto v = out.mutable_unchecked<2>();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            v(r, c) = m(r, c);
        }
    }
    return out;
}

py::array_t<double> to_array(const TrajectoryDataset& d)
{
    const auto vals = d.values();
    py::array_t<double> out({d.n_times(), d.n_particles(), d.n_coords()});
    std::copy(vals.begin(), vals.end(), out.mutable_data());
    return out;
}

TrajectoryDataset from_array(const ExperimentConfig& cfg, py::array_t<double, py::array::c_style | py::array::forcecast> a)
{
    const auto& dz = cfg.design;
    if (a.ndim() != 3 || a.shape(0) != dz.n_obs + 1 || a.shape(1) != dz.n_particles ||
        a.shape(2) != static_cast<py::ssize_t>(dz.observed_coords.size())) {
        throw ShapeError("data must have shape (n_obs + 1, n_particles, observed coords)");
    }
    return TrajectoryDataset(dz, std::vector<double>(a.data(), a.data() + a.size()), cfg.model);
}

py::dict outcome(const RunOutcome& o)
{
    py::dict d;
    d["attempted"] = o.attempted;
    d["failed"] = o.failed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

    m.def("model_ids", [] { return ModelRegistry::global().ids(); });

    m.def("model_info", [](const std::string& id) {
        const AnyModel model = find_model(id);
        py::dict d;
        d["param_names"] = model.param_names();
        d["smooth_dim"] = model.smooth_dim();
        d["rough_dim"] = model.rough_dim();
        d["noise_dim"] = model.noise_dim();
        return d;
    });

    m.def("resolve_config", [](const std::string& text) { return config_to_json(parse(text)).dump(); },
          "Config with every default filled in, as JSON text.");

    m.def("simulate", [](const std::string& text, std::uint64_t replicate) {
        const ExperimentConfig cfg = parse(text);
        TrajectoryDataset data;
        {
            py::gil_scoped_release release;
            data = find_model(cfg.model).simulate(cfg.truth(), cfg.design, cfg.initial, replicate);
        }
        return to_array(data);
    }, py::arg("config"), py::arg("replicate") = 0);

    m.def("contrast", [](const std::string& text, py::array_t<double> data, std::vector<double> theta,
                         const std::string& method, const std::string& mode) {
        const ExperimentConfig cfg = parse(text);
        const TrajectoryDataset ds = from_array(cfg, data);
        const AnyModel model = find_model(cfg.model);
        const Objective f = model.objective(ds, cfg.bounds, parse_method(method), parse_mode(mode),
                                            cfg.estimation_options());
        return f(theta);
    }, py::arg("config"), py::arg("data"), py::arg("theta"), py::arg("method"), py::arg("mode"));

    m.def("estimate", [](const std::string& text, py::array_t<double> data, const std::string& method,
                         const std::string& mode) {
        const ExperimentConfig cfg = parse(text);
        const TrajectoryDataset ds = from_array(cfg, data);
        const ObservationMode om = parse_mode(mode);
        EstimationResult r;
        {
            py::gil_scoped_release release;
            r = find_model(cfg.model).estimate(ds, parse_method(method), om, cfg.adam_for(om, 0), cfg.bounds,
                                               cfg.estimation_options());
        }
        const auto v = r.theta_hat.values();
        py::dict d;
        d["theta"] = std::vector<double>(v.begin(), v.end());
        d["names"] = r.theta_hat.names();
        d["final_contrast"] = r.final_contrast;
        return d;
    }, py::arg("config"), py::arg("data"), py::arg("method") = "LG", py::arg("mode") = "complete");

    m.def("precision", [](const std::string& text) {
        const ExperimentConfig cfg = parse(text);
        PrecisionOptions opts;
        opts.mc_replicas = cfg.mc_replicas;
        opts.initial = cfg.initial;
        opts.workers = cfg.workers;
        PrecisionMatrices p;
        {
            py::gil_scoped_release release;
            p = find_model(cfg.model).precision(cfg.truth(), cfg.design, opts);
        }
        py::dict d;
        d["regime"] = to_string(p.regime);
        if (p.gamma_alpha_s) {
            d["gamma_alpha_s"] = matrix(*p.gamma_alpha_s);
        }
        d["gamma_alpha_r"] = matrix(p.gamma_alpha_r);
        d["gamma_beta"] = matrix(p.gamma_beta);
        d["gamma_beta_em"] = matrix(p.gamma_beta_em);
        d["replicas"] = p.replicas;
        return d;
    });

    m.def("run", [](const std::string& command, const std::string& text, const std::string& out) {
        const ExperimentConfig cfg = parse(text);
        RunOutcome o;
        {
            py::gil_scoped_release release;
            if (command == "simulate") {
                o = run_simulate(cfg, out);
            } else if (command == "estimate") {
                o = run_estimate(cfg, out);
            } else if (command == "experiment") {
                o = run_experiment(cfg, out);
            } else if (command == "asymptotics") {
                o = run_asymptotics(cfg, out);
            } else {
                throw ConfigError("unknown command '" + command + "'");
            }
        }
        return outcome(o);
    }, py::arg("command"), py::arg("config"), py::arg("out"));
}
