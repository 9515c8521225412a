// Python bindings for the main operations: path generation, lifting,
// p-variation, portfolio construction and the experiment sweeps.

#include "roughfolio/lab.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
namespace rf = roughfolio;

namespace {

py::array_t<double> to_array(const std::vector<double>& data) {
    // shape-container form: portable across pybind11 generations
    py::array_t<double> out({static_cast<py::ssize_t>(data.size())});
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

py::array_t<double> values_matrix(const rf::SampledPath& path) {
    py::array_t<double> out({static_cast<py::ssize_t>(path.size()),
                             static_cast<py::ssize_t>(path.dim())});
    std::copy(path.raw_values().begin(), path.raw_values().end(), out.mutable_data());
    return out;
}

rf::SampledPath path_from_arrays(py::array_t<double, py::array::c_style | py::array::forcecast> times,
                                 py::array_t<double, py::array::c_style | py::array::forcecast> values) {
    if (times.ndim() != 1) throw std::invalid_argument("times must be one-dimensional");
    const std::size_t n = static_cast<std::size_t>(times.shape(0));
    std::size_t dim = 1;
    if (values.ndim() == 2)
        dim = static_cast<std::size_t>(values.shape(1));
    else if (values.ndim() != 1)
        throw std::invalid_argument("values must be one- or two-dimensional");
    if (static_cast<std::size_t>(values.shape(0)) != n)
        throw std::invalid_argument("times/values length mismatch");
    std::vector<double> t(times.data(), times.data() + n);
    std::vector<double> v(values.data(), values.data() + n * dim);
    return rf::SampledPath(std::move(t), std::move(v), dim);
}

rf::NoiseSpec spec_from_args(const std::string& kind, std::size_t d, double horizon,
                             std::size_t level, std::uint64_t seed) {
    rf::NoiseSpec spec;
    spec.kind = rf::NoiseSpec::parse_kind(kind);
    spec.dimension = d;
    spec.horizon = horizon;
    spec.master_level = level;
    spec.seed = seed;
    return spec;
}

py::object json_to_py(const nlohmann::ordered_json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

class PyLift {
public:
    explicit PyLift(std::shared_ptr<const rf::RoughPath> lift) : lift_(std::move(lift)) {}

    py::array_t<double> times() const { return to_array(lift_->base().times()); }
    py::array_t<double> values() const { return values_matrix(lift_->base()); }
    std::size_t size() const { return lift_->size(); }
    std::size_t dim() const { return lift_->dim(); }

    py::array_t<double> second_level(std::size_t s, std::size_t t) const {
        if (s > t || t >= lift_->size()) throw std::out_of_range("bad index pair");
        const std::size_t d = lift_->dim();
        py::array_t<double> out({static_cast<py::ssize_t>(d), static_cast<py::ssize_t>(d)});
        std::vector<double> buf(d * d);
        lift_->second_level(s, t, buf);
        std::copy(buf.begin(), buf.end(), out.mutable_data());
        return out;
    }

    py::array_t<double> bracket() const { return values_matrix(lift_->bracket()); }

    double rough_norm(double p) const { return rf::rough_norm(*lift_, p); }

    const std::shared_ptr<const rf::RoughPath>& handle() const { return lift_; }

private:
    std::shared_ptr<const rf::RoughPath> lift_;
};

} // namespace

PYBIND11_MODULE(_roughfolio, m) {
    m.doc() = "pathwise log-optimal portfolios over Ito rough-path lifts";

    m.def(
        "gen_noise",
        [](const std::string& kind, std::size_t d, double horizon, std::size_t level,
           std::uint64_t seed) {
            const rf::SampledPath path = rf::generate(spec_from_args(kind, d, horizon, level, seed));
            return py::make_tuple(to_array(path.times()), values_matrix(path));
        },
        py::arg("kind") = "brownian", py::arg("d") = 1, py::arg("T") = 1.0,
        py::arg("level") = 10, py::arg("seed") = 0,
        "Seeded driving path on a dyadic grid; returns (times, values).");

    m.def(
        "p_variation",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> times,
           py::array_t<double, py::array::c_style | py::array::forcecast> values, double p) {
            return rf::p_variation(path_from_arrays(times, values), p);
        },
        py::arg("times"), py::arg("values"), py::arg("p"),
        "Exact grid p-variation via the dynamic program (capped anchor set).");

    py::class_<PyLift>(m, "Lift")
        .def_property_readonly("size", &PyLift::size)
        .def_property_readonly("dim", &PyLift::dim)
        .def("times", &PyLift::times)
        .def("values", &PyLift::values)
        .def("second_level", &PyLift::second_level, py::arg("s"), py::arg("t"))
        .def("bracket", &PyLift::bracket)
        .def("rough_norm", &PyLift::rough_norm, py::arg("p") = 2.5);

    m.def(
        "ito_lift",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> times,
           py::array_t<double, py::array::c_style | py::array::forcecast> values) {
            return PyLift(std::make_shared<const rf::RoughPath>(
                rf::RoughPath::rie_lift(path_from_arrays(times, values))));
        },
        py::arg("times"), py::arg("values"),
        "Canonical left-point lift of a sampled path.");

    m.def(
        "rie_diagnostic",
        [](const std::string& kind, std::size_t d, double horizon, std::size_t level,
           std::uint64_t seed, double p, std::size_t n_max) {
            const rf::RieReport report =
                rf::rie_report(spec_from_args(kind, d, horizon, level, seed),
                               rf::PartitionScheme::dyadic(), p, n_max);
            py::list out;
            for (const auto& stat : report.levels) {
                py::dict row;
                row["level"] = stat.level;
                row["part2_sup_err"] = stat.part2_sup_err;
                row["part3_sup_stat"] = stat.part3_sup_stat;
                out.append(row);
            }
            return out;
        },
        py::arg("kind") = "brownian", py::arg("d") = 1, py::arg("T") = 1.0,
        py::arg("level") = 12, py::arg("seed") = 0, py::arg("p") = 2.5, py::arg("n_max") = 8);

    m.def(
        "log_optimal_portfolio",
        [](const std::string& config_text) {
            const rf::SweepConfig cfg = rf::parse_config_text(config_text);
            rf::NoiseSpec spec = spec_from_args(cfg.noise_kind == rf::NoiseSpec::Kind::brownian
                                                    ? "brownian"
                                                    : "identity",
                                                cfg.dimension, cfg.horizon, cfg.master_level,
                                                cfg.seeds.empty() ? 0 : cfg.seeds[0]);
            spec.kind = cfg.noise_kind;
            const rf::SampledPath w = rf::generate(spec);
            auto lift = std::make_shared<const rf::TimeAugmentedRoughPath>(
                rf::time_augment(rf::RoughPath::rie_lift(w)));
            const rf::ConsumptionClock clock = cfg.clock == "linear"
                                                   ? rf::ConsumptionClock::linear(w.times())
                                                   : rf::ConsumptionClock::terminal(w.times());
            py::dict out;
            out["times"] = to_array(w.times());
            if (cfg.model == "lv") {
                const rf::CoefficientField field = rf::make_lv_field({cfg.family, cfg.params});
                std::vector<double> s0(field.m, cfg.s0);
                const rf::RdeSolution sol = rf::rde_solve(field, s0, lift);
                const rf::LogOptimalResult res =
                    rf::log_optimal_portfolio(field, sol.path, clock, lift);
                out["price"] = values_matrix(sol.path.value_path());
                out["kappa"] = values_matrix(res.portfolio.kappa.value_path());
                out["V"] = values_matrix(res.wealth.values);
                out["phi"] = values_matrix(res.portfolio.phi[0].value_path());
                out["det_min"] = res.det_min;
            } else {
                const rf::ControlledCoefficients coeffs =
                    rf::make_bs_coefficients({cfg.family, cfg.params}, lift);
                std::vector<double> s0(coeffs.assets(), cfg.s0);
                const rf::PriceExponentialResult prices = rf::price_exponential(coeffs, s0, lift);
                const rf::LogOptimalBsResult res =
                    rf::log_optimal_portfolio_bs(coeffs, prices.prices, clock, lift);
                out["price"] = values_matrix(prices.prices[0].value_path());
                out["kappa"] = values_matrix(res.portfolio.kappa.value_path());
                out["V"] = values_matrix(res.wealth.values);
                out["phi"] = values_matrix(res.portfolio.phi[0].value_path());
                out["det_min"] = res.det_min;
            }
            return out;
        },
        py::arg("config_text"),
        "Builds the pathwise log-optimal portfolio for a flat key=value config.");

    m.def(
        "stability_sweep",
        [](const std::string& config_text) {
            return json_to_py(rf::stability_sweep(rf::parse_config_text(config_text)).summary);
        },
        py::arg("config_text"));

    m.def(
        "discretization_sweep",
        [](const std::string& config_text) {
            return json_to_py(
                rf::discretization_sweep(rf::parse_config_text(config_text)).summary);
        },
        py::arg("config_text"));

    m.def(
        "selftest",
        [](const std::string& config_text) {
            const rf::SweepConfig cfg =
                config_text.empty() ? rf::SweepConfig{} : rf::parse_config_text(config_text);
            return json_to_py(rf::selftest(cfg).summary);
        },
        py::arg("config_text") = "");

    m.attr("__version__") = "0.1.0";
}
