#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>

#include "bbm/count.hpp"
#include "bbm/counterexample.hpp"
#include "bbm/forest.hpp"
#include "bbm/harness.hpp"
#include "bbm/rate.hpp"

namespace py = pybind11;
using namespace bbm;

namespace {

// Extended reals cross the boundary as floats with +-inf.
double as_float(const ExtendedReal& x) {
    if (x.is_plus_infinity()) return std::numeric_limits<double>::infinity();
    if (x.is_minus_infinity()) return -std::numeric_limits<double>::infinity();
    return x.value();
}

ModelParams params_of(double r, const std::map<int, double>& offspring) {
    return ModelParams(r, offspring.empty() ? OffspringLaw::dyadic() : OffspringLaw(offspring));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Branching Brownian motion in tubes: simulation, rate function and experiment harness";

    py::class_<OffspringLaw>(m, "OffspringLaw")
        .def(py::init<const std::map<int, double>&>(), py::arg("pmf"))
        .def_static("dyadic", &OffspringLaw::dyadic)
        .def("probability", &OffspringLaw::probability)
        .def("pmf", &OffspringLaw::pmf)
        .def("mean", &OffspringLaw::mean)
        .def("m", &OffspringLaw::m);
    m.def("size_biased", &size_biased, py::arg("law"));

    m.def("energy", [](const std::vector<double>& knots, double theta) { return rate::energy(GridPath(knots), theta); },
          py::arg("knots"), py::arg("theta") = 1.0);
    m.def("theta0", [](const std::vector<double>& knots, double growth) {
        return as_float(rate::theta0(GridPath(knots), growth));
    }, py::arg("knots"), py::arg("growth"));
    m.def("k_value", [](const std::vector<double>& knots, double theta, double growth) {
        return as_float(rate::k_value(GridPath(knots), theta, growth));
    }, py::arg("knots"), py::arg("theta"), py::arg("growth"));
    m.def("sup_k_over_ball", [](const std::vector<double>& center, double eps, double theta, double growth) {
        rate::BallOptimum o = rate::sup_k_over_ball(rate::BallQuery(GridPath(center), eps, theta), growth);
        const auto& v = o.argmax.values();
        return py::make_tuple(as_float(o.value), std::vector<double>(v.begin(), v.end()), o.status.converged);
    }, py::arg("center"), py::arg("epsilon"), py::arg("theta"), py::arg("growth"),
       "Returns (value, argmax knots, converged).");
    m.def("schilder_inf", [](const std::vector<double>& center, double eps, double theta) {
        rate::SchilderResult s = rate::schilder_inf(rate::BallQuery(GridPath(center), eps, theta));
        const auto& v = s.argmin.values();
        return py::make_tuple(s.value, std::vector<double>(v.begin(), v.end()));
    }, py::arg("center"), py::arg("epsilon"), py::arg("theta"));

    m.def("counterexample_rate", [](std::int64_t whole, double fraction, double omega) {
        return counterexample::eval_x(counterexample::Horizon{whole, fraction}, omega).rate();
    }, py::arg("whole"), py::arg("fraction"), py::arg("omega"));
    m.def("counterexample_log_mean", [](std::int64_t whole, double fraction) {
        return counterexample::log_mean(counterexample::Horizon{whole, fraction});
    }, py::arg("whole"), py::arg("fraction"));

    m.def("population_counts", [](double r, const std::map<int, double>& offspring, double T, std::size_t steps,
                                  std::uint64_t seed, std::uint64_t replicate) {
        TimeGrid grid(T, steps);
        RngStream rng(seed, replicate);
        py::gil_scoped_release release;
        return population_counts(simulate_forest(params_of(r, offspring), grid, T, rng));
    }, py::arg("r"), py::arg("offspring"), py::arg("T"), py::arg("steps"), py::arg("seed"), py::arg("replicate") = 0,
       "Population size at each grid time of one simulated forest.");
    m.def("tube_count", [](double r, const std::map<int, double>& offspring, const std::vector<double>& path,
                           double eps, double theta, double T, std::size_t steps, std::uint64_t seed,
                           std::uint64_t replicate) {
        TimeGrid grid(T, steps);
        RngStream rng(seed, replicate);
        Tube tube(GridPath(path), eps, theta, T);
        py::gil_scoped_release release;
        return count_tube(simulate_forest(params_of(r, offspring), grid, theta * T, rng), tube).count;
    }, py::arg("r"), py::arg("offspring"), py::arg("path"), py::arg("epsilon"), py::arg("theta"), py::arg("T"),
       py::arg("steps"), py::arg("seed"), py::arg("replicate") = 0);

    m.def("run_experiment", [](const std::string& name, const std::string& config_json, const std::string& out) {
        using namespace bbm::harness;
        ExperimentConfig c = config_from_json(config_json.empty() ? nlohmann::json::object()
                                                                  : nlohmann::json::parse(config_json, nullptr, true, true));
        RunReport rep;
        {
            py::gil_scoped_release release;
            if (name == "many-to-one") rep = run_many_to_one(c);
            else if (name == "pgf") rep = run_pgf_bound(c);
            else if (name == "martingale") rep = run_martingale_suite(c);
            else if (name == "cross-measure") rep = run_cross_measure(c);
            else if (name == "growth") rep = run_growth(c);
            else if (name == "rate") rep = run_rate_examples(c);
            else if (name == "counterexample") rep = run_counterexample(c);
            else if (name == "diagnose-paths") rep = run_diagnose_paths(c);
            else if (name == "all") rep = run_all(c);
            else throw std::invalid_argument("unknown experiment '" + name + "'");
            if (!out.empty()) write_report(rep, c, out);
        }
        py::dict checks;
        for (const Check& ch : rep.checks) checks[py::str(ch.name)] = to_string(ch.status);
        return checks;
    }, py::arg("name"), py::arg("config_json") = "", py::arg("out") = "",
       "Runs a harness experiment and returns {check name: status}.");
}
