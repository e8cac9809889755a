#include "fleetdspl/adaptation.hpp"
#include "fleetdspl/errors.hpp"
#include "fleetdspl/fleetsim.hpp"
#include "fleetdspl/trace.hpp"
#include "fleetdspl/variability.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace fleet;

namespace {

py::dict fconfig_dict(const FConfig& cfg) {
    py::dict out;
    out["selection"] = std::vector<std::string>(cfg.selection.begin(), cfg.selection.end());
    out["bindings"] = cfg.bindings;
    py::dict dconfigs;
    for (const auto& [dev, dc] : cfg.dconfigs) {
        py::dict params;
        for (const auto& [k, v] : dc.params)
            std::visit([&](const auto& x) { params[py::str(k)] = x; }, v);
        dconfigs[py::str(dev)] = params;
    }
    out["dconfigs"] = dconfigs;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Fleet DSPL core: feature models, knowledge base, MAPE-K planner and fleet simulator";

    auto base = py::register_exception<Error>(m, "FleetError");
    py::register_exception<SyntaxError>(m, "SyntaxError", base.ptr());
    py::register_exception<SemanticError>(m, "SemanticError", base.ptr());
    py::register_exception<UnknownFeature>(m, "UnknownFeature", base.ptr());
    py::register_exception<ModelTooLarge>(m, "ModelTooLarge", base.ptr());
    py::register_exception<InvalidSelection>(m, "InvalidSelection", base.ptr());
    py::register_exception<UnsatisfiedCapability>(m, "UnsatisfiedCapability", base.ptr());
    py::register_exception<ScenarioError>(m, "ScenarioError", base.ptr());
    py::register_exception<InitialSelectionInvalid>(m, "InitialSelectionInvalid", base.ptr());
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<TraceFormatError>(m, "TraceFormatError", base.ptr());

    py::class_<FeatureModel>(m, "FeatureModel")
        .def_property_readonly("name", &FeatureModel::name)
        .def_property_readonly("features", &FeatureModel::features)
        .def_property_readonly("constraint_count", [](const FeatureModel& fm) { return fm.constraints().size(); })
        .def("needs", &FeatureModel::needs, py::arg("feature"))
        .def("__len__", &FeatureModel::size)
        .def("__repr__", [](const FeatureModel& fm) {
            return "<FeatureModel '" + fm.name() + "' features=" + std::to_string(fm.size()) + ">";
        });

    py::class_<DeviceDescriptor>(m, "DeviceDescriptor")
        .def(py::init([](std::string id, std::vector<std::string> caps, double battery, bool reachable) {
                 DeviceDescriptor d{std::move(id), std::move(caps), battery, reachable, {}};
                 d.validate();
                 return d;
             }),
             py::arg("id"), py::arg("capabilities"), py::arg("battery") = 100.0, py::arg("reachable") = true)
        .def_readonly("id", &DeviceDescriptor::id)
        .def_readonly("capabilities", &DeviceDescriptor::capabilities)
        .def_readonly("battery", &DeviceDescriptor::battery)
        .def_readonly("reachable", &DeviceDescriptor::reachable);

    m.def("parse_model", [](const std::string& text) { return parse_model(text); }, py::arg("text"));

    m.def(
        "check_selection",
        [](const FeatureModel& model, const Selection& sel) {
            std::vector<std::string> out;
            for (const auto& v : check_selection(model, sel).violations)
                out.push_back(v.describe());
            return out;
        },
        py::arg("model"), py::arg("selection"),
        "Violations of the selection as readable strings; empty when valid.");

    m.def(
        "enumerate_configurations",
        [](const FeatureModel& model, std::optional<std::size_t> limit) {
            auto e = limit ? enumerate_configurations(model, *limit) : enumerate_configurations(model);
            std::vector<std::vector<std::string>> sels;
            for (const auto& s : e.selections)
                sels.emplace_back(s.begin(), s.end());
            return py::make_tuple(sels, e.total, e.truncated);
        },
        py::arg("model"), py::arg("limit") = py::none(), "Returns (selections, total, truncated).");

    m.def(
        "derive_fconfig",
        [](const FeatureModel& model, const Selection& sel, const std::vector<DeviceDescriptor>& registry) {
            return fconfig_dict(derive_fconfig(model, sel, registry));
        },
        py::arg("model"), py::arg("selection"), py::arg("registry"));

    m.def(
        "diff_selections",
        [](const Selection& a, const Selection& b) {
            auto d = diff_selections(a, b);
            return py::make_tuple(d.added, d.removed);
        },
        py::arg("a"), py::arg("b"), "Returns (added, removed).");

    m.def(
        "run_scenario",
        [](const std::string& text, std::uint64_t seed, Tick until, const std::filesystem::path& base_dir) {
            auto world = load_scenario(text, seed, base_dir);
            std::ostringstream sink;
            run(world, until, &sink);
            py::dict summary;
            summary["adaptations"] = world.engine().adaptations();
            summary["final"] = fconfig_dict(world.engine().current());
            summary["effective"] = world.engine().last_report() ? world.engine().last_report()->effective : 1.0;
            summary["trace"] = sink.str();
            return summary;
        },
        py::arg("text"), py::arg("seed"), py::arg("until"), py::arg("base_dir") = std::filesystem::path{},
        "Simulates a scenario; the returned dict holds the serialized trace under 'trace'.");

    m.def(
        "verify_trace",
        [](const std::string& text) {
            auto report = verify_trace(parse_trace(text));
            return py::make_tuple(report.ok, report.rule);
        },
        py::arg("text"), "Returns (ok, first violated rule).");
}
