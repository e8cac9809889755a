#include "fleetdspl/cli.hpp"

#include "fleetdspl/errors.hpp"
#include "fleetdspl/fleetsim.hpp"
#include "fleetdspl/trace.hpp"
#include "fleetdspl/variability.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace fleet::cli {

namespace {

/// Whole file, or nothing when it cannot be opened.
std::optional<std::string> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        return std::nullopt;
    return ss.str();
}

Selection split_features(const std::string& csv) {
    Selection out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ','))
        if (!item.empty())
            out.insert(item);
    return out;
}

std::filesystem::path dir_of(const std::string& path) {
    return std::filesystem::path(path).parent_path();
}

std::string describe(const TraceEvent& e) {
    const auto& p = e.payload;
    auto str = [&](const char* key) { return p.contains(key) ? p[key].dump() : std::string("-"); };
    switch (e.kind) {
    case EventKind::Reading: return str("variable") + "=" + str("value") + " from " + str("source");
    case EventKind::Fact: return str("variable") + "=" + str("value") + " valid_at " + str("valid_at");
    case EventKind::ModeSwitch: return str("from") + " -> " + str("to");
    case EventKind::Analyze:
        return "step " + str("step") + " effective " + str("effective") + " violations " +
               std::to_string(p.value("violations", nlohmann::json::array()).size());
    case EventKind::Plan:
        return "step " + str("step") + " " + str("status") + (p.contains("target") ? " target " + str("target") : "");
    case EventKind::NoChange: return "step " + str("step") + " " + str("reason");
    case EventKind::Command: return "seq " + str("seq") + " " + str("action") + " " + str("feature") + " on " + str("device");
    case EventKind::Ack: return "seq " + str("seq") + " from " + str("device");
    case EventKind::Adapt: return "step " + str("step") + " selection " + str("selection");
    case EventKind::Warning: return str("reason") + (p.contains("device") ? " " + str("device") : "");
    }
    return {};
}

} // namespace

ExitStatus cmd_validate(const std::string& model_path, std::ostream& out, std::ostream& err) {
    auto body = slurp(model_path);
    if (!body) {
        err << "error: cannot read '" << model_path << "'\n";
        return ExitStatus::runtime_error;
    }
    try {
        auto model = parse_model(*body);
        out << "ok: model '" << model.name() << "' with " << model.size() << " features and "
            << model.constraints().size() << " constraints\n";
        return ExitStatus::success;
    } catch (const SemanticError& e) {
        out << "invalid: " << model_path << "\n  - " << e.element() << ": " << e.what() << "\n";
    } catch (const SyntaxError& e) {
        out << "invalid: " << model_path << "\n  - " << e.what() << "\n";
    }
    return ExitStatus::validation_failure;
}

ExitStatus cmd_enumerate(const std::string& model_path, std::optional<std::size_t> limit, std::ostream& out,
                         std::ostream& err) {
    auto body = slurp(model_path);
    if (!body) {
        err << "error: cannot read '" << model_path << "'\n";
        return ExitStatus::runtime_error;
    }
    try {
        auto model = parse_model(*body);
        auto result = limit ? enumerate_configurations(model, *limit) : enumerate_configurations(model);
        for (const auto& sel : result.selections)
            out << join(sel) << "\n";
        out << "total: " << result.total << (result.truncated ? " (truncated)" : "") << "\n";
        return ExitStatus::success;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::validation_failure;
    }
}

ExitStatus cmd_derive(const std::string& model_path, const std::string& scenario_path,
                      const std::optional<std::string>& selection, std::ostream& out, std::ostream& err) {
    auto model_body = slurp(model_path);
    auto scenario_body = slurp(scenario_path);
    if (!model_body || !scenario_body) {
        err << "error: cannot read '" << (model_body ? scenario_path : model_path) << "'\n";
        return ExitStatus::runtime_error;
    }
    try {
        auto model = parse_model(*model_body);
        auto scenario = parse_scenario(*scenario_body, dir_of(scenario_path));
        Selection sel = selection ? split_features(*selection) : scenario.initial_selection;
        auto cfg = derive_fconfig(model, sel, scenario.devices, scenario.defaults);
        out << "selection: " << join(cfg.selection) << "\n";
        for (const auto& [feature, device] : cfg.bindings)
            out << "bind " << feature << " -> " << device << "\n";
        for (const auto& [device, dc] : cfg.dconfigs) {
            out << "dconfig " << device << ":";
            for (const auto& [key, value] : dc.params)
                std::visit([&](const auto& v) { out << " " << key << "=" << nlohmann::json(v).dump(); }, value);
            out << "\n";
        }
        return ExitStatus::success;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::validation_failure;
    }
}

ExitStatus cmd_run(const std::string& scenario_path, std::uint64_t seed, std::int64_t until,
                   const std::string& trace_path, std::ostream& out, std::ostream& err) {
    auto body = slurp(scenario_path);
    if (!body) {
        err << "error: cannot read '" << scenario_path << "'\n";
        return ExitStatus::runtime_error;
    }
    std::optional<World> world;
    try {
        world.emplace(load_scenario(*body, seed, dir_of(scenario_path)));
    } catch (const InitialSelectionInvalid& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::validation_failure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::validation_failure;
    }

    std::ofstream trace(trace_path, std::ios::binary | std::ios::trunc);
    if (!trace) {
        err << "error: cannot write trace '" << trace_path << "'\n";
        return ExitStatus::runtime_error;
    }
    try {
        run(*world, until, &trace);
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::usage_error;
    }
    trace.close();
    if (!trace) {
        err << "error: failed writing trace '" << trace_path << "'\n";
        return ExitStatus::runtime_error;
    }

    const auto& engine = world->engine();
    const double effective = engine.last_report() ? engine.last_report()->effective : 1.0;
    out << "ticks: " << world->clock() << "\n";
    out << "adaptations: " << engine.adaptations() << "\n";
    out << "final effective: " << std::fixed << std::setprecision(4) << effective << "\n";
    out << "final selection: " << join(engine.current().selection) << "\n";
    out << "final bindings:";
    for (const auto& [feature, device] : engine.current().bindings)
        out << " " << feature << "->" << device;
    out << "\n";
    return ExitStatus::success;
}

ExitStatus cmd_replay(const std::string& trace_path, std::ostream& out, std::ostream& err) {
    auto body = slurp(trace_path);
    if (!body) {
        err << "error: cannot read '" << trace_path << "'\n";
        return ExitStatus::runtime_error;
    }
    std::vector<TraceEvent> events;
    try {
        events = parse_trace(*body);
    } catch (const TraceFormatError& e) {
        err << "error: malformed trace: " << e.what() << "\n";
        return ExitStatus::runtime_error;
    }
    for (const auto& e : events)
        out << "t=" << e.t << " " << to_string(e.kind) << " " << describe(e) << "\n";
    auto report = verify_trace(events);
    if (!report.ok) {
        out << "violation: " << report.rule << " at event " << report.index + 1 << ": " << report.detail << "\n";
        return ExitStatus::validation_failure;
    }
    out << "ok: " << events.size() << " events";
    for (const auto& [kind, n] : report.counts)
        out << ", " << kind << "=" << n;
    out << "\n";
    return ExitStatus::success;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fleet DSPL toolkit: feature models, derivation and closed-loop fleet simulation", "fleetctl"};
    app.require_subcommand(1);

    std::string model_path, scenario_path, trace_path, selection;
    std::optional<std::size_t> limit;
    std::uint64_t seed = 0;
    std::int64_t until = 0;

    auto* validate = app.add_subcommand("validate", "Check a feature model file");
    validate->add_option("model", model_path, "Model file")->required();

    auto* enumerate = app.add_subcommand("enumerate", "List every valid product of a model");
    enumerate->add_option("model", model_path, "Model file")->required();
    enumerate->add_option("--limit", limit, "Print at most N selections");

    auto* derive = app.add_subcommand("derive", "Bind a selection to the devices of a scenario");
    derive->add_option("model", model_path, "Model file")->required();
    derive->add_option("scenario", scenario_path, "Scenario file")->required();
    auto* sel_opt = derive->add_option("--selection", selection, "Comma-separated features");

    auto* runc = app.add_subcommand("run", "Simulate a scenario and write its trace");
    runc->add_option("scenario", scenario_path, "Scenario file")->required();
    runc->add_option("--seed", seed, "Random seed")->default_val(0);
    runc->add_option("--until", until, "Number of ticks")->required();
    runc->add_option("--trace", trace_path, "Trace output file")->required();

    auto* replay = app.add_subcommand("replay", "Summarise a trace and verify its invariants");
    replay->add_option("trace", trace_path, "Trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : code(ExitStatus::usage_error);
    }

    ExitStatus status = ExitStatus::usage_error;
    if (*validate)
        status = cmd_validate(model_path, out, err);
    else if (*enumerate)
        status = cmd_enumerate(model_path, limit, out, err);
    else if (*derive)
        status = cmd_derive(model_path, scenario_path, *sel_opt ? std::optional(selection) : std::nullopt, out, err);
    else if (*runc)
        status = cmd_run(scenario_path, seed, until, trace_path, out, err);
    else if (*replay)
        status = cmd_replay(trace_path, out, err);
    return code(status);
}

} // namespace fleet::cli
