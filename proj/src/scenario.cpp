#include "fleetdspl/fleetsim.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace fleet {

using detail::json;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) { throw ScenarioError(key, key + ": " + what); }

const json& need(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        bad(where.empty() ? key : where + "." + key, "missing");
    return *it;
}

double number(const json& j, const std::string& key) {
    if (!j.is_number())
        bad(key, "expected a number");
    return j.get<double>();
}

Tick ticks(const json& j, const std::string& key) {
    if (!j.is_number_integer())
        bad(key, "expected an integer tick count");
    return j.get<Tick>();
}

std::string text(const json& j, const std::string& key) {
    if (!j.is_string())
        bad(key, "expected a string");
    return j.get<std::string>();
}

const json& object(const json& j, const std::string& key) {
    if (!j.is_object())
        bad(key, "expected an object");
    return j;
}

const json& array(const json& j, const std::string& key) {
    if (!j.is_array())
        bad(key, "expected an array");
    return j;
}

Dimension dimension(const json& j, const std::string& key) {
    auto d = parse_dimension(text(j, key));
    if (!d)
        bad(key, "unknown dimension '" + j.get<std::string>() + "'");
    return *d;
}

FeatureModel load_model(const json& j, const std::filesystem::path& base_dir) {
    std::string body;
    if (j.is_string()) {
        std::filesystem::path path = j.get<std::string>();
        if (path.is_relative())
            path = base_dir / path;
        std::ifstream in(path, std::ios::binary);
        if (!in)
            bad("model", "cannot read model file '" + path.string() + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        body = ss.str();
    } else if (j.is_object()) {
        body = j.dump();
    } else {
        bad("model", "expected a path or an inline model object");
    }
    try {
        return parse_model(body);
    } catch (const SemanticError& e) {
        bad("model", e.what());
    } catch (const SyntaxError& e) {
        bad("model", e.what());
    }
}

DeviceDescriptor load_device(const json& j, std::size_t i) {
    const std::string where = "devices[" + std::to_string(i) + "]";
    object(j, where);
    detail::reject_unknown_keys<ScenarioError>(j, {"id", "capabilities", "battery", "reachable", "params"}, where);
    DeviceDescriptor d;
    d.id = text(need(j, "id", where), where + ".id");
    if (auto it = j.find("capabilities"); it != j.end())
        for (const auto& tag : array(*it, where + ".capabilities"))
            d.capabilities.push_back(text(tag, where + ".capabilities"));
    if (auto it = j.find("battery"); it != j.end())
        d.battery = number(*it, where + ".battery");
    if (auto it = j.find("reachable"); it != j.end()) {
        if (!it->is_boolean())
            bad(where + ".reachable", "expected a boolean");
        d.reachable = it->get<bool>();
    }
    try {
        if (auto it = j.find("params"); it != j.end())
            d.params = detail::to_dconfig(*it, where);
        d.validate();
    } catch (const Error& e) {
        bad(where, e.what());
    }
    return d;
}

Goal load_goal(const json& j, std::size_t i, const FeatureModel& model) {
    const std::string where = "goals[" + std::to_string(i) + "]";
    object(j, where);
    detail::reject_unknown_keys<ScenarioError>(
        j, {"id", "weight", "kind", "variable", "feature", "threshold", "lo", "hi", "ramp"}, where);
    Goal g;
    g.id = text(need(j, "id", where), where + ".id");
    if (auto it = j.find("weight"); it != j.end())
        g.weight = number(*it, where + ".weight");
    auto kind = parse_goal_kind(text(need(j, "kind", where), where + ".kind"));
    if (!kind)
        bad(where + ".kind", "unknown goal kind");
    g.kind = *kind;
    if (g.kind == GoalKind::feature_off) {
        g.feature = text(need(j, "feature", where), where + ".feature");
        if (!model.contains(g.feature))
            bad(where + ".feature", "unknown feature '" + g.feature + "'");
    } else {
        g.variable = text(need(j, "variable", where), where + ".variable");
        if (g.kind == GoalKind::band) {
            g.lo = number(need(j, "lo", where), where + ".lo");
            g.hi = number(need(j, "hi", where), where + ".hi");
        } else {
            g.threshold = number(need(j, "threshold", where), where + ".threshold");
        }
        if (auto it = j.find("ramp"); it != j.end())
            g.ramp = number(*it, where + ".ramp");
    }
    try {
        g.validate();
    } catch (const RangeError& e) {
        bad(where, e.what());
    }
    return g;
}

LoopSettings load_loop(const json& j) {
    object(j, "loop");
    detail::reject_unknown_keys<ScenarioError>(j,
                                               {"period", "epsilon", "alpha", "horizon", "staleness",
                                                "violation_threshold", "ack_timeout", "battery_floor"},
                                               "loop");
    LoopSettings s;
    auto opt_ticks = [&](const char* key, Tick& out) {
        if (auto it = j.find(key); it != j.end())
            out = ticks(*it, std::string("loop.") + key);
    };
    auto opt_number = [&](const char* key, double& out) {
        if (auto it = j.find(key); it != j.end())
            out = number(*it, std::string("loop.") + key);
    };
    opt_ticks("period", s.period);
    opt_number("epsilon", s.epsilon);
    opt_number("alpha", s.alpha);
    opt_ticks("horizon", s.horizon);
    opt_ticks("staleness", s.staleness);
    opt_number("violation_threshold", s.violation_threshold);
    opt_ticks("ack_timeout", s.ack_timeout);
    opt_number("battery_floor", s.battery_floor);
    try {
        s.validate();
    } catch (const RangeError& e) {
        bad("loop", e.what());
    }
    return s;
}

Dynamics load_dynamics(const json& j) {
    object(j, "dynamics");
    detail::reject_unknown_keys<ScenarioError>(
        j, {"variable", "dry_rate", "irrigation_gain", "rain_gain", "noise", "initial"}, "dynamics");
    Dynamics d;
    if (auto it = j.find("variable"); it != j.end())
        d.variable = text(*it, "dynamics.variable");
    for (auto [key, out] : {std::pair{"dry_rate", &d.dry_rate}, std::pair{"irrigation_gain", &d.irrigation_gain},
                            std::pair{"rain_gain", &d.rain_gain}, std::pair{"noise", &d.noise}})
        if (auto it = j.find(key); it != j.end())
            *out = number(*it, std::string("dynamics.") + key);
    if (d.noise < 0.0)
        bad("dynamics.noise", "must be non-negative");
    if (auto it = j.find("initial"); it != j.end())
        for (const auto& [var, v] : object(*it, "dynamics.initial").items())
            d.initial[var] = number(v, "dynamics.initial." + var);
    return d;
}

TimelineEvent load_timeline_event(const json& j, std::size_t i, const Scenario& sc) {
    const std::string where = "timeline[" + std::to_string(i) + "]";
    object(j, where);
    TimelineEvent e;
    e.t = ticks(need(j, "t", where), where + ".t");
    if (e.t < 0)
        bad(where + ".t", "must be non-negative");
    const auto kind = text(need(j, "event", where), where + ".event");
    if (kind == "fact") {
        detail::reject_unknown_keys<ScenarioError>(j, {"t", "event", "variable", "value", "valid_at"}, where);
        e.kind = TimelineEvent::Kind::fact;
        e.variable = text(need(j, "variable", where), where + ".variable");
        e.value = number(need(j, "value", where), where + ".value");
        e.valid_at = ticks(need(j, "valid_at", where), where + ".valid_at");
    } else if (kind == "mode") {
        detail::reject_unknown_keys<ScenarioError>(j, {"t", "event", "mode"}, where);
        e.kind = TimelineEvent::Kind::mode;
        e.mode = text(need(j, "mode", where), where + ".mode");
        if (!sc.dimensions.has_mode(e.mode))
            bad(where + ".mode", "unknown mode '" + e.mode + "'");
    } else if (kind == "rain") {
        detail::reject_unknown_keys<ScenarioError>(j, {"t", "event", "mm"}, where);
        e.kind = TimelineEvent::Kind::rain;
        e.value = number(need(j, "mm", where), where + ".mm");
    } else if (kind == "device_fail") {
        detail::reject_unknown_keys<ScenarioError>(j, {"t", "event", "device"}, where);
        e.kind = TimelineEvent::Kind::device_fail;
        e.device = text(need(j, "device", where), where + ".device");
        if (std::none_of(sc.devices.begin(), sc.devices.end(), [&](const auto& d) { return d.id == e.device; }))
            bad(where + ".device", "unknown device '" + e.device + "'");
    } else if (kind == "reading_override") {
        detail::reject_unknown_keys<ScenarioError>(j, {"t", "event", "variable", "value"}, where);
        e.kind = TimelineEvent::Kind::reading_override;
        e.variable = text(need(j, "variable", where), where + ".variable");
        e.value = number(need(j, "value", where), where + ".value");
    } else {
        bad(where + ".event", "unknown timeline event '" + kind + "'");
    }
    return e;
}

Outlook load_outlook(const json& j, const FeatureModel& model) {
    Outlook o;
    std::size_t i = 0;
    for (const auto& term : array(j, "outlook")) {
        const std::string where = "outlook[" + std::to_string(i++) + "]";
        object(term, where);
        const auto var = text(need(term, "variable", where), where + ".variable");
        if (term.contains("trend")) {
            detail::reject_unknown_keys<ScenarioError>(term, {"variable", "trend"}, where);
            o.trends.push_back({var, number(term["trend"], where + ".trend")});
        } else if (term.contains("feature")) {
            detail::reject_unknown_keys<ScenarioError>(term, {"variable", "feature", "delta"}, where);
            auto f = text(term["feature"], where + ".feature");
            if (!model.contains(f))
                bad(where + ".feature", "unknown feature '" + f + "'");
            o.effects.push_back({f, var, number(need(term, "delta", where), where + ".delta")});
        } else if (term.contains("source")) {
            detail::reject_unknown_keys<ScenarioError>(term, {"variable", "source", "gain"}, where);
            o.couplings.push_back(
                {text(term["source"], where + ".source"), var, number(need(term, "gain", where), where + ".gain")});
        } else {
            bad(where, "expected one of trend, feature or source");
        }
    }
    return o;
}

} // namespace

Scenario parse_scenario(std::string_view body, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(body.begin(), body.end());
    } catch (const json::parse_error& e) {
        throw ScenarioError("", std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ScenarioError("", "scenario document must be a JSON object");
    detail::reject_unknown_keys<ScenarioError>(doc,
                                               {"name", "description", "model", "devices", "dimension_map", "modes",
                                                "active_mode", "initial_selection", "goals", "loop", "dynamics",
                                                "timeline", "outlook", "defaults"},
                                               "scenario");

    Scenario sc{.name = doc.contains("name") ? text(doc["name"], "name") : std::string{},
                .model = load_model(need(doc, "model", ""), base_dir)};

    std::size_t i = 0;
    for (const auto& d : array(need(doc, "devices", ""), "devices")) {
        sc.devices.push_back(load_device(d, i++));
        for (std::size_t k = 0; k + 1 < sc.devices.size(); ++k)
            if (sc.devices[k].id == sc.devices.back().id)
                bad("devices", "duplicate device id '" + sc.devices.back().id + "'");
    }

    std::map<VariableName, Dimension> base;
    for (const auto& [var, d] : object(need(doc, "dimension_map", ""), "dimension_map").items())
        base[var] = dimension(d, "dimension_map." + var);
    std::map<std::string, std::map<VariableName, Dimension>> modes;
    if (auto it = doc.find("modes"); it != doc.end())
        for (const auto& [mode, overrides] : object(*it, "modes").items()) {
            modes[mode];
            for (const auto& [var, d] : object(overrides, "modes." + mode).items())
                modes[mode][var] = dimension(d, "modes." + mode + "." + var);
        }
    try {
        sc.dimensions = DimensionMap(std::move(base), std::move(modes));
    } catch (const RangeError& e) {
        bad("modes", e.what());
    }
    if (auto it = doc.find("active_mode"); it != doc.end()) {
        auto mode = text(*it, "active_mode");
        if (!sc.dimensions.has_mode(mode))
            bad("active_mode", "unknown mode '" + mode + "'");
        sc.dimensions.activate(mode);
    }

    if (auto it = doc.find("goals"); it != doc.end()) {
        i = 0;
        for (const auto& g : array(*it, "goals"))
            sc.goals.push_back(load_goal(g, i++, sc.model));
    }
    if (auto it = doc.find("loop"); it != doc.end())
        sc.loop = load_loop(*it);
    if (auto it = doc.find("dynamics"); it != doc.end())
        sc.dynamics = load_dynamics(*it);
    if (auto it = doc.find("outlook"); it != doc.end())
        sc.outlook = load_outlook(*it, sc.model);
    if (auto it = doc.find("defaults"); it != doc.end())
        for (const auto& [feature, params] : object(*it, "defaults").items()) {
            if (!sc.model.contains(feature))
                bad("defaults." + feature, "unknown feature");
            try {
                sc.defaults[feature] = detail::to_dconfig(params, "defaults." + feature);
            } catch (const Error& e) {
                bad("defaults." + feature, e.what());
            }
        }
    if (auto it = doc.find("timeline"); it != doc.end()) {
        i = 0;
        for (const auto& e : array(*it, "timeline"))
            sc.timeline.push_back(load_timeline_event(e, i++, sc));
        std::stable_sort(sc.timeline.begin(), sc.timeline.end(),
                         [](const auto& a, const auto& b) { return a.t < b.t; });
    }

    for (const auto& f : array(need(doc, "initial_selection", ""), "initial_selection"))
        sc.initial_selection.insert(text(f, "initial_selection"));
    try {
        derive_fconfig(sc.model, sc.initial_selection, sc.devices, sc.defaults);
    } catch (const UnknownFeature& e) {
        throw InitialSelectionInvalid(std::string("initial_selection: ") + e.what());
    } catch (const InvalidSelection& e) {
        throw InitialSelectionInvalid(std::string("initial_selection: ") + e.what());
    } catch (const UnsatisfiedCapability& e) {
        throw InitialSelectionInvalid(std::string("initial_selection: ") + e.what());
    }
    return sc;
}

} // namespace fleet
