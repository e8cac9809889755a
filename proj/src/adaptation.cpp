#include "fleetdspl/adaptation.hpp"

#include "fleetdspl/errors.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace fleet {

using nlohmann::json;

std::string_view to_string(GoalKind kind) {
    switch (kind) {
    case GoalKind::above: return "above";
    case GoalKind::below: return "below";
    case GoalKind::band: return "band";
    case GoalKind::feature_off: return "feature_off";
    }
    return "?";
}

std::optional<GoalKind> parse_goal_kind(std::string_view name) {
    if (name == "above") return GoalKind::above;
    if (name == "below") return GoalKind::below;
    if (name == "band") return GoalKind::band;
    if (name == "feature_off") return GoalKind::feature_off;
    return std::nullopt;
}

std::string_view to_string(ViolationRecord::Kind kind) {
    switch (kind) {
    case ViolationRecord::Kind::goal: return "goal";
    case ViolationRecord::Kind::infeasibility: return "infeasibility";
    case ViolationRecord::Kind::staleness: return "staleness";
    }
    return "?";
}

std::string_view to_string(Command::Action action) {
    switch (action) {
    case Command::Action::activate: return "activate";
    case Command::Action::deactivate: return "deactivate";
    case Command::Action::configure: return "configure";
    }
    return "?";
}

void Goal::validate() const {
    if (id.empty())
        throw RangeError("goal without an id");
    if (!(weight >= 0.0))
        throw RangeError("goal '" + id + "': weight must be non-negative");
    if (kind == GoalKind::feature_off) {
        if (feature.empty())
            throw RangeError("goal '" + id + "': feature_off needs a feature");
        return;
    }
    if (variable.empty())
        throw RangeError("goal '" + id + "': missing variable");
    if (!(ramp > 0.0))
        throw RangeError("goal '" + id + "': ramp must be positive");
    if (kind == GoalKind::band && !(lo <= hi))
        throw RangeError("goal '" + id + "': band needs lo <= hi");
}

void LoopSettings::validate() const {
    if (period < 1)
        throw RangeError("loop period must be at least 1");
    if (!(epsilon >= 0.0))
        throw RangeError("epsilon must be non-negative");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw RangeError("alpha must lie in [0, 1]");
    if (horizon < 0 || staleness < 0 || ack_timeout < 0)
        throw RangeError("horizon, staleness and ack_timeout must be non-negative");
    if (!(violation_threshold >= 0.0 && violation_threshold <= 1.0))
        throw RangeError("violation_threshold must lie in [0, 1]");
    if (!(battery_floor >= 0.0 && battery_floor <= 100.0))
        throw RangeError("battery_floor must lie in [0, 100]");
}

// ---------------------------------------------------------------------------
// Goal evaluation

std::map<VariableName, double> Outlook::project(const EvaluationContext& ec, const Selection& sel) const {
    const auto& base = ec.predicted;
    auto out = base;
    for (const auto& t : trends)
        if (auto it = out.find(t.variable); it != out.end())
            it->second += t.per_tick * static_cast<double>(ec.horizon);
    for (const auto& e : effects)
        if (sel.count(e.feature))
            if (auto it = out.find(e.variable); it != out.end())
                it->second += e.delta;
    for (const auto& c : couplings) {
        auto src = base.find(c.source);
        auto dst = out.find(c.variable);
        if (src != base.end() && dst != out.end())
            dst->second += c.gain * src->second;
    }
    return out;
}

namespace {

double ramp_down(double distance, double ramp) { return std::max(0.0, 1.0 - distance / ramp); }

double satisfaction_of(const Goal& goal, double v) {
    switch (goal.kind) {
    case GoalKind::above: return v >= goal.threshold ? 1.0 : ramp_down(goal.threshold - v, goal.ramp);
    case GoalKind::below: return v <= goal.threshold ? 1.0 : ramp_down(v - goal.threshold, goal.ramp);
    case GoalKind::band:
        if (v < goal.lo)
            return ramp_down(goal.lo - v, goal.ramp);
        if (v > goal.hi)
            return ramp_down(v - goal.hi, goal.ramp);
        return 1.0;
    case GoalKind::feature_off: break;
    }
    return 0.0;
}

GoalEval eval_current(const Goal& goal, const EvaluationContext& ec, const Selection& sel) {
    if (goal.kind == GoalKind::feature_off)
        return {sel.count(goal.feature) ? 0.0 : 1.0};
    auto it = ec.current.find(goal.variable);
    if (it == ec.current.end())
        return {0.5, true, false};
    if (it->second.stale)
        return {0.0, false, true};
    return {satisfaction_of(goal, it->second.value)};
}

GoalEval eval_predicted(const Goal& goal, const std::map<VariableName, double>& predicted, const Selection& sel) {
    if (goal.kind == GoalKind::feature_off)
        return {sel.count(goal.feature) ? 0.0 : 1.0};
    auto it = predicted.find(goal.variable);
    if (it == predicted.end())
        return {0.5, true, false};
    return {satisfaction_of(goal, it->second)};
}

double weighted_total(const std::vector<Goal>& goals, const std::vector<double>& s) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < goals.size(); ++i) {
        num += goals[i].weight * s[i];
        den += goals[i].weight;
    }
    return den > 0.0 ? num / den : 1.0;
}

} // namespace

GoalEval evaluate_goal(const Goal& goal, const EvaluationContext& ec, View view, const Selection& sel,
                       const Outlook& outlook) {
    if (view == View::current)
        return eval_current(goal, ec, sel);
    if (outlook.empty())
        return eval_predicted(goal, ec.predicted, sel);
    return eval_predicted(goal, outlook.project(ec, sel), sel);
}

Scores score(const Selection& sel, const EvaluationContext& ec, const std::vector<Goal>& goals, double alpha,
             const Outlook& outlook) {
    const auto predicted = outlook.empty() ? ec.predicted : outlook.project(ec, sel);
    std::vector<double> cur, pred;
    cur.reserve(goals.size());
    pred.reserve(goals.size());
    for (const auto& g : goals) {
        cur.push_back(eval_current(g, ec, sel).satisfaction);
        pred.push_back(eval_predicted(g, predicted, sel).satisfaction);
    }
    Scores s;
    s.current = weighted_total(goals, cur);
    s.predicted = weighted_total(goals, pred);
    s.effective = alpha * s.current + (1.0 - alpha) * s.predicted;
    return s;
}

// ---------------------------------------------------------------------------
// Analyze

SatisfactionReport analyze(const KnowledgeBase& kb, const FeatureModel& model, const std::vector<Goal>& goals,
                           const FConfig& current, const LoopSettings& settings, Tick now, const Outlook& outlook) {
    (void)model;
    SatisfactionReport r;
    r.context = kb.snapshot(now, settings.horizon, settings.staleness);
    const auto& ec = r.context;
    const auto predicted = outlook.empty() ? ec.predicted : outlook.project(ec, current.selection);

    std::vector<double> cur, pred;
    std::map<VariableName, Tick> stale;
    for (const auto& g : goals) {
        auto c = eval_current(g, ec, current.selection);
        auto p = eval_predicted(g, predicted, current.selection);
        cur.push_back(c.satisfaction);
        pred.push_back(p.satisfaction);
        r.per_goal[g.id] = c.satisfaction;
        r.per_goal_predicted[g.id] = p.satisfaction;
        if (c.unknown)
            r.unknown_goals.insert(g.id);
        if (c.stale)
            stale[g.variable] = ec.current.at(g.variable).age;
        if (c.satisfaction < settings.violation_threshold)
            r.violations.push_back({ViolationRecord::Kind::goal, g.id, c.satisfaction});
    }
    for (const auto& [var, age] : stale)
        r.violations.push_back({ViolationRecord::Kind::staleness, var, static_cast<double>(age)});
    for (const auto& dev : current.bound_devices())
        if (!ec.feasible_devices.count(dev))
            r.violations.push_back({ViolationRecord::Kind::infeasibility, dev, 0.0});

    r.total_current = weighted_total(goals, cur);
    r.total_predicted = weighted_total(goals, pred);
    r.effective = settings.alpha * r.total_current + (1.0 - settings.alpha) * r.total_predicted;
    return r;
}

// ---------------------------------------------------------------------------
// Plan

std::vector<Command> plan_commands(const FConfig& from, const FConfig& to) {
    std::vector<Command> out;
    auto bound_to = [](const FConfig& cfg, const FeatureName& f) -> const DeviceId* {
        auto it = cfg.bindings.find(f);
        return it == cfg.bindings.end() ? nullptr : &it->second;
    };
    for (const auto& [feature, device] : from.bindings) {
        const DeviceId* next = bound_to(to, feature);
        if (!next || *next != device)
            out.push_back({Command::Action::deactivate, device, feature, {}});
    }
    for (const auto& [feature, device] : to.bindings) {
        const DeviceId* prev = bound_to(from, feature);
        if (!prev || *prev != device)
            out.push_back({Command::Action::activate, device, feature, to.dconfigs.count(device) ? to.dconfigs.at(device) : DConfig{}});
    }
    for (const auto& [device, cfg] : to.dconfigs)
        if (auto it = from.dconfigs.find(device); it != from.dconfigs.end() && it->second != cfg)
            out.push_back({Command::Action::configure, device, {}, cfg});
    return out;
}

PlanOutcome plan(const SatisfactionReport& report, const FeatureModel& model,
                 const std::vector<DeviceDescriptor>& registry, const std::vector<Goal>& goals,
                 const FConfig& current, const LoopSettings& settings, const Outlook& outlook,
                 const FeatureDefaults& defaults) {
    if (report.violations.empty())
        return NoChange{"no_violation", 0.0};

    const auto& ec = report.context;
    std::vector<DeviceDescriptor> feasible;
    for (const auto& d : registry)
        if (ec.feasible_devices.count(d.id))
            feasible.push_back(d);

    struct Candidate {
        FConfig cfg;
        double effective;
        std::size_t changes;
    };
    std::vector<Candidate> candidates;
    for (const auto& sel : enumerate_configurations(model).selections) {
        FConfig cfg;
        try {
            cfg = derive_fconfig(model, sel, feasible, defaults);
        } catch (const UnsatisfiedCapability&) {
            continue;
        }
        const double eff = score(sel, ec, goals, settings.alpha, outlook).effective;
        candidates.push_back({std::move(cfg), eff, diff_selections(current.selection, sel).size()});
    }
    if (candidates.empty())
        throw NoFeasibleConfiguration();

    double top = candidates.front().effective;
    for (const auto& c : candidates)
        top = std::max(top, c.effective);
    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
        if (c.effective < top - kScoreTolerance)
            continue;
        // Candidates arrive in ascending selection order, so strict < keeps the smallest.
        if (!best || c.changes < best->changes)
            best = &c;
    }

    bool infeasible = false;
    for (const auto& dev : current.bound_devices())
        infeasible = infeasible || !ec.feasible_devices.count(dev);

    const double current_eff = score(current.selection, ec, goals, settings.alpha, outlook).effective;
    const double gain = best->effective - current_eff;
    if (best->cfg == current)
        return NoChange{"already_optimal", gain};
    if (!infeasible && gain + kScoreTolerance < settings.epsilon)
        return NoChange{"below_hysteresis", gain};

    AdaptationPlan p;
    p.target = best->cfg;
    p.features = diff_selections(current.selection, p.target.selection);
    p.commands = plan_commands(current, p.target);
    p.reason = report.violations;
    p.expected_gain = gain;
    p.target_effective = best->effective;
    return p;
}

// ---------------------------------------------------------------------------
// Execute

namespace {

json command_payload(const Command& c, std::int64_t step, std::int64_t seq) {
    json p{{"step", step}, {"seq", seq}, {"action", to_string(c.action)}, {"device", c.device}};
    if (!c.feature.empty())
        p["feature"] = c.feature;
    if (!c.params.params.empty())
        p["params"] = detail::from_dconfig(c.params);
    return p;
}

} // namespace

ExecutionResult execute(const AdaptationPlan& plan, CommandBus& bus, FConfig& current, KnowledgeBase& kb,
                        const LoopSettings& settings, Tick now, std::int64_t step, std::int64_t& next_seq) {
    ExecutionResult result;
    for (const auto& cmd : plan.commands) {
        if (cmd.action == Command::Action::deactivate) {
            if (const auto* d = kb.device(cmd.device); d && !d->reachable) {
                result.events.push_back({now,
                                         EventKind::Warning,
                                         {{"reason", "skipped_unreachable"},
                                          {"step", step},
                                          {"device", cmd.device},
                                          {"feature", cmd.feature}}});
                continue;
            }
        }
        const std::int64_t seq = next_seq++;
        result.events.push_back({now, EventKind::Command, command_payload(cmd, step, seq)});
        auto ack = bus.dispatch(cmd, seq, now);
        if (!ack || *ack - now > settings.ack_timeout) {
            kb.set_reachable(cmd.device, false);
            result.events.push_back(
                {now,
                 EventKind::Warning,
                 {{"reason", "ack_timeout"}, {"step", step}, {"device", cmd.device}, {"seq", seq}}});
            result.aborted_device = cmd.device;
            return result;
        }
        result.events.push_back(
            {now, EventKind::Ack, {{"step", step}, {"seq", seq}, {"device", cmd.device}, {"latency", *ack - now}}});
    }
    current = plan.target;
    result.applied = true;
    json adapt = to_json(current);
    adapt["step"] = step;
    adapt["gain"] = plan.expected_gain;
    result.events.push_back({now, EventKind::Adapt, std::move(adapt)});
    return result;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(FeatureModel model, std::vector<Goal> goals, LoopSettings settings, KnowledgeBase kb, FConfig initial,
               Outlook outlook, FeatureDefaults defaults)
    : model_(std::move(model)), goals_(std::move(goals)), settings_(settings), kb_(std::move(kb)),
      current_(std::move(initial)), outlook_(std::move(outlook)), defaults_(std::move(defaults)) {
    settings_.validate();
    for (const auto& g : goals_)
        g.validate();
}

std::vector<TraceEvent> Engine::run_loop_step(Tick now, CommandBus& bus) {
    const std::int64_t step = ++step_;
    std::vector<TraceEvent> events;
    kb_.prune_facts(now, settings_.horizon);

    last_report_ = analyze(kb_, model_, goals_, current_, settings_, now, outlook_);
    const auto& report = *last_report_;
    json analyze_payload = to_json(report);
    analyze_payload["step"] = step;
    analyze_payload["selection"] = to_json(current_.selection);
    if (!outlook_.empty()) {
        json projected = json::object();
        for (const auto& [var, v] : outlook_.project(report.context, current_.selection))
            projected[var] = v;
        analyze_payload["projected"] = std::move(projected);
    }
    events.push_back({now, EventKind::Analyze, std::move(analyze_payload)});

    PlanOutcome outcome;
    try {
        outcome = plan(report, model_, kb_.registry(), goals_, current_, settings_, outlook_, defaults_);
    } catch (const NoFeasibleConfiguration& e) {
        events.push_back({now,
                          EventKind::Plan,
                          {{"step", step},
                           {"status", "failed"},
                           {"error", "no_feasible_configuration"},
                           {"critical", true}}});
        return events;
    }

    if (const auto* nc = std::get_if<NoChange>(&outcome)) {
        events.push_back(
            {now, EventKind::NoChange, {{"step", step}, {"reason", nc->reason}, {"best_gain", nc->best_gain}}});
        return events;
    }

    const auto& p = std::get<AdaptationPlan>(outcome);
    json reason = json::array();
    for (const auto& v : p.reason)
        reason.push_back(to_json(v));
    events.push_back({now,
                      EventKind::Plan,
                      {{"step", step},
                       {"status", "ok"},
                       {"target", to_json(p.target.selection)},
                       {"bindings", p.target.bindings},
                       {"added", to_json(p.features.added)},
                       {"removed", to_json(p.features.removed)},
                       {"expected_gain", p.expected_gain},
                       {"target_effective", p.target_effective},
                       {"reason", std::move(reason)}}});

    auto result = execute(p, bus, current_, kb_, settings_, now, step, next_seq_);
    if (result.applied)
        ++adaptations_;
    events.insert(events.end(), std::make_move_iterator(result.events.begin()),
                  std::make_move_iterator(result.events.end()));
    return events;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const Selection& sel) { return json(std::vector<std::string>(sel.begin(), sel.end())); }

json to_json(const FConfig& cfg) {
    json dconfigs = json::object();
    for (const auto& [dev, c] : cfg.dconfigs)
        dconfigs[dev] = detail::from_dconfig(c);
    return {{"selection", to_json(cfg.selection)}, {"bindings", cfg.bindings}, {"dconfigs", std::move(dconfigs)}};
}

json to_json(const ViolationRecord& v) {
    return {{"kind", to_string(v.kind)}, {"subject", v.subject}, {"value", v.value}};
}

json to_json(const SatisfactionReport& r) {
    const auto& ec = r.context;
    json dims = json::object();
    for (const auto& [var, d] : ec.dimensions)
        dims[var] = to_string(d);
    json current = json::object();
    for (const auto& [var, cv] : ec.current)
        current[var] = {{"value", cv.value}, {"age", cv.age}, {"stale", cv.stale}};
    json predicted = json::object();
    for (const auto& [var, v] : ec.predicted)
        predicted[var] = v;
    json violations = json::array();
    for (const auto& v : r.violations)
        violations.push_back(to_json(v));
    return {{"mode", ec.mode},
            {"dimensions", std::move(dims)},
            {"current", std::move(current)},
            {"predicted", std::move(predicted)},
            {"feasible_devices", ec.feasible_devices},
            {"per_goal", r.per_goal},
            {"per_goal_predicted", r.per_goal_predicted},
            {"unknown_goals", r.unknown_goals},
            {"total_current", r.total_current},
            {"total_predicted", r.total_predicted},
            {"effective", r.effective},
            {"violations", std::move(violations)}};
}

} // namespace fleet
