#include "fleetdspl/adaptation.hpp"
#include "fleetdspl/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace fleet;

namespace {

const char* kPumpModel = R"({
  "name": "pump",
  "root": {"name": "Root", "groups": [{"kind": "optional", "children": [{"name": "Pump"}]}]},
  "capabilities": {"Pump": ["water.pump"]}
})";

Goal above(std::string id, std::string var, double threshold, double ramp, double weight = 1.0) {
    Goal g;
    g.id = std::move(id);
    g.kind = GoalKind::above;
    g.variable = std::move(var);
    g.threshold = threshold;
    g.ramp = ramp;
    g.weight = weight;
    return g;
}

Goal feature_off(std::string id, std::string feature, double weight = 1.0) {
    Goal g;
    g.id = std::move(id);
    g.kind = GoalKind::feature_off;
    g.feature = std::move(feature);
    g.weight = weight;
    return g;
}

KnowledgeBase moisture_kb(double moisture) {
    KnowledgeBase kb(DimensionMap({{"moisture", Dimension::context}}, {}));
    kb.register_device({"p1", {"water.pump"}});
    kb.ingest_reading({"moisture", moisture, 0, "s"});
    return kb;
}

EvaluationContext context_with(double v) {
    EvaluationContext ec;
    ec.current["m"] = {v, 0, false};
    ec.predicted["m"] = v;
    return ec;
}

struct FakeBus : CommandBus {
    std::vector<Command> seen;
    std::set<DeviceId> silent;
    std::optional<Tick> dispatch(const Command& c, std::int64_t, Tick now) override {
        seen.push_back(c);
        if (silent.count(c.device))
            return std::nullopt;
        return now;
    }
};

std::vector<EventKind> kinds(const std::vector<TraceEvent>& events) {
    std::vector<EventKind> out;
    for (const auto& e : events)
        out.push_back(e.kind);
    return out;
}

} // namespace

TEST_SUITE("adaptation") {

TEST_CASE("evaluate_goal") {
    const auto g = above("g", "m", 30, 10);
    CHECK(evaluate_goal(g, context_with(30), View::current, {}).satisfaction == 1.0);
    CHECK(evaluate_goal(g, context_with(25), View::current, {}).satisfaction == doctest::Approx(0.5));
    CHECK(evaluate_goal(g, context_with(10), View::current, {}).satisfaction == 0.0);
    CHECK(evaluate_goal(feature_off("f", "Sprinkler"), {}, View::current, {"Sprinkler"}).satisfaction == 0.0);
    CHECK(evaluate_goal(feature_off("f", "Sprinkler"), {}, View::predicted, {"Tap"}).satisfaction == 1.0);

    SUBCASE("below and band") {
        Goal b = g;
        b.kind = GoalKind::below;
        CHECK(evaluate_goal(b, context_with(33), View::current, {}).satisfaction == doctest::Approx(0.7));
        Goal band = g;
        band.kind = GoalKind::band;
        band.lo = 10;
        band.hi = 20;
        CHECK(evaluate_goal(band, context_with(15), View::current, {}).satisfaction == 1.0);
        CHECK(evaluate_goal(band, context_with(8), View::current, {}).satisfaction == doctest::Approx(0.8));
        CHECK(evaluate_goal(band, context_with(24), View::current, {}).satisfaction == doctest::Approx(0.6));
    }
    SUBCASE("unknown and stale") {
        auto unknown = evaluate_goal(g, {}, View::current, {});
        CHECK(unknown.satisfaction == 0.5);
        CHECK(unknown.unknown);
        auto ec = context_with(50);
        ec.current["m"].stale = true;
        auto stale = evaluate_goal(g, ec, View::current, {});
        CHECK(stale.satisfaction == 0.0);
        CHECK(stale.stale);
        CHECK(evaluate_goal(g, ec, View::predicted, {}).satisfaction == 1.0);
    }
    SUBCASE("outlook shifts only the predicted view") {
        Outlook o;
        o.effects.push_back({"Pump", "m", 20});
        auto ec = context_with(15);
        CHECK(evaluate_goal(g, ec, View::predicted, {"Pump"}, o).satisfaction == 1.0);
        CHECK(evaluate_goal(g, ec, View::predicted, {}, o).satisfaction == 0.0);
        CHECK(evaluate_goal(g, ec, View::current, {"Pump"}, o).satisfaction == 0.0);
    }
    SUBCASE("validation") {
        Goal bad = g;
        bad.ramp = 0;
        CHECK_THROWS_AS(bad.validate(), RangeError);
        bad = g;
        bad.kind = GoalKind::band;
        bad.lo = 5;
        bad.hi = 1;
        CHECK_THROWS_AS(bad.validate(), RangeError);
        CHECK_THROWS_AS(feature_off("x", "").validate(), RangeError);
    }
}

TEST_CASE("score") {
    SUBCASE("no goals") {
        auto s = score({}, {}, {}, 0.5);
        CHECK(s.current == 1.0);
        CHECK(s.predicted == 1.0);
        CHECK(s.effective == 1.0);
    }
    SUBCASE("weighted mean") {
        // Satisfactions (1, 0) with weights (1, 3) in both views.
        std::vector<Goal> goals{above("a", "m", 30, 10, 1), above("b", "m", 100, 10, 3)};
        auto s = score({}, context_with(40), goals, 0.5);
        CHECK(s.current == doctest::Approx(0.25));
        CHECK(s.predicted == doctest::Approx(0.25));
        CHECK(s.effective == doctest::Approx(0.25));
    }
    SUBCASE("alpha = 1 is the current total exactly") {
        std::vector<Goal> goals{above("a", "m", 30, 10)};
        auto ec = context_with(27);
        ec.predicted["m"] = 5;
        auto s = score({}, ec, goals, 1.0);
        CHECK(s.effective == s.current);
        auto p = score({}, ec, goals, 0.0);
        CHECK(p.effective == p.predicted);
    }
    SUBCASE("zero total weight") {
        std::vector<Goal> goals{above("a", "m", 30, 10, 0)};
        CHECK(score({}, context_with(0), goals, 0.5).effective == 1.0);
    }
}

TEST_CASE("analyze") {
    auto model = parse_model(kPumpModel);
    LoopSettings settings;
    FConfig current{{"Root"}, {}, {}};
    SUBCASE("all goals satisfied") {
        auto kb = moisture_kb(40);
        auto r = analyze(kb, model, {above("g", "moisture", 30, 10)}, current, settings, 0);
        CHECK(r.violations.empty());
        CHECK(r.effective == 1.0);
    }
    SUBCASE("threshold") {
        auto kb = moisture_kb(25.5); // 1 - 4.5/10 = 0.55
        auto r = analyze(kb, model, {above("g", "moisture", 30, 10)}, current, settings, 0);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].kind == ViolationRecord::Kind::goal);
        CHECK(r.violations[0].subject == "g");
        CHECK(r.violations[0].value == doctest::Approx(0.55));
        settings.violation_threshold = 0.5;
        CHECK(analyze(kb, model, {above("g", "moisture", 30, 10)}, current, settings, 0).violations.empty());
    }
    SUBCASE("unreachable bound device") {
        auto kb = moisture_kb(40);
        kb.set_reachable("p1", false);
        FConfig pumping{{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        auto r = analyze(kb, model, {above("g", "moisture", 30, 10)}, pumping, settings, 0);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0] == ViolationRecord{ViolationRecord::Kind::infeasibility, "p1", 0.0});
    }
    SUBCASE("stale sensor") {
        auto kb = moisture_kb(40);
        auto r = analyze(kb, model, {above("g", "moisture", 30, 10)}, current, settings, 11);
        CHECK(r.per_goal.at("g") == 0.0);
        REQUIRE(r.violations.size() == 2);
        CHECK(r.violations[1] == ViolationRecord{ViolationRecord::Kind::staleness, "moisture", 11});
    }
}

TEST_CASE("plan") {
    auto model = parse_model(kPumpModel);
    LoopSettings settings;
    FConfig current{{"Root"}, {}, {}};
    Outlook outlook;
    outlook.effects.push_back({"Pump", "moisture", 20});
    const std::vector<Goal> goals{above("g", "moisture", 30, 10)};

    SUBCASE("no violation") {
        auto kb = moisture_kb(40);
        auto r = analyze(kb, model, goals, current, settings, 0, outlook);
        auto out = plan(r, model, kb.registry(), goals, current, settings, outlook);
        REQUIRE(std::holds_alternative<NoChange>(out));
        CHECK(std::get<NoChange>(out).reason == "no_violation");
    }
    SUBCASE("gain below hysteresis") {
        Outlook weak;
        weak.effects.push_back({"Pump", "moisture", 0.8}); // predicted 20.8 → 0.08, halved by alpha
        auto kb = moisture_kb(20);
        auto r = analyze(kb, model, goals, current, settings, 0, weak);
        auto out = plan(r, model, kb.registry(), goals, current, settings, weak);
        REQUIRE(std::holds_alternative<NoChange>(out));
        CHECK(std::get<NoChange>(out).reason == "below_hysteresis");
        CHECK(std::get<NoChange>(out).best_gain == doctest::Approx(0.04));
    }
    SUBCASE("better configuration") {
        auto kb = moisture_kb(20);
        auto r = analyze(kb, model, goals, current, settings, 0, outlook);
        auto out = plan(r, model, kb.registry(), goals, current, settings, outlook);
        REQUIRE(std::holds_alternative<AdaptationPlan>(out));
        const auto& p = std::get<AdaptationPlan>(out);
        CHECK(p.target.selection == Selection{"Root", "Pump"});
        CHECK(p.target.bindings.at("Pump") == "p1");
        CHECK(p.expected_gain == doctest::Approx(0.5));
        CHECK(p.features.added == Selection{"Pump"});
        REQUIRE(p.commands.size() == 1);
        CHECK(p.commands[0].action == Command::Action::activate);

        auto o = oracle::exhaustive_plan(model, kb.registry(), r.context, goals, current, settings, outlook);
        CHECK(o.emits_plan);
        CHECK(o.selection == p.target.selection);
        CHECK(o.effective == doctest::Approx(p.target_effective));
    }
    SUBCASE("already optimal") {
        auto kb = moisture_kb(20);
        FConfig pumping{{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        auto r = analyze(kb, model, goals, pumping, settings, 0, outlook);
        REQUIRE_FALSE(r.violations.empty());
        auto out = plan(r, model, kb.registry(), goals, pumping, settings, outlook);
        REQUIRE(std::holds_alternative<NoChange>(out));
        CHECK(std::get<NoChange>(out).reason == "already_optimal");
    }
    SUBCASE("infeasibility forces a plan even without gain") {
        auto kb = moisture_kb(40);
        kb.register_device({"p2", {"water.pump"}});
        kb.set_reachable("p1", false);
        FConfig pumping{{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        const std::vector<Goal> keep{above("g", "moisture", 30, 10), feature_off("x", "Root", 0)};
        auto r = analyze(kb, model, keep, pumping, settings, 0);
        auto out = plan(r, model, kb.registry(), keep, pumping, settings);
        REQUIRE(std::holds_alternative<AdaptationPlan>(out));
        const auto& p = std::get<AdaptationPlan>(out);
        // Scores tie; the fewest changes keeps Pump, rebound to p2.
        CHECK(p.target.bindings == std::map<FeatureName, DeviceId>{{"Pump", "p2"}});
        REQUIRE(p.commands.size() == 2);
        CHECK(p.commands[0] == Command{Command::Action::deactivate, "p1", "Pump", {}});
        CHECK(p.commands[1].action == Command::Action::activate);
        CHECK(p.commands[1].device == "p2");
    }
    SUBCASE("no feasible configuration") {
        auto strict = parse_model(R"({"name": "s",
          "root": {"name": "Root", "groups": [{"kind": "mandatory", "children": [{"name": "Pump"}]}]},
          "capabilities": {"Pump": ["water.pump"]}})");
        auto kb = moisture_kb(10);
        kb.set_reachable("p1", false);
        FConfig cur{{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        auto r = analyze(kb, strict, goals, cur, settings, 0);
        CHECK_THROWS_AS(plan(r, strict, kb.registry(), goals, cur, settings), NoFeasibleConfiguration);
    }
}

TEST_CASE("property: planner agrees with the exhaustive oracle") {
    std::mt19937 rng(2024);
    int plans = 0;
    for (int trial = 0; trial < 30; ++trial) {
        auto model = oracle::random_model(rng, 3 + rng() % 6, 2);
        KnowledgeBase kb(DimensionMap({{"m", Dimension::context}}, {}));
        const char* tags[] = {"cap.a", "cap.b", "cap.c"};
        for (int d = 0; d < 3; ++d)
            if (rng() % 3)
                kb.register_device({"d" + std::to_string(d), {tags[rng() % 3]}});
        kb.ingest_reading({"m", double(rng() % 40), 0, "s"});
        Outlook outlook;
        for (const auto& f : model.features())
            if (rng() % 2)
                outlook.effects.push_back({f, "m", double(int(rng() % 21) - 10)});
        std::vector<Goal> goals{above("g", "m", 25, 10, 2), feature_off("off", model.features().back())};
        LoopSettings settings;
        settings.violation_threshold = 1.0;

        auto products = enumerate_configurations(model).selections;
        FConfig current;
        bool have_current = false;
        for (const auto& sel : products) {
            try {
                current = derive_fconfig(model, sel, kb.registry());
                have_current = true;
                break;
            } catch (const UnsatisfiedCapability&) {
            }
        }
        if (!have_current)
            continue;

        auto report = analyze(kb, model, goals, current, settings, 0, outlook);
        auto o = oracle::exhaustive_plan(model, kb.registry(), report.context, goals, current, settings, outlook);
        if (report.violations.empty())
            continue;
        auto out = plan(report, model, kb.registry(), goals, current, settings, outlook);
        CHECK(std::holds_alternative<AdaptationPlan>(out) == o.emits_plan);
        if (auto* p = std::get_if<AdaptationPlan>(&out)) {
            ++plans;
            CHECK(p->target.selection == o.selection);
            CHECK(p->target.bindings == o.bindings);
            CHECK(p->target_effective == doctest::Approx(o.effective));
        }
    }
    CHECK(plans > 0);
}

TEST_CASE("plan_commands") {
    FConfig a{{"R", "X", "Y"}, {{"X", "d1"}, {"Y", "d2"}}, {{"d1", {}}, {"d2", {{{"rate", 1.0}}}}}};
    FConfig b{{"R", "Y", "Z"}, {{"Y", "d2"}, {"Z", "d3"}}, {{"d2", {{{"rate", 2.0}}}}, {"d3", {}}}};
    auto cmds = plan_commands(a, b);
    REQUIRE(cmds.size() == 3);
    CHECK(cmds[0] == Command{Command::Action::deactivate, "d1", "X", {}});
    CHECK(cmds[1] == Command{Command::Action::activate, "d3", "Z", {}});
    CHECK(cmds[2] == Command{Command::Action::configure, "d2", "", {{{"rate", 2.0}}}});
    CHECK(plan_commands(a, a).empty());
}

TEST_CASE("execute") {
    auto kb = moisture_kb(20);
    LoopSettings settings;
    FakeBus bus;
    std::int64_t seq = 1;
    FConfig current{{"Root"}, {}, {}};

    SUBCASE("empty delta") {
        AdaptationPlan p;
        p.target = current;
        auto r = execute(p, bus, current, kb, settings, 5, 1, seq);
        CHECK(r.applied);
        CHECK(bus.seen.empty());
        CHECK(kinds(r.events) == std::vector<EventKind>{EventKind::Adapt});
    }
    SUBCASE("one activation") {
        AdaptationPlan p;
        p.target = {{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        p.commands = plan_commands(current, p.target);
        auto r = execute(p, bus, current, kb, settings, 5, 1, seq);
        CHECK(r.applied);
        CHECK(current == p.target);
        CHECK(kinds(r.events) == std::vector<EventKind>{EventKind::Command, EventKind::Ack, EventKind::Adapt});
        CHECK(r.events[0].payload["seq"] == 1);
        CHECK(r.events[1].payload["seq"] == 1);
        CHECK(seq == 2);
    }
    SUBCASE("missing ack") {
        bus.silent.insert("p1");
        AdaptationPlan p;
        p.target = {{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        p.commands = plan_commands(current, p.target);
        auto before = current;
        auto r = execute(p, bus, current, kb, settings, 5, 1, seq);
        CHECK_FALSE(r.applied);
        CHECK(r.aborted_device == "p1");
        CHECK(current == before);
        CHECK_FALSE(kb.device("p1")->reachable);
        CHECK(kinds(r.events) == std::vector<EventKind>{EventKind::Command, EventKind::Warning});
    }
    SUBCASE("late ack counts as missing") {
        struct SlowBus : CommandBus {
            std::optional<Tick> dispatch(const Command&, std::int64_t, Tick now) override { return now + 3; }
        } slow;
        AdaptationPlan p;
        p.target = {{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        p.commands = plan_commands(current, p.target);
        CHECK_FALSE(execute(p, slow, current, kb, settings, 5, 1, seq).applied);
    }
    SUBCASE("deactivation of an unreachable device is skipped") {
        kb.set_reachable("p1", false);
        current = {{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}};
        AdaptationPlan p;
        p.target = {{"Root"}, {}, {}};
        p.commands = plan_commands(current, p.target);
        auto r = execute(p, bus, current, kb, settings, 5, 1, seq);
        CHECK(r.applied);
        CHECK(bus.seen.empty());
        CHECK(kinds(r.events) == std::vector<EventKind>{EventKind::Warning, EventKind::Adapt});
    }
}

TEST_CASE("Engine::run_loop_step") {
    auto model = parse_model(kPumpModel);
    Outlook outlook;
    outlook.effects.push_back({"Pump", "moisture", 20});
    const std::vector<Goal> goals{above("g", "moisture", 30, 10)};
    FakeBus bus;

    SUBCASE("healthy steady state") {
        Engine e(model, goals, {}, moisture_kb(40), {{"Root"}, {}, {}}, outlook);
        auto ev = e.run_loop_step(0, bus);
        CHECK(kinds(ev) == std::vector<EventKind>{EventKind::Analyze, EventKind::NoChange});
        CHECK(ev[0].payload["step"] == 1);
        CHECK(ev[1].payload["reason"] == "no_violation");
    }
    SUBCASE("violation with a better configuration") {
        Engine e(model, goals, {}, moisture_kb(20), {{"Root"}, {}, {}}, outlook);
        auto ev = e.run_loop_step(0, bus);
        CHECK(kinds(ev) == std::vector<EventKind>{EventKind::Analyze, EventKind::Plan, EventKind::Command,
                                                  EventKind::Ack, EventKind::Adapt});
        CHECK(e.current().selection == Selection{"Root", "Pump"});
        CHECK(e.adaptations() == 1);
        for (const auto& x : ev)
            CHECK(x.payload["step"] == 1);
    }
    SUBCASE("no feasible configuration") {
        auto strict = parse_model(R"({"name": "s",
          "root": {"name": "Root", "groups": [{"kind": "mandatory", "children": [{"name": "Pump"}]}]},
          "capabilities": {"Pump": ["water.pump"]}})");
        auto kb = moisture_kb(10);
        kb.set_reachable("p1", false);
        Engine e(strict, goals, {}, std::move(kb), {{"Root", "Pump"}, {{"Pump", "p1"}}, {{"p1", {}}}});
        auto ev = e.run_loop_step(0, bus);
        CHECK(kinds(ev) == std::vector<EventKind>{EventKind::Analyze, EventKind::Plan});
        CHECK(ev[1].payload["status"] == "failed");
        CHECK(ev[1].payload["critical"] == true);
    }
    SUBCASE("invalid settings") {
        LoopSettings bad;
        bad.alpha = 2;
        CHECK_THROWS_AS(Engine(model, goals, bad, moisture_kb(1), {{"Root"}, {}, {}}), RangeError);
    }
}

} // TEST_SUITE
