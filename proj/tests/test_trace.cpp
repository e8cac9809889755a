#include "fleetdspl/errors.hpp"
#include "fleetdspl/trace.hpp"

#include <doctest.h>

using namespace fleet;
using nlohmann::json;

namespace {

std::vector<TraceEvent> good_step() {
    return {
        {0, EventKind::Reading, {{"variable", "m"}, {"value", 1.0}, {"source", "s"}}},
        {0, EventKind::Analyze, {{"step", 1}, {"violations", json::array({{{"kind", "goal"}}})}}},
        {0, EventKind::Plan, {{"step", 1}, {"status", "ok"}}},
        {0, EventKind::Command, {{"step", 1}, {"seq", 1}, {"device", "d1"}, {"action", "activate"}}},
        {0, EventKind::Ack, {{"step", 1}, {"seq", 1}, {"device", "d1"}}},
        {0, EventKind::Adapt, {{"step", 1}}},
        {5, EventKind::Analyze, {{"step", 2}, {"violations", json::array()}}},
        {5, EventKind::NoChange, {{"step", 2}, {"reason", "no_violation"}}},
    };
}

} // namespace

TEST_SUITE("trace") {

TEST_CASE("serialize") {
    TraceEvent e{7, EventKind::Reading, {{"variable", "soil"}, {"value", 41}, {"source", "s1"}}};
    CHECK(serialize(e) == R"({"t":7,"kind":"Reading","payload":{"source":"s1","value":41,"variable":"soil"}})");
    CHECK(parse_event(serialize(e)) == e);
}

TEST_CASE("parse_event rejects malformed lines") {
    CHECK_THROWS_AS(parse_event(R"({"kind":"Reading","t":1,"payload":{}})"), TraceFormatError);
    CHECK_THROWS_AS(parse_event(R"({"t":1,"kind":"Bogus","payload":{}})"), TraceFormatError);
    CHECK_THROWS_AS(parse_event(R"({"t":1.5,"kind":"Reading","payload":{}})"), TraceFormatError);
    CHECK_THROWS_AS(parse_event(R"({"t":1,"kind":"Reading","payload":[]})"), TraceFormatError);
    CHECK_THROWS_AS(parse_event(R"({"t":1,"kind":"Reading","payload":{},"x":0})"), TraceFormatError);
    CHECK_THROWS_AS(parse_event("{\"t\":1,"), TraceFormatError);
}

TEST_CASE("parse_trace") {
    std::string text;
    for (const auto& e : good_step())
        text += serialize(e) + "\n";
    CHECK(parse_trace(text) == good_step());
    CHECK(parse_trace("").empty());
    SUBCASE("truncated final line") {
        auto cut = text.substr(0, text.size() - 10);
        try {
            parse_trace(cut);
            FAIL("expected TraceFormatError");
        } catch (const TraceFormatError& e) {
            CHECK(std::string(e.what()).find("line 8") != std::string::npos);
        }
    }
}

TEST_CASE("verify_trace") {
    SUBCASE("well-formed") {
        auto r = verify_trace(good_step());
        CHECK(r.ok);
        CHECK(r.counts.at("Analyze") == 2);
    }
    SUBCASE("Adapt before Plan") {
        auto ev = good_step();
        std::swap(ev[2], ev[5]);
        auto r = verify_trace(ev);
        CHECK_FALSE(r.ok);
        CHECK(r.rule == "adapt-after-plan");
        CHECK(r.index == 2);
    }
    SUBCASE("ticks go backwards") {
        auto ev = good_step();
        ev[7].t = 4;
        auto r = verify_trace(ev);
        CHECK(r.rule == "monotone-ticks");
        CHECK(r.index == 7);
    }
    SUBCASE("plan without analyze") {
        auto ev = good_step();
        ev.erase(ev.begin() + 6);
        CHECK(verify_trace(ev).rule == "analyze-before-plan");
    }
    SUBCASE("ack without command") {
        auto ev = good_step();
        ev[4].payload["seq"] = 9;
        CHECK(verify_trace(ev).rule == "ack-after-command");
    }
    SUBCASE("command outside a plan") {
        auto ev = good_step();
        ev[2].payload["status"] = "failed";
        CHECK(verify_trace(ev).rule == "command-after-plan");
    }
    SUBCASE("adapt without violations") {
        auto ev = good_step();
        ev[1].payload["violations"] = json::array();
        auto r = verify_trace(ev);
        CHECK(r.rule == "necessity");
        CHECK(r.index == 5);
    }
}

} // TEST_SUITE
