#include "fleetdspl/trace.hpp"

#include "fleetdspl/errors.hpp"

#include <array>

namespace fleet {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 10> kKinds{{
    {EventKind::Reading, "Reading"},
    {EventKind::Fact, "Fact"},
    {EventKind::ModeSwitch, "ModeSwitch"},
    {EventKind::Analyze, "Analyze"},
    {EventKind::Plan, "Plan"},
    {EventKind::NoChange, "NoChange"},
    {EventKind::Command, "Command"},
    {EventKind::Ack, "Ack"},
    {EventKind::Adapt, "Adapt"},
    {EventKind::Warning, "Warning"},
}};

} // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kKinds)
        if (k == kind)
            return name;
    return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
    for (const auto& [k, n] : kKinds)
        if (n == name)
            return k;
    return std::nullopt;
}

std::string serialize(const TraceEvent& event) {
    std::string out = "{\"t\":";
    out += std::to_string(event.t);
    out += ",\"kind\":\"";
    out += to_string(event.kind);
    out += "\",\"payload\":";
    out += event.payload.dump();
    out += '}';
    return out;
}

TraceEvent parse_event(std::string_view line) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(line.begin(), line.end());
    } catch (const nlohmann::ordered_json::parse_error& e) {
        throw TraceFormatError(std::string("not a JSON object: ") + e.what());
    }
    if (!doc.is_object() || doc.size() != 3)
        throw TraceFormatError("event must be an object with exactly t, kind, payload");
    auto it = doc.begin();
    if (it.key() != "t" || (++it).key() != "kind" || (++it).key() != "payload")
        throw TraceFormatError("event keys must appear in the order t, kind, payload");
    const auto& t = doc["t"];
    const auto& kind = doc["kind"];
    const auto& payload = doc["payload"];
    if (!t.is_number_integer())
        throw TraceFormatError("'t' must be an integer");
    if (!kind.is_string())
        throw TraceFormatError("'kind' must be a string");
    auto parsed = parse_event_kind(kind.get<std::string>());
    if (!parsed)
        throw TraceFormatError("unknown event kind '" + kind.get<std::string>() + "'");
    if (!payload.is_object())
        throw TraceFormatError("'payload' must be an object");
    return {t.get<Tick>(), *parsed, json::parse(payload.dump())};
}

std::vector<TraceEvent> parse_trace(std::string_view text) {
    std::vector<TraceEvent> events;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        if (nl == std::string_view::npos)
            throw TraceFormatError("line " + std::to_string(line_no) + ": truncated (no line terminator)");
        auto line = text.substr(0, nl);
        text.remove_prefix(nl + 1);
        try {
            events.push_back(parse_event(line));
        } catch (const TraceFormatError& e) {
            throw TraceFormatError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

// ---------------------------------------------------------------------------
// Replay verification

namespace {

struct StepState {
    std::int64_t step = -1;
    bool analyzed = false;
    bool violations = false;
    bool planned = false; // a successful Plan in this step
    bool concluded = false; // Plan or NoChange seen
};

std::int64_t step_of(const TraceEvent& e) {
    auto it = e.payload.find("step");
    return it != e.payload.end() && it->is_number_integer() ? it->get<std::int64_t>() : -1;
}

} // namespace

ReplayReport verify_trace(const std::vector<TraceEvent>& events) {
    ReplayReport report;
    auto fail = [&](std::size_t i, std::string rule, std::string detail) {
        if (report.ok) {
            report.ok = false;
            report.rule = std::move(rule);
            report.index = i;
            report.detail = std::move(detail);
        }
    };

    std::map<std::int64_t, std::pair<Tick, std::string>> commands; // seq → (tick, device)
    StepState step;
    Tick last = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        ++report.counts[std::string(to_string(e.kind))];
        if (!report.ok)
            continue;
        if (i > 0 && e.t < last)
            fail(i, "monotone-ticks", "tick " + std::to_string(e.t) + " after " + std::to_string(last));
        last = e.t;

        switch (e.kind) {
        case EventKind::Analyze: {
            step = {};
            step.step = step_of(e);
            step.analyzed = true;
            auto v = e.payload.find("violations");
            step.violations = v != e.payload.end() && v->is_array() && !v->empty();
            break;
        }
        case EventKind::Plan:
        case EventKind::NoChange:
            if (!step.analyzed || step_of(e) != step.step || step.concluded)
                fail(i, "analyze-before-plan", std::string(to_string(e.kind)) + " without a preceding Analyze");
            step.concluded = true;
            step.planned = e.kind == EventKind::Plan && e.payload.value("status", "") == "ok";
            break;
        case EventKind::Command: {
            if (!step.planned || step_of(e) != step.step)
                fail(i, "command-after-plan", "Command outside a planned loop step");
            auto seq = e.payload.value("seq", std::int64_t{-1});
            commands[seq] = {e.t, e.payload.value("device", "")};
            break;
        }
        case EventKind::Ack: {
            auto seq = e.payload.value("seq", std::int64_t{-1});
            auto it = commands.find(seq);
            if (it == commands.end() || it->second.first > e.t ||
                it->second.second != e.payload.value("device", ""))
                fail(i, "ack-after-command", "Ack seq " + std::to_string(seq) + " has no prior Command");
            break;
        }
        case EventKind::Adapt:
            if (!step.planned || step_of(e) != step.step)
                fail(i, "adapt-after-plan", "Adapt without a Plan in the same loop step");
            else if (!step.violations)
                fail(i, "necessity", "Adapt in a loop step whose Analyze reported no violations");
            step.planned = false;
            break;
        default:
            break;
        }
    }
    return report;
}

} // namespace fleet
