#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fleet {

/// Virtual time. One tick per simulation step; no wall clock anywhere.
using Tick = std::int64_t;

enum class EventKind { Reading, Fact, ModeSwitch, Analyze, Plan, NoChange, Command, Ack, Adapt, Warning };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

/// One append-only trace record.
struct TraceEvent {
    Tick t = 0;
    EventKind kind = EventKind::Warning;
    nlohmann::json payload = nlohmann::json::object();

    bool operator==(const TraceEvent&) const = default;
};

/// `{"t":…,"kind":…,"payload":…}` on one line, no trailing newline. Payload keys are
/// emitted in sorted order so the bytes depend only on the event.
std::string serialize(const TraceEvent& event);

/// Inverse of serialize. Throws TraceFormatError on anything else, including a
/// different top-level key order.
TraceEvent parse_event(std::string_view line);

/// Reads a whole trace file body. Throws TraceFormatError naming the 1-based line.
std::vector<TraceEvent> parse_trace(std::string_view text);

struct ReplayReport {
    bool ok = true;
    std::string rule;       // first violated invariant, empty when ok
    std::size_t index = 0;  // 0-based event index of the violation
    std::string detail;
    std::map<std::string, std::size_t> counts; // events per kind
};

/// Checks monotone ticks, loop-step ordering, Ack-after-Command, Adapt-after-Plan and
/// necessity (every Adapt's loop step opened with a non-empty-violations Analyze).
ReplayReport verify_trace(const std::vector<TraceEvent>& events);

} // namespace fleet
