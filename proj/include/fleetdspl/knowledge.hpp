#pragma once

#include "fleetdspl/device.hpp"
#include "fleetdspl/trace.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fleet {

using VariableName = std::string;

enum class Dimension { system, context, environment };

std::string_view to_string(Dimension dim);
std::optional<Dimension> parse_dimension(std::string_view name);

/// Variable → dimension assignment with named modes that override part of it.
/// Mode overrides may only reassign variables of the base assignment, so every mapped
/// variable keeps exactly one dimension under every mode.
class DimensionMap {
public:
    static constexpr std::string_view kBaseMode = "base";

    DimensionMap() = default;
    /// Throws RangeError when an override names a variable missing from `base`
    /// or a mode is called "base".
    DimensionMap(std::map<VariableName, Dimension> base,
                 std::map<std::string, std::map<VariableName, Dimension>> modes);

    std::optional<Dimension> dimension_of(const VariableName& var) const;
    /// Effective assignment under the active mode.
    std::map<VariableName, Dimension> assignment() const;

    const std::string& active_mode() const noexcept { return active_; }
    bool has_mode(const std::string& mode) const;
    std::vector<std::string> mode_names() const;
    /// Throws UnknownMode.
    void activate(const std::string& mode);

private:
    std::map<VariableName, Dimension> base_;
    std::map<std::string, std::map<VariableName, Dimension>> modes_;
    std::string active_{kBaseMode};
};

struct Reading {
    VariableName variable;
    double value = 0.0;
    Tick tick = 0;
    DeviceId source;
};

/// A forecast: `variable` is expected to be `predicted_value` at `valid_at`.
struct Fact {
    VariableName variable;
    double predicted_value = 0.0;
    Tick valid_at = 0;
    Tick issued_at = 0;
};

struct CurrentValue {
    double value = 0.0;
    Tick age = 0;
    bool stale = false;

    bool operator==(const CurrentValue&) const = default;
};

/// Immutable view handed to the analyzer.
struct EvaluationContext {
    Tick now = 0;
    Tick horizon = 0;
    std::string mode;
    std::map<VariableName, Dimension> dimensions;
    std::map<VariableName, CurrentValue> current; // context-dimension variables only
    std::map<VariableName, double> predicted;
    std::set<DeviceId> feasible_devices;

    bool operator==(const EvaluationContext&) const = default;
};

enum class IngestStatus { accepted, unmapped, stale_out_of_order };

struct IngestOutcome {
    IngestStatus status = IngestStatus::accepted;
    TraceEvent event; // Reading, or Warning when dropped
};

inline constexpr double kDefaultBatteryFloor = 10.0;

/// The shared knowledge of the adaptation loop. Single writer; snapshots are values.
class KnowledgeBase {
public:
    explicit KnowledgeBase(DimensionMap dims = {}, double battery_floor = kDefaultBatteryFloor);

    /// Insert or replace (last write wins). Throws RangeError on an invalid descriptor.
    void register_device(DeviceDescriptor descriptor);
    /// Returns false when the device is unknown.
    bool set_reachable(const DeviceId& id, bool reachable);
    const DeviceDescriptor* device(const DeviceId& id) const;
    /// All descriptors, ascending by id.
    std::vector<DeviceDescriptor> registry() const;
    /// Reachable devices with battery above the floor.
    std::set<DeviceId> feasible_devices() const;

    IngestOutcome ingest_reading(const Reading& r);
    /// Throws InvalidFact when valid_at < issued_at.
    TraceEvent ingest_fact(const Fact& f);
    /// Throws UnknownMode. Emits a ModeSwitch event even when the mode is unchanged.
    TraceEvent set_mode(const std::string& mode, Tick now);

    EvaluationContext snapshot(Tick now, Tick horizon, Tick staleness_window) const;
    /// Drops facts whose valid_at + horizon lies before `now`.
    void prune_facts(Tick now, Tick horizon);

    const DimensionMap& dimensions() const noexcept { return dims_; }
    std::optional<Reading> latest(const VariableName& var) const;
    bool is_unmapped(const VariableName& var) const { return unmapped_.count(var) != 0; }
    const std::vector<Fact>& facts() const noexcept { return facts_; }
    double battery_floor() const noexcept { return battery_floor_; }

private:
    DimensionMap dims_;
    double battery_floor_;
    std::map<DeviceId, DeviceDescriptor> devices_;
    std::map<VariableName, Reading> latest_;
    std::map<std::pair<VariableName, DeviceId>, Tick> last_tick_;
    std::set<VariableName> unmapped_;
    std::vector<Fact> facts_;
};

} // namespace fleet
