#pragma once

#include "fleetdspl/adaptation.hpp"
#include "fleetdspl/knowledge.hpp"
#include "fleetdspl/trace.hpp"
#include "fleetdspl/variability.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fleet {

/// Linear world model for one moisture-like variable; every other world variable stays
/// constant unless overridden from the timeline.
struct Dynamics {
    VariableName variable = "soil_moisture";
    double dry_rate = 0.0;
    double irrigation_gain = 0.0;
    double rain_gain = 0.0;
    double noise = 0.0; // half-width of uniform sensor noise, 0 disables the rng
    std::map<VariableName, double> initial;
};

struct TimelineEvent {
    enum class Kind { fact, mode, rain, device_fail, reading_override };

    Tick t = 0;
    Kind kind = Kind::fact;
    VariableName variable; // fact, reading_override
    double value = 0.0;    // fact value, rain mm, override value
    Tick valid_at = 0;     // fact
    std::string mode;      // mode
    DeviceId device;       // device_fail
};

struct Scenario {
    std::string name;
    FeatureModel model;
    std::vector<DeviceDescriptor> devices;
    DimensionMap dimensions; // active mode already applied
    Selection initial_selection;
    std::vector<Goal> goals;
    LoopSettings loop;
    Dynamics dynamics;
    std::vector<TimelineEvent> timeline; // stable-sorted by t
    Outlook outlook;
    FeatureDefaults defaults;
};

/// Parses a scenario document. A string "model" is a path resolved against `base_dir`.
/// Throws ScenarioError naming the key, or InitialSelectionInvalid.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});

struct BusMessage {
    std::string topic; // sensor/<id> | cmd/<id> | ack/<id>
    nlohmann::json payload;
    Tick tick = 0;
};

/// In-process pub/sub stand-in for the device network: FIFO per topic, delivery in the
/// tick of publication.
class Bus {
public:
    void publish(BusMessage msg);
    /// Removes and returns every queued message on `topic`, oldest first.
    std::vector<BusMessage> take(const std::string& topic);
    /// Topics with queued messages starting with `prefix`, sorted.
    std::vector<std::string> topics(std::string_view prefix) const;
    std::size_t pending() const;

private:
    std::map<std::string, std::deque<BusMessage>> queues_;
};

struct SimDevice {
    DeviceDescriptor descriptor;
    bool failed = false;
    std::set<FeatureName> active;
    DConfig config;
};

/// Deterministic lock-step simulation of one fleet together with its adaptation engine.
class World : private CommandBus {
public:
    World(Scenario scenario, std::uint64_t seed);

    /// One tick: timeline, dynamics, sensing, ingestion, loop step (every `period`
    /// ticks), actuation for the next tick. Returns the events of this tick.
    std::vector<TraceEvent> step();

    Tick clock() const noexcept { return clock_; }
    double value(const VariableName& var) const;
    const std::map<VariableName, double>& values() const noexcept { return values_; }
    const std::map<DeviceId, SimDevice>& devices() const noexcept { return devices_; }
    /// Sum of the `rate` of every live, active watering device.
    double watering_rate() const;
    /// True when every device bound by the engine's FConfig is alive.
    bool fconfig_derivable() const;

    Engine& engine() noexcept { return engine_; }
    const Engine& engine() const noexcept { return engine_; }
    const Scenario& scenario() const noexcept { return scenario_; }

private:
    std::optional<Tick> dispatch(const Command& command, std::int64_t seq, Tick now) override;
    void deliver_commands(Tick now);
    void apply_timeline(std::vector<TraceEvent>& out);
    void advance_dynamics();
    void sense(std::vector<TraceEvent>& out);

    Scenario scenario_;
    Engine engine_;
    Bus bus_;
    std::map<DeviceId, SimDevice> devices_;
    std::map<VariableName, double> values_;
    std::vector<Command> pending_;
    std::size_t next_timeline_ = 0;
    double rain_now_ = 0.0;
    Tick clock_ = 0;
    std::mt19937_64 rng_;
};

World load_scenario(std::string_view text, std::uint64_t seed, const std::filesystem::path& base_dir = {});

/// Steps until clock() == until, writing one serialized event per line to `sink`.
/// Throws PreconditionError when until <= 0.
std::vector<TraceEvent> run(World& world, Tick until, std::ostream* sink = nullptr);

} // namespace fleet
