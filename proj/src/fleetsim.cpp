#include "fleetdspl/fleetsim.hpp"

#include "fleetdspl/errors.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <ostream>

namespace fleet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Bus

void Bus::publish(BusMessage msg) {
    auto topic = msg.topic;
    queues_[topic].push_back(std::move(msg));
}

std::vector<BusMessage> Bus::take(const std::string& topic) {
    std::vector<BusMessage> out;
    auto it = queues_.find(topic);
    if (it == queues_.end())
        return out;
    out.assign(std::make_move_iterator(it->second.begin()), std::make_move_iterator(it->second.end()));
    queues_.erase(it);
    return out;
}

std::vector<std::string> Bus::topics(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& [topic, q] : queues_)
        if (!q.empty() && topic.starts_with(prefix))
            out.push_back(topic);
    return out;
}

std::size_t Bus::pending() const {
    std::size_t n = 0;
    for (const auto& [_, q] : queues_)
        n += q.size();
    return n;
}

// ---------------------------------------------------------------------------
// World

namespace {

Engine make_engine(const Scenario& sc) {
    KnowledgeBase kb(sc.dimensions, sc.loop.battery_floor);
    for (const auto& d : sc.devices)
        kb.register_device(d);
    FConfig initial = derive_fconfig(sc.model, sc.initial_selection, sc.devices, sc.defaults);
    return Engine(sc.model, sc.goals, sc.loop, std::move(kb), std::move(initial), sc.outlook, sc.defaults);
}

bool waters(const DeviceDescriptor& d) {
    return std::any_of(d.capabilities.begin(), d.capabilities.end(),
                       [](const std::string& tag) { return tag.starts_with("water."); });
}

const std::string* sensed_variable(const SimDevice& dev) {
    auto it = dev.config.params.find("variable");
    if (it == dev.config.params.end())
        return nullptr;
    return std::get_if<std::string>(&it->second);
}

} // namespace

World::World(Scenario scenario, std::uint64_t seed)
    : scenario_(std::move(scenario)), engine_(make_engine(scenario_)), rng_(seed) {
    for (const auto& d : scenario_.devices)
        devices_[d.id] = SimDevice{d, !d.reachable, {}, d.params};
    for (const auto& [feature, device] : engine_.current().bindings)
        devices_.at(device).active.insert(feature);
    for (const auto& [device, cfg] : engine_.current().dconfigs)
        devices_.at(device).config = cfg;
    values_ = scenario_.dynamics.initial;
}

double World::value(const VariableName& var) const {
    auto it = values_.find(var);
    return it == values_.end() ? 0.0 : it->second;
}

double World::watering_rate() const {
    double rate = 0.0;
    for (const auto& [id, dev] : devices_)
        if (!dev.failed && !dev.active.empty() && waters(dev.descriptor))
            rate += dev.config.number("rate", 1.0);
    return rate;
}

bool World::fconfig_derivable() const {
    for (const auto& dev : engine_.current().bound_devices())
        if (devices_.at(dev).failed)
            return false;
    return true;
}

void World::apply_timeline(std::vector<TraceEvent>& out) {
    const auto& timeline = scenario_.timeline;
    while (next_timeline_ < timeline.size() && timeline[next_timeline_].t <= clock_) {
        const auto& e = timeline[next_timeline_++];
        if (e.t < clock_)
            continue;
        switch (e.kind) {
        case TimelineEvent::Kind::fact:
            try {
                out.push_back(engine_.kb().ingest_fact({e.variable, e.value, e.valid_at, clock_}));
            } catch (const InvalidFact& err) {
                out.push_back({clock_, EventKind::Warning, {{"reason", "invalid_fact"}, {"detail", err.what()}}});
            }
            break;
        case TimelineEvent::Kind::mode:
            out.push_back(engine_.kb().set_mode(e.mode, clock_));
            break;
        case TimelineEvent::Kind::rain:
            rain_now_ += e.value;
            break;
        case TimelineEvent::Kind::device_fail:
            devices_.at(e.device).failed = true;
            out.push_back({clock_, EventKind::Warning, {{"reason", "device_fail"}, {"device", e.device}}});
            break;
        case TimelineEvent::Kind::reading_override:
            values_[e.variable] = e.value;
            break;
        }
    }
}

void World::advance_dynamics() {
    const auto& d = scenario_.dynamics;
    auto it = values_.find(d.variable);
    if (it == values_.end())
        return;
    const double next = it->second - d.dry_rate + d.irrigation_gain * watering_rate() + d.rain_gain * rain_now_;
    it->second = std::clamp(next, 0.0, 100.0);
}

void World::sense(std::vector<TraceEvent>& out) {
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    for (const auto& [id, dev] : devices_) {
        if (dev.failed)
            continue;
        json payload{{"battery", dev.descriptor.battery}};
        if (const auto* var = sensed_variable(dev); var && values_.count(*var)) {
            double v = values_.at(*var);
            if (scenario_.dynamics.noise > 0.0)
                v += scenario_.dynamics.noise * noise(rng_);
            payload["readings"] = {{*var, v}};
        }
        bus_.publish({"sensor/" + id, std::move(payload), clock_});
    }

    auto& kb = engine_.kb();
    std::set<DeviceId> heard;
    for (const auto& topic : bus_.topics("sensor/")) {
        const DeviceId id = topic.substr(7);
        for (auto& msg : bus_.take(topic)) {
            heard.insert(id);
            if (const auto* known = kb.device(id)) {
                DeviceDescriptor d = *known;
                d.battery = msg.payload.value("battery", d.battery);
                d.reachable = true;
                kb.register_device(std::move(d));
            }
            if (auto r = msg.payload.find("readings"); r != msg.payload.end())
                for (const auto& [var, v] : r->items()) {
                    auto outcome = kb.ingest_reading({var, v.get<double>(), msg.tick, id});
                    out.push_back(std::move(outcome.event));
                }
        }
    }
    for (const auto& d : kb.registry())
        if (d.reachable && !heard.count(d.id)) {
            kb.set_reachable(d.id, false);
            out.push_back({clock_, EventKind::Warning, {{"reason", "device_unreachable"}, {"device", d.id}}});
        }
}

std::optional<Tick> World::dispatch(const Command& command, std::int64_t seq, Tick now) {
    json payload{{"seq", seq}, {"action", to_string(command.action)}, {"feature", command.feature}};
    payload["params"] = detail::from_dconfig(command.params);
    bus_.publish({"cmd/" + command.device, std::move(payload), now});
    pending_.push_back(command);
    deliver_commands(now);

    std::optional<Tick> acked;
    for (auto& msg : bus_.take("ack/" + command.device))
        if (msg.payload.value("seq", std::int64_t{-1}) == seq)
            acked = msg.tick;
    return acked;
}

void World::deliver_commands(Tick now) {
    for (const auto& topic : bus_.topics("cmd/")) {
        const DeviceId id = topic.substr(4);
        for (auto& msg : bus_.take(topic)) {
            auto it = devices_.find(id);
            if (it == devices_.end() || it->second.failed)
                continue; // lost
            bus_.publish({"ack/" + id, json{{"seq", msg.payload["seq"]}}, now});
        }
    }
}

std::vector<TraceEvent> World::step() {
    std::vector<TraceEvent> out;
    rain_now_ = 0.0;
    apply_timeline(out);
    advance_dynamics();
    sense(out);
    if (clock_ % scenario_.loop.period == 0) {
        auto loop_events = engine_.run_loop_step(clock_, *this);
        out.insert(out.end(), std::make_move_iterator(loop_events.begin()),
                   std::make_move_iterator(loop_events.end()));
    }
    // Commands acknowledged this tick take effect from the next one.
    for (const auto& cmd : pending_) {
        auto& dev = devices_.at(cmd.device);
        if (dev.failed)
            continue;
        switch (cmd.action) {
        case Command::Action::activate:
            dev.active.insert(cmd.feature);
            if (!cmd.params.params.empty())
                dev.config = cmd.params;
            break;
        case Command::Action::deactivate:
            dev.active.erase(cmd.feature);
            break;
        case Command::Action::configure:
            dev.config = cmd.params;
            break;
        }
    }
    pending_.clear();
    ++clock_;
    return out;
}

World load_scenario(std::string_view text, std::uint64_t seed, const std::filesystem::path& base_dir) {
    return World(parse_scenario(text, base_dir), seed);
}

std::vector<TraceEvent> run(World& world, Tick until, std::ostream* sink) {
    if (until <= 0)
        throw PreconditionError("run: 'until' must be positive");
    std::vector<TraceEvent> all;
    while (world.clock() < until) {
        for (auto& e : world.step()) {
            if (sink)
                *sink << serialize(e) << '\n';
            all.push_back(std::move(e));
        }
    }
    return all;
}

} // namespace fleet
