#include "fleetdspl/knowledge.hpp"

#include "fleetdspl/errors.hpp"

#include <algorithm>
#include <tuple>

namespace fleet {

using nlohmann::json;

std::string_view to_string(Dimension dim) {
    switch (dim) {
    case Dimension::system: return "system";
    case Dimension::context: return "context";
    case Dimension::environment: return "environment";
    }
    return "?";
}

std::optional<Dimension> parse_dimension(std::string_view name) {
    if (name == "system") return Dimension::system;
    if (name == "context") return Dimension::context;
    if (name == "environment") return Dimension::environment;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// DimensionMap

DimensionMap::DimensionMap(std::map<VariableName, Dimension> base,
                           std::map<std::string, std::map<VariableName, Dimension>> modes)
    : base_(std::move(base)), modes_(std::move(modes)) {
    for (const auto& [mode, overrides] : modes_) {
        if (mode == kBaseMode)
            throw RangeError("mode name '" + mode + "' is reserved");
        for (const auto& [var, dim] : overrides)
            if (!base_.count(var))
                throw RangeError("mode '" + mode + "' overrides unmapped variable '" + var + "'");
    }
}

std::optional<Dimension> DimensionMap::dimension_of(const VariableName& var) const {
    if (auto m = modes_.find(active_); m != modes_.end())
        if (auto o = m->second.find(var); o != m->second.end())
            return o->second;
    if (auto b = base_.find(var); b != base_.end())
        return b->second;
    return std::nullopt;
}

std::map<VariableName, Dimension> DimensionMap::assignment() const {
    auto out = base_;
    if (auto m = modes_.find(active_); m != modes_.end())
        for (const auto& [var, dim] : m->second)
            out[var] = dim;
    return out;
}

bool DimensionMap::has_mode(const std::string& mode) const {
    return mode == kBaseMode || modes_.count(mode) != 0;
}

std::vector<std::string> DimensionMap::mode_names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : modes_)
        out.push_back(name);
    return out;
}

void DimensionMap::activate(const std::string& mode) {
    if (!has_mode(mode))
        throw UnknownMode(mode);
    active_ = mode;
}

// ---------------------------------------------------------------------------
// KnowledgeBase

KnowledgeBase::KnowledgeBase(DimensionMap dims, double battery_floor)
    : dims_(std::move(dims)), battery_floor_(battery_floor) {
    if (!(battery_floor >= 0.0 && battery_floor <= 100.0))
        throw RangeError("battery floor outside [0, 100]");
}

void KnowledgeBase::register_device(DeviceDescriptor descriptor) {
    descriptor.validate();
    auto id = descriptor.id;
    devices_.insert_or_assign(std::move(id), std::move(descriptor));
}

bool KnowledgeBase::set_reachable(const DeviceId& id, bool reachable) {
    auto it = devices_.find(id);
    if (it == devices_.end())
        return false;
    it->second.reachable = reachable;
    return true;
}

const DeviceDescriptor* KnowledgeBase::device(const DeviceId& id) const {
    auto it = devices_.find(id);
    return it == devices_.end() ? nullptr : &it->second;
}

std::vector<DeviceDescriptor> KnowledgeBase::registry() const {
    std::vector<DeviceDescriptor> out;
    out.reserve(devices_.size());
    for (const auto& [_, d] : devices_)
        out.push_back(d);
    return out;
}

std::set<DeviceId> KnowledgeBase::feasible_devices() const {
    std::set<DeviceId> out;
    for (const auto& [id, d] : devices_)
        if (d.reachable && d.battery > battery_floor_)
            out.insert(id);
    return out;
}

IngestOutcome KnowledgeBase::ingest_reading(const Reading& r) {
    auto key = std::make_pair(r.variable, r.source);
    if (auto it = last_tick_.find(key); it != last_tick_.end() && r.tick < it->second) {
        return {IngestStatus::stale_out_of_order,
                {r.tick,
                 EventKind::Warning,
                 json{{"reason", "stale_out_of_order"},
                      {"variable", r.variable},
                      {"source", r.source},
                      {"latest", it->second}}}};
    }
    last_tick_[key] = r.tick;
    if (auto it = latest_.find(r.variable); it == latest_.end() || it->second.tick <= r.tick)
        latest_[r.variable] = r;

    json payload{{"variable", r.variable}, {"value", r.value}, {"source", r.source}};
    IngestStatus status = IngestStatus::accepted;
    if (!dims_.dimension_of(r.variable)) {
        unmapped_.insert(r.variable);
        payload["unmapped"] = true;
        status = IngestStatus::unmapped;
    }
    return {status, {r.tick, EventKind::Reading, std::move(payload)}};
}

TraceEvent KnowledgeBase::ingest_fact(const Fact& f) {
    if (f.valid_at < f.issued_at)
        throw InvalidFact("fact for '" + f.variable + "' is valid at " + std::to_string(f.valid_at) +
                          ", before it was issued at " + std::to_string(f.issued_at));
    facts_.push_back(f);
    return {f.issued_at,
            EventKind::Fact,
            json{{"variable", f.variable}, {"value", f.predicted_value}, {"valid_at", f.valid_at}}};
}

TraceEvent KnowledgeBase::set_mode(const std::string& mode, Tick now) {
    const std::string from = dims_.active_mode();
    dims_.activate(mode);
    json changed = json::object();
    // Report only variables whose dimension actually moved.
    DimensionMap before = dims_;
    before.activate(from);
    for (const auto& [var, dim] : dims_.assignment())
        if (auto old = before.dimension_of(var); old && *old != dim)
            changed[var] = {{"from", to_string(*old)}, {"to", to_string(dim)}};
    return {now, EventKind::ModeSwitch, json{{"from", from}, {"to", mode}, {"changed", std::move(changed)}}};
}

EvaluationContext KnowledgeBase::snapshot(Tick now, Tick horizon, Tick staleness_window) const {
    EvaluationContext ec;
    ec.now = now;
    ec.horizon = horizon;
    ec.mode = dims_.active_mode();
    ec.dimensions = dims_.assignment();
    ec.feasible_devices = feasible_devices();

    for (const auto& [var, r] : latest_) {
        auto dim = dims_.dimension_of(var);
        if (!dim || *dim != Dimension::context)
            continue;
        const Tick age = std::max<Tick>(0, now - r.tick);
        ec.current[var] = {r.value, age, age > staleness_window};
        ec.predicted[var] = r.value;
    }

    // Nearest-future fact per variable; ties go to the latest issue, then the larger value,
    // so the result does not depend on insertion order.
    std::map<VariableName, const Fact*> chosen;
    for (const auto& f : facts_) {
        auto dim = dims_.dimension_of(f.variable);
        if (!dim || *dim == Dimension::system)
            continue;
        if (f.valid_at < now || f.valid_at > now + horizon)
            continue;
        auto& best = chosen[f.variable];
        auto key = [](const Fact* x) { return std::make_tuple(-x->valid_at, x->issued_at, x->predicted_value); };
        if (!best || key(&f) > key(best))
            best = &f;
    }
    for (const auto& [var, f] : chosen)
        ec.predicted[var] = f->predicted_value;
    return ec;
}

void KnowledgeBase::prune_facts(Tick now, Tick horizon) {
    std::erase_if(facts_, [&](const Fact& f) { return f.valid_at + horizon < now; });
}

std::optional<Reading> KnowledgeBase::latest(const VariableName& var) const {
    auto it = latest_.find(var);
    if (it == latest_.end())
        return std::nullopt;
    return it->second;
}

} // namespace fleet
