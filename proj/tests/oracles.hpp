#pragma once

// Test-only reference implementations. Nothing here calls into the code paths it checks:
// feature semantics are evaluated per subset straight from the tree, and the planner
// oracle re-implements derivation and scoring from their definitions.

#include "fleetdspl/adaptation.hpp"
#include "fleetdspl/variability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using fleet::Selection;

struct FlatGroup {
    std::string parent;
    fleet::GroupKind kind;
    std::vector<std::string> children;
};

struct FlatModel {
    std::string root;
    std::vector<std::string> features;
    std::map<std::string, std::string> parent;
    std::vector<FlatGroup> groups;
    std::vector<fleet::CrossTreeConstraint> constraints;
};

inline void flatten(const fleet::FeatureNode& node, const std::string& parent, FlatModel& out) {
    out.features.push_back(node.name);
    out.parent[node.name] = parent;
    for (const auto& g : node.groups) {
        FlatGroup fg{node.name, g.kind, {}};
        for (const auto& c : g.children)
            fg.children.push_back(c.name);
        out.groups.push_back(fg);
        for (const auto& c : g.children)
            flatten(c, node.name, out);
    }
}

inline FlatModel flatten(const fleet::FeatureModel& m) {
    FlatModel out;
    out.root = m.root().name;
    flatten(m.root(), "", out);
    out.constraints = m.constraints();
    return out;
}

/// Direct encoding of the selection semantics for one subset.
inline bool semantically_valid(const FlatModel& m, const Selection& s) {
    auto in = [&](const std::string& f) { return s.count(f) != 0; };
    if (!in(m.root))
        return false;
    for (const auto& f : s)
        if (f != m.root && !in(m.parent.at(f)))
            return false;
    for (const auto& g : m.groups) {
        if (!in(g.parent))
            continue;
        std::size_t n = 0;
        for (const auto& c : g.children)
            n += in(c);
        if (g.kind == fleet::GroupKind::mandatory && n != g.children.size())
            return false;
        if (g.kind == fleet::GroupKind::alternative && n != 1)
            return false;
        if (g.kind == fleet::GroupKind::or_group && n == 0)
            return false;
    }
    for (const auto& c : m.constraints) {
        if (c.kind == fleet::ConstraintKind::requires_ && in(c.from) && !in(c.to))
            return false;
        if (c.kind == fleet::ConstraintKind::excludes && in(c.from) && in(c.to))
            return false;
    }
    return true;
}

inline Selection subset(const FlatModel& m, std::uint32_t mask) {
    Selection s;
    for (std::size_t i = 0; i < m.features.size(); ++i)
        if (mask & (1u << i))
            s.insert(m.features[i]);
    return s;
}

/// Every valid subset, ascending.
inline std::vector<Selection> brute_force_products(const fleet::FeatureModel& model) {
    const auto flat = flatten(model);
    std::vector<Selection> out;
    for (std::uint32_t mask = 0; mask < (1u << flat.features.size()); ++mask) {
        auto s = subset(flat, mask);
        if (semantically_valid(flat, s))
            out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string feature_name(std::size_t i) {
    return std::string("f") + (i < 10 ? "0" : "") + std::to_string(i);
}

/// Random model: `n` features, random group structure, up to `max_constraints` constraints.
/// Every non-root feature gets a capability tag from {cap.a, cap.b, cap.c} with probability 1/2.
inline fleet::FeatureModel random_model(std::mt19937& rng, std::size_t n, std::size_t max_constraints) {
    struct Proto {
        std::vector<std::pair<fleet::GroupKind, std::vector<std::size_t>>> groups;
    };
    std::vector<Proto> protos(n);
    auto pick = [&](std::size_t hi) { return std::uniform_int_distribution<std::size_t>(0, hi)(rng); };
    const fleet::GroupKind kinds[] = {fleet::GroupKind::mandatory, fleet::GroupKind::optional,
                                      fleet::GroupKind::alternative, fleet::GroupKind::or_group};
    for (std::size_t i = 1; i < n; ++i) {
        auto& p = protos[pick(i - 1)];
        if (!p.groups.empty() && pick(1) == 0)
            p.groups[pick(p.groups.size() - 1)].second.push_back(i);
        else
            p.groups.push_back({kinds[pick(3)], {i}});
    }
    std::function<fleet::FeatureNode(std::size_t)> build = [&](std::size_t i) {
        fleet::FeatureNode node{feature_name(i), {}};
        for (const auto& [kind, children] : protos[i].groups) {
            fleet::FeatureGroup g{kind, {}};
            for (auto c : children)
                g.children.push_back(build(c));
            node.groups.push_back(std::move(g));
        }
        return node;
    };
    std::vector<fleet::CrossTreeConstraint> constraints;
    if (n >= 2) {
        const std::size_t k = pick(max_constraints);
        for (std::size_t c = 0; c < k; ++c) {
            std::size_t a = pick(n - 1), b = pick(n - 1);
            if (a == b)
                continue;
            constraints.push_back({pick(1) ? fleet::ConstraintKind::requires_ : fleet::ConstraintKind::excludes,
                                   feature_name(a), feature_name(b)});
        }
    }
    std::map<std::string, std::vector<std::string>> caps;
    const char* tags[] = {"cap.a", "cap.b", "cap.c"};
    for (std::size_t i = 1; i < n; ++i)
        if (pick(1))
            caps[feature_name(i)] = {tags[pick(2)]};
    return fleet::FeatureModel("random", build(0), std::move(constraints), std::move(caps));
}

// ---------------------------------------------------------------------------
// Planner oracle

struct OracleChoice {
    bool has_candidate = false;
    Selection selection;
    std::map<std::string, std::string> bindings;
    double effective = 0.0;
    bool emits_plan = false;
};

inline double ramp_sat(double distance, double ramp) { return std::max(0.0, 1.0 - distance / ramp); }

inline double goal_value(const fleet::Goal& g, double v) {
    using K = fleet::GoalKind;
    if (g.kind == K::above)
        return v >= g.threshold ? 1.0 : ramp_sat(g.threshold - v, g.ramp);
    if (g.kind == K::below)
        return v <= g.threshold ? 1.0 : ramp_sat(v - g.threshold, g.ramp);
    if (v < g.lo)
        return ramp_sat(g.lo - v, g.ramp);
    if (v > g.hi)
        return ramp_sat(v - g.hi, g.ramp);
    return 1.0;
}

inline double oracle_effective(const Selection& sel, const fleet::EvaluationContext& ec,
                               const std::vector<fleet::Goal>& goals, double alpha, const fleet::Outlook& outlook) {
    // Predicted view under `sel`, computed term by term.
    std::map<std::string, double> pred = ec.predicted;
    for (auto& [var, v] : pred) {
        double add = 0.0;
        for (const auto& t : outlook.trends)
            if (t.variable == var)
                add += t.per_tick * static_cast<double>(ec.horizon);
        for (const auto& e : outlook.effects)
            if (e.variable == var && sel.count(e.feature))
                add += e.delta;
        for (const auto& c : outlook.couplings)
            if (c.variable == var && ec.predicted.count(c.source))
                add += c.gain * ec.predicted.at(c.source);
        v += add;
    }
    double wsum = 0, cur = 0, prd = 0;
    for (const auto& g : goals) {
        double sc, sp;
        if (g.kind == fleet::GoalKind::feature_off) {
            sc = sp = sel.count(g.feature) ? 0.0 : 1.0;
        } else {
            auto c = ec.current.find(g.variable);
            sc = c == ec.current.end() ? 0.5 : (c->second.stale ? 0.0 : goal_value(g, c->second.value));
            auto p = pred.find(g.variable);
            sp = p == pred.end() ? 0.5 : goal_value(g, p->second);
        }
        wsum += g.weight;
        cur += g.weight * sc;
        prd += g.weight * sp;
    }
    const double tc = wsum > 0 ? cur / wsum : 1.0;
    const double tp = wsum > 0 ? prd / wsum : 1.0;
    return alpha * tc + (1 - alpha) * tp;
}

/// Exhaustive argmax over brute-force products that bind against feasible devices.
inline OracleChoice exhaustive_plan(const fleet::FeatureModel& model, const std::vector<fleet::DeviceDescriptor>& registry,
                                    const fleet::EvaluationContext& ec, const std::vector<fleet::Goal>& goals,
                                    const fleet::FConfig& current, const fleet::LoopSettings& settings,
                                    const fleet::Outlook& outlook) {
    struct Cand {
        Selection sel;
        std::map<std::string, std::string> bindings;
        double eff;
        std::size_t changes;
    };
    std::vector<Cand> cands;
    for (const auto& sel : brute_force_products(model)) {
        std::map<std::string, std::string> bindings;
        bool ok = true;
        for (const auto& f : sel) {
            auto it = model.capabilities().find(f);
            if (it == model.capabilities().end() || it->second.empty())
                continue;
            std::string best;
            for (const auto& d : registry) {
                if (!ec.feasible_devices.count(d.id) || !d.reachable)
                    continue;
                bool all = true;
                for (const auto& tag : it->second)
                    all = all && std::count(d.capabilities.begin(), d.capabilities.end(), tag) > 0;
                if (all && (best.empty() || d.id < best))
                    best = d.id;
            }
            if (best.empty()) {
                ok = false;
                break;
            }
            bindings[f] = best;
        }
        if (!ok)
            continue;
        std::size_t changes = 0;
        for (const auto& f : sel)
            changes += !current.selection.count(f);
        for (const auto& f : current.selection)
            changes += !sel.count(f);
        cands.push_back({sel, bindings, oracle_effective(sel, ec, goals, settings.alpha, outlook), changes});
    }
    OracleChoice out;
    if (cands.empty())
        return out;
    double top = -1;
    for (const auto& c : cands)
        top = std::max(top, c.eff);
    const Cand* best = nullptr;
    for (const auto& c : cands) {
        if (c.eff < top - 1e-9)
            continue;
        if (!best || c.changes < best->changes || (c.changes == best->changes && c.sel < best->sel))
            best = &c;
    }
    out.has_candidate = true;
    out.selection = best->sel;
    out.bindings = best->bindings;
    out.effective = best->eff;

    bool infeasible = false;
    for (const auto& [f, d] : current.bindings)
        infeasible = infeasible || !ec.feasible_devices.count(d);
    const double gain = best->eff - oracle_effective(current.selection, ec, goals, settings.alpha, outlook);
    const bool same = best->sel == current.selection && best->bindings == current.bindings;
    out.emits_plan = !same && (infeasible || gain + 1e-9 >= settings.epsilon);
    return out;
}

} // namespace oracle
