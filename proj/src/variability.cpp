#include "fleetdspl/variability.hpp"

#include "fleetdspl/errors.hpp"

#include <algorithm>

namespace fleet {

UnsatisfiedCapability::UnsatisfiedCapability(std::string feature, std::vector<std::string> missing)
    : Error([&] {
          std::string msg = "no reachable device satisfies feature '" + feature + "' (missing:";
          for (const auto& tag : missing)
              msg += " " + tag;
          return msg + ")";
      }()),
      feature_(std::move(feature)), missing_(std::move(missing)) {}

std::string_view to_string(GroupKind kind) {
    switch (kind) {
    case GroupKind::mandatory: return "mandatory";
    case GroupKind::optional: return "optional";
    case GroupKind::alternative: return "alternative";
    case GroupKind::or_group: return "or";
    }
    return "?";
}

std::string_view to_string(ConstraintKind kind) {
    return kind == ConstraintKind::requires_ ? "requires" : "excludes";
}

// ---------------------------------------------------------------------------
// FeatureModel

FeatureModel::FeatureModel(std::string name, FeatureNode root, std::vector<CrossTreeConstraint> constraints,
                           std::map<FeatureName, std::vector<std::string>> capabilities)
    : name_(std::move(name)), root_(std::move(root)), constraints_(std::move(constraints)),
      capabilities_(std::move(capabilities)) {
    index(root_, FeatureName{});
    for (const auto& c : constraints_) {
        for (const auto* end : {&c.from, &c.to})
            if (!contains(*end))
                throw SemanticError(*end, "constraint references undeclared feature '" + *end + "'");
        if (c.from == c.to)
            throw SemanticError(c.from, "constraint on '" + c.from + "' refers to itself");
    }
    for (const auto& [feature, tags] : capabilities_) {
        if (!contains(feature))
            throw SemanticError(feature, "capabilities declared for undeclared feature '" + feature + "'");
        for (const auto& tag : tags)
            if (tag.empty())
                throw SemanticError(feature, "empty capability tag on feature '" + feature + "'");
    }
}

void FeatureModel::index(const FeatureNode& node, const FeatureName& parent) {
    if (node.name.empty())
        throw SemanticError(parent, "feature without a name under '" + parent + "'");
    if (!parent_.emplace(node.name, parent).second)
        throw SemanticError(node.name, "duplicate feature name '" + node.name + "'");
    order_.push_back(node.name);
    for (const auto& group : node.groups) {
        if (group.children.empty())
            throw SemanticError(node.name, "empty " + std::string(to_string(group.kind)) + " group under '" +
                                               node.name + "'");
        for (const auto& child : group.children)
            index(child, node.name);
    }
}

const FeatureName& FeatureModel::parent_of(const FeatureName& feature) const {
    auto it = parent_.find(feature);
    if (it == parent_.end())
        throw UnknownFeature(feature);
    return it->second;
}

const std::vector<std::string>& FeatureModel::needs(const FeatureName& feature) const {
    static const std::vector<std::string> none;
    auto it = capabilities_.find(feature);
    return it == capabilities_.end() ? none : it->second;
}

// ---------------------------------------------------------------------------
// Validity

std::string Violation::describe() const {
    auto at = [&](std::size_t i) -> const std::string& {
        static const std::string empty;
        return i < features.size() ? features[i] : empty;
    };
    auto rest = [&] {
        std::string out;
        for (std::size_t i = 1; i < features.size(); ++i)
            out += (i > 1 ? "," : "") + features[i];
        return out;
    };
    if (rule == "root")
        return "root " + at(0) + " not selected";
    if (rule == "parent")
        return "parent " + at(1) + " of " + at(0) + " not selected";
    if (rule == "mandatory")
        return "mandatory " + at(1) + " of " + at(0) + " not selected";
    if (rule == "alternative")
        return "alternative group of " + at(0) + " needs exactly one of {" + rest() + "}";
    if (rule == "or")
        return "or group of " + at(0) + " needs at least one of {" + rest() + "}";
    if (rule == "requires")
        return "requires " + at(0) + "->" + at(1);
    if (rule == "excludes")
        return "excludes " + at(0) + "," + at(1);
    return rule;
}

namespace {

void check_node(const FeatureNode& node, const Selection& sel, std::vector<Violation>& out) {
    const bool on = sel.count(node.name) != 0;
    for (const auto& group : node.groups) {
        std::size_t chosen = 0;
        for (const auto& child : group.children) {
            const bool child_on = sel.count(child.name) != 0;
            chosen += child_on;
            if (child_on && !on)
                out.push_back({"parent", {child.name, node.name}});
            if (on && !child_on && group.kind == GroupKind::mandatory)
                out.push_back({"mandatory", {node.name, child.name}});
            check_node(child, sel, out);
        }
        if (!on)
            continue;
        const bool bad = (group.kind == GroupKind::alternative && chosen != 1) ||
                         (group.kind == GroupKind::or_group && chosen == 0);
        if (bad) {
            Violation v{group.kind == GroupKind::alternative ? "alternative" : "or", {node.name}};
            for (const auto& child : group.children)
                v.features.push_back(child.name);
            out.push_back(std::move(v));
        }
    }
}

bool constraints_hold(const FeatureModel& model, const Selection& sel) {
    for (const auto& c : model.constraints()) {
        const bool from = sel.count(c.from) != 0, to = sel.count(c.to) != 0;
        if (from && (c.kind == ConstraintKind::requires_ ? !to : to))
            return false;
    }
    return true;
}

} // namespace

Verdict check_selection(const FeatureModel& model, const Selection& sel) {
    for (const auto& f : sel)
        if (!model.contains(f))
            throw UnknownFeature(f);

    Verdict verdict;
    if (!sel.count(model.root().name))
        verdict.violations.push_back({"root", {model.root().name}});
    check_node(model.root(), sel, verdict.violations);
    for (const auto& c : model.constraints()) {
        const bool from = sel.count(c.from) != 0, to = sel.count(c.to) != 0;
        if (c.kind == ConstraintKind::requires_ && from && !to)
            verdict.violations.push_back({"requires", {c.from, c.to}});
        if (c.kind == ConstraintKind::excludes && from && to)
            verdict.violations.push_back({"excludes", {c.from, c.to}});
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Enumeration
//
// Products are built top-down from the tree so that only group-consistent selections are
// ever materialised; cross-tree constraints are filtered afterwards.

namespace {

using Products = std::vector<Selection>;

Products cross(const Products& lhs, const Products& rhs) {
    Products out;
    out.reserve(lhs.size() * rhs.size());
    for (const auto& a : lhs)
        for (const auto& b : rhs) {
            Selection merged = a;
            merged.insert(b.begin(), b.end());
            out.push_back(std::move(merged));
        }
    return out;
}

Products expand(const FeatureNode& node) {
    Products result{Selection{node.name}};
    for (const auto& group : node.groups) {
        Products options;
        switch (group.kind) {
        case GroupKind::mandatory:
            options = {Selection{}};
            for (const auto& child : group.children)
                options = cross(options, expand(child));
            break;
        case GroupKind::optional:
        case GroupKind::or_group:
            options = {Selection{}};
            for (const auto& child : group.children) {
                Products child_opts = expand(child);
                child_opts.insert(child_opts.begin(), Selection{});
                options = cross(options, child_opts);
            }
            if (group.kind == GroupKind::or_group)
                std::erase_if(options, [](const Selection& s) { return s.empty(); });
            break;
        case GroupKind::alternative:
            for (const auto& child : group.children) {
                Products child_opts = expand(child);
                options.insert(options.end(), child_opts.begin(), child_opts.end());
            }
            break;
        }
        result = cross(result, options);
    }
    return result;
}

} // namespace

Enumeration enumerate_configurations(const FeatureModel& model, std::size_t limit) {
    if (model.size() > kMaxEnumerableFeatures)
        throw ModelTooLarge(model.size(), kMaxEnumerableFeatures);

    Products all = expand(model.root());
    std::erase_if(all, [&](const Selection& s) { return !constraints_hold(model, s); });
    std::sort(all.begin(), all.end());

    Enumeration result;
    result.total = all.size();
    if (all.size() > limit) {
        all.resize(limit);
        result.truncated = true;
    }
    result.selections = std::move(all);
    return result;
}

// ---------------------------------------------------------------------------
// Derivation

std::set<DeviceId> FConfig::bound_devices() const {
    std::set<DeviceId> out;
    for (const auto& [feature, device] : bindings)
        out.insert(device);
    return out;
}

FConfig derive_fconfig(const FeatureModel& model, const Selection& sel, const std::vector<DeviceDescriptor>& registry,
                       const FeatureDefaults& defaults) {
    if (auto verdict = check_selection(model, sel); !verdict.valid()) {
        std::string msg = "selection is not a valid product:";
        for (const auto& v : verdict.violations)
            msg += " [" + v.describe() + "]";
        throw InvalidSelection(msg);
    }

    FConfig cfg;
    cfg.selection = sel;
    for (const auto& feature : sel) {
        const auto& tags = model.needs(feature);
        if (tags.empty())
            continue;
        const DeviceDescriptor* pick = nullptr;
        for (const auto& dev : registry)
            if (dev.reachable && dev.provides(tags) && (!pick || dev.id < pick->id))
                pick = &dev;
        if (!pick) {
            // Report what the closest reachable device still lacks.
            std::vector<std::string> missing = tags;
            for (const auto& dev : registry) {
                if (!dev.reachable)
                    continue;
                std::vector<std::string> lacking;
                for (const auto& tag : tags)
                    if (!dev.provides({tag}))
                        lacking.push_back(tag);
                if (lacking.size() < missing.size())
                    missing = std::move(lacking);
            }
            throw UnsatisfiedCapability(feature, missing);
        }
        cfg.bindings.emplace(feature, pick->id);
        cfg.dconfigs.emplace(pick->id, pick->params);
    }
    for (const auto& [feature, device] : cfg.bindings)
        if (auto it = defaults.find(feature); it != defaults.end())
            for (const auto& [key, value] : it->second.params)
                cfg.dconfigs[device].params[key] = value;
    return cfg;
}

ChangeSet diff_selections(const Selection& a, const Selection& b) {
    ChangeSet cs;
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::inserter(cs.added, cs.added.end()));
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(cs.removed, cs.removed.end()));
    return cs;
}

Selection apply_changes(const Selection& a, const ChangeSet& changes) {
    Selection out;
    std::set_difference(a.begin(), a.end(), changes.removed.begin(), changes.removed.end(),
                        std::inserter(out, out.end()));
    out.insert(changes.added.begin(), changes.added.end());
    return out;
}

std::string join(const Selection& sel, std::string_view sep) {
    std::string out;
    for (const auto& f : sel) {
        if (!out.empty())
            out += sep;
        out += f;
    }
    return out;
}

} // namespace fleet
