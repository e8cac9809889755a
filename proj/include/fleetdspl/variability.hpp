#pragma once

#include "fleetdspl/device.hpp"

#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fleet {

using FeatureName = std::string;

/// A candidate product: the set of selected feature names. `std::set` ordering makes
/// comparison lexicographic over the sorted name lists.
using Selection = std::set<FeatureName>;

enum class GroupKind { mandatory, optional, alternative, or_group };
enum class ConstraintKind { requires_, excludes };

std::string_view to_string(GroupKind kind);
std::string_view to_string(ConstraintKind kind);

struct FeatureNode;

struct FeatureGroup {
    GroupKind kind = GroupKind::optional;
    std::vector<FeatureNode> children;
};

struct FeatureNode {
    FeatureName name;
    std::vector<FeatureGroup> groups;
};

struct CrossTreeConstraint {
    ConstraintKind kind = ConstraintKind::requires_;
    FeatureName from;
    FeatureName to;
};

/// Feature tree plus cross-tree constraints and per-feature capability needs.
/// Immutable once built; the constructor enforces the structural invariants.
class FeatureModel {
public:
    /// Throws SemanticError naming the offending element.
    FeatureModel(std::string name, FeatureNode root, std::vector<CrossTreeConstraint> constraints,
                 std::map<FeatureName, std::vector<std::string>> capabilities);

    const std::string& name() const noexcept { return name_; }
    const FeatureNode& root() const noexcept { return root_; }
    const std::vector<CrossTreeConstraint>& constraints() const noexcept { return constraints_; }
    const std::map<FeatureName, std::vector<std::string>>& capabilities() const noexcept { return capabilities_; }

    /// Feature names in depth-first pre-order (root first).
    const std::vector<FeatureName>& features() const noexcept { return order_; }
    std::size_t size() const noexcept { return order_.size(); }
    bool contains(const FeatureName& feature) const { return parent_.count(feature) != 0; }

    /// Parent feature name; empty for the root. Throws UnknownFeature.
    const FeatureName& parent_of(const FeatureName& feature) const;

    /// Capability tags the feature needs (empty when none declared).
    const std::vector<std::string>& needs(const FeatureName& feature) const;

private:
    void index(const FeatureNode& node, const FeatureName& parent);

    std::string name_;
    FeatureNode root_;
    std::vector<CrossTreeConstraint> constraints_;
    std::map<FeatureName, std::vector<std::string>> capabilities_;
    std::vector<FeatureName> order_;
    std::map<FeatureName, FeatureName> parent_;
};

/// Parses the JSON model document. Throws SyntaxError or SemanticError.
FeatureModel parse_model(std::string_view text);

/// Inverse of parse_model; key order is fixed.
std::string dump_model(const FeatureModel& model);

struct Violation {
    /// One of: root, parent, mandatory, alternative, or, requires, excludes.
    std::string rule;
    std::vector<FeatureName> features;

    std::string describe() const;
    bool operator==(const Violation&) const = default;
};

struct Verdict {
    std::vector<Violation> violations;
    bool valid() const noexcept { return violations.empty(); }
};

/// Checks root selection, group semantics and cross-tree constraints.
/// Throws UnknownFeature when `sel` names a feature outside the model.
Verdict check_selection(const FeatureModel& model, const Selection& sel);

inline constexpr std::size_t kMaxEnumerableFeatures = 20;

struct Enumeration {
    std::vector<Selection> selections; // ascending, at most `limit` entries
    std::size_t total = 0;             // number of valid selections before truncation
    bool truncated = false;
};

/// Every valid selection in ascending lexicographic order. Throws ModelTooLarge.
Enumeration enumerate_configurations(const FeatureModel& model,
                                     std::size_t limit = std::numeric_limits<std::size_t>::max());

/// Fleet configuration: a product plus its device bindings and device settings.
struct FConfig {
    Selection selection;
    std::map<FeatureName, DeviceId> bindings;
    std::map<DeviceId, DConfig> dconfigs;

    std::set<DeviceId> bound_devices() const;
    bool operator==(const FConfig&) const = default;
};

using FeatureDefaults = std::map<FeatureName, DConfig>;

/// Binds each selected feature with capability needs to the smallest-id reachable device
/// providing all of them. A bound device's DConfig starts from its descriptor params,
/// overlaid with the defaults of every feature bound to it.
/// Throws InvalidSelection or UnsatisfiedCapability.
FConfig derive_fconfig(const FeatureModel& model, const Selection& sel,
                       const std::vector<DeviceDescriptor>& registry, const FeatureDefaults& defaults = {});

struct ChangeSet {
    Selection added;
    Selection removed;

    bool empty() const noexcept { return added.empty() && removed.empty(); }
    std::size_t size() const noexcept { return added.size() + removed.size(); }
    bool operator==(const ChangeSet&) const = default;
};

ChangeSet diff_selections(const Selection& a, const Selection& b);

/// (a ∖ removed) ∪ added.
Selection apply_changes(const Selection& a, const ChangeSet& changes);

/// "A,B,C" in sorted order.
std::string join(const Selection& sel, std::string_view sep = ",");

} // namespace fleet
