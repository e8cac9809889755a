#include "fleetdspl/variability.hpp"

#include "json_util.hpp"

namespace fleet {

using detail::json;

namespace {

const json& field(const json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw SyntaxError(std::string(where) + ": missing key '" + key + "'");
    return *it;
}

std::string name_of(const json& j, std::string_view where) {
    if (!j.is_string())
        throw SyntaxError(std::string(where) + ": 'name' must be a string");
    return j.get<std::string>();
}

GroupKind group_kind(const json& j, const std::string& owner) {
    if (!j.is_string())
        throw SyntaxError("group kind under '" + owner + "' must be a string");
    const auto s = j.get<std::string>();
    if (s == "mandatory") return GroupKind::mandatory;
    if (s == "optional") return GroupKind::optional;
    if (s == "alternative") return GroupKind::alternative;
    if (s == "or") return GroupKind::or_group;
    throw SemanticError(s, "unknown group kind '" + s + "' under '" + owner + "'");
}

FeatureNode parse_node(const json& j) {
    if (!j.is_object())
        throw SyntaxError("feature node must be an object");
    detail::reject_unknown_keys(j, {"name", "groups"}, "feature node");
    FeatureNode node;
    node.name = name_of(field(j, "name", "feature node"), "feature node");
    if (auto it = j.find("groups"); it != j.end()) {
        if (!it->is_array())
            throw SyntaxError("'groups' of '" + node.name + "' must be an array");
        for (const auto& g : *it) {
            if (!g.is_object())
                throw SyntaxError("group under '" + node.name + "' must be an object");
            detail::reject_unknown_keys(g, {"kind", "children"}, "group");
            FeatureGroup group;
            group.kind = group_kind(field(g, "kind", "group"), node.name);
            const auto& children = field(g, "children", "group");
            if (!children.is_array())
                throw SyntaxError("'children' under '" + node.name + "' must be an array");
            for (const auto& c : children)
                group.children.push_back(parse_node(c));
            node.groups.push_back(std::move(group));
        }
    }
    return node;
}

json dump_node(const FeatureNode& node) {
    json out = json::object();
    out["name"] = node.name;
    json groups = json::array();
    for (const auto& g : node.groups) {
        json children = json::array();
        for (const auto& c : g.children)
            children.push_back(dump_node(c));
        groups.push_back({{"kind", to_string(g.kind)}, {"children", std::move(children)}});
    }
    if (!groups.empty())
        out["groups"] = std::move(groups);
    return out;
}

} // namespace

FeatureModel parse_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw SyntaxError(std::string("model is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw SyntaxError("model document must be a JSON object");
    detail::reject_unknown_keys(doc, {"name", "root", "constraints", "capabilities"}, "model");

    std::string name = name_of(field(doc, "name", "model"), "model");
    FeatureNode root = parse_node(field(doc, "root", "model"));

    std::vector<CrossTreeConstraint> constraints;
    if (auto it = doc.find("constraints"); it != doc.end()) {
        if (!it->is_array())
            throw SyntaxError("'constraints' must be an array");
        for (const auto& c : *it) {
            if (!c.is_object())
                throw SyntaxError("constraint must be an object");
            detail::reject_unknown_keys(c, {"kind", "from", "to"}, "constraint");
            const auto& kind = field(c, "kind", "constraint");
            const auto& from = field(c, "from", "constraint");
            const auto& to = field(c, "to", "constraint");
            if (!kind.is_string() || !from.is_string() || !to.is_string())
                throw SyntaxError("constraint fields must be strings");
            CrossTreeConstraint ct{ConstraintKind::requires_, from.get<std::string>(), to.get<std::string>()};
            if (kind == "excludes")
                ct.kind = ConstraintKind::excludes;
            else if (kind != "requires")
                throw SemanticError(kind.get<std::string>(), "unknown constraint kind '" + kind.get<std::string>() + "'");
            constraints.push_back(std::move(ct));
        }
    }

    std::map<FeatureName, std::vector<std::string>> capabilities;
    if (auto it = doc.find("capabilities"); it != doc.end()) {
        if (!it->is_object())
            throw SyntaxError("'capabilities' must be an object");
        for (const auto& [feature, tags] : it->items()) {
            if (!tags.is_array())
                throw SyntaxError("capabilities of '" + feature + "' must be an array");
            auto& out = capabilities[feature];
            for (const auto& t : tags) {
                if (!t.is_string())
                    throw SyntaxError("capability tag of '" + feature + "' must be a string");
                out.push_back(t.get<std::string>());
            }
        }
    }
    return FeatureModel(std::move(name), std::move(root), std::move(constraints), std::move(capabilities));
}

std::string dump_model(const FeatureModel& model) {
    json constraints = json::array();
    for (const auto& c : model.constraints())
        constraints.push_back({{"kind", to_string(c.kind)}, {"from", c.from}, {"to", c.to}});
    json caps = json::object();
    for (const auto& [feature, tags] : model.capabilities())
        caps[feature] = tags;
    json doc = json::object();
    doc["name"] = model.name();
    doc["root"] = dump_node(model.root());
    doc["constraints"] = std::move(constraints);
    doc["capabilities"] = std::move(caps);
    return doc.dump(2) + "\n";
}

} // namespace fleet
