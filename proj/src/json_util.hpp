#pragma once

// Small helpers shared by the model and scenario readers.

#include "fleetdspl/device.hpp"
#include "fleetdspl/errors.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

namespace fleet::detail {

using json = nlohmann::json;

template <typename E = SyntaxError>
void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed)
            ok = ok || key == a;
        if (!ok) {
            if constexpr (std::is_same_v<E, ScenarioError>)
                throw ScenarioError(key, "unknown key '" + key + "' in " + std::string(where));
            else
                throw E("unknown key '" + key + "' in " + std::string(where));
        }
    }
}

inline ParamValue to_param(const json& j, const std::string& key) {
    if (j.is_boolean())
        return j.get<bool>();
    if (j.is_number())
        return j.get<double>();
    if (j.is_string())
        return j.get<std::string>();
    throw SyntaxError("parameter '" + key + "' must be a number, string or boolean");
}

inline json from_param(const ParamValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

inline DConfig to_dconfig(const json& j, std::string_view where) {
    if (!j.is_object())
        throw SyntaxError(std::string(where) + ": params must be an object");
    DConfig cfg;
    for (const auto& [key, value] : j.items())
        cfg.params.emplace(key, to_param(value, key));
    cfg.validate();
    return cfg;
}

inline json from_dconfig(const DConfig& cfg) {
    json out = json::object();
    for (const auto& [key, value] : cfg.params)
        out[key] = from_param(value);
    return out;
}

} // namespace fleet::detail
