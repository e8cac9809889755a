#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace fleet {

using DeviceId = std::string;
using ParamValue = std::variant<double, std::string, bool>;

/// Per-device parameter settings.
struct DConfig {
    std::map<std::string, ParamValue> params;

    /// Throws RangeError on an empty parameter name.
    void validate() const;

    /// Numeric parameter, or `fallback` when absent or not a number.
    double number(const std::string& name, double fallback) const;

    bool operator==(const DConfig&) const = default;
};

/// What the platform knows about one physical device.
struct DeviceDescriptor {
    DeviceId id;
    std::vector<std::string> capabilities;
    double battery = 100.0; // percent
    bool reachable = true;
    DConfig params;

    bool provides(const std::vector<std::string>& tags) const;
    /// Throws RangeError when battery is outside [0, 100] or the id is empty.
    void validate() const;

    bool operator==(const DeviceDescriptor&) const = default;
};

} // namespace fleet
