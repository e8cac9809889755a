#include "fleetdspl/device.hpp"

#include "fleetdspl/errors.hpp"

#include <algorithm>

namespace fleet {

void DConfig::validate() const {
    for (const auto& [name, value] : params)
        if (name.empty())
            throw RangeError("DConfig parameter name must not be empty");
}

double DConfig::number(const std::string& name, double fallback) const {
    auto it = params.find(name);
    if (it == params.end())
        return fallback;
    if (const auto* v = std::get_if<double>(&it->second))
        return *v;
    return fallback;
}

bool DeviceDescriptor::provides(const std::vector<std::string>& tags) const {
    return std::all_of(tags.begin(), tags.end(), [&](const std::string& tag) {
        return std::find(capabilities.begin(), capabilities.end(), tag) != capabilities.end();
    });
}

void DeviceDescriptor::validate() const {
    if (id.empty())
        throw RangeError("device id must not be empty");
    if (!(battery >= 0.0 && battery <= 100.0))
        throw RangeError("device '" + id + "': battery " + std::to_string(battery) + " outside [0, 100]");
    params.validate();
}

} // namespace fleet
