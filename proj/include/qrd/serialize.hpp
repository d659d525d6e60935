#pragma once

#include <string>
#include <utility>

#include <json.hpp>

#include "qrd/sim.hpp"

namespace qrd {

using Json = nlohmann::json;

Json complex_to_json(const Complex& c);
Complex complex_from_json(const Json& j);

Json device_to_json(const DeviceConfig& device);
DeviceConfig device_from_json(const Json& j);

Json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const Json& j);

// "1->0", "2->1", "0->1", "0->2", "1->2"
std::string transition_name(int from, int to);
std::pair<int, int> transition_from_name(const std::string& name);

const char* split_name(Split s);
Split split_from_name(const std::string& name);

}  // namespace qrd
