#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace shapedyn::cli {

struct Preset {
  std::string name;
  std::string provenance;
  nlohmann::json config;
};

const std::vector<Preset>& presets();
/// nullptr when no preset has that name.
const Preset* find_preset(const std::string& name);

}  // namespace shapedyn::cli
