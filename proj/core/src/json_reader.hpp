#pragma once

#include <string>

#include <json.hpp>

#include "dmsim/scenario.hpp"

namespace dmsim::detail {

// Field access with a readable path in error messages.
struct Reader {
  const nlohmann::json& j;
  std::string path;
  std::string root = "scenario";

  Reader at(const std::string& key) const {
    if (!j.is_object() || !j.contains(key)) throw Error(root + ": missing field " + path + "." + key);
    return Reader{j.at(key), path + "." + key, root};
  }
  bool has(const std::string& key) const { return j.is_object() && j.contains(key); }
  Reader index(std::size_t i) const { return Reader{j.at(i), path + "[" + std::to_string(i) + "]", root}; }

  template <typename T>
  T as() const {
    try {
      return j.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(root + ": wrong type at " + path);
    }
  }
  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? at(key).as<T>() : fallback;
  }
  SimTime ms(const std::string& key) const { return SimTime{at(key).as<std::int64_t>()}; }
};

ScenarioAction parse_action(const Reader& r);

}  // namespace dmsim::detail
