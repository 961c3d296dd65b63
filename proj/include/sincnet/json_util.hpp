#pragma once

// Strict reading of JSON objects: every key must be consumed, otherwise the
// object is rejected naming the unknown key.

#include <set>
#include <string>

#include <json.hpp>

#include "sincnet/error.hpp"

namespace sincnet {

using json = nlohmann::json;

class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorKind::Config, path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Config, field(key) + ": " + e.what());
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Throws if any key was never read.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(ErrorKind::Config, "unknown key '" + field(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace sincnet
