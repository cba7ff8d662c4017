#pragma once

#include <map>
#include <string>
#include <vector>

namespace fk {

// Flat key=value configuration with dotted section names. Layering is
// defaults < file < overrides; keys absent from the default set are rejected
// so typos fail loudly. The canonical serialization (sorted keys) feeds the
// config hash embedded in checkpoints and reports.
struct Config {
  std::map<std::string, std::string> values;

  static Config defaults();
  // path may be empty (defaults only); overrides are "key=value" strings.
  static Config load(const std::string& path,
                     const std::vector<std::string>& overrides = {});

  void set(const std::string& key, const std::string& value);  // known keys only
  const std::string& get(const std::string& key) const;
  int geti(const std::string& key) const;
  double getf(const std::string& key) const;
  bool getb(const std::string& key) const;

  std::string canonical() const;  // "key=value\n" sorted by key
  std::string hash() const;       // 16 hex chars, FNV-1a over canonical()
};

}  // namespace fk
