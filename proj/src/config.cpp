#include "forgekit/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fk {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void apply_kv(Config& c, const std::string& line, const std::string& where) {
  const size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: missing '=' in \"" + line + "\" (" +
                                where + ")");
  c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

}  // namespace

Config Config::defaults() {
  Config c;
  c.values = {
      // dataset / episode shape
      {"data.k", "5"},
      {"data.split_n", "2"},
      {"data.res", "32"},
      {"data.focal", "32"},
      {"data.scenes", "5"},
      // encoder / volume scale (toy; reference scale in comments)
      {"model.in_ch", "3"},
      {"model.backbone_base", "16"},
      {"model.stride", "2"},        // reference 8
      {"model.grid_d", "16"},       // reference 32
      {"model.grid_c", "8"},        // reference 128
      {"model.c2d", "32"},
      {"model.volume_mid", "16"},
      {"model.volume_f", "4"},      // reference 16
      {"model.rgb_mid", "8"},
      {"model.extent", "1.6"},      // reconstruction cube edge, camera frame
      {"render.samples", "32"},
      {"fusion.mode", "both"},
      // pose estimator
      {"pose.backbone_base", "8"},
      {"pose.stride", "2"},
      {"pose.tok_ch", "16"},        // reference 256
      {"pose.heads", "4"},
      {"pose.feat_dim", "64"},      // reference 1024
      {"pose.pair_dim", "4"},       // reference 16
      {"pose.pair_ch", "8"},        // reference 64
      {"pose.pe_ch", "12"},         // reference 66 (divisible by 6)
      {"pose.pairwise_norm", "softmax"},  // or "none"
      {"pose.branch", "both"},            // global | pairwise | both
      {"pose.dropout", "0.6"},
      {"pose.mlp_hidden", "64"},
      // losses
      {"loss.lambda_img", "5"},
      {"loss.lambda_p", "0.02"},
      {"loss.lambda_pose", "1"},
      {"loss.perceptual", "0"},
      // training schedule
      {"train.batch", "4"},
      {"train.lr", "0.001"},
      {"train.iters1", "2000"},
      {"train.iters2", "5000"},
      {"train.iters3", "1000"},
      {"train.log_every", "10"},
      {"train.seed", "0"},
      // test-time optimization
      {"tto.iters", "1000"},
      {"tto.lr", "0.005"},
      // evaluation
      {"eval.voxel_threshold", "1.0"},
  };
  return c;
}

Config Config::load(const std::string& path,
                    const std::vector<std::string>& overrides) {
  Config c = defaults();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      apply_kv(c, t, path);
    }
  }
  for (const std::string& o : overrides) apply_kv(c, o, "override");
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values.find(key);
  if (it == values.end())
    throw std::invalid_argument("config: unknown key \"" + key + "\"");
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    throw std::invalid_argument("config: unknown key \"" + key + "\"");
  return it->second;
}

int Config::geti(const std::string& key) const {
  return std::stoi(get(key));
}

double Config::getf(const std::string& key) const {
  return std::stod(get(key));
}

bool Config::getb(const std::string& key) const {
  const std::string& v = get(key);
  return v != "0" && v != "false" && v != "off";
}

std::string Config::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : values) os << k << "=" << v << "\n";
  return os.str();
}

std::string Config::hash() const {
  uint64_t h = 1469598103934665603ULL;
  for (char c : canonical()) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fk
