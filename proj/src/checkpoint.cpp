#include "forgekit/checkpoint.hpp"

#include <cstring>
#include <stdexcept>

#include "forgekit/image_io.hpp"

namespace fk {

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& off) {
  if (off + sizeof(T) > in.size())
    throw std::runtime_error("checkpoint: truncated file");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

std::string take_str(const std::string& in, size_t& off, size_t n) {
  if (off + n > in.size())
    throw std::runtime_error("checkpoint: truncated file");
  std::string s = in.substr(off, n);
  off += n;
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append("FKC1", 4);
  put<uint32_t>(out, ckpt.version);
  put<uint32_t>(out, ckpt.stage);
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.config_hash.size()));
  out.append(ckpt.config_hash);
  put<uint64_t>(out, ckpt.blocks.size());
  for (const auto& [name, data] : ckpt.blocks) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put<uint64_t>(out, data.size());
    for (real v : data) put<double>(out, v);
  }
  atomic_write_bytes(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string in = read_bytes(path);
  size_t off = 0;
  if (take_str(in, off, 4) != "FKC1")
    throw std::runtime_error("checkpoint: bad magic in " + path);
  Checkpoint c;
  c.version = take<uint32_t>(in, off);
  if (c.version != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  c.stage = take<uint32_t>(in, off);
  c.config_hash = take_str(in, off, take<uint32_t>(in, off));
  const uint64_t n = take<uint64_t>(in, off);
  for (uint64_t i = 0; i < n; ++i) {
    const std::string name = take_str(in, off, take<uint32_t>(in, off));
    const uint64_t count = take<uint64_t>(in, off);
    std::vector<real> data(count);
    for (uint64_t j = 0; j < count; ++j) data[j] = take<double>(in, off);
    c.blocks.emplace(name, std::move(data));
  }
  return c;
}

void store_params(Checkpoint& ckpt, const ParamMap& params) {
  for (const auto& [name, t] : params)
    ckpt.blocks[name] =
        std::vector<real>(t.data(), t.data() + t.numel());
}

void load_params(const Checkpoint& ckpt, ParamMap& params,
                 const std::string& expect_hash) {
  if (!expect_hash.empty() && ckpt.config_hash != expect_hash)
    throw std::runtime_error("checkpoint: config hash mismatch (checkpoint " +
                             ckpt.config_hash + ", current " + expect_hash +
                             ")");
  for (auto& [name, t] : params) {
    auto it = ckpt.blocks.find(name);
    if (it == ckpt.blocks.end())
      throw std::runtime_error("checkpoint: missing block \"" + name + "\"");
    if (static_cast<int64_t>(it->second.size()) != t.numel())
      throw std::runtime_error("checkpoint: block \"" + name +
                               "\" has wrong size");
    std::memcpy(t.data(), it->second.data(), it->second.size() * sizeof(real));
  }
}

void store_adam(Checkpoint& ckpt, const Adam& opt, const std::string& prefix) {
  ckpt.blocks[prefix + ".step"] = {static_cast<real>(opt.step_count)};
  for (size_t i = 0; i < opt.m.size(); ++i) {
    ckpt.blocks[prefix + ".m" + std::to_string(i)] = opt.m[i];
    ckpt.blocks[prefix + ".v" + std::to_string(i)] = opt.v[i];
  }
}

bool load_adam(const Checkpoint& ckpt, Adam& opt, const std::string& prefix) {
  auto it = ckpt.blocks.find(prefix + ".step");
  if (it == ckpt.blocks.end()) return false;
  opt.step_count = static_cast<int64_t>(it->second[0]);
  opt.m.clear();
  opt.v.clear();
  for (size_t i = 0;; ++i) {
    auto mi = ckpt.blocks.find(prefix + ".m" + std::to_string(i));
    auto vi = ckpt.blocks.find(prefix + ".v" + std::to_string(i));
    if (mi == ckpt.blocks.end() || vi == ckpt.blocks.end()) break;
    opt.m.push_back(mi->second);
    opt.v.push_back(vi->second);
  }
  return true;
}

}  // namespace fk
