#pragma once

#include <map>
#include <string>
#include <vector>

#include "forgekit/nn.hpp"
#include "forgekit/tensor.hpp"

namespace fk {

// Versioned binary container of named f64 blocks: module weights plus
// optimizer state. Layout: magic "FKC1", u32 version, u32 stage, u32 hash
// length + config-hash bytes, u64 block count, then per block u32 name
// length, name, u64 value count, f64 little-endian values.
struct Checkpoint {
  uint32_t version = 1;
  uint32_t stage = 0;
  std::string config_hash;
  std::map<std::string, std::vector<real>> blocks;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copies every parameter tensor into a same-named block / back. Loading
// throws on a missing or missized block, and on config-hash mismatch when
// `expect_hash` is non-empty.
void store_params(Checkpoint& ckpt, const ParamMap& params);
void load_params(const Checkpoint& ckpt, ParamMap& params,
                 const std::string& expect_hash = "");

// Optimizer state rides along as "<prefix>.m<i>" / "<prefix>.v<i>" blocks
// plus a "<prefix>.step" scalar.
void store_adam(Checkpoint& ckpt, const Adam& opt, const std::string& prefix);
bool load_adam(const Checkpoint& ckpt, Adam& opt, const std::string& prefix);

}  // namespace fk
