#pragma once

#include <array>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "forgekit/tensor.hpp"

namespace fk {

// Named parameter registry; modules append their weights under a prefix.
using ParamMap = std::map<std::string, Tensor>;

// ---- functional ops ----

// x: [Cin,H,W], w: [Cout,Cin,kh,kw], b: [Cout] (optional, pass undefined).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);
// x: [Cin,D,H,W], w: [Cout,Cin,kd,kh,kw].
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);
Tensor upsample2x_2d(const Tensor& x);  // [C,H,W] -> [C,2H,2W], nearest
Tensor upsample2x_3d(const Tensor& x);  // [C,D,H,W] -> [C,2D,2H,2W]

// Samples grid [C,D,H,W] at continuous voxel-index coordinates pts [N,3]
// ordered (z,y,x). Out-of-range reads are zero. Differentiable in both grid
// and coordinates.
Tensor trilinear_sample(const Tensor& grid, const Tensor& pts);

// Intersects rays with the axis-aligned cube [-half,half]^3 centered at
// `center`. Returns {t_near, t_far}, both [N,1]; for missing rays
// t_far == t_near so downstream segment lengths vanish.
struct RaySegments {
  Tensor t_near, t_far;
};
RaySegments ray_cube_intersect(const Tensor& origins, const Tensor& dirs,
                               real half, const std::array<real, 3>& center);

// ---- layers ----

struct Linear {
  Tensor w, b;  // w: [out,in]
  static Linear make(int in, int out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;  // x: [n,in] -> [n,out]
  void register_params(ParamMap& m, const std::string& prefix) const;
};

struct Conv2dLayer {
  Tensor w, b;
  int stride = 1, pad = 1;
  static Conv2dLayer make(int cin, int cout, int k, int stride, int pad,
                          std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;
  void register_params(ParamMap& m, const std::string& prefix) const;
};

struct Conv3dLayer {
  Tensor w, b;
  int stride = 1, pad = 1;
  static Conv3dLayer make(int cin, int cout, int k, int stride, int pad,
                          std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;
  void register_params(ParamMap& m, const std::string& prefix) const;
};

// Single gated recurrent update over 3D grids; gates are 3x3x3 convolutions
// of [hidden, input] concatenated along channels.
struct ConvGRU3d {
  Conv3dLayer update_gate, reset_gate, candidate;
  static ConvGRU3d make(int channels, std::mt19937_64& rng);
  // h, x: [C,D,H,W] -> new hidden state
  Tensor operator()(const Tensor& h, const Tensor& x) const;
  void register_params(ParamMap& m, const std::string& prefix) const;
};

// Multi-head scaled dot-product attention block with residual connection and
// a per-token feedforward, pre-norm-free (small-scale stability comes from
// the 1/sqrt(d) scaling and residual paths).
struct AttentionBlock {
  Linear wq, wk, wv, wo, ff1, ff2;
  int heads = 4;
  static AttentionBlock make(int dim, int heads, std::mt19937_64& rng);
  // q: [Nq,dim], kv: [Nk,dim] -> [Nq,dim]
  Tensor operator()(const Tensor& q, const Tensor& kv) const;
  void register_params(ParamMap& m, const std::string& prefix) const;
};

// ---- optimization ----

struct Adam {
  real lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step_count = 0;
  std::vector<std::vector<real>> m, v;
  void step(std::vector<Tensor>& params);
  void reset(size_t n_params);
};

std::vector<Tensor> param_list(ParamMap& m);
void zero_grads(ParamMap& m);

}  // namespace fk
