#pragma once

#include <random>
#include <vector>

#include "forgekit/nn.hpp"
#include "forgekit/tensor.hpp"

namespace fk {

// RGB(+mask) view -> voxel feature grid in that camera's frame. A residual
// 2D stack with configurable total stride feeds a depth deprojection (the 2D
// channel axis is folded into (depth, channel)) and one 3D convolution.
struct Encoder {
  struct Stage {
    Conv2dLayer down;    // stride-2
    Conv2dLayer r1, r2;  // residual pair
  };

  int in_ch = 4, stride = 2, d = 16, c2d = 0, cq = 0, c = 8;
  Conv2dLayer stem;
  std::vector<Stage> stages;
  Conv2dLayer head2d;  // -> c2d = d*cq channels
  Conv3dLayer to3d;    // cq -> c

  // c2d must be divisible by d; stride must be a power of two >= 2.
  static Encoder make(int in_ch, int base, int stride, int d, int c2d, int c,
                      std::mt19937_64& rng);

  // [in_ch,H,W] -> [c2d, H/stride, W/stride]
  Tensor backbone(const Tensor& img) const;
  // [c2d,h,w] -> [cq,d,h,w]; 2D channel z*cq+q lands at voxel (z,u,v), q.
  static Tensor deproject(const Tensor& z2d, int d);
  // full path: [in_ch,H,W] -> [c,d,h,w]
  Tensor operator()(const Tensor& img) const;

  void register_params(ParamMap& m, const std::string& prefix) const;
};

}  // namespace fk
