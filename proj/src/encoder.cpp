#include "forgekit/encoder.hpp"

#include <stdexcept>

namespace fk {

Encoder Encoder::make(int in_ch, int base, int stride, int d, int c2d, int c,
                      std::mt19937_64& rng) {
  if (c2d % d != 0)
    throw std::invalid_argument("encoder: backbone channels not divisible by depth");
  int n_stages = 0;
  for (int s = stride; s > 1; s /= 2) {
    if (s % 2 != 0) throw std::invalid_argument("encoder: stride not a power of two");
    ++n_stages;
  }
  if (n_stages == 0) throw std::invalid_argument("encoder: stride must be >= 2");

  Encoder e;
  e.in_ch = in_ch;
  e.stride = stride;
  e.d = d;
  e.c2d = c2d;
  e.cq = c2d / d;
  e.c = c;
  e.stem = Conv2dLayer::make(in_ch, base, 3, 1, 1, rng);
  int w = base;
  for (int i = 0; i < n_stages; ++i) {
    Stage st;
    int wn = w * 2;
    st.down = Conv2dLayer::make(w, wn, 3, 2, 1, rng);
    st.r1 = Conv2dLayer::make(wn, wn, 3, 1, 1, rng);
    st.r2 = Conv2dLayer::make(wn, wn, 3, 1, 1, rng);
    e.stages.push_back(st);
    w = wn;
  }
  e.head2d = Conv2dLayer::make(w, c2d, 3, 1, 1, rng);
  e.to3d = Conv3dLayer::make(e.cq, c, 3, 1, 1, rng);
  return e;
}

Tensor Encoder::backbone(const Tensor& img) const {
  if (img.dim(0) != in_ch || img.dim(1) != img.dim(2))
    throw std::invalid_argument("encoder: bad input shape");
  Tensor x = leaky_relu(stem(img));
  for (const auto& st : stages) {
    x = leaky_relu(st.down(x));
    Tensor h = leaky_relu(st.r1(x));
    x = leaky_relu(st.r2(h) + x);
  }
  return head2d(x);
}

Tensor Encoder::deproject(const Tensor& z2d, int d) {
  const int c2d = z2d.dim(0), h = z2d.dim(1), w = z2d.dim(2);
  if (c2d % d != 0) throw std::invalid_argument("deproject: channels % d != 0");
  const int cq = c2d / d;
  std::vector<Tensor> slabs;
  slabs.reserve(d);
  for (int z = 0; z < d; ++z)
    slabs.push_back(reshape(narrow(z2d, 0, z * cq, cq), {cq, 1, h, w}));
  return concat(slabs, 1);  // [cq,d,h,w]
}

Tensor Encoder::operator()(const Tensor& img) const {
  return to3d(deproject(backbone(img), d));
}

void Encoder::register_params(ParamMap& m, const std::string& prefix) const {
  stem.register_params(m, prefix + ".stem");
  for (size_t i = 0; i < stages.size(); ++i) {
    const std::string p = prefix + ".s" + std::to_string(i);
    stages[i].down.register_params(m, p + ".down");
    stages[i].r1.register_params(m, p + ".r1");
    stages[i].r2.register_params(m, p + ".r2");
  }
  head2d.register_params(m, prefix + ".head2d");
  to3d.register_params(m, prefix + ".to3d");
}

}  // namespace fk
