#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "forgekit/tensor.hpp"

namespace fktest {

// Central finite differences against reverse-mode gradients. `build` must
// construct a fresh scalar loss from the current values of `inputs`.
// Returns the maximum relative error over all checked coordinates.
inline double grad_check(
    std::vector<fk::Tensor> inputs,
    const std::function<fk::Tensor(std::vector<fk::Tensor>&)>& build,
    double step = 1e-5, int max_coords_per_input = -1,
    unsigned sample_seed = 1234) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  fk::Tensor loss = build(inputs);
  fk::backward(loss);

  std::mt19937 rng(sample_seed);
  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<int64_t> coords(t.numel());
    for (int64_t i = 0; i < t.numel(); ++i) coords[i] = i;
    if (max_coords_per_input > 0 &&
        static_cast<int64_t>(coords.size()) > max_coords_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_input);
    }
    for (int64_t i : coords) {
      const double orig = t.data()[i];
      t.data()[i] = orig + step;
      const double fp = build(inputs).item();
      t.data()[i] = orig - step;
      const double fm = build(inputs).item();
      t.data()[i] = orig;
      const double fd = (fp - fm) / (2 * step);
      const double an = t.grad()[i];
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
      worst = std::max(worst, std::fabs(fd - an) / denom);
    }
  }
  return worst;
}

inline fk::Tensor random_tensor(const fk::Shape& s, std::mt19937_64& rng,
                                double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(static_cast<size_t>(fk::numel(s)));
  for (auto& v : data) v = dist(rng);
  return fk::Tensor::from_data(s, std::move(data));
}

}  // namespace fktest
