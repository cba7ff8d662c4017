#include "forgekit/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace fk {

namespace {
std::atomic<int64_t> g_next_id{1};
}

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

void Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

NodeRef make_node(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value.assign(static_cast<size_t>(numel(shape)), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  n->id = g_next_id.fetch_add(1);
  return n;
}

Tensor Tensor::zeros(const Shape& s) { return Tensor(make_node(s, false)); }

Tensor Tensor::full(const Shape& s, real v) {
  Tensor t = zeros(s);
  std::fill(t.values().begin(), t.values().end(), v);
  return t;
}

Tensor Tensor::from_data(const Shape& s, std::vector<real> data) {
  if (static_cast<int64_t>(data.size()) != fk::numel(s))
    throw std::invalid_argument("from_data: size mismatch for " + shape_str(s));
  auto n = std::make_shared<Node>();
  n->shape = s;
  n->value = std::move(data);
  n->id = g_next_id.fetch_add(1);
  return Tensor(n);
}

Tensor Tensor::scalar(real v) { return full({1}, v); }

int Tensor::dim(int i) const {
  const Shape& s = node_->shape;
  if (i < 0) i += static_cast<int>(s.size());
  return s[i];
}

real Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item() on non-scalar tensor");
  return node_->value[0];
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

namespace {

bool needs_grad(const Tensor& t) {
  return t.node()->requires_grad || t.node()->backprop != nullptr;
}

Tensor make_result(Shape shape, std::vector<NodeRef> parents) {
  auto n = make_node(std::move(shape), false);
  n->parents = std::move(parents);
  return Tensor(n);
}

}  // namespace

void backward(const Tensor& loss) {
  if (loss.numel() != 1) throw std::logic_error("backward: loss must be scalar");
  // Reachable set via DFS, then process in descending creation id.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](Node* a, Node* b) { return a->id > b->id; });
  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;
  for (Node* n : order) {
    if (!n->backprop) continue;
    if (n->grad.size() != n->value.size()) continue;  // not reached by grads
    for (auto& p : n->parents) p->ensure_grad();
    n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// broadcasting machinery

namespace {

struct BcastPlan {
  Shape out;
  std::vector<int64_t> stride_a, stride_b;  // per out-dim strides (0 = bcast)
};

BcastPlan broadcast_plan(const Shape& a, const Shape& b) {
  const int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
  const int r = std::max(ra, rb);
  BcastPlan p;
  p.out.resize(r);
  p.stride_a.resize(r);
  p.stride_b.resize(r);
  // trailing strides of each input
  std::vector<int64_t> sa(ra), sb(rb);
  int64_t acc = 1;
  for (int i = ra - 1; i >= 0; --i) { sa[i] = acc; acc *= a[i]; }
  acc = 1;
  for (int i = rb - 1; i >= 0; --i) { sb[i] = acc; acc *= b[i]; }
  for (int i = 0; i < r; ++i) {
    const int da = i - (r - ra), db = i - (r - rb);
    const int va = da >= 0 ? a[da] : 1;
    const int vb = db >= 0 ? b[db] : 1;
    if (va != vb && va != 1 && vb != 1)
      throw std::invalid_argument("broadcast mismatch " + shape_str(a) + " vs " +
                                  shape_str(b));
    p.out[i] = std::max(va, vb);
    p.stride_a[i] = (da >= 0 && va != 1) ? sa[da] : 0;
    p.stride_b[i] = (db >= 0 && vb != 1) ? sb[db] : 0;
  }
  return p;
}

// Iterates the broadcast output space, calling f(out_idx, a_idx, b_idx).
template <typename F>
void bcast_foreach(const BcastPlan& p, F&& f) {
  const int r = static_cast<int>(p.out.size());
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0, ib = 0;
  const int64_t n = numel(p.out);
  for (int64_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (int d = r - 1; d >= 0; --d) {
      ++idx[d];
      ia += p.stride_a[d];
      ib += p.stride_b[d];
      if (idx[d] < p.out[d]) break;
      ia -= p.stride_a[d] * p.out[d];
      ib -= p.stride_b[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

using BinFwd = real (*)(real, real);
using BinBwd = void (*)(real a, real b, real g, real& da, real& db);

Tensor binary_op(const Tensor& a, const Tensor& b, BinFwd fwd, BinBwd bwd) {
  BcastPlan plan = broadcast_plan(a.shape(), b.shape());
  Tensor out = make_result(plan.out, {a.node(), b.node()});
  const real* pa = a.data();
  const real* pb = b.data();
  real* po = out.data();
  bcast_foreach(plan, [&](int64_t o, int64_t ia, int64_t ib) {
    po[o] = fwd(pa[ia], pb[ib]);
  });
  if (needs_grad(a) || needs_grad(b)) {
    NodeRef na = a.node(), nb = b.node();
    const bool ga = needs_grad(a), gb = needs_grad(b);
    out.node()->backprop = [plan, na, nb, bwd, ga, gb](Node& self) {
      const real* pa = na->value.data();
      const real* pb = nb->value.data();
      const real* g = self.grad.data();
      real* da = na->grad.data();
      real* db = nb->grad.data();
      bcast_foreach(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        real va = 0, vb = 0;
        bwd(pa[ia], pb[ib], g[o], va, vb);
        if (ga) da[ia] += va;
        if (gb) db[ib] += vb;
      });
    };
  }
  return out;
}

using UnFwd = real (*)(real);
using UnBwd = real (*)(real x, real y, real g);  // returns dx

Tensor unary_op(const Tensor& a, UnFwd fwd, UnBwd bwd) {
  Tensor out = make_result(a.shape(), {a.node()});
  const real* pa = a.data();
  real* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, bwd](Node& self) {
      const real* x = na->value.data();
      const real* y = self.value.data();
      const real* g = self.grad.data();
      real* da = na->grad.data();
      const int64_t n = self.numel();
      for (int64_t i = 0; i < n; ++i) da[i] += bwd(x[i], y[i], g[i]);
    };
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](real x, real y) { return x + y; },
      [](real, real, real g, real& da, real& db) { da = g; db = g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](real x, real y) { return x - y; },
      [](real, real, real g, real& da, real& db) { da = g; db = -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](real x, real y) { return x * y; },
      [](real x, real y, real g, real& da, real& db) { da = g * y; db = g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](real x, real y) { return x / y; },
      [](real x, real y, real g, real& da, real& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](real x, real y) { return x < y ? x : y; },
      [](real x, real y, real g, real& da, real& db) {
        if (x <= y) da = g; else db = g;
      });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](real x, real y) { return x > y ? x : y; },
      [](real x, real y, real g, real& da, real& db) {
        if (x >= y) da = g; else db = g;
      });
}

Tensor pow2(const Tensor& a) {
  return unary_op(
      a, [](real x) { return x * x; },
      [](real x, real, real g) { return 2.0 * x * g; });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      a, [](real x) { return -x; }, [](real, real, real g) { return -g; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](real x) { return std::exp(x); },
      [](real, real y, real g) { return y * g; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, [](real x) { return std::log(x); },
      [](real x, real, real g) { return g / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      a, [](real x) { return std::sqrt(x); },
      [](real, real y, real g) { return g / (2.0 * y); });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, [](real x) { return std::fabs(x); },
      [](real x, real, real g) { return x > 0 ? g : (x < 0 ? -g : 0.0); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, [](real x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](real, real y, real g) { return g * y * (1.0 - y); });
}

Tensor tanh_t(const Tensor& a) {
  return unary_op(
      a, [](real x) { return std::tanh(x); },
      [](real, real y, real g) { return g * (1.0 - y * y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a,
      [](real x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](real x, real, real g) { return g / (1.0 + std::exp(-x)); });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](real x) { return x > 0 ? x : 0.0; },
      [](real x, real, real g) { return x > 0 ? g : 0.0; });
}

Tensor leaky_relu(const Tensor& a, real slope) {
  Tensor out = make_result(a.shape(), {a.node()});
  const real* pa = a.data();
  real* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] > 0 ? pa[i] : slope * pa[i];
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, slope](Node& self) {
      const real* x = na->value.data();
      const real* g = self.grad.data();
      real* da = na->grad.data();
      for (int64_t i = 0; i < self.numel(); ++i)
        da[i] += x[i] > 0 ? g[i] : slope * g[i];
    };
  }
  return out;
}

Tensor add(const Tensor& a, real b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, real b) { return sub(a, Tensor::scalar(b)); }
Tensor rsub(real a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor mul(const Tensor& a, real b) { return mul(a, Tensor::scalar(b)); }
Tensor div(const Tensor& a, real b) { return div(a, Tensor::scalar(b)); }
Tensor maximum(const Tensor& a, real b) { return maximum(a, Tensor::scalar(b)); }
Tensor minimum(const Tensor& a, real b) { return minimum(a, Tensor::scalar(b)); }

Tensor where(const std::vector<char>& mask, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() ||
      static_cast<int64_t>(mask.size()) != a.numel())
    throw std::invalid_argument("where: shape mismatch");
  Tensor out = make_result(a.shape(), {a.node(), b.node()});
  const real* pa = a.data();
  const real* pb = b.data();
  real* po = out.data();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = mask[i] ? pa[i] : pb[i];
  if (needs_grad(a) || needs_grad(b)) {
    NodeRef na = a.node(), nb = b.node();
    const bool ga = needs_grad(a), gb = needs_grad(b);
    out.node()->backprop = [mask, na, nb, ga, gb](Node& self) {
      const real* g = self.grad.data();
      for (int64_t i = 0; i < self.numel(); ++i) {
        if (mask[i]) { if (ga) na->grad[i] += g[i]; }
        else if (gb) nb->grad[i] += g[i];
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
  Tensor out = make_result({1}, {a.node()});
  real acc = 0;
  const real* pa = a.data();
  for (int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
  out.data()[0] = acc;
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na](Node& self) {
      const real g = self.grad[0];
      for (auto& d : na->grad) d += g;
    };
  }
  return out;
}

Tensor mean(const Tensor& a) { return sum(a) / static_cast<real>(a.numel()); }

namespace {

// Shared scaffolding for [..., n] -> [..., 1] reductions.
template <typename FwdF, typename BwdF>
Tensor lastdim_reduce(const Tensor& a, FwdF fwd, BwdF bwd) {
  Shape s = a.shape();
  const int n = s.back();
  s.back() = 1;
  Tensor out = make_result(s, {a.node()});
  const int64_t rows = a.numel() / n;
  const real* pa = a.data();
  real* po = out.data();
  for (int64_t r = 0; r < rows; ++r) po[r] = fwd(pa + r * n, n);
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, n, rows, bwd](Node& self) {
      for (int64_t r = 0; r < rows; ++r)
        bwd(na->value.data() + r * n, self.value[r], self.grad[r],
            na->grad.data() + r * n, n);
    };
  }
  return out;
}

}  // namespace

Tensor sum_lastdim(const Tensor& a) {
  return lastdim_reduce(
      a,
      [](const real* x, int n) {
        real acc = 0;
        for (int i = 0; i < n; ++i) acc += x[i];
        return acc;
      },
      [](const real*, real, real g, real* dx, int n) {
        for (int i = 0; i < n; ++i) dx[i] += g;
      });
}

Tensor max_lastdim(const Tensor& a) {
  return lastdim_reduce(
      a,
      [](const real* x, int n) {
        real m = x[0];
        for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
        return m;
      },
      [](const real* x, real y, real g, real* dx, int n) {
        for (int i = 0; i < n; ++i)
          if (x[i] == y) { dx[i] += g; break; }
      });
}

Tensor min_lastdim(const Tensor& a) {
  return lastdim_reduce(
      a,
      [](const real* x, int n) {
        real m = x[0];
        for (int i = 1; i < n; ++i) m = std::min(m, x[i]);
        return m;
      },
      [](const real* x, real y, real g, real* dx, int n) {
        for (int i = 0; i < n; ++i)
          if (x[i] == y) { dx[i] += g; break; }
      });
}

// ---------------------------------------------------------------------------
// shape ops

Tensor reshape(const Tensor& a, const Shape& s) {
  Shape target = s;
  int64_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == -1) infer = static_cast<int>(i);
    else known *= target[i];
  }
  if (infer >= 0) target[infer] = static_cast<int>(a.numel() / known);
  if (fk::numel(target) != a.numel())
    throw std::invalid_argument("reshape: numel mismatch " + shape_str(a.shape()) +
                                " -> " + shape_str(s));
  Tensor out = make_result(target, {a.node()});
  out.node()->value = a.node()->value;
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na](Node& self) {
      for (int64_t i = 0; i < self.numel(); ++i) na->grad[i] += self.grad[i];
    };
  }
  return out;
}

Tensor narrow(const Tensor& a, int axis, int start, int len) {
  Shape s = a.shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (start < 0 || start + len > s[axis])
    throw std::out_of_range("narrow: bad range");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const int64_t full = s[axis];
  s[axis] = len;
  Tensor out = make_result(s, {a.node()});
  const real* pa = a.data();
  real* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(pa + (o * full + start) * inner, pa + (o * full + start + len) * inner,
              po + o * len * inner);
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, outer, inner, full, start, len](Node& self) {
      for (int64_t o = 0; o < outer; ++o) {
        const real* g = self.grad.data() + o * len * inner;
        real* dg = na->grad.data() + (o * full + start) * inner;
        for (int64_t i = 0; i < len * inner; ++i) dg[i] += g[i];
      }
    };
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& ts, int axis) {
  if (ts.empty()) throw std::invalid_argument("concat: empty");
  Shape s = ts[0].shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  int total = 0;
  for (const auto& t : ts) {
    Shape o = t.shape();
    o[axis] = s[axis];
    if (o != s) throw std::invalid_argument("concat: shape mismatch");
    total += t.shape()[axis];
  }
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  s[axis] = total;
  std::vector<NodeRef> parents;
  for (const auto& t : ts) parents.push_back(t.node());
  Tensor out = make_result(s, parents);
  real* po = out.data();
  int offset = 0;
  std::vector<int> lens;
  for (const auto& t : ts) {
    const int len = t.shape()[axis];
    lens.push_back(len);
    const real* pa = t.data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pa + o * len * inner, pa + (o + 1) * len * inner,
                po + (o * total + offset) * inner);
    offset += len;
  }
  bool any = false;
  for (const auto& t : ts) any = any || needs_grad(t);
  if (any) {
    out.node()->backprop = [parents, lens, outer, inner, total](Node& self) {
      int offset = 0;
      for (size_t k = 0; k < parents.size(); ++k) {
        const int len = lens[k];
        for (int64_t o = 0; o < outer; ++o) {
          const real* g = self.grad.data() + (o * total + offset) * inner;
          real* dg = parents[k]->grad.data() + o * len * inner;
          for (int64_t i = 0; i < len * inner; ++i) dg[i] += g[i];
        }
        offset += len;
      }
    };
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.shape().size() != 2) throw std::invalid_argument("transpose2d: rank != 2");
  const int m = a.shape()[0], n = a.shape()[1];
  Tensor out = make_result({n, m}, {a.node()});
  const real* pa = a.data();
  real* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) po[j * m + i] = pa[i * n + j];
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, m, n](Node& self) {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) na->grad[i * n + j] += self.grad[j * m + i];
    };
  }
  return out;
}

Tensor detach(const Tensor& a) {
  return Tensor::from_data(a.shape(), a.node()->value);
}

// ---------------------------------------------------------------------------
// matmul / softmax / cumsum

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: bad shapes " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = make_result({m, n}, {a.node(), b.node()});
  const real* pa = a.data();
  const real* pb = b.data();
  real* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const real av = pa[i * k + p];
      if (av == 0.0) continue;
      const real* brow = pb + p * n;
      real* orow = po + i * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  if (needs_grad(a) || needs_grad(b)) {
    NodeRef na = a.node(), nb = b.node();
    const bool ga = needs_grad(a), gb = needs_grad(b);
    out.node()->backprop = [na, nb, m, k, n, ga, gb](Node& self) {
      const real* g = self.grad.data();
      const real* pa = na->value.data();
      const real* pb = nb->value.data();
      if (ga) {
        real* da = na->grad.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            real acc = 0;
            const real* grow = g + i * n;
            const real* brow = pb + p * n;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            da[i * k + p] += acc;
          }
      }
      if (gb) {
        real* db = nb->grad.data();
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            const real av = pa[i * k + p];
            if (av == 0.0) continue;
            const real* grow = g + i * n;
            real* brow = db + p * n;
            for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
      }
    };
  }
  return out;
}

Tensor softmax_lastdim(const Tensor& a) {
  const int n = a.shape().back();
  const int64_t rows = a.numel() / n;
  Tensor out = make_result(a.shape(), {a.node()});
  const real* pa = a.data();
  real* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const real* x = pa + r * n;
    real* y = po + r * n;
    real m = x[0];
    for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
    real z = 0;
    for (int i = 0; i < n; ++i) { y[i] = std::exp(x[i] - m); z += y[i]; }
    for (int i = 0; i < n; ++i) y[i] /= z;
  }
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, n, rows](Node& self) {
      for (int64_t r = 0; r < rows; ++r) {
        const real* y = self.value.data() + r * n;
        const real* g = self.grad.data() + r * n;
        real* dx = na->grad.data() + r * n;
        real dot = 0;
        for (int i = 0; i < n; ++i) dot += g[i] * y[i];
        for (int i = 0; i < n; ++i) dx[i] += y[i] * (g[i] - dot);
      }
    };
  }
  return out;
}

Tensor cumsum_exclusive_lastdim(const Tensor& a) {
  const int n = a.shape().back();
  const int64_t rows = a.numel() / n;
  Tensor out = make_result(a.shape(), {a.node()});
  const real* pa = a.data();
  real* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    real acc = 0;
    for (int i = 0; i < n; ++i) {
      po[r * n + i] = acc;
      acc += pa[r * n + i];
    }
  }
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, n, rows](Node& self) {
      for (int64_t r = 0; r < rows; ++r) {
        real acc = 0;
        for (int i = n - 1; i >= 0; --i) {
          na->grad[r * n + i] += acc;
          acc += self.grad[r * n + i];
        }
      }
    };
  }
  return out;
}

Tensor dropout(const Tensor& a, real p, std::mt19937_64& rng, bool training) {
  if (!training || p <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<char> mask(a.numel());
  for (auto& m : mask) m = keep(rng) ? 1 : 0;
  const real scale = 1.0 / (1.0 - p);
  Tensor out = make_result(a.shape(), {a.node()});
  const real* pa = a.data();
  real* po = out.data();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = mask[i] ? pa[i] * scale : 0.0;
  if (needs_grad(a)) {
    NodeRef na = a.node();
    out.node()->backprop = [na, mask, scale](Node& self) {
      for (int64_t i = 0; i < self.numel(); ++i)
        if (mask[i]) na->grad[i] += self.grad[i] * scale;
    };
  }
  return out;
}

}  // namespace fk
