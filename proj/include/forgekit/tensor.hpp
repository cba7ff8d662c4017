#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace fk {

using real = double;
using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node;
using NodeRef = std::shared_ptr<Node>;

// One vertex of the forward-built computation DAG. Creation order (id) is a
// valid topological order, so backward just walks reachable nodes by
// descending id.
struct Node {
  Shape shape;
  std::vector<real> value;
  std::vector<real> grad;
  bool requires_grad = false;
  std::vector<NodeRef> parents;
  std::function<void(Node&)> backprop;  // scatters this->grad into parents
  int64_t id = 0;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
  void ensure_grad();
};

NodeRef make_node(Shape shape, bool requires_grad);

// Value-semantics handle over a graph node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodeRef n) : node_(std::move(n)) {}

  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, real v);
  static Tensor from_data(const Shape& s, std::vector<real> data);
  static Tensor scalar(real v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->numel(); }
  int dim(int i) const;

  real* data() { return node_->value.data(); }
  const real* data() const { return node_->value.data(); }
  std::vector<real>& values() { return node_->value; }
  const std::vector<real>& values() const { return node_->value; }
  real item() const;

  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  bool requires_grad() const { return node_->requires_grad; }
  std::vector<real>& grad() { return node_->grad; }
  const std::vector<real>& grad() const { return node_->grad; }
  void zero_grad();

  NodeRef node() const { return node_; }

 private:
  NodeRef node_;
};

// Runs reverse-mode accumulation from a scalar loss. Gradients of all
// reachable nodes with requires_grad (or with grad-requiring ancestors) are
// accumulated into Node::grad.
void backward(const Tensor& loss);

// ---- elementwise (numpy-style broadcasting on binary ops) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor pow2(const Tensor& a);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, real slope = 0.01);

Tensor add(const Tensor& a, real b);
Tensor sub(const Tensor& a, real b);
Tensor rsub(real a, const Tensor& b);
Tensor mul(const Tensor& a, real b);
Tensor div(const Tensor& a, real b);
Tensor maximum(const Tensor& a, real b);
Tensor minimum(const Tensor& a, real b);

// select: out = mask ? a : b, with mask a plain (non-differentiable) buffer.
Tensor where(const std::vector<char>& mask, const Tensor& a, const Tensor& b);

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_lastdim(const Tensor& a);   // [..., n] -> [..., 1]
Tensor max_lastdim(const Tensor& a);   // subgradient to first argmax
Tensor min_lastdim(const Tensor& a);

// ---- shape ops ----
Tensor reshape(const Tensor& a, const Shape& s);
Tensor narrow(const Tensor& a, int axis, int start, int len);
Tensor concat(const std::vector<Tensor>& ts, int axis);
Tensor transpose2d(const Tensor& a);  // [m,n] -> [n,m]
Tensor detach(const Tensor& a);

// ---- linear algebra / sequence ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n]
Tensor softmax_lastdim(const Tensor& a);
Tensor cumsum_exclusive_lastdim(const Tensor& a);

// ---- stochastic ----
Tensor dropout(const Tensor& a, real p, std::mt19937_64& rng, bool training);

// operators
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, real b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, real b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, real b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, real b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(real a, const Tensor& b) { return mul(b, a); }
inline Tensor operator-(real a, const Tensor& b) { return rsub(a, b); }

}  // namespace fk
