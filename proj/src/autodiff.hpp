#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace gicn::ad {

// Dense row-major 2-D tensor of doubles. Scalars are 1x1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(size_t(r) * size_t(c), fill) {}

  static Tensor scalar(double v);
  static Tensor row(const std::vector<double>& v);     // 1 x C
  static Tensor column(const std::vector<double>& v);  // N x 1

  double& at(int r, int c) { return data[size_t(r) * size_t(cols) + size_t(c)]; }
  double at(int r, int c) const { return data[size_t(r) * size_t(cols) + size_t(c)]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  std::string shape_str() const;
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& val() const;
  int rows() const { return val().rows; }
  int cols() const { return val().cols; }
  double scalar() const;  // value of a 1x1 node
};

// Reverse-mode record. Nodes are created in topological order; backward
// walks them once, in reverse.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Seeds d(out)/d(out) = 1 and accumulates gradients into every node that
  // requires them. `out` must be 1x1.
  void backward(Var out);

  const Tensor& value(int id) const;
  const Tensor& grad(int id) const;
  bool requires_grad(int id) const;
  size_t node_count() const { return nodes_.size(); }

  // Op-implementation interface.
  Var make(Tensor value, const std::vector<int>& parents,
           std::function<void(Tape&, int)> back);
  Tensor& grad_buf(int id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    std::vector<int> parents;
    std::function<void(Tape&, int)> back;
    bool needs = false;
    bool grad_ready = false;
  };
  // deque keeps value references stable while new nodes are recorded
  std::deque<Node> nodes_;
};

// ---- primitives ----
// Shape rules: binary elementwise ops accept equal shapes; `add`/`sub` also
// accept a 1xC right operand against RxC (broadcast over the point axis),
// and any op accepts a 1x1 right operand.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var relu(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var pow_const(Var a, double p);  // domain: positive entries for non-integer p
Var clamp(Var a, double lo, double hi);
Var smooth_l1(Var a, double beta);
Var vmin(Var a, Var b);  // elementwise min; gradient routed to the winner, ties to a
Var vmax(Var a, Var b);
Var softmax_rows(Var a);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int c0, int c1);  // half-open [c0, c1)
Var gather_rows(Var a, const std::vector<int>& idx);
Var repeat_rows(Var a, int n);  // a is 1xC
Var max_over_rows(Var a);       // RxC -> 1xC; ties resolved to the lowest row
// Per-row max over neighbor rows: out[i][c] = max over j in nbrs[i] of a[j][c].
Var knn_max(Var a, const std::vector<std::vector<int>>& nbrs);
Var sum_all(Var a);
Var mean_all(Var a);

// Central finite differences against tape gradients; returns the maximum
// over coordinates of |g_ad - g_fd| / max(1, |g_fd|). `f` must map the probe
// leaf to a 1x1 output and be pure given (tape, x).
double gradient_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                      double h = 1e-5);

}  // namespace gicn::ad
