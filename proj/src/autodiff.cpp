#include "autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "errors.hpp"

namespace gicn::ad {

Tensor Tensor::scalar(double v) {
  Tensor t(1, 1);
  t.data[0] = v;
  return t;
}

Tensor Tensor::row(const std::vector<double>& v) {
  Tensor t(1, int(v.size()));
  t.data = v;
  return t;
}

Tensor Tensor::column(const std::vector<double>& v) {
  Tensor t(int(v.size()), 1);
  t.data = v;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

const Tensor& Var::val() const { return tape->value(id); }

double Var::scalar() const {
  const Tensor& t = val();
  if (t.rows != 1 || t.cols != 1)
    throw std::invalid_argument("Var::scalar: node is " + t.shape_str() + ", not 1x1");
  return t.data[0];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.needs = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, int(nodes_.size()) - 1};
}

Var Tape::make(Tensor value, const std::vector<int>& parents,
               std::function<void(Tape&, int)> back) {
  Node n;
  n.value = std::move(value);
  n.parents = parents;
  for (int p : parents) n.needs = n.needs || nodes_[size_t(p)].needs;
  if (n.needs) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, int(nodes_.size()) - 1};
}

const Tensor& Tape::value(int id) const { return nodes_[size_t(id)].value; }

const Tensor& Tape::grad(int id) const {
  const Node& n = nodes_[size_t(id)];
  if (!n.grad_ready)
    throw std::logic_error("Tape::grad: no gradient recorded for this node");
  return n.grad;
}

bool Tape::requires_grad(int id) const { return nodes_[size_t(id)].needs; }

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[size_t(id)];
  if (!n.grad_ready) {
    n.grad = Tensor(n.value.rows, n.value.cols, 0.0);
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::backward(Var out) {
  const Tensor& ov = value(out.id);
  if (ov.rows != 1 || ov.cols != 1)
    throw std::invalid_argument("Tape::backward: output is " + ov.shape_str() + ", not 1x1");
  for (Node& n : nodes_) {
    n.grad_ready = false;
    n.grad = Tensor();
  }
  grad_buf(out.id).data[0] = 1.0;
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[size_t(id)];
    if (n.needs && n.grad_ready && n.back) n.back(*this, id);
  }
  // leaves that require a gradient but were never reached get zeros
  for (Node& n : nodes_) {
    if (n.needs && !n.grad_ready) {
      n.grad = Tensor(n.value.rows, n.value.cols, 0.0);
      n.grad_ready = true;
    }
  }
}

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
}

enum class Broadcast { None, Row, Scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, bool allow_row,
                         const char* op) {
  if (a.same_shape(b)) return Broadcast::None;
  if (b.rows == 1 && b.cols == 1) return Broadcast::Scalar;
  if (allow_row && b.rows == 1 && b.cols == a.cols) return Broadcast::Row;
  shape_error(op, a, b);
}

// Reduce an RxC gradient onto a broadcast right operand.
void reduce_into(Tensor& dst, const Tensor& g, Broadcast kind, double sign) {
  if (kind == Broadcast::None) {
    for (size_t i = 0; i < g.size(); ++i) dst.data[i] += sign * g.data[i];
  } else if (kind == Broadcast::Row) {
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) dst.data[size_t(c)] += sign * g.at(r, c);
  } else {
    double s = 0;
    for (double v : g.data) s += v;
    dst.data[0] += sign * s;
  }
}

double bval(const Tensor& b, int r, int c, Broadcast kind) {
  if (kind == Broadcast::None) return b.at(r, c);
  if (kind == Broadcast::Row) return b.at(0, c);
  return b.data[0];
}

// Elementwise unary helper: forward map + local derivative from (x, y).
Var unary_op(Var a, const char* /*name*/, const std::function<double(double)>& f,
             const std::function<double(double, double)>& dfdx) {
  const Tensor& av = a.val();
  Tensor out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.data[i] = f(av.data[i]);
  int aid = a.id;
  return a.tape->make(std::move(out), {aid}, [aid, dfdx](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(aid);
    const Tensor& y = t.value(self);
    if (!t.requires_grad(aid)) return;
    Tensor& da = t.grad_buf(aid);
    for (size_t i = 0; i < g.size(); ++i)
      da.data[i] += g.data[i] * dfdx(x.data[i], y.data[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (av.cols != bv.rows) shape_error("matmul", av, bv);
  Tensor out(av.rows, bv.cols, 0.0);
  for (int i = 0; i < av.rows; ++i) {
    const double* arow = &av.data[size_t(i) * size_t(av.cols)];
    double* orow = &out.data[size_t(i) * size_t(out.cols)];
    for (int k = 0; k < av.cols; ++k) {
      double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &bv.data[size_t(k) * size_t(bv.cols)];
      for (int j = 0; j < bv.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  int aid = a.id, bid = b.id;
  return a.tape->make(std::move(out), {aid, bid}, [aid, bid](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& av2 = t.value(aid);
    const Tensor& bv2 = t.value(bid);
    if (t.requires_grad(aid)) {  // dA = g . B^T
      Tensor& da = t.grad_buf(aid);
      for (int i = 0; i < av2.rows; ++i)
        for (int j = 0; j < bv2.cols; ++j) {
          double gij = g.at(i, j);
          if (gij == 0.0) continue;
          for (int k = 0; k < av2.cols; ++k) da.at(i, k) += gij * bv2.at(k, j);
        }
    }
    if (t.requires_grad(bid)) {  // dB = A^T . g
      Tensor& db = t.grad_buf(bid);
      for (int i = 0; i < av2.rows; ++i)
        for (int k = 0; k < av2.cols; ++k) {
          double aik = av2.at(i, k);
          if (aik == 0.0) continue;
          for (int j = 0; j < bv2.cols; ++j) db.at(k, j) += aik * g.at(i, j);
        }
    }
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Broadcast kind = broadcast_kind(av, bv, true, "add");
  Tensor out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c) + bval(bv, r, c, kind);
  int aid = a.id, bid = b.id;
  return a.tape->make(std::move(out), {aid, bid}, [aid, bid, kind](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(aid)) reduce_into(t.grad_buf(aid), g, Broadcast::None, 1.0);
    if (t.requires_grad(bid)) reduce_into(t.grad_buf(bid), g, kind, 1.0);
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Broadcast kind = broadcast_kind(av, bv, true, "sub");
  Tensor out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c) - bval(bv, r, c, kind);
  int aid = a.id, bid = b.id;
  return a.tape->make(std::move(out), {aid, bid}, [aid, bid, kind](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(aid)) reduce_into(t.grad_buf(aid), g, Broadcast::None, 1.0);
    if (t.requires_grad(bid)) reduce_into(t.grad_buf(bid), g, kind, -1.0);
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Broadcast kind = broadcast_kind(av, bv, false, "mul");
  Tensor out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c) * bval(bv, r, c, kind);
  int aid = a.id, bid = b.id;
  return a.tape->make(std::move(out), {aid, bid}, [aid, bid, kind](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& av2 = t.value(aid);
    const Tensor& bv2 = t.value(bid);
    if (t.requires_grad(aid)) {
      Tensor& da = t.grad_buf(aid);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) da.at(r, c) += g.at(r, c) * bval(bv2, r, c, kind);
    }
    if (t.requires_grad(bid)) {
      Tensor& db = t.grad_buf(bid);
      if (kind == Broadcast::None) {
        for (size_t i = 0; i < g.size(); ++i) db.data[i] += g.data[i] * av2.data[i];
      } else {  // scalar
        double s = 0;
        for (size_t i = 0; i < g.size(); ++i) s += g.data[i] * av2.data[i];
        db.data[0] += s;
      }
    }
  });
}

Var div(Var a, Var b) {
  check_same_tape(a, b, "div");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Broadcast kind = broadcast_kind(av, bv, false, "div");
  Tensor out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c) / bval(bv, r, c, kind);
  int aid = a.id, bid = b.id;
  return a.tape->make(std::move(out), {aid, bid}, [aid, bid, kind](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& av2 = t.value(aid);
    const Tensor& bv2 = t.value(bid);
    if (t.requires_grad(aid)) {
      Tensor& da = t.grad_buf(aid);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) da.at(r, c) += g.at(r, c) / bval(bv2, r, c, kind);
    }
    if (t.requires_grad(bid)) {
      Tensor& db = t.grad_buf(bid);
      if (kind == Broadcast::None) {
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) {
            double bb = bv2.at(r, c);
            db.at(r, c) += -g.at(r, c) * av2.at(r, c) / (bb * bb);
          }
      } else {
        double bb = bv2.data[0];
        double s = 0;
        for (size_t i = 0; i < g.size(); ++i) s += -g.data[i] * av2.data[i] / (bb * bb);
        db.data[0] += s;
      }
    }
  });
}

Var scale(Var a, double c) {
  return unary_op(a, "scale", [c](double x) { return c * x; },
                  [c](double, double) { return c; });
}

Var add_const(Var a, double c) {
  return unary_op(a, "add_const", [c](double x) { return x + c; },
                  [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary_op(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
                  [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary_op(a, "sigmoid",
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary_op(a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Var pow_const(Var a, double p) {
  return unary_op(a, "pow_const", [p](double x) { return std::pow(x, p); },
                  [p](double x, double) { return p == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); });
}

Var clamp(Var a, double lo, double hi) {
  return unary_op(a, "clamp",
                  [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
                  [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var smooth_l1(Var a, double beta) {
  return unary_op(a, "smooth_l1",
                  [beta](double x) {
                    double ax = std::fabs(x);
                    return ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta;
                  },
                  [beta](double x, double) {
                    return std::fabs(x) < beta ? x / beta : (x > 0 ? 1.0 : -1.0);
                  });
}

namespace {

Var minmax_op(Var a, Var b, bool take_min, const char* name) {
  check_same_tape(a, b, name);
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (!av.same_shape(bv)) shape_error(name, av, bv);
  Tensor out(av.rows, av.cols);
  // winner mask: 1 when a is selected (ties go to a)
  std::vector<char> a_wins(av.size());
  for (size_t i = 0; i < av.size(); ++i) {
    bool sel_a = take_min ? (av.data[i] <= bv.data[i]) : (av.data[i] >= bv.data[i]);
    a_wins[i] = sel_a ? 1 : 0;
    out.data[i] = sel_a ? av.data[i] : bv.data[i];
  }
  int aid = a.id, bid = b.id;
  return a.tape->make(std::move(out), {aid, bid},
                      [aid, bid, a_wins = std::move(a_wins)](Tape& t, int self) {
                        const Tensor& g = t.grad(self);
                        if (t.requires_grad(aid)) {
                          Tensor& da = t.grad_buf(aid);
                          for (size_t i = 0; i < g.size(); ++i)
                            if (a_wins[i]) da.data[i] += g.data[i];
                        }
                        if (t.requires_grad(bid)) {
                          Tensor& db = t.grad_buf(bid);
                          for (size_t i = 0; i < g.size(); ++i)
                            if (!a_wins[i]) db.data[i] += g.data[i];
                        }
                      });
}

}  // namespace

Var vmin(Var a, Var b) { return minmax_op(a, b, true, "vmin"); }
Var vmax(Var a, Var b) { return minmax_op(a, b, false, "vmax"); }

Var softmax_rows(Var a) {
  const Tensor& av = a.val();
  Tensor out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r) {
    double mx = av.at(r, 0);
    for (int c = 1; c < av.cols; ++c) mx = std::max(mx, av.at(r, c));
    double sum = 0;
    for (int c = 0; c < av.cols; ++c) {
      double e = std::exp(av.at(r, c) - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < av.cols; ++c) out.at(r, c) /= sum;
  }
  int aid = a.id;
  return a.tape->make(std::move(out), {aid}, [aid](Tape& t, int self) {
    if (!t.requires_grad(aid)) return;
    const Tensor& g = t.grad(self);
    const Tensor& s = t.value(self);
    Tensor& da = t.grad_buf(aid);
    for (int r = 0; r < s.rows; ++r) {
      double dot = 0;
      for (int c = 0; c < s.cols; ++c) dot += g.at(r, c) * s.at(r, c);
      for (int c = 0; c < s.cols; ++c)
        da.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

Var concat_cols(Var a, Var b) {
  check_same_tape(a, b, "concat_cols");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (av.rows != bv.rows) shape_error("concat_cols", av, bv);
  Tensor out(av.rows, av.cols + bv.cols);
  for (int r = 0; r < av.rows; ++r) {
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c);
    for (int c = 0; c < bv.cols; ++c) out.at(r, av.cols + c) = bv.at(r, c);
  }
  int aid = a.id, bid = b.id;
  int acols = av.cols, bcols = bv.cols;
  return a.tape->make(std::move(out), {aid, bid}, [aid, bid, acols, bcols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(aid)) {
      Tensor& da = t.grad_buf(aid);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < acols; ++c) da.at(r, c) += g.at(r, c);
    }
    if (t.requires_grad(bid)) {
      Tensor& db = t.grad_buf(bid);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < bcols; ++c) db.at(r, c) += g.at(r, acols + c);
    }
  });
}

Var slice_cols(Var a, int c0, int c1) {
  const Tensor& av = a.val();
  if (c0 < 0 || c1 > av.cols || c0 >= c1)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(c0) + ", " +
                                std::to_string(c1) + ") out of " + av.shape_str());
  Tensor out(av.rows, c1 - c0);
  for (int r = 0; r < av.rows; ++r)
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = av.at(r, c);
  int aid = a.id;
  return a.tape->make(std::move(out), {aid}, [aid, c0](Tape& t, int self) {
    if (!t.requires_grad(aid)) return;
    const Tensor& g = t.grad(self);
    Tensor& da = t.grad_buf(aid);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) da.at(r, c0 + c) += g.at(r, c);
  });
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  const Tensor& av = a.val();
  for (int i : idx)
    if (i < 0 || i >= av.rows)
      throw std::invalid_argument("gather_rows: index " + std::to_string(i) +
                                  " out of " + av.shape_str());
  Tensor out(int(idx.size()), av.cols);
  for (size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < av.cols; ++c) out.at(int(r), c) = av.at(idx[r], c);
  int aid = a.id;
  return a.tape->make(std::move(out), {aid}, [aid, idx](Tape& t, int self) {
    if (!t.requires_grad(aid)) return;
    const Tensor& g = t.grad(self);
    Tensor& da = t.grad_buf(aid);
    for (size_t r = 0; r < idx.size(); ++r)
      for (int c = 0; c < g.cols; ++c) da.at(idx[r], c) += g.at(int(r), c);
  });
}

Var repeat_rows(Var a, int n) {
  const Tensor& av = a.val();
  if (av.rows != 1) throw std::invalid_argument("repeat_rows: input is " + av.shape_str() + ", not 1xC");
  Tensor out(n, av.cols);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(0, c);
  int aid = a.id;
  return a.tape->make(std::move(out), {aid}, [aid](Tape& t, int self) {
    if (!t.requires_grad(aid)) return;
    const Tensor& g = t.grad(self);
    Tensor& da = t.grad_buf(aid);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) da.at(0, c) += g.at(r, c);
  });
}

Var max_over_rows(Var a) {
  const Tensor& av = a.val();
  if (av.rows < 1) throw std::invalid_argument("max_over_rows: empty input");
  Tensor out(1, av.cols);
  std::vector<int> argmax(size_t(av.cols), 0);
  for (int c = 0; c < av.cols; ++c) {
    double best = av.at(0, c);
    int bi = 0;
    for (int r = 1; r < av.rows; ++r) {
      if (av.at(r, c) > best) {
        best = av.at(r, c);
        bi = r;
      }
    }
    out.at(0, c) = best;
    argmax[size_t(c)] = bi;
  }
  int aid = a.id;
  return a.tape->make(std::move(out), {aid},
                      [aid, argmax = std::move(argmax)](Tape& t, int self) {
                        if (!t.requires_grad(aid)) return;
                        const Tensor& g = t.grad(self);
                        Tensor& da = t.grad_buf(aid);
                        for (int c = 0; c < g.cols; ++c)
                          da.at(argmax[size_t(c)], c) += g.at(0, c);
                      });
}

Var knn_max(Var a, const std::vector<std::vector<int>>& nbrs) {
  const Tensor& av = a.val();
  if (int(nbrs.size()) != av.rows)
    throw std::invalid_argument("knn_max: neighbor list rows " + std::to_string(nbrs.size()) +
                                " vs input " + av.shape_str());
  Tensor out(av.rows, av.cols);
  std::vector<int> argmax(av.size(), 0);
  for (int i = 0; i < av.rows; ++i) {
    if (nbrs[size_t(i)].empty()) throw std::invalid_argument("knn_max: empty neighbor list");
    for (int c = 0; c < av.cols; ++c) {
      int bi = nbrs[size_t(i)][0];
      double best = av.at(bi, c);
      for (size_t k = 1; k < nbrs[size_t(i)].size(); ++k) {
        int j = nbrs[size_t(i)][k];
        if (av.at(j, c) > best) {
          best = av.at(j, c);
          bi = j;
        }
      }
      out.at(i, c) = best;
      argmax[size_t(i) * size_t(av.cols) + size_t(c)] = bi;
    }
  }
  int aid = a.id;
  return a.tape->make(std::move(out), {aid},
                      [aid, argmax = std::move(argmax)](Tape& t, int self) {
                        if (!t.requires_grad(aid)) return;
                        const Tensor& g = t.grad(self);
                        Tensor& da = t.grad_buf(aid);
                        for (int i = 0; i < g.rows; ++i)
                          for (int c = 0; c < g.cols; ++c)
                            da.at(argmax[size_t(i) * size_t(g.cols) + size_t(c)], c) +=
                                g.at(i, c);
                      });
}

Var sum_all(Var a) {
  const Tensor& av = a.val();
  double s = 0;
  for (double v : av.data) s += v;
  int aid = a.id;
  return a.tape->make(Tensor::scalar(s), {aid}, [aid](Tape& t, int self) {
    if (!t.requires_grad(aid)) return;
    double g = t.grad(self).data[0];
    Tensor& da = t.grad_buf(aid);
    for (double& v : da.data) v += g;
  });
}

Var mean_all(Var a) {
  const Tensor& av = a.val();
  double s = 0;
  for (double v : av.data) s += v;
  double inv = 1.0 / double(av.size());
  int aid = a.id;
  return a.tape->make(Tensor::scalar(s * inv), {aid}, [aid, inv](Tape& t, int self) {
    if (!t.requires_grad(aid)) return;
    double g = t.grad(self).data[0] * inv;
    Tensor& da = t.grad_buf(aid);
    for (double& v : da.data) v += g;
  });
}

double gradient_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                      double h) {
  Tape tape;
  Var xv = tape.leaf(x, true);
  Var y = f(tape, xv);
  if (!y.val().all_finite()) throw NumericError("gradient_check: non-finite forward value");
  tape.backward(y);
  Tensor g_ad = tape.grad(xv.id);
  if (!g_ad.all_finite()) throw NumericError("gradient_check: non-finite tape gradient");

  auto eval = [&](const Tensor& probe) {
    Tape t2;
    Var p = t2.leaf(probe, false);
    return f(t2, p).scalar();
  };

  double worst = 0.0;
  Tensor probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    double orig = probe.data[i];
    probe.data[i] = orig + h;
    double fp = eval(probe);
    probe.data[i] = orig - h;
    double fm = eval(probe);
    probe.data[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("gradient_check: non-finite finite-difference value");
    double g_fd = (fp - fm) / (2.0 * h);
    double err = std::fabs(g_ad.data[i] - g_fd) / std::max(1.0, std::fabs(g_fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace gicn::ad
