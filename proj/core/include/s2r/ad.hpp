#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "s2r/tensor.hpp"

namespace s2r::ad {

// Dense 3-D double tensor used inside the differentiation engine. Public
// APIs exchange float32 ImageTensors; the engine computes in double so that
// reductions and gradients are clean against scalar-loop oracles.
struct Tensor {
  std::vector<double> v;
  int c = 0, h = 0, w = 0;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, double fill = 0.0)
      : v(static_cast<size_t>(c_) * h_ * w_, fill), c(c_), h(h_), w(w_) {}

  static Tensor from_image(const ImageTensor& img);
  ImageTensor to_image(ValueDomain domain) const;

  size_t size() const { return v.size(); }
  double& at(int ci, int ri, int wi) {
    return v[(static_cast<size_t>(ci) * h + ri) * w + wi];
  }
  double at(int ci, int ri, int wi) const {
    return v[(static_cast<size_t>(ci) * h + ri) * w + wi];
  }
  bool same_dims(const Tensor& o) const {
    return c == o.c && h == o.h && w == o.w;
  }
};

// Normalized 2-D Gaussian, used as the SSIM window.
Tensor gaussian_window(int size, double sigma);

class Tape;

// Handle to a node on a Tape. Cheap to copy; owns nothing.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  const Tensor& val() const;
  const Tensor& grad() const;
  double scalar() const;  // value of a 1x1x1 node
  int channels() const { return val().c; }
  int rows() const { return val().h; }
  int cols() const { return val().w; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Eager reverse-mode tape. Ops compute values immediately and, when
// grad_enabled, record closures that scatter cotangents back to their
// inputs. Creation order is the topological order, so backward() is a
// single reverse sweep. All ops are sequential and deterministic.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

  Var input(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return input(std::move(value), false); }
  Var scalar_input(double s);

  // -- network primitives ------------------------------------------------
  // x: (ic,h,w); w: (oc, ic, kh*kw) flattened row-major (oc,ic,kh,kw);
  // b: (oc,1,1). Zero padding, floor output dims.
  Var conv2d(Var x, Var w, Var b, int kh, int kw, int stride, int pad);
  Var upsample_nearest2(Var x);
  Var instance_norm(Var x, double eps = 1e-5);
  Var layer_norm(Var x, double eps = 1e-5);
  // y[c] = x[c]*gamma[c] + beta[c] with constant (non-trainable) vectors.
  Var channel_affine(Var x, std::vector<double> gamma,
                     std::vector<double> beta);
  Var relu(Var x);
  Var leaky_relu(Var x, double slope);
  Var tanh_(Var x);
  Var softplus(Var x);  // log(1 + e^x), stable

  // -- elementwise / algebra ----------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var add_scalar(Var a, double s);
  Var mul_scalar(Var a, double s);
  Var abs_(Var a);

  // -- image-space ops ----------------------------------------------------
  // Valid-mode correlation of each channel with a constant 2-D kernel.
  Var window_filter(Var x, const Tensor& kernel2d);
  // Horizontal disparity warp: out(c,v,u) samples src at (v, u+sign*d(v,u))
  // bilinearly; out-of-range samples produce 0 and mask=false. Differentiable
  // w.r.t. src only (disparity is data).
  Var warp_horizontal(Var src, const Tensor& disp, int sign,
                      ValidityMask* mask_out);

  // -- reductions ----------------------------------------------------------
  Var mean_all(Var x);
  // Mean over channels x masked pixels. Throws EmptySupportError when the
  // mask selects nothing.
  Var masked_mean(Var x, const ValidityMask& mask);
  // Scalar combination sum_i coeff_i * term_i (terms must be scalars).
  Var weighted_sum(const std::vector<std::pair<double, Var>>& terms);

  // Reverse sweep from a scalar root. May be called once per tape.
  void backward(Var root);

  size_t node_count() const { return nodes_.size(); }
  const Tensor& val_of(int id) const { return nodes_[id].val; }
  const Tensor& grad_of(int id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor val;
    Tensor grad;  // allocated only when requires_grad
    bool requires_grad = false;
    std::function<void()> back;
  };

  friend class Var;

  Var make(Tensor value, bool requires_grad);
  Node& node(Var v) { return nodes_[v.id_]; }
  const Node& node(Var v) const { return nodes_[v.id_]; }
  bool track(Var a) const { return grad_enabled_ && nodes_[a.id_].requires_grad; }
  void check_same_tape(Var v) const;

  std::deque<Node> nodes_;  // deque: references remain stable as nodes append
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

}  // namespace s2r::ad
