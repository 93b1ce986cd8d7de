#include "s2r/ad.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "s2r/detail/warp_kernel.hpp"
#include "s2r/errors.hpp"

namespace s2r::ad {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

Tensor Tensor::from_image(const ImageTensor& img) {
  Tensor t(img.channels(), img.rows(), img.cols());
  const float* p = img.data();
  for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<double>(p[i]);
  return t;
}

ImageTensor Tensor::to_image(ValueDomain domain) const {
  ImageTensor img(c, h, w, domain);
  float* p = img.data();
  for (size_t i = 0; i < v.size(); ++i) p[i] = static_cast<float>(v[i]);
  return img;
}

Tensor gaussian_window(int size, double sigma) {
  Tensor k(1, size, size);
  const double ctr = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double d2 = (i - ctr) * (i - ctr) + (j - ctr) * (j - ctr);
      const double g = std::exp(-d2 / (2.0 * sigma * sigma));
      k.at(0, i, j) = g;
      sum += g;
    }
  }
  for (double& x : k.v) x /= sum;
  return k;
}

const Tensor& Var::val() const { return tape_->val_of(id_); }
const Tensor& Var::grad() const { return tape_->grad_of(id_); }

double Var::scalar() const {
  const Tensor& t = val();
  if (t.size() != 1) throw ContractError("Var::scalar on non-scalar node");
  return t.v[0];
}

void Tape::check_same_tape(Var v) const {
  if (v.tape_ != this) throw ContractError("Var belongs to a different tape");
}

Var Tape::make(Tensor value, bool requires_grad) {
  Node n;
  n.val = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.grad = Tensor(n.val.c, n.val.h, n.val.w);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::input(Tensor value, bool requires_grad) {
  return make(std::move(value), requires_grad);
}

Var Tape::scalar_input(double s) {
  Tensor t(1, 1, 1);
  t.v[0] = s;
  return make(std::move(t), false);
}

void Tape::backward(Var root) {
  check_same_tape(root);
  if (backward_done_) throw ContractError("Tape::backward called twice");
  backward_done_ = true;
  Node& r = node(root);
  if (r.val.size() != 1) throw ContractError("backward root must be scalar");
  if (!r.requires_grad) return;  // nothing reaches a trainable leaf
  r.grad.v[0] = 1.0;
  for (int i = root.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.back) n.back();
  }
}

// ---------------------------------------------------------------------------
// convolution

Var Tape::conv2d(Var x, Var w, Var b, int kh, int kw, int stride, int pad) {
  check_same_tape(x);
  check_same_tape(w);
  check_same_tape(b);
  const Tensor& xv = node(x).val;
  const Tensor& wv = node(w).val;
  const Tensor& bv = node(b).val;
  const int ic = xv.c, oc = wv.c;
  if (wv.h != ic || wv.w != kh * kw) {
    throw DimensionError("conv2d: weight shape mismatch");
  }
  if (bv.c != oc || bv.size() != static_cast<size_t>(oc)) {
    throw DimensionError("conv2d: bias shape mismatch");
  }
  const int oh = (xv.h + 2 * pad - kh) / stride + 1;
  const int ow = (xv.w + 2 * pad - kw) / stride + 1;
  if (oh < 1 || ow < 1) {
    throw DimensionError("conv2d: output would be empty (" +
                         std::to_string(xv.h) + "x" + std::to_string(xv.w) +
                         " input, k=" + std::to_string(kh) + ")");
  }
  const int K = ic * kh * kw;
  const int N = oh * ow;

  auto im2col = [=](const Tensor& src) {
    Eigen::MatrixXd col(K, N);
    for (int ci = 0; ci < ic; ++ci) {
      for (int ki = 0; ki < kh; ++ki) {
        for (int kj = 0; kj < kw; ++kj) {
          const int krow = (ci * kh + ki) * kw + kj;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ki - pad;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + kj - pad;
              col(krow, oy * ow + ox) =
                  (iy >= 0 && iy < src.h && ix >= 0 && ix < src.w)
                      ? src.at(ci, iy, ix)
                      : 0.0;
            }
          }
        }
      }
    }
    return col;
  };

  Eigen::MatrixXd col = im2col(xv);
  Tensor out(oc, oh, ow);
  {
    MapRowC wm(wv.v.data(), oc, K);
    MapRow om(out.v.data(), oc, N);
    om.noalias() = wm * col;
    for (int o = 0; o < oc; ++o) om.row(o).array() += bv.v[o];
  }
  const bool tx = track(x), tw = track(w), tb = track(b);
  Var y = make(std::move(out), tx || tw || tb);
  if (node(y).requires_grad) {
    const int xid = x.id_, wid = w.id_, bid = b.id_, yid = y.id_;
    node(y).back = [=, this]() {
      const Tensor& gy = nodes_[yid].grad;
      MapRowC gym(gy.v.data(), oc, N);
      if (tb) {
        // summed with a plain loop: Eigen's redux peels to an aligned
        // boundary, so its accumulation order (and hence the rounded sum)
        // would vary with the heap address of the gradient buffer
        Tensor& gb = nodes_[bid].grad;
        for (int o = 0; o < oc; ++o) {
          const double* row = gy.v.data() + static_cast<size_t>(o) * N;
          double s = 0.0;
          for (int i = 0; i < N; ++i) s += row[i];
          gb.v[o] += s;
        }
      }
      if (tw) {
        // column buffer is recomputed rather than retained across the step
        Eigen::MatrixXd colb = im2col(nodes_[xid].val);
        Tensor& gw = nodes_[wid].grad;
        MapRow gwm(gw.v.data(), oc, K);
        gwm.noalias() += gym * colb.transpose();
      }
      if (tx) {
        MapRowC wm2(nodes_[wid].val.v.data(), oc, K);
        Eigen::MatrixXd gcol(K, N);
        gcol.noalias() = wm2.transpose() * gym;
        Tensor& gx = nodes_[xid].grad;
        for (int ci = 0; ci < ic; ++ci) {
          for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
              const int krow = (ci * kh + ki) * kw + kj;
              for (int oy = 0; oy < oh; ++oy) {
                const int iy = oy * stride + ki - pad;
                if (iy < 0 || iy >= gx.h) continue;
                for (int ox = 0; ox < ow; ++ox) {
                  const int ix = ox * stride + kj - pad;
                  if (ix < 0 || ix >= gx.w) continue;
                  gx.at(ci, iy, ix) += gcol(krow, oy * ow + ox);
                }
              }
            }
          }
        }
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// structural ops

Var Tape::upsample_nearest2(Var x) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  Tensor out(xv.c, xv.h * 2, xv.w * 2);
  for (int c = 0; c < xv.c; ++c) {
    for (int r = 0; r < out.h; ++r) {
      for (int col = 0; col < out.w; ++col) {
        out.at(c, r, col) = xv.at(c, r / 2, col / 2);
      }
    }
  }
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [=, this]() {
      Tensor& gx = nodes_[xid].grad;
      const Tensor& gy = nodes_[yid].grad;
      for (int c = 0; c < gy.c; ++c) {
        for (int r = 0; r < gy.h; ++r) {
          for (int col = 0; col < gy.w; ++col) {
            gx.at(c, r / 2, col / 2) += gy.at(c, r, col);
          }
        }
      }
    };
  }
  return y;
}

namespace {

// dx = inv_std * (dy - mean(dy) - y * mean(dy*y)) over a normalization group.
void norm_backward_group(const double* y, const double* gy, double inv_std,
                         long n, double* gx) {
  double mg = 0.0, mgy = 0.0;
  for (long i = 0; i < n; ++i) {
    mg += gy[i];
    mgy += gy[i] * y[i];
  }
  mg /= static_cast<double>(n);
  mgy /= static_cast<double>(n);
  for (long i = 0; i < n; ++i) {
    gx[i] += inv_std * (gy[i] - mg - y[i] * mgy);
  }
}

}  // namespace

Var Tape::instance_norm(Var x, double eps) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  const long plane = static_cast<long>(xv.h) * xv.w;
  Tensor out(xv.c, xv.h, xv.w);
  std::vector<double> inv_std(xv.c);
  for (int c = 0; c < xv.c; ++c) {
    const double* src = xv.v.data() + c * plane;
    double mean = 0.0;
    for (long i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (long i = 0; i < plane; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(plane);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = is;
    double* dst = out.v.data() + c * plane;
    for (long i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * is;
  }
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid, inv_std, plane]() {
      const Tensor& yv = nodes_[yid].val;
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (int c = 0; c < yv.c; ++c) {
        norm_backward_group(yv.v.data() + c * plane, gy.v.data() + c * plane,
                            inv_std[c], plane, gx.v.data() + c * plane);
      }
    };
  }
  return y;
}

Var Tape::layer_norm(Var x, double eps) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  const long n = static_cast<long>(xv.size());
  double mean = 0.0;
  for (double v : xv.v) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : xv.v) {
    const double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double is = 1.0 / std::sqrt(var + eps);
  Tensor out(xv.c, xv.h, xv.w);
  for (long i = 0; i < n; ++i) out.v[i] = (xv.v[i] - mean) * is;
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid, is, n]() {
      norm_backward_group(nodes_[yid].val.v.data(), nodes_[yid].grad.v.data(),
                          is, n, nodes_[xid].grad.v.data());
    };
  }
  return y;
}

Var Tape::channel_affine(Var x, std::vector<double> gamma,
                         std::vector<double> beta) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  if (static_cast<int>(gamma.size()) != xv.c ||
      static_cast<int>(beta.size()) != xv.c) {
    throw ContractError("channel_affine: vector length " +
                        std::to_string(gamma.size()) + " != channels " +
                        std::to_string(xv.c));
  }
  const long plane = static_cast<long>(xv.h) * xv.w;
  Tensor out(xv.c, xv.h, xv.w);
  for (int c = 0; c < xv.c; ++c) {
    const double* src = xv.v.data() + c * plane;
    double* dst = out.v.data() + c * plane;
    for (long i = 0; i < plane; ++i) dst[i] = src[i] * gamma[c] + beta[c];
  }
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid, gamma = std::move(gamma), plane]() {
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (int c = 0; c < gy.c; ++c) {
        const double* g = gy.v.data() + c * plane;
        double* d = gx.v.data() + c * plane;
        for (long i = 0; i < plane; ++i) d[i] += g[i] * gamma[c];
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// pointwise nonlinearities

Var Tape::relu(Var x) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  Tensor out = xv;
  for (double& v : out.v) v = v > 0.0 ? v : 0.0;
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid]() {
      const Tensor& xv2 = nodes_[xid].val;
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) {
        if (xv2.v[i] > 0.0) gx.v[i] += gy.v[i];
      }
    };
  }
  return y;
}

Var Tape::leaky_relu(Var x, double slope) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  Tensor out = xv;
  for (double& v : out.v) v = v > 0.0 ? v : v * slope;
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid, slope]() {
      const Tensor& xv2 = nodes_[xid].val;
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) {
        gx.v[i] += gy.v[i] * (xv2.v[i] > 0.0 ? 1.0 : slope);
      }
    };
  }
  return y;
}

Var Tape::tanh_(Var x) {
  check_same_tape(x);
  Tensor out = node(x).val;
  for (double& v : out.v) v = std::tanh(v);
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid]() {
      const Tensor& yv = nodes_[yid].val;
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) {
        gx.v[i] += gy.v[i] * (1.0 - yv.v[i] * yv.v[i]);
      }
    };
  }
  return y;
}

Var Tape::softplus(Var x) {
  check_same_tape(x);
  Tensor out = node(x).val;
  for (double& v : out.v) {
    v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  }
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid]() {
      const Tensor& xv2 = nodes_[xid].val;
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) {
        gx.v[i] += gy.v[i] / (1.0 + std::exp(-xv2.v[i]));
      }
    };
  }
  return y;
}

Var Tape::abs_(Var x) {
  check_same_tape(x);
  Tensor out = node(x).val;
  for (double& v : out.v) v = std::abs(v);
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid]() {
      const Tensor& xv2 = nodes_[xid].val;
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) {
        const double s = xv2.v[i] > 0.0 ? 1.0 : (xv2.v[i] < 0.0 ? -1.0 : 0.0);
        gx.v[i] += gy.v[i] * s;
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// binary elementwise

namespace {
void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_dims(b)) {
    throw DimensionError(std::string(op) + ": dims mismatch (" +
                         std::to_string(a.c) + "x" + std::to_string(a.h) +
                         "x" + std::to_string(a.w) + " vs " +
                         std::to_string(b.c) + "x" + std::to_string(b.h) +
                         "x" + std::to_string(b.w) + ")");
  }
}
}  // namespace

Var Tape::add(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& av = node(a).val;
  const Tensor& bv = node(b).val;
  require_same_dims(av, bv, "add");
  Tensor out = av;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += bv.v[i];
  const bool ta = track(a), tb = track(b);
  Var y = make(std::move(out), ta || tb);
  if (node(y).requires_grad) {
    const int aid = a.id_, bid = b.id_, yid = y.id_;
    node(y).back = [this, aid, bid, yid, ta, tb]() {
      const Tensor& gy = nodes_[yid].grad;
      if (ta) {
        Tensor& ga = nodes_[aid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i];
      }
      if (tb) {
        Tensor& gb = nodes_[bid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) gb.v[i] += gy.v[i];
      }
    };
  }
  return y;
}

Var Tape::sub(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& av = node(a).val;
  const Tensor& bv = node(b).val;
  require_same_dims(av, bv, "sub");
  Tensor out = av;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= bv.v[i];
  const bool ta = track(a), tb = track(b);
  Var y = make(std::move(out), ta || tb);
  if (node(y).requires_grad) {
    const int aid = a.id_, bid = b.id_, yid = y.id_;
    node(y).back = [this, aid, bid, yid, ta, tb]() {
      const Tensor& gy = nodes_[yid].grad;
      if (ta) {
        Tensor& ga = nodes_[aid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i];
      }
      if (tb) {
        Tensor& gb = nodes_[bid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) gb.v[i] -= gy.v[i];
      }
    };
  }
  return y;
}

Var Tape::mul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& av = node(a).val;
  const Tensor& bv = node(b).val;
  require_same_dims(av, bv, "mul");
  Tensor out = av;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= bv.v[i];
  const bool ta = track(a), tb = track(b);
  Var y = make(std::move(out), ta || tb);
  if (node(y).requires_grad) {
    const int aid = a.id_, bid = b.id_, yid = y.id_;
    node(y).back = [this, aid, bid, yid, ta, tb]() {
      const Tensor& gy = nodes_[yid].grad;
      const Tensor& av2 = nodes_[aid].val;
      const Tensor& bv2 = nodes_[bid].val;
      if (ta) {
        Tensor& ga = nodes_[aid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i] * bv2.v[i];
      }
      if (tb) {
        Tensor& gb = nodes_[bid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) gb.v[i] += gy.v[i] * av2.v[i];
      }
    };
  }
  return y;
}

Var Tape::div(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& av = node(a).val;
  const Tensor& bv = node(b).val;
  require_same_dims(av, bv, "div");
  Tensor out = av;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] /= bv.v[i];
  const bool ta = track(a), tb = track(b);
  Var y = make(std::move(out), ta || tb);
  if (node(y).requires_grad) {
    const int aid = a.id_, bid = b.id_, yid = y.id_;
    node(y).back = [this, aid, bid, yid, ta, tb]() {
      const Tensor& gy = nodes_[yid].grad;
      const Tensor& yv = nodes_[yid].val;
      const Tensor& bv2 = nodes_[bid].val;
      if (ta) {
        Tensor& ga = nodes_[aid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i] / bv2.v[i];
      }
      if (tb) {
        Tensor& gb = nodes_[bid].grad;
        for (size_t i = 0; i < gy.v.size(); ++i) {
          gb.v[i] -= gy.v[i] * yv.v[i] / bv2.v[i];
        }
      }
    };
  }
  return y;
}

Var Tape::add_scalar(Var a, double s) {
  check_same_tape(a);
  Tensor out = node(a).val;
  for (double& v : out.v) v += s;
  Var y = make(std::move(out), track(a));
  if (node(y).requires_grad) {
    const int aid = a.id_, yid = y.id_;
    node(y).back = [this, aid, yid]() {
      const Tensor& gy = nodes_[yid].grad;
      Tensor& ga = nodes_[aid].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i];
    };
  }
  return y;
}

Var Tape::mul_scalar(Var a, double s) {
  check_same_tape(a);
  Tensor out = node(a).val;
  for (double& v : out.v) v *= s;
  Var y = make(std::move(out), track(a));
  if (node(y).requires_grad) {
    const int aid = a.id_, yid = y.id_;
    node(y).back = [this, aid, yid, s]() {
      const Tensor& gy = nodes_[yid].grad;
      Tensor& ga = nodes_[aid].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i] * s;
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// image-space ops

Var Tape::window_filter(Var x, const Tensor& kernel2d) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  const int kh = kernel2d.h, kw = kernel2d.w;
  if (xv.h < kh || xv.w < kw) {
    throw DimensionError("window_filter: image smaller than window");
  }
  const int oh = xv.h - kh + 1, ow = xv.w - kw + 1;
  Tensor out(xv.c, oh, ow);
  for (int c = 0; c < xv.c; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ki = 0; ki < kh; ++ki) {
          for (int kj = 0; kj < kw; ++kj) {
            acc += kernel2d.at(0, ki, kj) * xv.at(c, oy + ki, ox + kj);
          }
        }
        out.at(c, oy, ox) = acc;
      }
    }
  }
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid, kernel = kernel2d, kh, kw, oh, ow]() {
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[xid].grad;
      for (int c = 0; c < gy.c; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const double g = gy.at(c, oy, ox);
            if (g == 0.0) continue;
            for (int ki = 0; ki < kh; ++ki) {
              for (int kj = 0; kj < kw; ++kj) {
                gx.at(c, oy + ki, ox + kj) += g * kernel.at(0, ki, kj);
              }
            }
          }
        }
      }
    };
  }
  return y;
}

Var Tape::warp_horizontal(Var src, const Tensor& disp, int sign,
                          ValidityMask* mask_out) {
  check_same_tape(src);
  const Tensor& sv = node(src).val;
  if (disp.c != 1 || disp.h != sv.h || disp.w != sv.w) {
    throw DimensionError("warp_horizontal: disparity dims mismatch");
  }
  if (sign != 1 && sign != -1) {
    throw ContractError("warp_horizontal: sign must be +1 or -1");
  }
  Tensor out(sv.c, sv.h, sv.w);
  std::vector<uint8_t> mask(static_cast<size_t>(sv.h) * sv.w);
  detail::warp_horizontal_rows<double>(sv.v.data(), sv.c, sv.h, sv.w,
                                       disp.v.data(), sign, out.v.data(),
                                       mask.data());
  if (mask_out) {
    ValidityMask m(sv.h, sv.w, false);
    for (int r = 0; r < sv.h; ++r) {
      for (int c = 0; c < sv.w; ++c) {
        m.set(r, c, mask[static_cast<size_t>(r) * sv.w + c] != 0);
      }
    }
    *mask_out = std::move(m);
  }
  Var y = make(std::move(out), track(src));
  if (node(y).requires_grad) {
    const int sid = src.id_, yid = y.id_;
    node(y).back = [this, sid, yid, d = disp, sign]() {
      // scatter: out(v,u) = (1-f)*src(v,x0) + f*src(v,x0+1)
      const Tensor& gy = nodes_[yid].grad;
      Tensor& gx = nodes_[sid].grad;
      const int rows = gy.h, cols = gy.w;
      const long plane = static_cast<long>(rows) * cols;
      for (int v = 0; v < rows; ++v) {
        for (int u = 0; u < cols; ++u) {
          const double x = u + sign * d.at(0, v, u);
          if (!(x >= 0.0 && x <= cols - 1)) continue;
          int x0 = static_cast<int>(std::floor(x));
          if (x0 > cols - 2) x0 = cols - 2;
          if (cols == 1) x0 = 0;
          const double f = x - x0;
          for (int c = 0; c < gy.c; ++c) {
            const double g = gy.v[c * plane + static_cast<long>(v) * cols + u];
            double* gp = gx.v.data() + c * plane + static_cast<long>(v) * cols;
            gp[x0] += g * (1.0 - f);
            if (cols > 1) gp[x0 + 1] += g * f;
          }
        }
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// reductions

Var Tape::mean_all(Var x) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  if (xv.size() == 0) throw EmptySupportError("mean_all: empty tensor");
  double acc = 0.0;
  for (double v : xv.v) acc += v;
  Tensor out(1, 1, 1);
  const double inv_n = 1.0 / static_cast<double>(xv.size());
  // divide (not multiply by the reciprocal): a mean of n equal values must
  // reproduce that value exactly, which n * (1/n) does not guarantee
  out.v[0] = acc / static_cast<double>(xv.size());
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid, inv_n]() {
      const double g = nodes_[yid].grad.v[0] * inv_n;
      Tensor& gx = nodes_[xid].grad;
      for (double& v : gx.v) v += g;
    };
  }
  return y;
}

Var Tape::masked_mean(Var x, const ValidityMask& mask) {
  check_same_tape(x);
  const Tensor& xv = node(x).val;
  if (mask.rows() != xv.h || mask.cols() != xv.w) {
    throw DimensionError("masked_mean: mask dims mismatch");
  }
  const size_t m = mask.count_true();
  if (m == 0) throw EmptySupportError("masked_mean: mask selects no pixels");
  const double n_total = static_cast<double>(m) * xv.c;
  const double inv_n = 1.0 / n_total;
  double acc = 0.0;
  for (int c = 0; c < xv.c; ++c) {
    for (int r = 0; r < xv.h; ++r) {
      for (int col = 0; col < xv.w; ++col) {
        if (mask.at(r, col)) acc += xv.at(c, r, col);
      }
    }
  }
  Tensor out(1, 1, 1);
  // divide for exactness on constant inputs (see mean_all)
  out.v[0] = acc / n_total;
  Var y = make(std::move(out), track(x));
  if (node(y).requires_grad) {
    const int xid = x.id_, yid = y.id_;
    node(y).back = [this, xid, yid, mask, inv_n]() {
      const double g = nodes_[yid].grad.v[0] * inv_n;
      Tensor& gx = nodes_[xid].grad;
      for (int c = 0; c < gx.c; ++c) {
        for (int r = 0; r < gx.h; ++r) {
          for (int col = 0; col < gx.w; ++col) {
            if (mask.at(r, col)) gx.at(c, r, col) += g;
          }
        }
      }
    };
  }
  return y;
}

Var Tape::weighted_sum(const std::vector<std::pair<double, Var>>& terms) {
  bool any_grad = false;
  double acc = 0.0;
  for (const auto& [coeff, term] : terms) {
    check_same_tape(term);
    if (node(term).val.size() != 1) {
      throw ContractError("weighted_sum: term is not scalar");
    }
    acc += coeff * node(term).val.v[0];
    any_grad = any_grad || track(term);
  }
  Tensor out(1, 1, 1);
  out.v[0] = acc;
  Var y = make(std::move(out), any_grad);
  if (node(y).requires_grad) {
    std::vector<std::pair<double, int>> ids;
    ids.reserve(terms.size());
    for (const auto& [coeff, term] : terms) {
      if (track(term)) ids.emplace_back(coeff, term.id_);
    }
    const int yid = y.id_;
    node(y).back = [this, yid, ids = std::move(ids)]() {
      const double g = nodes_[yid].grad.v[0];
      for (const auto& [coeff, id] : ids) nodes_[id].grad.v[0] += g * coeff;
    };
  }
  return y;
}

}  // namespace s2r::ad
