#include "testutil.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "s2r/errors.hpp"
#include "s2r/image_io.hpp"
#include "s2r/imageops.hpp"

namespace tst {

namespace fs = std::filesystem;

ImageTensor random_signed(int channels, int rows, int cols, Rng& rng) {
  ImageTensor img(channels, rows, cols, ValueDomain::kSigned);
  for (float& v : img.vec()) {
    v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  }
  return img;
}

ImageTensor random_unit(int channels, int rows, int cols, Rng& rng) {
  ImageTensor img(channels, rows, cols, ValueDomain::kUnit);
  for (float& v : img.vec()) v = static_cast<float>(rng.uniform());
  return img;
}

ImageTensor random_logits(int channels, int rows, int cols, Rng& rng) {
  ImageTensor img(channels, rows, cols, ValueDomain::kFree);
  for (float& v : img.vec()) v = static_cast<float>(2.0 * rng.normal());
  return img;
}

ImageTensor random_disparity(int rows, int cols, double lo, double hi,
                             double nan_fraction, Rng& rng) {
  ImageTensor d(1, rows, cols, ValueDomain::kFree);
  for (float& v : d.vec()) {
    if (rng.uniform() < nan_fraction) {
      v = std::numeric_limits<float>::quiet_NaN();
    } else {
      v = static_cast<float>(lo + (hi - lo) * rng.uniform());
    }
  }
  return d;
}

ImageTensor integer_disparity(int rows, int cols, int max_d, Rng& rng) {
  ImageTensor d(1, rows, cols, ValueDomain::kFree);
  for (float& v : d.vec()) {
    v = static_cast<float>(rng.below(static_cast<uint64_t>(max_d) + 1));
  }
  return d;
}

ImageTensor smooth_signed(int channels, int rows, int cols, Rng& rng) {
  const int base_r = std::max(2, rows / 8);
  const int base_c = std::max(2, cols / 8);
  ImageTensor coarse = random_signed(channels, base_r, base_c, rng);
  ImageTensor img = s2r::resize_bilinear(coarse, rows, cols);
  for (float& v : img.vec()) {
    const double noisy = v + 0.08 * (2.0 * rng.uniform() - 1.0);
    v = static_cast<float>(std::clamp(noisy, -1.0, 1.0));
  }
  return img;
}

ImageTensor ramp(int channels, int rows, int cols) {
  ImageTensor img(channels, rows, cols, ValueDomain::kSigned);
  for (int c = 0; c < channels; ++c) {
    for (int r = 0; r < rows; ++r) {
      for (int col = 0; col < cols; ++col) {
        img.at(c, r, col) =
            cols > 1 ? static_cast<float>(2.0 * col / (cols - 1) - 1.0) : 0.0f;
      }
    }
  }
  return img;
}

ValidityMask full_mask(int rows, int cols) {
  return ValidityMask(rows, cols, true);
}

ValidityMask random_mask(int rows, int cols, double density, Rng& rng) {
  ValidityMask m(rows, cols, false);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m.set(r, c, rng.uniform() < density);
  }
  return m;
}

// ---- oracles --------------------------------------------------------------

ImageTensor sobel_oracle(const ImageTensor& img) {
  const int rows = img.rows(), cols = img.cols();
  std::vector<double> gray(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double g;
      if (img.channels() == 3) {
        g = 0.299 * img.at(0, r, c) + 0.587 * img.at(1, r, c) +
            0.114 * img.at(2, r, c);
      } else {
        g = img.at(0, r, c);
      }
      gray[static_cast<size_t>(r) * cols + c] = g;
    }
  }
  auto at = [&](int r, int c) {
    r = std::min(std::max(r, 0), rows - 1);
    c = std::min(std::max(c, 0), cols - 1);
    return gray[static_cast<size_t>(r) * cols + c];
  };
  const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  std::vector<double> mag(gray.size());
  double maxm = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double gx = 0.0, gy = 0.0;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const double p = at(r + i - 1, c + j - 1);
          gx += kx[i][j] * p;
          gy += ky[i][j] * p;
        }
      }
      const double m = std::sqrt(gx * gx + gy * gy);
      mag[static_cast<size_t>(r) * cols + c] = m;
      maxm = std::max(maxm, m);
    }
  }
  ImageTensor out(1, rows, cols, ValueDomain::kUnit);
  if (maxm > 0.0) {
    for (size_t i = 0; i < mag.size(); ++i) {
      out.vec()[i] = static_cast<float>(mag[i] / maxm);
    }
  }
  return out;
}

std::pair<ImageTensor, ValidityMask> warp_oracle(const ImageTensor& src,
                                                 const ImageTensor& disp,
                                                 int sign) {
  const int rows = src.rows(), cols = src.cols();
  ImageTensor out(src.channels(), rows, cols, src.domain());
  ValidityMask mask(rows, cols, false);
  for (int v = 0; v < rows; ++v) {
    for (int u = 0; u < cols; ++u) {
      const double x = u + static_cast<double>(sign) * disp.at(0, v, u);
      if (!(x >= 0.0 && x <= cols - 1.0)) continue;
      mask.set(v, u, true);
      int x0 = static_cast<int>(std::floor(x));
      if (x0 > cols - 2) x0 = cols - 2;
      if (cols == 1) x0 = 0;
      const double f = x - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double a = src.at(c, v, x0);
        const double b = cols == 1 ? a : src.at(c, v, x0 + 1);
        out.at(c, v, u) = static_cast<float>((1.0 - f) * a + f * b);
      }
    }
  }
  return {std::move(out), std::move(mask)};
}

double ssim_oracle(const ImageTensor& a, const ImageTensor& b,
                   const ValidityMask& mask) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const int rows = a.rows(), cols = a.cols();
  // Gaussian weights
  double w[kWin][kWin];
  double wsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    for (int j = 0; j < kWin; ++j) {
      const double d2 = (i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0);
      w[i][j] = std::exp(-d2 / (2.0 * kSigma * kSigma));
      wsum += w[i][j];
    }
  }
  for (auto& row : w) {
    for (double& v : row) v /= wsum;
  }
  double acc = 0.0;
  size_t n = 0;
  for (int r = 0; r + kWin <= rows; ++r) {
    for (int c = 0; c + kWin <= cols; ++c) {
      bool ok = true;
      for (int i = 0; ok && i < kWin; ++i) {
        for (int j = 0; ok && j < kWin; ++j) {
          if (!mask.at(r + i, c + j)) ok = false;
        }
      }
      if (!ok) continue;
      for (int ch = 0; ch < a.channels(); ++ch) {
        double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
        for (int i = 0; i < kWin; ++i) {
          for (int j = 0; j < kWin; ++j) {
            const double pa = (a.at(ch, r + i, c + j) + 1.0) * 0.5;
            const double pb = (b.at(ch, r + i, c + j) + 1.0) * 0.5;
            ma += w[i][j] * pa;
            mb += w[i][j] * pb;
            maa += w[i][j] * pa * pa;
            mbb += w[i][j] * pb * pb;
            mab += w[i][j] * pa * pb;
          }
        }
        const double va = maa - ma * ma;
        const double vb = mbb - mb * mb;
        const double cov = mab - ma * mb;
        const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
        const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
        acc += num / den;
        ++n;
      }
    }
  }
  if (n == 0) throw s2r::EmptySupportError("ssim_oracle: no window");
  return acc / static_cast<double>(n);
}

double l1_oracle(const ImageTensor& a, const ImageTensor& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    acc += std::abs(static_cast<double>(a.vec()[i]) - b.vec()[i]);
  }
  return acc / static_cast<double>(a.size());
}

double masked_l1_oracle(const ImageTensor& a, const ImageTensor& b,
                        const ValidityMask& mask) {
  double acc = 0.0;
  size_t n = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int r = 0; r < a.rows(); ++r) {
      for (int col = 0; col < a.cols(); ++col) {
        if (!mask.at(r, col)) continue;
        acc += std::abs(static_cast<double>(a.at(c, r, col)) -
                        b.at(c, r, col));
        ++n;
      }
    }
  }
  if (n == 0) throw s2r::EmptySupportError("masked_l1_oracle: empty mask");
  return acc / static_cast<double>(n);
}

namespace {

double softplus_stable(double x) {
  // log(1 + e^x) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

double adversarial_d_oracle(const ImageTensor& real_logits,
                            const ImageTensor& fake_logits) {
  double racc = 0.0, facc = 0.0;
  for (float v : real_logits.vec()) racc += softplus_stable(-v);
  for (float v : fake_logits.vec()) facc += softplus_stable(v);
  return racc / static_cast<double>(real_logits.size()) +
         facc / static_cast<double>(fake_logits.size());
}

double adversarial_g_oracle(const ImageTensor& fake_logits) {
  double acc = 0.0;
  for (float v : fake_logits.vec()) acc += softplus_stable(-v);
  return acc / static_cast<double>(fake_logits.size());
}

s2r::ad::Tensor conv2d_oracle(const s2r::ad::Tensor& x,
                              const s2r::ad::Tensor& w,
                              const s2r::ad::Tensor& b, int kh, int kw,
                              int stride, int pad) {
  const int ic = x.c, ih = x.h, iw = x.w;
  const int oc = w.c;
  const int oh = (ih + 2 * pad - kh) / stride + 1;
  const int ow = (iw + 2 * pad - kw) / stride + 1;
  s2r::ad::Tensor y(oc, oh, ow);
  for (int o = 0; o < oc; ++o) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = b.v[o];
        for (int c = 0; c < ic; ++c) {
          for (int u = 0; u < kh; ++u) {
            for (int v = 0; v < kw; ++v) {
              const int r = i * stride - pad + u;
              const int col = j * stride - pad + v;
              if (r < 0 || r >= ih || col < 0 || col >= iw) continue;
              acc += x.at(c, r, col) * w.at(o, c, u * kw + v);
            }
          }
        }
        y.at(o, i, j) = acc;
      }
    }
  }
  return y;
}

// ---- gradient checking ------------------------------------------------

double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
  return std::abs(got - want) / denom;
}

GradCheck check_gradient(const LossBuilder& build, const s2r::ad::Tensor& x0,
                         double h, double denom_floor) {
  // analytic pass
  s2r::ad::Tape tape;
  s2r::ad::Var x = tape.input(x0, true);
  s2r::ad::Var loss = build(tape, x);
  tape.backward(loss);
  const s2r::ad::Tensor grad = x.grad();

  auto eval = [&](const s2r::ad::Tensor& xt) {
    s2r::ad::Tape t;
    t.set_grad_enabled(false);
    return build(t, t.input(xt)).scalar();
  };

  GradCheck res;
  s2r::ad::Tensor xp = x0;
  for (size_t i = 0; i < x0.v.size(); ++i) {
    const double orig = xp.v[i];
    xp.v[i] = orig + h;
    const double fp = eval(xp);
    xp.v[i] = orig - h;
    const double fm = eval(xp);
    xp.v[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double denom =
        std::max({std::abs(grad.v[i]), std::abs(fd), denom_floor});
    res.max_rel_err =
        std::max(res.max_rel_err, std::abs(grad.v[i] - fd) / denom);
    ++res.checked;
  }
  return res;
}

// ---- filesystem helpers -----------------------------------------------

TempDir::TempDir() {
  static uint64_t counter = 0;
  const fs::path base = fs::temp_directory_path();
  fs::path p;
  do {
    p = base / ("s2r_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
  } while (fs::exists(p));
  fs::create_directories(p);
  path_ = p.string();
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_signed_png(const std::string& path, const ImageTensor& img) {
  s2r::RawImage raw;
  raw.bytes = s2r::denormalize_bytes(img);
  raw.channels = img.channels();
  raw.rows = img.rows();
  raw.cols = img.cols();
  s2r::write_png(path, raw);
}

ToyDataset write_toy_dataset(const TempDir& dir, int n_synth, int n_real,
                             int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  ToyDataset ds;
  std::ostringstream synth;
  synth << "domain\tsynthetic\n";
  synth << "disparity_sign\t1\n";
  for (int i = 0; i < n_synth; ++i) {
    const std::string tag = "pair" + std::to_string(i);
    const ImageTensor left = smooth_signed(3, rows, cols, rng);
    const ImageTensor disp = integer_disparity(rows, cols, 3, rng);
    const ImageTensor right = warp_oracle(left, disp, 1).first;
    write_signed_png(dir.file(tag + "_left.png"), left);
    write_signed_png(dir.file(tag + "_right.png"), right);
    s2r::write_dsp1(dir.file(tag + "_disp.dsp1"), disp);
    synth << tag << "_left.png\t" << tag << "_right.png\t" << tag
          << "_disp.dsp1\n";
    ds.synth_ids.push_back(tag + "_left");
  }
  std::ostringstream real;
  real << "domain\treal\n";
  for (int i = 0; i < n_real; ++i) {
    const std::string tag = "real" + std::to_string(i);
    write_signed_png(dir.file(tag + ".png"), smooth_signed(3, rows, cols, rng));
    real << tag << ".png\n";
    ds.real_ids.push_back(tag);
  }
  ds.synthetic_manifest = dir.file("synthetic.tsv");
  ds.real_manifest = dir.file("real.tsv");
  s2r::write_bytes_atomic(ds.synthetic_manifest, synth.str());
  s2r::write_bytes_atomic(ds.real_manifest, real.str());
  return ds;
}

CliResult run_cli(const std::string& args, const TempDir& scratch,
                  const std::string& env_prefix) {
  const std::string out_path = scratch.file("cli_stdout.txt");
  const std::string err_path = scratch.file("cli_stderr.txt");
  const std::string cmd = env_prefix + (env_prefix.empty() ? "" : " ") +
                          std::string(S2R_CLI_PATH) + " " + args + " > " +
                          out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  CliResult res;
  if (status >= 0) {
    res.exit_code = WEXITSTATUS(status);
  }
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  return res;
}

}  // namespace tst
