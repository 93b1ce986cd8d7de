#include <benchmark/benchmark.h>

#include "s2r/ad.hpp"
#include "s2r/data.hpp"
#include "s2r/imageops.hpp"
#include "s2r/losses.hpp"
#include "s2r/model.hpp"
#include "s2r/rng.hpp"
#include "s2r/ssim.hpp"
#include "s2r/tensor.hpp"
#include "s2r/train.hpp"

namespace {

using namespace s2r;

ImageTensor random_image(int channels, int rows, int cols, uint64_t seed) {
  ImageTensor img(channels, rows, cols, ValueDomain::kSigned);
  Rng rng(seed);
  for (float& v : img.vec()) {
    v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  }
  return img;
}

ImageTensor random_disparity(int rows, int cols, double max_d,
                             uint64_t seed) {
  ImageTensor d(1, rows, cols, ValueDomain::kFree);
  Rng rng(seed);
  for (float& v : d.vec()) {
    v = static_cast<float>(max_d * rng.uniform());
  }
  return d;
}

void BM_SobelEdges(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ImageTensor img = random_image(3, n, n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sobel_edges(img));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_SobelEdges)->Arg(64)->Arg(256);

void BM_WarpHorizontal(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ImageTensor img = random_image(3, n, n, 2);
  const ImageTensor disp = random_disparity(n, n, 8.0, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(warp_horizontal(img, disp, 1));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_WarpHorizontal)->Arg(64)->Arg(256);

void BM_Ssim(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ImageTensor a = random_image(1, n, n, 4);
  const ImageTensor b = random_image(1, n, n, 5);
  ValidityMask mask(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) mask.set(r, c, true);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssim(a, b, mask));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(128);

void BM_Conv2dForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ad::Tape t;
  t.set_grad_enabled(false);
  Rng rng(6);
  ad::Tensor x(16, n, n), w(32, 16, 9), b(32, 1, 1);
  for (double& v : x.v) v = rng.normal();
  for (double& v : w.v) v = 0.05 * rng.normal();
  const ad::Var xv = t.input(x), wv = t.input(w), bv = t.input(b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(t.conv2d(xv, wv, bv, 3, 3, 1, 1));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

void BM_Conv2dBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(7);
  ad::Tensor x(16, n, n), w(32, 16, 9), b(32, 1, 1);
  for (double& v : x.v) v = rng.normal();
  for (double& v : w.v) v = 0.05 * rng.normal();
  for (auto _ : state) {
    ad::Tape t;
    const ad::Var xv = t.input(x, true), wv = t.input(w, true),
                  bv = t.input(b, true);
    const ad::Var y = t.conv2d(xv, wv, bv, 3, 3, 1, 1);
    const ad::Var loss = t.mean_all(y);
    t.backward(loss);
    benchmark::DoNotOptimize(wv.grad());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  NetConfig net;
  net.base_channels = 8;
  net.residual_blocks = 2;
  net.discriminator_layers = 3;
  ModelState model = init_model(net, 11);
  TrainConfig cfg;
  cfg.batch_size = 1;
  const int n = 32;
  Batch batch;
  StereoTuple tup;
  tup.left = random_image(3, n, n, 21);
  tup.right = random_image(3, n, n, 22);
  tup.disparity = random_disparity(n, n, 4.0, 23);
  tup.id = "bench";
  batch.synthetic.push_back(tup);
  batch.real.push_back(random_image(3, n, n, 24));
  batch.left_edges.push_back(sobel_edges(tup.left));
  batch.right_edges.push_back(sobel_edges(tup.right));
  batch.real_edges.push_back(sobel_edges(batch.real[0]));
  uint64_t step = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, batch, cfg, step++));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
