#include <cmath>
#include <limits>

#include "doctest.h"
#include "segflow/errors.hpp"
#include "segflow/losses.hpp"
#include "segflow/rng.hpp"

using namespace segflow;

namespace {

Tensor random_logits(int h, int w, Rng& rng) {
  Tensor t({2, h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 2.0 * rng.normal();
  return t;
}

Tensor random_mask(int h, int w, Rng& rng) {
  Tensor t({h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return t;
}

Tensor random_flow(int h, int w, Rng& rng) {
  Tensor t({2, h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 3.0 * rng.normal();
  return t;
}

// Brute-force per-pixel evaluation of the weighted cross-entropy,
// independent of the library kernel.
double seg_loss_oracle(const Tensor& logits, const Tensor& mask, bool mean) {
  const int h = mask.dim(0), w = mask.dim(1);
  std::size_t fg = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) fg += mask.at(y, x) == 1.0 ? 1 : 0;
  const double wgt = static_cast<double>(fg) / (static_cast<double>(h) * w);
  double loss = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double z0 = logits.at(0, y, x), z1 = logits.at(1, y, x);
      const double p1 = std::exp(z1) / (std::exp(z0) + std::exp(z1));
      if (mask.at(y, x) == 1.0)
        loss -= (1.0 - wgt) * std::log(p1);
      else
        loss -= wgt * std::log(1.0 - p1);
    }
  return mean ? loss / (static_cast<double>(h) * w) : loss;
}

double epe_loss_oracle(const Tensor& pred, const Tensor& gt, const Tensor* valid, bool mean) {
  const int h = pred.dim(1), w = pred.dim(2);
  double loss = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (valid != nullptr && valid->at(y, x) != 1.0) continue;
      const double du = gt.at(0, y, x) - pred.at(0, y, x);
      const double dv = gt.at(1, y, x) - pred.at(1, y, x);
      loss += du * du + dv * dv;
      ++count;
    }
  return mean ? loss / static_cast<double>(count) : loss;
}

}  // namespace

TEST_CASE("fg_bg_weight is the foreground fraction") {
  Tensor mask({4, 4});
  mask.at(0, 0) = 1.0;
  mask.at(1, 1) = 1.0;
  mask.at(2, 2) = 1.0;
  mask.at(3, 3) = 1.0;
  CHECK(fg_bg_weight(mask) == doctest::Approx(0.25).epsilon(1e-12));

  CHECK(fg_bg_weight(Tensor({3, 3})) == 0.0);               // all background
  CHECK(fg_bg_weight(Tensor::full({3, 3}, 1.0)) == 1.0);    // all foreground

  Rng rng(21);
  const Tensor random = random_mask(8, 8, rng);
  std::size_t count = 0;
  for (std::size_t i = 0; i < random.size(); ++i) count += random[i] == 1.0 ? 1 : 0;
  CHECK(fg_bg_weight(random) ==
        doctest::Approx(static_cast<double>(count) / 64.0).epsilon(1e-12));
}

TEST_CASE("weighted_seg_loss closed-form cases") {
  // p(correct) == 1 everywhere -> zero loss.
  Tensor mask({2, 2});
  mask.at(0, 0) = 1.0;
  Tensor logits({2, 2, 2});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      const bool fg = mask.at(y, x) == 1.0;
      logits.at(0, y, x) = fg ? -40.0 : 40.0;
      logits.at(1, y, x) = fg ? 40.0 : -40.0;
    }
  CHECK(weighted_seg_loss(logits, mask).value == doctest::Approx(0.0).epsilon(1e-12));

  // Uniform logits, one foreground pixel out of four:
  // w = 1/4, loss = 0.75*log2 + 0.25*3*log2 = 1.5*log2.
  Tensor uniform({2, 2, 2});
  const double expected = 1.5 * std::log(2.0);
  CHECK(weighted_seg_loss(uniform, mask).value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(weighted_seg_loss(uniform, mask).value == doctest::Approx(1.0397).epsilon(1e-4));
}

TEST_CASE("weighted_seg_loss matches the per-pixel oracle on random 8x8 instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor logits = random_logits(8, 8, rng);
    const Tensor mask = random_mask(8, 8, rng);
    CHECK(std::fabs(weighted_seg_loss(logits, mask, Reduction::kSum).value -
                    seg_loss_oracle(logits, mask, false)) < 1e-6);
    CHECK(std::fabs(weighted_seg_loss(logits, mask, Reduction::kMean).value -
                    seg_loss_oracle(logits, mask, true)) < 1e-6);
  }
}

TEST_CASE("weighted_seg_loss is invariant under joint pixel permutation") {
  Rng rng(31);
  const Tensor logits = random_logits(4, 4, rng);
  const Tensor mask = random_mask(4, 4, rng);
  // Transpose is a fixed permutation of the pixel grid.
  Tensor logits_p({2, 4, 4});
  Tensor mask_p({4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      logits_p.at(0, x, y) = logits.at(0, y, x);
      logits_p.at(1, x, y) = logits.at(1, y, x);
      mask_p.at(x, y) = mask.at(y, x);
    }
  CHECK(weighted_seg_loss(logits, mask).value ==
        doctest::Approx(weighted_seg_loss(logits_p, mask_p).value).epsilon(1e-12));
}

TEST_CASE("weighted_seg_loss rejects bad inputs") {
  Tensor logits({2, 2, 2});
  Tensor wrong_mask({3, 3});
  CHECK_THROWS_AS(weighted_seg_loss(logits, wrong_mask), ShapeError);
  Tensor bad = logits;
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(weighted_seg_loss(bad, Tensor({2, 2})), ShapeError);
}

TEST_CASE("epe_loss closed-form cases") {
  Tensor gt({2, 3, 3});
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = 1.25 * static_cast<double>(i);
  CHECK(epe_loss(gt, gt).value == 0.0);

  // Constant residual (1,1) on every pixel, mean reduction -> 2.0.
  Tensor pred = gt;
  const std::size_t n = 9;
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] -= 1.0;
    pred[n + i] -= 1.0;
  }
  CHECK(epe_loss(pred, gt, nullptr, Reduction::kMean).value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("epe_loss matches the per-pixel oracle on random 8x8 instances") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor pred = random_flow(8, 8, rng);
    const Tensor gt = random_flow(8, 8, rng);
    Tensor valid = random_mask(8, 8, rng);
    valid.at(0, 0) = 1.0;  // guarantee at least one valid pixel
    CHECK(std::fabs(epe_loss(pred, gt, &valid, Reduction::kMean).value -
                    epe_loss_oracle(pred, gt, &valid, true)) < 1e-6);
    CHECK(std::fabs(epe_loss(pred, gt, nullptr, Reduction::kSum).value -
                    epe_loss_oracle(pred, gt, nullptr, false)) < 1e-6);
  }
}

TEST_CASE("epe_loss symmetry and shift invariance") {
  Rng rng(55);
  const Tensor a = random_flow(6, 6, rng);
  const Tensor b = random_flow(6, 6, rng);
  CHECK(epe_loss(a, b).value == doctest::Approx(epe_loss(b, a).value).epsilon(1e-12));

  Tensor a_shift = a;
  Tensor b_shift = b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a_shift[i] += 0.75;
    b_shift[i] += 0.75;
  }
  CHECK(epe_loss(a_shift, b_shift).value == doctest::Approx(epe_loss(a, b).value).epsilon(1e-9));
}

TEST_CASE("epe_loss with zero valid pixels is an error") {
  Tensor pred({2, 2, 2});
  Tensor gt({2, 2, 2});
  Tensor valid({2, 2});
  CHECK_THROWS_AS(epe_loss(pred, gt, &valid), DataError);
}

TEST_CASE("combined_loss arithmetic and guard") {
  const LossValue seg{2.0, Reduction::kSum};
  const LossValue flow{3.0, Reduction::kMean};
  CHECK(combined_loss(seg, flow, 0.1).value == doctest::Approx(2.3).epsilon(1e-12));
  CHECK_THROWS_AS(combined_loss(seg, flow, 0.0), ConfigError);
  CHECK_THROWS_AS(combined_loss(seg, flow, -1.0), ConfigError);
}

TEST_CASE("loss node gradients match central finite differences") {
  Rng rng(123);
  Tensor logits = random_logits(5, 5, rng);
  const Tensor mask = random_mask(5, 5, rng);

  auto logits_leaf = ag::leaf(logits, true);
  auto loss = weighted_seg_loss_node(logits_leaf, mask);
  ag::backward(loss);
  Rng pick(9);
  for (int probe = 0; probe < 10; ++probe) {
    const std::size_t i = pick.below(logits.size());
    const double h = 1e-6;
    const double saved = logits[i];
    logits[i] = saved + h;
    const double up = weighted_seg_loss(logits, mask).value;
    logits[i] = saved - h;
    const double down = weighted_seg_loss(logits, mask).value;
    logits[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    CHECK(std::fabs(logits_leaf->grad[i] - fd) < 1e-3 * std::max(1e-3, std::fabs(fd)));
  }

  Tensor pred = random_flow(5, 5, rng);
  const Tensor gt = random_flow(5, 5, rng);
  auto pred_leaf = ag::leaf(pred, true);
  auto epe = epe_loss_node(pred_leaf, gt);
  ag::backward(epe);
  for (int probe = 0; probe < 10; ++probe) {
    const std::size_t i = pick.below(pred.size());
    const double h = 1e-6;
    const double saved = pred[i];
    pred[i] = saved + h;
    const double up = epe_loss(pred, gt).value;
    pred[i] = saved - h;
    const double down = epe_loss(pred, gt).value;
    pred[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    CHECK(std::fabs(pred_leaf->grad[i] - fd) < 1e-3 * std::max(1e-3, std::fabs(fd)));
  }
}

TEST_CASE("combined loss gradient scales linearly in lambda") {
  // With the segmentation term independent of the probed values, the
  // gradient through the flow term must double when lambda doubles.
  Rng rng(77);
  Tensor pred = random_flow(4, 4, rng);
  const Tensor gt = random_flow(4, 4, rng);
  const Tensor mask = random_mask(4, 4, rng);
  const Tensor logits = random_logits(4, 4, rng);

  auto grad_at = [&](double lambda) {
    auto pred_leaf = ag::leaf(pred, true);
    auto seg = weighted_seg_loss_node(ag::leaf(logits, false), mask);
    auto flow = epe_loss_node(pred_leaf, gt);
    auto total = combined_loss_node(seg, flow, lambda);
    ag::backward(total);
    return pred_leaf->grad;
  };

  const Tensor g1 = grad_at(0.1);
  const Tensor g2 = grad_at(0.2);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    if (std::fabs(g1[i]) < 1e-12) continue;
    CHECK(g2[i] / g1[i] == doctest::Approx(2.0).epsilon(1e-6));
  }
}
