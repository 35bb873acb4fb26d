#include <cmath>

#include "doctest.h"
#include "segflow/errors.hpp"
#include "segflow/eval_report.hpp"
#include "segflow/metrics.hpp"
#include "segflow/rng.hpp"

using namespace segflow;

namespace {

Tensor block_mask(int h, int w, int y0, int x0, int bh, int bw) {
  Tensor m({h, w});
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) m.at(y, x) = 1.0;
  return m;
}

ModelConfig tiny_config(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.input_height = 32;
  cfg.input_width = 32;
  cfg.encoder_channels = {3, 4, 5, 6, 7};
  cfg.flow_channels = {3, 4, 5, 6, 7};
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("region_similarity analytic cases") {
  const Tensor a = block_mask(4, 4, 0, 0, 2, 2);
  CHECK(region_similarity(a, a) == 1.0);

  const Tensor disjoint = block_mask(4, 4, 2, 2, 2, 2);
  CHECK(region_similarity(a, disjoint) == 0.0);

  // 2x2 block vs the same block shifted one column: overlap 2, union 6.
  const Tensor shifted = block_mask(4, 4, 0, 1, 2, 2);
  CHECK(region_similarity(shifted, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Both empty agree there is no object.
  CHECK(region_similarity(Tensor({4, 4}), Tensor({4, 4})) == 1.0);

  CHECK_THROWS_AS(region_similarity(a, Tensor({5, 5})), ShapeError);
}

TEST_CASE("region_similarity symmetry and joint-translation invariance") {
  Rng rng(3);
  Tensor a({6, 6}), b({6, 6});
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    b[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
  }
  CHECK(region_similarity(a, b) == region_similarity(b, a));

  const Tensor a0 = block_mask(8, 8, 1, 1, 3, 2);
  const Tensor b0 = block_mask(8, 8, 2, 1, 3, 2);
  const Tensor a1 = block_mask(8, 8, 3, 4, 3, 2);
  const Tensor b1 = block_mask(8, 8, 4, 4, 3, 2);
  CHECK(region_similarity(a0, b0) == region_similarity(a1, b1));
}

TEST_CASE("contour_accuracy analytic cases") {
  const Tensor square = block_mask(10, 10, 3, 3, 4, 4);
  CHECK(contour_accuracy(square, square) == 1.0);

  // Shifted by one pixel: every boundary pixel within 2 px.
  const Tensor shifted = block_mask(10, 10, 3, 4, 4, 4);
  CHECK(contour_accuracy(shifted, square, 2) == 1.0);

  // Independent distance oracle on the same 10x10 squares.
  auto boundary_points = [](const Tensor& m) {
    std::vector<std::pair<int, int>> pts;
    for (int y = 0; y < m.dim(0); ++y)
      for (int x = 0; x < m.dim(1); ++x) {
        if (m.at(y, x) != 1.0) continue;
        const bool edge = y == 0 || y == m.dim(0) - 1 || x == 0 || x == m.dim(1) - 1 ||
                          m.at(y - 1, x) == 0.0 || m.at(y + 1, x) == 0.0 ||
                          m.at(y, x - 1) == 0.0 || m.at(y, x + 1) == 0.0;
        if (edge) pts.emplace_back(y, x);
      }
    return pts;
  };
  const auto pb = boundary_points(shifted);
  const auto gb = boundary_points(square);
  auto hits = [](const auto& from, const auto& to, double tol) {
    std::size_t n = 0;
    for (const auto& [y, x] : from) {
      double best = 1e18;
      for (const auto& [gy, gx] : to)
        best = std::min(best, std::hypot(double(y - gy), double(x - gx)));
      n += best <= tol ? 1 : 0;
    }
    return static_cast<double>(n) / static_cast<double>(from.size());
  };
  const double precision = hits(pb, gb, 2.0);
  const double recall = hits(gb, pb, 2.0);
  const double expected = 2.0 * precision * recall / (precision + recall);
  CHECK(contour_accuracy(shifted, square, 2) == doctest::Approx(expected).epsilon(1e-12));

  // Far-apart boundaries score zero.
  const Tensor far_a = block_mask(16, 16, 0, 0, 3, 3);
  const Tensor far_b = block_mask(16, 16, 10, 10, 3, 3);
  CHECK(contour_accuracy(far_a, far_b, 2) == 0.0);

  // Empty-boundary conventions.
  CHECK(contour_accuracy(Tensor({8, 8}), Tensor({8, 8})) == 1.0);
  CHECK(contour_accuracy(far_a, Tensor({16, 16})) == 0.0);
}

TEST_CASE("stat_triplet analytic cases") {
  {
    const auto [mean, recall, decay] = stat_triplet({0.8, 0.8, 0.8, 0.8});
    CHECK(mean == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(recall == 1.0);
    CHECK(decay == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    const auto [mean, recall, decay] = stat_triplet({1.0, 1.0, 0.0, 0.0});
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(recall == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(decay == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    const auto [mean, recall, decay] = stat_triplet({0.2, 0.5, 0.1});
    CHECK(recall == 0.0);  // nothing strictly above 0.5
    CHECK(mean == doctest::Approx(0.8 / 3.0).epsilon(1e-12));
    CHECK(decay == doctest::Approx(0.1).epsilon(1e-12));
  }
}

TEST_CASE("stat_triplet: mean is permutation-invariant, decay is not") {
  const std::vector<double> v{0.9, 0.7, 0.4, 0.2};
  const std::vector<double> r{0.2, 0.4, 0.7, 0.9};
  const auto [m1, rec1, d1] = stat_triplet(v);
  const auto [m2, rec2, d2] = stat_triplet(r);
  CHECK(m1 == doctest::Approx(m2).epsilon(1e-12));
  CHECK(rec1 == doctest::Approx(rec2).epsilon(1e-12));
  CHECK(d1 == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(d2 == doctest::Approx(-0.7).epsilon(1e-12));
}

TEST_CASE("temporal_stability_proxy analytic cases") {
  const Tensor square = block_mask(12, 12, 4, 4, 3, 3);
  const Tensor zero_flow({2, 12, 12});

  // Static object, zero flow: perfect stability.
  CHECK(temporal_stability_proxy({square, square, square}, {zero_flow, zero_flow}) == 0.0);

  // Mask jumps beyond overlap with zero flow: fully unstable.
  const Tensor jumped = block_mask(12, 12, 4, 9, 3, 3);
  CHECK(temporal_stability_proxy({square, jumped}, {zero_flow}) == 1.0);

  // Translating square with exact ground-truth flow: stable again.
  Tensor flow({2, 12, 12});
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) flow.at(0, y, x) = square.at(y, x) == 1.0 ? 2.0 : 0.0;
  const Tensor moved = block_mask(12, 12, 4, 6, 3, 3);
  CHECK(temporal_stability_proxy({square, moved}, {flow}) == 0.0);

  CHECK_THROWS_AS(temporal_stability_proxy({square}, {}), DataError);
}

TEST_CASE("average_endpoint_error analytic cases") {
  Tensor gt({2, 4, 4});
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = 0.5 * static_cast<double>(i);
  CHECK(average_endpoint_error(gt, gt) == 0.0);

  // Constant residual (3,4): the 3-4-5 triangle.
  Tensor pred = gt;
  const std::size_t n = 16;
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] += 3.0;
    pred[n + i] += 4.0;
  }
  CHECK(average_endpoint_error(pred, gt) == doctest::Approx(5.0).epsilon(1e-12));

  // Random fields vs a per-pixel oracle.
  Rng rng(4);
  Tensor a({2, 8, 8}), b({2, 8, 8});
  Tensor valid({8, 8});
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = rng.bernoulli(0.7) ? 1.0 : 0.0;
  valid.at(0, 0) = 1.0;
  double oracle = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      if (valid.at(y, x) != 1.0) continue;
      oracle += std::hypot(a.at(0, y, x) - b.at(0, y, x), a.at(1, y, x) - b.at(1, y, x));
      ++count;
    }
  oracle /= static_cast<double>(count);
  CHECK(average_endpoint_error(a, b, &valid) == doctest::Approx(oracle).epsilon(1e-9));

  Tensor none({8, 8});
  CHECK_THROWS_AS(average_endpoint_error(a, b, &none), DataError);
}

TEST_CASE("flip_ensemble_infer: mirror-symmetric input gives mirror-symmetric output") {
  const ModelConfig cfg = tiny_config(21);
  SegFlowModel model(cfg);
  FramePair pair;
  pair.frame_t = Tensor({3, 32, 32});
  pair.frame_t1 = Tensor({3, 32, 32});
  Rng rng(22);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 16; ++x) {
        const double v = rng.uniform();
        const double w = rng.uniform();
        pair.frame_t.at(c, y, x) = v;
        pair.frame_t.at(c, y, 31 - x) = v;
        pair.frame_t1.at(c, y, x) = w;
        pair.frame_t1.at(c, y, 31 - x) = w;
      }

  const std::uint64_t before = model.weight_hash();
  const SegFlowOutput out = flip_ensemble_infer(model, pair);
  CHECK(model.weight_hash() == before);  // inference only, weights untouched

  const Tensor p = foreground_probability(out.seg_logits);
  const Tensor p_flipped = hflip(p);
  CHECK(max_abs_diff(p, p_flipped) < 1e-6);

  CHECK(out.seg_logits.shape() == std::vector<int>{2, 32, 32});
  CHECK(out.flow_pred.shape() == std::vector<int>{2, 32, 32});
}

TEST_CASE("flip_ensemble_infer equals the single pass for an equivariant model") {
  // Zeroed score projections make the segmentation output (p = 0.5
  // everywhere) trivially flip-equivariant.
  SegFlowModel model(tiny_config(23));
  for (auto& p : model.parameters())
    if (p.name.rfind("seg.score", 0) == 0) p.value.fill(0.0);
  Rng rng(24);
  FramePair pair;
  pair.frame_t = Tensor({3, 32, 32});
  pair.frame_t1 = Tensor({3, 32, 32});
  for (std::size_t i = 0; i < pair.frame_t.size(); ++i) {
    pair.frame_t[i] = rng.uniform();
    pair.frame_t1[i] = rng.uniform();
  }
  const Tensor single = foreground_probability(model.forward(pair).seg_logits);
  const Tensor ensembled = foreground_probability(flip_ensemble_infer(model, pair).seg_logits);
  CHECK(max_abs_diff(single, ensembled) < 1e-9);
}

TEST_CASE("EvalReport aggregates are recomputable from per-sequence entries") {
  std::map<std::string, SequenceEval> seqs;
  SequenceEval a;
  a.per_frame_J = {0.9, 0.8, 0.7, 0.6};
  a.per_frame_F = {0.5, 0.6, 0.7, 0.8};
  a.T_value = 0.25;
  a.frames = 4;
  a.epe = 1.5;
  SequenceEval b;
  b.per_frame_J = {0.4, 0.4, 0.4, 0.4};
  b.per_frame_F = {0.3, 0.3, 0.3, 0.3};
  b.T_value = 0.75;
  b.frames = 4;
  seqs["a"] = a;
  seqs["b"] = b;

  const EvalReport r = EvalReport::aggregate(seqs);
  const auto [ja_m, ja_r, ja_d] = stat_triplet(a.per_frame_J);
  const auto [jb_m, jb_r, jb_d] = stat_triplet(b.per_frame_J);
  CHECK(r.J_mean == doctest::Approx(0.5 * (ja_m + jb_m)).epsilon(1e-12));
  CHECK(r.J_recall == doctest::Approx(0.5 * (ja_r + jb_r)).epsilon(1e-12));
  CHECK(r.J_decay == doctest::Approx(0.5 * (ja_d + jb_d)).epsilon(1e-12));
  CHECK(r.T_mean == doctest::Approx(0.5).epsilon(1e-12));
  REQUIRE(r.epe.has_value());
  CHECK(*r.epe == doctest::Approx(1.5).epsilon(1e-12));

  const std::string text = r.to_text();
  CHECK(text.find("J Mean") != std::string::npos);
  CHECK(text.find("T-proxy Mean") != std::string::npos);
  CHECK(r.to_json().find("per_sequence") != std::string::npos);
}
