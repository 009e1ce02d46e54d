// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "paanet/image_io.hpp"
#include "paanet/metrics.hpp"
#include "paanet/rng.hpp"
#include "test_util.hpp"

using namespace paanet;
using paatest::random_tensor;

namespace {

Tensor binary_from_bits(unsigned bits, int h, int w) {
  Tensor t(Shape(1, 1, h, w));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = (bits >> i) & 1u ? 1.0 : 0.0;
  return t;
}

Tensor random_binary(Shape s, Rng& rng, double p = 0.5) {
  Tensor t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = rng.uniform() < p ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST_CASE("mae closed forms") {
  Rng rng(1);
  Tensor gt = random_binary(Shape(1, 1, 5, 5), rng);
  CHECK(mae(gt, gt) == 0.0);

  Tensor inv(Shape(1, 1, 5, 5));
  for (std::int64_t i = 0; i < inv.numel(); ++i) inv[i] = 1.0 - gt[i];
  CHECK(mae(inv, gt) == 1.0);

  // 4×4: 8 pixels off by 0.5, 8 exact → 0.25
  Tensor gt4(Shape(1, 1, 4, 4));
  Tensor pred4(Shape(1, 1, 4, 4));
  for (int i = 0; i < 16; ++i) {
    gt4[i] = i % 2 ? 1.0 : 0.0;
    pred4[i] = i < 8 ? gt4[i] : 0.5;
  }
  CHECK(mae(pred4, gt4) == doctest::Approx(0.25).epsilon(1e-15));

  Tensor wrong(Shape(1, 1, 4, 5));
  CHECK_THROWS_AS(mae(wrong, gt4), ArgumentError);
}

TEST_CASE("mae is symmetric for binary predictions") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_binary(Shape(1, 1, 6, 7), rng);
    Tensor b = random_binary(Shape(1, 1, 6, 7), rng);
    CHECK(mae(a, b) == mae(b, a));
  }
}

TEST_CASE("prf closed forms and the pinned degenerate rule") {
  Rng rng(3);
  Tensor gt = random_binary(Shape(1, 1, 8, 8), rng);
  Prf perfect = prf_at_threshold(gt, gt, 0.5);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f == 1.0);
  CHECK(perfect.fpr == 0.0);

  // all-positive prediction over half-positive GT: P=1/2, R=1,
  // F = 1.3·0.5·1/(0.3·0.5 + 1) = 13/23
  Tensor half(Shape(1, 1, 4, 4));
  for (int i = 0; i < 16; ++i) half[i] = i < 8 ? 1.0 : 0.0;
  Tensor ones = Tensor::full(Shape(1, 1, 4, 4), 1.0);
  Prf r = prf_at_threshold(ones, half, 0.5);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 1.0);
  CHECK(r.fpr == 1.0);
  CHECK(r.f == doctest::Approx(13.0 / 23.0).epsilon(1e-15));

  Tensor zeros(Shape(1, 1, 4, 4));
  Prf empty = prf_at_threshold(zeros, zeros, 0.5);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f == 0.0);
  CHECK(empty.fpr == 0.0);
}

TEST_CASE("prf matches the pixel-counting oracle on random binary pairs") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    Tensor pred = binary_from_bits(static_cast<unsigned>(rng.uniform_int(65536)), 4, 4);
    Tensor gt = binary_from_bits(static_cast<unsigned>(rng.uniform_int(65536)), 4, 4);
    Prf got = prf_at_threshold(pred, gt, 0.5);
    oracle::Prf want = oracle::prf(pred, gt, 0.5);
    CHECK(got.precision == want.precision);
    CHECK(got.recall == want.recall);
    CHECK(got.fpr == want.fpr);
    CHECK(got.f == want.f);
  }
}

TEST_CASE("threshold sweep equals per-threshold brute force bit for bit") {
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor pred = random_tensor(Shape(1, 1, 9, 7), rng, 0.0, 1.0);
    // mix in exact threshold-grid values to stress the comparison
    for (std::int64_t i = 0; i < pred.numel(); i += 3)
      pred[i] = double(rng.uniform_int(256)) / 255.0;
    Tensor gt = random_binary(Shape(1, 1, 9, 7), rng);
    SweepStats stats = sweep_stats(pred, gt);
    for (int i = 0; i < kNumThresholds; ++i) {
      Prf want = prf_at_threshold(pred, gt, sweep_threshold(i));
      CHECK(stats.precision[i] == want.precision);
      CHECK(stats.recall[i] == want.recall);
      CHECK(stats.fpr[i] == want.fpr);
      CHECK(stats.f[i] == want.f);
    }
  }
}

TEST_CASE("fm curve: perfect set, ordering invariant, and counting oracle") {
  Rng rng(6);
  PairSet perfect;
  for (int i = 0; i < 3; ++i) {
    Tensor gt = random_binary(Shape(1, 1, 6, 6), rng);
    gt[0] = 1.0;  // keep at least one positive
    perfect.emplace_back(gt.clone(), gt);
  }
  FmResult fp = fm_curve(perfect);
  CHECK(fp.max_fm == 1.0);
  CHECK(fp.mean_fm <= fp.max_fm);
  CHECK(fp.pr.points.size() == kNumThresholds);

  PairSet toy;
  for (int i = 0; i < 2; ++i)
    toy.emplace_back(random_tensor(Shape(1, 1, 5, 5), rng, 0.0, 1.0),
                     random_binary(Shape(1, 1, 5, 5), rng));
  FmResult got = fm_curve(toy);
  auto [want_max, want_mean] = oracle::fm_max_mean(toy);
  CHECK(got.max_fm == doctest::Approx(want_max).epsilon(1e-15));
  CHECK(got.mean_fm == doctest::Approx(want_mean).epsilon(1e-15));

  CHECK_THROWS_AS(fm_curve(PairSet{}), ArgumentError);
}

TEST_CASE("s-measure: perfect, inverted, degenerate, and oracle agreement") {
  Rng rng(7);
  Tensor gt = random_binary(Shape(1, 1, 8, 8), rng);
  gt[0] = 1.0;
  gt[1] = 0.0;
  const double s_perfect = s_measure(gt, gt);
  CHECK(s_perfect == doctest::Approx(1.0).epsilon(1e-12));

  Tensor inv(Shape(1, 1, 8, 8));
  for (std::int64_t i = 0; i < inv.numel(); ++i) inv[i] = 1.0 - gt[i];
  CHECK(s_measure(inv, gt) < s_perfect);

  // degenerate GTs take the mean-based fallbacks
  Tensor empty(Shape(1, 1, 4, 4));
  Tensor pred = random_tensor(Shape(1, 1, 4, 4), rng, 0.0, 1.0);
  double mean_pred = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) mean_pred += pred[i];
  mean_pred /= double(pred.numel());
  CHECK(s_measure(pred, empty) == doctest::Approx(1.0 - mean_pred).epsilon(1e-15));
  Tensor full = Tensor::full(Shape(1, 1, 4, 4), 1.0);
  CHECK(s_measure(pred, full) == doctest::Approx(mean_pred).epsilon(1e-15));

  // constant 0.5 and random predictions against the scalar reference
  for (int trial = 0; trial < 8; ++trial) {
    Tensor g = random_binary(Shape(1, 1, 7, 9), rng, 0.3);
    g[5] = 1.0;
    g[6] = 0.0;
    Tensor flat = Tensor::full(Shape(1, 1, 7, 9), 0.5);
    CHECK(s_measure(flat, g) ==
          doctest::Approx(oracle::s_measure(flat, g)).epsilon(1e-14));
    Tensor p = random_tensor(Shape(1, 1, 7, 9), rng, 0.0, 1.0);
    CHECK(s_measure(p, g) ==
          doctest::Approx(oracle::s_measure(p, g)).epsilon(1e-14));
  }
}

TEST_CASE("e-measure: perfect, anti-aligned, and alignment-matrix oracle") {
  Rng rng(8);
  Tensor gt = random_binary(Shape(1, 1, 8, 8), rng);
  gt[0] = 1.0;
  gt[1] = 0.0;
  PairSet perfect{{gt.clone(), gt}};
  EmResult ep = e_measure(perfect);
  CHECK(ep.max_em == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ep.mean_em <= ep.max_em);
  CHECK(ep.em.points.size() == kNumThresholds);

  // exactly half-and-half inverted prediction collapses to E = 0 at every
  // interior threshold; the top threshold binarizes to all-zero, whose
  // zero-deviation alignment pins E at (0+1)²/4 = 0.25 — that is the max
  Tensor half(Shape(1, 1, 4, 4));
  for (int i = 0; i < 16; ++i) half[i] = i < 8 ? 1.0 : 0.0;
  Tensor anti(Shape(1, 1, 4, 4));
  for (int i = 0; i < 16; ++i) anti[i] = 1.0 - half[i];
  EmResult ea = e_measure(PairSet{{anti, half}});
  CHECK(ea.em.points[128].y < 1e-12);
  CHECK(ea.max_em == doctest::Approx(0.25).epsilon(1e-15));

  // sweep agrees with the full alignment-matrix reference per threshold
  for (int trial = 0; trial < 3; ++trial) {
    Tensor pred = random_tensor(Shape(1, 1, 6, 7), rng, 0.0, 1.0);
    Tensor g = random_binary(Shape(1, 1, 6, 7), rng);
    SweepStats stats = sweep_stats(pred, g);
    for (int i = 0; i < kNumThresholds; i += 17) {
      Tensor fm(pred.shape());
      for (std::int64_t j = 0; j < pred.numel(); ++j)
        fm[j] = pred[j] > sweep_threshold(i) ? 1.0 : 0.0;
      CHECK(stats.em[i] ==
            doctest::Approx(oracle::e_measure_binary(fm, g)).epsilon(1e-14));
    }
  }
}

TEST_CASE("roc: separable, constant, monotone, and auc anchors") {
  Rng rng(9);
  Tensor gt = random_binary(Shape(1, 1, 8, 8), rng);
  gt[0] = 1.0;
  gt[1] = 0.0;
  RocResult sep = roc_curve(PairSet{{gt.clone(), gt}});
  CHECK(sep.auc == doctest::Approx(1.0).epsilon(1e-15));

  Tensor flat = Tensor::full(Shape(1, 1, 8, 8), 0.5);
  RocResult mid = roc_curve(PairSet{{flat, gt}});
  CHECK(mid.auc == doctest::Approx(0.5).epsilon(1e-15));

  Tensor pred = random_tensor(Shape(1, 1, 10, 10), rng, 0.0, 1.0);
  Tensor g = random_binary(Shape(1, 1, 10, 10), rng);
  RocResult r = roc_curve(PairSet{{pred, g}});
  for (std::size_t i = 1; i < r.roc.points.size(); ++i) {
    CHECK(r.roc.points[i].x <= r.roc.points[i - 1].x + 1e-15);
    CHECK(r.roc.points[i].y <= r.roc.points[i - 1].y + 1e-15);
  }
  CHECK(r.auc >= 0.0);
  CHECK(r.auc <= 1.0);
}

TEST_CASE("evaluate_pairs: perfect copies and field ranges") {
  Rng rng(10);
  PairSet pairs;
  for (int i = 0; i < 3; ++i) {
    Tensor gt = random_binary(Shape(1, 1, 8, 8), rng);
    gt[0] = 1.0;
    gt[1] = 0.0;
    pairs.emplace_back(gt.clone(), gt);
  }
  MetricReport rep = evaluate_pairs(pairs);
  CHECK(rep.mae == 0.0);
  CHECK(rep.max_fm == 1.0);
  CHECK(rep.sm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.max_em == doctest::Approx(1.0).epsilon(1e-12));

  PairSet noisy;
  for (int i = 0; i < 3; ++i)
    noisy.emplace_back(random_tensor(Shape(1, 1, 8, 8), rng, 0.0, 1.0),
                       random_binary(Shape(1, 1, 8, 8), rng));
  MetricReport rn = evaluate_pairs(noisy);
  for (double v : {rn.mae, rn.max_fm, rn.mean_fm, rn.max_em, rn.mean_em,
                   rn.sm, rn.auc}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(rn.mean_fm <= rn.max_fm);
  CHECK(rn.mean_em <= rn.max_em);
}

TEST_CASE("evaluate_dataset writes the full report file set") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("paanet_metrics_" + std::to_string(::getpid()));
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  Rng rng(11);
  for (int i = 0; i < 3; ++i) {
    Tensor gt = random_binary(Shape(1, 1, 16, 16), rng);
    gt[0] = 1.0;
    gt[1] = 0.0;
    const std::string name = "img" + std::to_string(i) + ".png";
    write_png((dir / "gt" / name).string(), tensor_to_gray_u8(gt));
    write_png((dir / "pred" / name).string(), tensor_to_gray_u8(gt));
  }
  MetricReport rep = evaluate_dataset((dir / "pred").string(),
                                      (dir / "gt").string(),
                                      (dir / "out").string());
  CHECK(rep.mae == 0.0);
  CHECK(rep.max_fm == 1.0);
  CHECK(rep.sm == doctest::Approx(1.0).epsilon(1e-12));

  for (const char* f : {"report.csv", "curve_pr.csv", "curve_roc.csv",
                        "curve_fm.csv", "curve_em.csv", "point_sm_mae.csv"})
    CHECK(fs::exists(dir / "out" / f));

  std::ifstream curve(dir / "out" / "curve_pr.csv");
  std::string line;
  std::getline(curve, line);
  CHECK(line == "threshold,x,y");
  int rows = 0;
  while (std::getline(curve, line)) ++rows;
  CHECK(rows == kNumThresholds);

  // unmatched filename must fail loudly
  write_png((dir / "pred" / "extra.png").string(),
            tensor_to_gray_u8(Tensor::full(Shape(1, 1, 4, 4), 0.0)));
  CHECK_THROWS_AS(evaluate_dataset((dir / "pred").string(),
                                   (dir / "gt").string(),
                                   (dir / "out2").string()),
                  ArgumentError);
  fs::remove_all(dir);
}
