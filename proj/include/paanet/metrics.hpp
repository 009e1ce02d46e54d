// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "paanet/layers.hpp"

namespace paanet {

/// All threshold sweeps use exactly these 256 cut points, i/255 for
/// i = 0..255; a pixel is positive when pred > t (strictly).
inline constexpr int kNumThresholds = 256;
double sweep_threshold(int i);

inline constexpr double kFmBetaSq = 0.3;

struct Prf {
  double precision = 0;
  double recall = 0;
  double fpr = 0;
  double f = 0;
};

/// Confusion-count rates at one threshold, 0/0 → 0 throughout.
/// F = (1+β²)·P·R / (β²·P + R) with β² = 0.3.
Prf prf_at_threshold(const Tensor& pred, const Tensor& gt, double t);

/// Mean |pred − gt| over all pixels.
double mae(const Tensor& pred, const Tensor& gt);

/// Structure measure: α·S_object + (1−α)·S_region, with the reference
/// definition's edge cases (empty GT → 1 − mean(pred), full GT →
/// mean(pred), negative scores clamped to 0).
double s_measure(const Tensor& pred, const Tensor& gt, double alpha = 0.5);

struct CurvePoint {
  double threshold;
  double x;
  double y;
};

struct Curve {
  std::string name;
  std::vector<CurvePoint> points;  // one per threshold, ascending
};

/// Prediction/ground-truth pairs; gt maps must be binary.
using PairSet = std::vector<std::pair<Tensor, Tensor>>;

/// Everything the per-image threshold sweep yields; dataset curves are
/// means of these across images at each threshold.
struct SweepStats {
  std::array<double, kNumThresholds> precision, recall, fpr, f, em;
  double mae = 0;
  double sm = 0;
};
SweepStats sweep_stats(const Tensor& pred, const Tensor& gt);

struct FmResult {
  Curve pr;  // x = recall, y = precision
  Curve fm;  // x = threshold, y = F
  double max_fm = 0;
  double mean_fm = 0;
};
FmResult fm_curve(const PairSet& pairs);

struct EmResult {
  Curve em;  // x = threshold, y = E
  double max_em = 0;
  double mean_em = 0;
};
/// Enhanced-alignment measure, swept over the 256 thresholds and averaged
/// over the set at each threshold; normalization is 1/(W·H).
EmResult e_measure(const PairSet& pairs);

struct RocResult {
  Curve roc;  // x = FPR, y = TPR
  double auc = 0;
};
RocResult roc_curve(const PairSet& pairs);

struct MetricReport {
  double mae = 0;
  double max_fm = 0, mean_fm = 0;
  double max_em = 0, mean_em = 0;
  double sm = 0;
  double auc = 0;
  Curve pr, roc, fm, em;
};

/// Scalar metrics and the four curves over matched pairs.
MetricReport evaluate_pairs(const PairSet& pairs);

/// Loads filename-matched grayscale predictions and binary GT images,
/// evaluates, and writes report.csv, the four curve CSVs, and the
/// (Sm, MAE) point file under out_dir.
MetricReport evaluate_dataset(const std::string& pred_dir,
                              const std::string& gt_dir,
                              const std::string& out_dir);

/// The CSV outputs alone (curve files use header `threshold,x,y`).
void write_report(const MetricReport& report, const std::string& out_dir);

}  // namespace paanet
