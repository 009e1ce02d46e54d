// SPDX-License-Identifier: Apache-2.0

#include "paanet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "paanet/image_io.hpp"

namespace paanet {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_pair(const Tensor& pred, const Tensor& gt) {
  require(pred.shape() == gt.shape(),
          "metrics: shape mismatch " + pred.shape().str() + " vs " +
              gt.shape().str());
  require(pred.shape().n == 1 && pred.shape().c == 1,
          "metrics: maps must be (1,1,H,W), got " + pred.shape().str());
}

double f_beta(double p, double r) {
  const double den = kFmBetaSq * p + r;
  return den == 0 ? 0.0 : (1.0 + kFmBetaSq) * p * r / den;
}

struct Counts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Prf prf_from_counts(const Counts& c) {
  Prf out;
  out.precision = c.tp + c.fp == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fp);
  out.recall = c.tp + c.fn == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
  out.fpr = c.fp + c.tn == 0 ? 0.0 : double(c.fp) / double(c.fp + c.tn);
  out.f = f_beta(out.precision, out.recall);
  return out;
}

// E for a binarized map against binary GT, from confusion counts.  Each
// pixel class has one alignment value, so the sum collapses to four terms.
double em_from_counts(const Counts& c, std::int64_t n) {
  const std::int64_t pos = c.tp + c.fp;   // predicted foreground
  const std::int64_t gtp = c.tp + c.fn;   // true foreground
  if (gtp == 0) return double(c.tn) / double(n);
  if (gtp == n) return double(c.tp) / double(n);
  const double mu_fm = double(pos) / double(n);
  const double mu_gt = double(gtp) / double(n);
  auto enhanced = [&](double g, double f) {
    const double ag = g - mu_gt, af = f - mu_fm;
    const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
    return (align + 1.0) * (align + 1.0) / 4.0;
  };
  const double sum = double(c.tp) * enhanced(1, 1) +
                     double(c.fn) * enhanced(1, 0) +
                     double(c.fp) * enhanced(0, 1) +
                     double(c.tn) * enhanced(0, 0);
  return sum / double(n);
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() <= 1) return 0.0;
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (double(v.size()) - 1.0));
}

double object_score(const std::vector<double>& vals) {
  if (vals.empty()) return 0.0;
  double mean = 0;
  for (double x : vals) mean += x;
  mean /= double(vals.size());
  const double sigma = sample_std(vals, mean);
  return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

// The custom region similarity of the structure-measure reference (its
// variances use N-1+eps and a three-way alpha/beta case split).
double region_ssim(const std::vector<double>& p, const std::vector<double>& g) {
  const double n = double(p.size());
  if (p.empty()) return 0.0;  // weight is 0 whenever a region is empty
  double x = 0, y = 0;
  for (double v : p) x += v;
  for (double v : g) y += v;
  x /= n;
  y /= n;
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sx += (p[i] - x) * (p[i] - x);
    sy += (g[i] - y) * (g[i] - y);
    sxy += (p[i] - x) * (g[i] - y);
  }
  sx /= n - 1.0 + kEps;
  sy /= n - 1.0 + kEps;
  sxy /= n - 1.0 + kEps;
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0) return alpha / (beta + kEps);
  return beta == 0 ? 1.0 : 0.0;
}

// MATLAB-style round: half away from zero (inputs here are positive).
std::int64_t round_half_up(double v) {
  return static_cast<std::int64_t>(std::floor(v + 0.5));
}

}  // namespace

double sweep_threshold(int i) { return double(i) / 255.0; }

double mae(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  double acc = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i)
    acc += std::abs(pred[i] - gt[i]);
  return acc / double(pred.numel());
}

Prf prf_at_threshold(const Tensor& pred, const Tensor& gt, double t) {
  check_pair(pred, gt);
  Counts c;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const bool pos = pred[i] > t;
    const bool truth = gt[i] != 0.0;
    if (pos && truth) ++c.tp;
    else if (pos) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return prf_from_counts(c);
}

double s_measure(const Tensor& pred, const Tensor& gt, double alpha) {
  check_pair(pred, gt);
  require(alpha >= 0.0 && alpha <= 1.0, "s_measure: alpha out of [0,1]");
  const std::int64_t hei = pred.shape().h, wid = pred.shape().w;
  const std::int64_t n = hei * wid;

  double gt_mean = 0;
  for (std::int64_t i = 0; i < n; ++i) gt_mean += gt[i];
  gt_mean /= double(n);
  double pred_mean = 0;
  for (std::int64_t i = 0; i < n; ++i) pred_mean += pred[i];
  pred_mean /= double(n);

  if (gt_mean == 0.0) return 1.0 - pred_mean;
  if (gt_mean == 1.0) return pred_mean;

  // object part: foreground on pred, background on 1-pred
  std::vector<double> fg_vals, bg_vals;
  for (std::int64_t i = 0; i < n; ++i) {
    if (gt[i] != 0.0)
      fg_vals.push_back(pred[i]);
    else
      bg_vals.push_back(1.0 - pred[i]);
  }
  const double s_object =
      gt_mean * object_score(fg_vals) + (1.0 - gt_mean) * object_score(bg_vals);

  // region part: split both maps at the GT centroid (1-based, rounded)
  double total = 0, col_acc = 0, row_acc = 0;
  for (std::int64_t h = 0; h < hei; ++h)
    for (std::int64_t w = 0; w < wid; ++w) {
      const double g = gt.at(0, 0, h, w);
      total += g;
      col_acc += g * double(w + 1);
      row_acc += g * double(h + 1);
    }
  const std::int64_t cx = round_half_up(col_acc / total);
  const std::int64_t cy = round_half_up(row_acc / total);

  std::vector<double> pr[4], gr[4];
  for (std::int64_t h = 0; h < hei; ++h)
    for (std::int64_t w = 0; w < wid; ++w) {
      const int region = (h < cy ? 0 : 2) + (w < cx ? 0 : 1);
      pr[region].push_back(pred.at(0, 0, h, w));
      gr[region].push_back(gt.at(0, 0, h, w));
    }
  const double area = double(n);
  const double w1 = double(cx * cy) / area;
  const double w2 = double((wid - cx) * cy) / area;
  const double w3 = double(cx * (hei - cy)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double s_region = w1 * region_ssim(pr[0], gr[0]) +
                          w2 * region_ssim(pr[1], gr[1]) +
                          w3 * region_ssim(pr[2], gr[2]) +
                          w4 * region_ssim(pr[3], gr[3]);

  const double q = alpha * s_object + (1.0 - alpha) * s_region;
  return q < 0.0 ? 0.0 : q;
}

SweepStats sweep_stats(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  const std::int64_t n = pred.numel();

  // Histogram pixels by how many thresholds they clear, using the exact
  // per-threshold predicate (pred > i/255) via binary search, so the sweep
  // agrees bit for bit with brute-force counting at each threshold.
  std::array<std::int64_t, kNumThresholds + 1> pos_hist{}, neg_hist{};
  std::int64_t gt_pos = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = pred[i];
    int lo = 0, hi = kNumThresholds;  // cleared thresholds = lo after loop
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (p > sweep_threshold(mid))
        lo = mid + 1;
      else
        hi = mid;
    }
    if (gt[i] != 0.0) {
      ++pos_hist[lo];
      ++gt_pos;
    } else {
      ++neg_hist[lo];
    }
  }

  SweepStats out;
  out.mae = mae(pred, gt);
  out.sm = s_measure(pred, gt);

  // suffix sums: pixels clearing more than i thresholds are positive at t_i
  std::int64_t tp = 0, fp = 0;
  std::array<std::int64_t, kNumThresholds> tp_at{}, fp_at{};
  for (int i = kNumThresholds - 1; i >= 0; --i) {
    tp += pos_hist[i + 1];
    fp += neg_hist[i + 1];
    tp_at[i] = tp;
    fp_at[i] = fp;
  }
  for (int i = 0; i < kNumThresholds; ++i) {
    Counts c;
    c.tp = tp_at[i];
    c.fp = fp_at[i];
    c.fn = gt_pos - c.tp;
    c.tn = (n - gt_pos) - c.fp;
    const Prf prf = prf_from_counts(c);
    out.precision[i] = prf.precision;
    out.recall[i] = prf.recall;
    out.fpr[i] = prf.fpr;
    out.f[i] = prf.f;
    out.em[i] = em_from_counts(c, n);
  }
  return out;
}

namespace {

std::vector<SweepStats> all_stats(const PairSet& pairs) {
  require(!pairs.empty(), "metrics: empty pair set");
  std::vector<SweepStats> stats;
  stats.reserve(pairs.size());
  for (const auto& [pred, gt] : pairs) stats.push_back(sweep_stats(pred, gt));
  return stats;
}

std::array<double, kNumThresholds> mean_over(
    const std::vector<SweepStats>& stats,
    const std::array<double, kNumThresholds> SweepStats::*member) {
  std::array<double, kNumThresholds> out{};
  for (const SweepStats& s : stats)
    for (int i = 0; i < kNumThresholds; ++i) out[i] += (s.*member)[i];
  for (double& v : out) v /= double(stats.size());
  return out;
}

FmResult fm_from_stats(const std::vector<SweepStats>& stats) {
  const auto p = mean_over(stats, &SweepStats::precision);
  const auto r = mean_over(stats, &SweepStats::recall);
  const auto f = mean_over(stats, &SweepStats::f);
  FmResult out;
  out.pr.name = "pr";
  out.fm.name = "fm";
  double sum = 0;
  for (int i = 0; i < kNumThresholds; ++i) {
    const double t = sweep_threshold(i);
    out.pr.points.push_back({t, r[i], p[i]});
    out.fm.points.push_back({t, t, f[i]});
    out.max_fm = std::max(out.max_fm, f[i]);
    sum += f[i];
  }
  out.mean_fm = sum / kNumThresholds;
  return out;
}

EmResult em_from_stats(const std::vector<SweepStats>& stats) {
  const auto e = mean_over(stats, &SweepStats::em);
  EmResult out;
  out.em.name = "em";
  double sum = 0;
  for (int i = 0; i < kNumThresholds; ++i) {
    out.em.points.push_back({sweep_threshold(i), sweep_threshold(i), e[i]});
    out.max_em = std::max(out.max_em, e[i]);
    sum += e[i];
  }
  out.mean_em = sum / kNumThresholds;
  return out;
}

RocResult roc_from_stats(const std::vector<SweepStats>& stats) {
  const auto fpr = mean_over(stats, &SweepStats::fpr);
  const auto tpr = mean_over(stats, &SweepStats::recall);
  RocResult out;
  out.roc.name = "roc";
  for (int i = 0; i < kNumThresholds; ++i)
    out.roc.points.push_back({sweep_threshold(i), fpr[i], tpr[i]});
  // integrate in ascending-FPR order (descending threshold) with the
  // conventional (0,0) and (1,1) anchors
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  for (int i = kNumThresholds - 1; i >= 0; --i)
    pts.emplace_back(fpr[i], tpr[i]);
  pts.emplace_back(1.0, 1.0);
  double auc = 0;
  for (std::size_t k = 1; k < pts.size(); ++k)
    auc += (pts[k].first - pts[k - 1].first) *
           (pts[k].second + pts[k - 1].second) / 2.0;
  out.auc = auc;
  return out;
}

}  // namespace

FmResult fm_curve(const PairSet& pairs) { return fm_from_stats(all_stats(pairs)); }

EmResult e_measure(const PairSet& pairs) {
  return em_from_stats(all_stats(pairs));
}

RocResult roc_curve(const PairSet& pairs) {
  return roc_from_stats(all_stats(pairs));
}

MetricReport evaluate_pairs(const PairSet& pairs) {
  const std::vector<SweepStats> stats = all_stats(pairs);
  MetricReport rep;
  for (const SweepStats& s : stats) {
    rep.mae += s.mae;
    rep.sm += s.sm;
  }
  rep.mae /= double(stats.size());
  rep.sm /= double(stats.size());
  FmResult fm = fm_from_stats(stats);
  rep.max_fm = fm.max_fm;
  rep.mean_fm = fm.mean_fm;
  rep.pr = std::move(fm.pr);
  rep.fm = std::move(fm.fm);
  EmResult em = em_from_stats(stats);
  rep.max_em = em.max_em;
  rep.mean_em = em.mean_em;
  rep.em = std::move(em.em);
  RocResult roc = roc_from_stats(stats);
  rep.auc = roc.auc;
  rep.roc = std::move(roc.roc);
  return rep;
}

namespace {

std::map<std::string, std::filesystem::path> index_pngs(
    const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png") continue;
    out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

Tensor load_gray(const std::filesystem::path& path) {
  ImageU8 img = read_image(path.string());
  require(img.channels == 1, "expected grayscale image: " + path.string());
  return image_to_tensor(img);
}

void write_curve(const std::filesystem::path& path, const Curve& curve) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "threshold,x,y\n";
  char buf[128];
  for (const CurvePoint& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.x,
                  p.y);
    f << buf;
  }
}

}  // namespace

MetricReport evaluate_dataset(const std::string& pred_dir,
                              const std::string& gt_dir,
                              const std::string& out_dir) {
  auto preds = index_pngs(pred_dir);
  auto gts = index_pngs(gt_dir);
  for (const auto& [stem, path] : preds)
    if (!gts.count(stem))
      throw ArgumentError("prediction without ground truth: " + path.string());
  PairSet pairs;
  for (const auto& [stem, gt_path] : gts) {
    auto pit = preds.find(stem);
    if (pit == preds.end())
      throw ArgumentError("ground truth without prediction: " +
                          gt_path.string());
    Tensor pred = load_gray(pit->second);
    Tensor gt = load_gray(gt_path);
    for (std::int64_t i = 0; i < gt.numel(); ++i)
      gt[i] = gt[i] >= 128.0 / 255.0 ? 1.0 : 0.0;
    pairs.emplace_back(std::move(pred), std::move(gt));
  }
  MetricReport rep = evaluate_pairs(pairs);
  write_report(rep, out_dir);
  return rep;
}

void write_report(const MetricReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  std::ofstream f(out / "report.csv");
  if (!f) throw IoError("cannot write report.csv under " + out_dir);
  char buf[96];
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%s,%.17g\n", name, v);
    f << buf;
  };
  f << "metric,value\n";
  row("mae", report.mae);
  row("max_fm", report.max_fm);
  row("mean_fm", report.mean_fm);
  row("max_em", report.max_em);
  row("mean_em", report.mean_em);
  row("s_measure", report.sm);
  row("auc", report.auc);

  write_curve(out / "curve_pr.csv", report.pr);
  write_curve(out / "curve_roc.csv", report.roc);
  write_curve(out / "curve_fm.csv", report.fm);
  write_curve(out / "curve_em.csv", report.em);

  std::ofstream pt(out / "point_sm_mae.csv");
  if (!pt) throw IoError("cannot write point_sm_mae.csv under " + out_dir);
  std::snprintf(buf, sizeof buf, "sm,mae\n%.17g,%.17g\n", report.sm,
                report.mae);
  pt << buf;
}

}  // namespace paanet
