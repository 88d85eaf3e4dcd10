#pragma once

// Histogram gradient-boosted trees: quantile binning, power loss, gradient
// one-side sampling, leaf-wise growth with L1/L2 regularized leaves, and early
// stopping on a later validation block.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsgbm/error.hpp"
#include "tsgbm/rng.hpp"
#include "tsgbm/series_core.hpp"
#include "tsgbm/transforms.hpp"

namespace tsgbm::gbdt {

struct BoostParams {
  int num_iterations = 1000;
  double learning_rate = 0.01;
  int num_leaves = 31;
  int max_depth = -1;  // < 0: unlimited
  double lambda_l1 = 1e-8;
  double lambda_l2 = 1e-3;
  int max_bin = 255;
  int min_data_in_leaf = 20;
  double goss_top_rate = 0.2;
  double goss_other_rate = 0.1;
  double loss_power = 3.0;
  int early_stopping_rounds = 50;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const char* what) { throw Error(Errc::invalid_argument, what); };
    if (num_iterations < 0) fail("num_iterations must be >= 0");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (num_leaves < 2) fail("num_leaves must be >= 2");
    if (lambda_l1 < 0.0 || lambda_l2 < 0.0) fail("lambda_l1/lambda_l2 must be >= 0");
    if (max_bin < 2 || max_bin > 65000) fail("max_bin must be in [2, 65000]");
    if (min_data_in_leaf < 1) fail("min_data_in_leaf must be >= 1");
    if (!(goss_top_rate > 0.0 && goss_top_rate <= 1.0)) fail("goss_top_rate must be in (0, 1]");
    if (goss_other_rate < 0.0 || goss_top_rate + goss_other_rate > 1.0 + 1e-12)
      fail("goss rates need 0 <= b <= 1 - a");
    if (!(loss_power >= 2.0)) fail("loss_power must be >= 2");
    if (early_stopping_rounds < 1) fail("early_stopping_rounds must be >= 1");
  }
};

// --------------------------------------------------------------------- loss

inline constexpr double kHessianFloor = 1e-6;

struct GradHess {
  double grad = 0.0;
  double hess = 0.0;
};

/// L(r) = |r|^p / p with r = pred - target.
inline double power_loss(double pred, double target, double p) {
  return std::pow(std::abs(pred - target), p) / p;
}

inline GradHess loss_grad_hess(double pred, double target, double p) {
  const double r = pred - target;
  const double a = std::abs(r);
  if (p == 2.0) return {r, 1.0};
  const double g = (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)) * std::pow(a, p - 1.0);
  const double h = std::max((p - 1.0) * std::pow(a, p - 2.0), kHessianFloor);
  return {g, h};
}

inline double mean_power_loss(std::span<const double> pred, std::span<const double> target, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += power_loss(pred[i], target[i], p);
  return pred.empty() ? 0.0 : s / static_cast<double>(pred.size());
}

// ------------------------------------------------------------ regularization

/// sign(G) * max(|G| - l1, 0)
inline double soft_threshold(double g, double l1) {
  const double m = std::abs(g) - l1;
  if (m <= 0.0) return 0.0;
  return g > 0 ? m : -m;
}

inline double leaf_value(double g, double h, double l1, double l2) { return -soft_threshold(g, l1) / (h + l2); }

inline double leaf_score(double g, double h, double l1, double l2) {
  const double t = soft_threshold(g, l1);
  return t * t / (h + l2);
}

inline double split_gain(double gl, double hl, double gr, double hr, double l1, double l2) {
  return 0.5 * (leaf_score(gl, hl, l1, l2) + leaf_score(gr, hr, l1, l2) - leaf_score(gl + gr, hl + hr, l1, l2));
}

/// Gains closer than this are ties, resolved toward the lower feature, then bin.
inline double tie_tolerance(double best) { return 1e-12 * std::max(1.0, std::abs(best)); }

// ------------------------------------------------------------------ binning

/// Column-major feature values; undefined entries are missing.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t cols() const { return columns.size(); }
};

struct FeatureBins {
  std::vector<double> cuts;  // strictly increasing; bin i covers [cuts[i-1], cuts[i])

  std::uint16_t num_bins() const { return static_cast<std::uint16_t>(cuts.size() + 1); }
  std::uint16_t missing_bin() const { return num_bins(); }
  std::uint16_t bin(double v) const {
    if (!is_defined(v)) return missing_bin();
    return static_cast<std::uint16_t>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
  }
  friend bool operator==(const FeatureBins&, const FeatureBins&) = default;
};

struct BinMap {
  std::vector<FeatureBins> features;
  friend bool operator==(const BinMap&, const BinMap&) = default;
};

/// Quantile-spaced cut points over the defined values of one feature. Cuts
/// fall midway between neighbouring distinct values, so equal values share a
/// bin and at most max_bin bins result.
inline FeatureBins build_feature_bins(std::span<const double> values, int max_bin) {
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) {
    if (is_defined(x)) v.push_back(x);
  }
  std::sort(v.begin(), v.end());
  std::vector<double> distinct;
  std::vector<std::size_t> cum;  // cumulative count through each distinct value
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (distinct.empty() || v[i] != distinct.back()) {
      distinct.push_back(v[i]);
      cum.push_back(0);
    }
    cum.back() = i + 1;
  }
  FeatureBins fb;
  if (distinct.size() < 2) return fb;
  auto midpoint = [&](std::size_t i) {
    const double m = distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0;
    return m > distinct[i] ? m : distinct[i + 1];
  };
  if (distinct.size() <= static_cast<std::size_t>(max_bin)) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) fb.cuts.push_back(midpoint(i));
    return fb;
  }
  const double n = static_cast<double>(v.size());
  std::size_t pos = 0;
  for (int k = 1; k < max_bin; ++k) {
    const double q = n * k / max_bin;
    while (pos + 1 < distinct.size() && static_cast<double>(cum[pos]) < q) ++pos;
    if (pos + 1 >= distinct.size()) break;
    const double c = midpoint(pos);
    if (fb.cuts.empty() || c > fb.cuts.back()) fb.cuts.push_back(c);
  }
  return fb;
}

inline BinMap build_bins(const FeatureTable& x, int max_bin) {
  BinMap map;
  map.features.reserve(x.cols());
  for (const auto& col : x.columns) map.features.push_back(build_feature_bins(col, max_bin));
  return map;
}

struct BinnedMatrix {
  std::size_t rows = 0;
  std::vector<std::vector<std::uint16_t>> columns;
};

inline BinnedMatrix bin_matrix(const FeatureTable& x, const BinMap& bins) {
  BinnedMatrix m;
  m.rows = x.rows();
  m.columns.resize(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& out = m.columns[f];
    out.resize(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) out[r] = bins.features[f].bin(x.columns[f][r]);
  }
  return m;
}

// --------------------------------------------------------------------- GOSS

struct GossSample {
  std::vector<std::uint32_t> rows;  // ascending
  std::vector<double> weights;      // aligned with rows
};

/// Keeps the top a*N rows by |gradient| (weight 1) and a uniform draw of b*N
/// of the rest (weight (1 - a) / b). a = 1 keeps every row with weight 1.
inline GossSample goss_sample(std::span<const double> gradients, double a, double b, std::uint64_t seed) {
  const std::size_t n = gradients.size();
  GossSample s;
  std::size_t top = static_cast<std::size_t>(std::floor(a * static_cast<double>(n) + 1e-9));
  if (top >= n) {
    s.rows.resize(n);
    std::iota(s.rows.begin(), s.rows.end(), 0u);
    s.weights.assign(n, 1.0);
    return s;
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t i, std::uint32_t j) {
    return std::abs(gradients[i]) > std::abs(gradients[j]);
  });
  std::size_t other = static_cast<std::size_t>(std::floor(b * static_cast<double>(n) + 1e-9));
  other = std::min(other, n - top);
  Rng rng(seed);
  // Partial Fisher-Yates over the small-gradient tail.
  for (std::size_t i = 0; i < other; ++i) {
    const std::size_t j = top + i + rng.index(n - top - i);
    std::swap(order[top + i], order[j]);
  }
  const double amplify = other > 0 ? (1.0 - a) / b : 1.0;
  std::vector<std::pair<std::uint32_t, double>> picked;
  picked.reserve(top + other);
  for (std::size_t i = 0; i < top; ++i) picked.emplace_back(order[i], 1.0);
  for (std::size_t i = top; i < top + other; ++i) picked.emplace_back(order[i], amplify);
  std::sort(picked.begin(), picked.end());
  for (const auto& [r, w] : picked) {
    s.rows.push_back(r);
    s.weights.push_back(w);
  }
  return s;
}

// -------------------------------------------------------------------- trees

struct Node {
  int feature = -1;  // -1 marks a leaf
  std::uint16_t threshold = 0;  // rows with bin <= threshold go left
  bool missing_left = false;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output before learning-rate scaling
  double gain = 0.0;
  std::uint32_t count = 0;
  int depth = 0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const Node&, const Node&) = default;
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<int> split_order;  // internal node ids in the order they were split

  int num_leaves() const {
    int n = 0;
    for (const auto& nd : nodes) n += nd.is_leaf() ? 1 : 0;
    return n;
  }
  int max_depth() const {
    int d = 0;
    for (const auto& nd : nodes) d = std::max(d, nd.depth);
    return d;
  }

  bool goes_left(const Node& nd, std::uint16_t bin, std::uint16_t missing_bin) const {
    if (bin == missing_bin) return nd.missing_left;
    return bin <= nd.threshold;
  }

  template <typename BinOf>
  int leaf_for(BinOf&& bin_of) const {
    int id = 0;
    while (!nodes[id].is_leaf()) {
      const Node& nd = nodes[id];
      const auto [bin, missing] = bin_of(nd.feature);
      id = goes_left(nd, bin, missing) ? nd.left : nd.right;
    }
    return id;
  }

  friend bool operator==(const Tree& a, const Tree& b) { return a.nodes == b.nodes; }
};

struct SplitInfo {
  double gain = 0.0;
  int feature = -1;
  std::uint16_t threshold = 0;
  bool missing_left = false;

  bool valid() const { return feature >= 0; }
};

namespace detail {

struct Histogram {
  std::vector<double> g, h;
  std::vector<std::uint32_t> c;
  std::vector<std::uint16_t> touched;

  void reserve(std::size_t bins) {
    if (g.size() < bins) {
      g.assign(bins, 0.0);
      h.assign(bins, 0.0);
      c.assign(bins, 0);
    }
  }
};

struct LeafWork {
  int node = 0;
  std::vector<std::uint32_t> rows;
  double g = 0.0, h = 0.0;
  int depth = 0;
  SplitInfo best;
};

}  // namespace detail

struct GrowContext {
  const BinnedMatrix* binned = nullptr;
  const BinMap* bins = nullptr;
  std::span<const double> grad;  // indexed by row, already GOSS-weighted
  std::span<const double> hess;
  const BoostParams* params = nullptr;
};

/// Best split of one leaf over every feature. Only bins that hold rows are
/// scanned, so a threshold is always the highest occupied bin on the left.
inline SplitInfo find_best_split(const GrowContext& ctx, const std::vector<std::uint32_t>& rows, double g_total,
                                 double h_total, detail::Histogram& hist) {
  const BoostParams& p = *ctx.params;
  const std::uint32_t n = static_cast<std::uint32_t>(rows.size());
  const std::uint32_t min_leaf = static_cast<std::uint32_t>(p.min_data_in_leaf);
  SplitInfo best;
  if (n < 2 * min_leaf) return best;
  for (std::size_t f = 0; f < ctx.binned->columns.size(); ++f) {
    const FeatureBins& fb = ctx.bins->features[f];
    const std::uint16_t nb = fb.num_bins();
    const std::uint16_t missing = fb.missing_bin();
    hist.reserve(static_cast<std::size_t>(nb) + 1);
    hist.touched.clear();
    const auto& col = ctx.binned->columns[f];
    for (std::uint32_t r : rows) {
      const std::uint16_t b = col[r];
      if (hist.c[b]++ == 0) hist.touched.push_back(b);
      hist.g[b] += ctx.grad[r];
      hist.h[b] += ctx.hess[r];
    }
    std::sort(hist.touched.begin(), hist.touched.end());
    const double gm = hist.g[missing], hm = hist.h[missing];
    const std::uint32_t cm = hist.c[missing];
    double gl = 0.0, hl = 0.0;
    std::uint32_t cl = 0;
    for (std::uint16_t b : hist.touched) {
      if (b == missing) continue;
      gl += hist.g[b];
      hl += hist.h[b];
      cl += hist.c[b];
      for (int dir = 0; dir < (cm > 0 ? 2 : 1); ++dir) {
        const bool miss_left = dir == 1;
        const double lg = miss_left ? gl + gm : gl;
        const double lh = miss_left ? hl + hm : hl;
        const std::uint32_t lc = miss_left ? cl + cm : cl;
        const std::uint32_t rc = n - lc;
        if (lc < min_leaf || rc < min_leaf) continue;
        const double gain = split_gain(lg, lh, g_total - lg, h_total - lh, p.lambda_l1, p.lambda_l2);
        if (gain > best.gain + tie_tolerance(best.gain)) {
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.threshold = b;
          best.missing_left = miss_left;
        }
      }
    }
    for (std::uint16_t b : hist.touched) {
      hist.g[b] = 0.0;
      hist.h[b] = 0.0;
      hist.c[b] = 0;
    }
  }
  return best;
}

/// Leaf-wise growth: always split the leaf whose best split has the highest
/// positive gain, until num_leaves, depth, or min_data_in_leaf binds.
inline Tree grow_tree(const GrowContext& ctx, std::vector<std::uint32_t> rows) {
  const BoostParams& p = *ctx.params;
  detail::Histogram hist;
  Tree tree;
  auto sums = [&](const std::vector<std::uint32_t>& rs, double& g, double& h) {
    g = 0.0;
    h = 0.0;
    for (std::uint32_t r : rs) {
      g += ctx.grad[r];
      h += ctx.hess[r];
    }
  };
  auto can_split = [&](int depth) { return p.max_depth < 0 || depth < p.max_depth; };

  std::vector<detail::LeafWork> leaves(1);
  leaves[0].node = 0;
  leaves[0].rows = std::move(rows);
  sums(leaves[0].rows, leaves[0].g, leaves[0].h);
  tree.nodes.push_back(Node{});
  if (can_split(0)) leaves[0].best = find_best_split(ctx, leaves[0].rows, leaves[0].g, leaves[0].h, hist);

  while (static_cast<int>(leaves.size()) < p.num_leaves) {
    int pick = -1;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const SplitInfo& s = leaves[i].best;
      if (!s.valid() || !(s.gain > 0.0)) continue;
      if (pick < 0 || s.gain > leaves[pick].best.gain + tie_tolerance(leaves[pick].best.gain)) pick = static_cast<int>(i);
    }
    if (pick < 0) break;

    detail::LeafWork parent = std::move(leaves[pick]);
    const SplitInfo s = parent.best;
    const auto& col = ctx.binned->columns[s.feature];
    const std::uint16_t missing = ctx.bins->features[s.feature].missing_bin();
    detail::LeafWork lw, rw;
    for (std::uint32_t r : parent.rows) {
      const std::uint16_t b = col[r];
      const bool left = b == missing ? s.missing_left : b <= s.threshold;
      (left ? lw.rows : rw.rows).push_back(r);
    }
    const int left_id = static_cast<int>(tree.nodes.size());
    Node& nd = tree.nodes[parent.node];
    nd.feature = s.feature;
    nd.threshold = s.threshold;
    nd.missing_left = s.missing_left;
    nd.gain = s.gain;
    nd.left = left_id;
    nd.right = left_id + 1;
    nd.count = static_cast<std::uint32_t>(parent.rows.size());
    const int child_depth = nd.depth + 1;
    tree.split_order.push_back(parent.node);
    tree.nodes.push_back(Node{});
    tree.nodes.push_back(Node{});
    tree.nodes[left_id].depth = child_depth;
    tree.nodes[left_id + 1].depth = child_depth;

    lw.node = left_id;
    rw.node = left_id + 1;
    lw.depth = rw.depth = child_depth;
    for (detail::LeafWork* c : {&lw, &rw}) {
      sums(c->rows, c->g, c->h);
      if (can_split(child_depth)) c->best = find_best_split(ctx, c->rows, c->g, c->h, hist);
    }
    leaves[pick] = std::move(lw);
    leaves.insert(leaves.begin() + pick + 1, std::move(rw));
  }

  for (const auto& lf : leaves) {
    Node& nd = tree.nodes[lf.node];
    nd.value = leaf_value(lf.g, lf.h, p.lambda_l1, p.lambda_l2);
    nd.count = static_cast<std::uint32_t>(lf.rows.size());
  }
  return tree;
}

// -------------------------------------------------------------------- model

struct FeatureImportance {
  std::string feature;
  std::uint64_t split_count = 0;
  double gain = 0.0;
};

struct BoostedModel {
  double base_score = 0.0;
  std::vector<Tree> trees;
  BinMap bins;
  std::vector<std::string> feature_names;
  transforms::TransformSpec target_spec;
  BoostParams params;
  int best_iteration = 0;  // number of trees kept

  /// Prediction for one row given raw values in model feature order.
  double predict_row(std::span<const double> values) const {
    double out = 0.0;
    for (const auto& t : trees) {
      const int leaf = t.leaf_for([&](int f) {
        const auto& fb = bins.features[f];
        return std::pair<std::uint16_t, std::uint16_t>{fb.bin(values[f]), fb.missing_bin()};
      });
      out += t.nodes[leaf].value;
    }
    return base_score + params.learning_rate * out;
  }
};

/// Maps model features onto the table's columns by name.
inline std::vector<std::size_t> resolve_columns(const BoostedModel& m, const FeatureTable& x) {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < x.names.size(); ++i) where.emplace(x.names[i], i);
  std::vector<std::size_t> idx;
  idx.reserve(m.feature_names.size());
  for (const auto& n : m.feature_names) {
    auto it = where.find(n);
    if (it == where.end()) throw Error(Errc::missing_column, "feature '" + n + "' required by the model is missing");
    idx.push_back(it->second);
  }
  return idx;
}

inline std::vector<double> predict(const BoostedModel& m, const FeatureTable& x) {
  const auto idx = resolve_columns(m, x);
  std::vector<double> out(x.rows());
  std::vector<double> row(idx.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t f = 0; f < idx.size(); ++f) row[f] = x.columns[idx[f]][r];
    out[r] = m.predict_row(row);
  }
  return out;
}

inline std::vector<FeatureImportance> feature_importance(const BoostedModel& m) {
  std::vector<FeatureImportance> out(m.feature_names.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].feature = m.feature_names[i];
  for (const auto& t : m.trees) {
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) continue;
      out[nd.feature].split_count += 1;
      out[nd.feature].gain += nd.gain;
    }
  }
  return out;
}

// ----------------------------------------------------------------- training

struct TrainLog {
  std::vector<double> train_loss;  // after each round
  std::vector<double> valid_loss;
  int best_iteration = 0;
  double best_valid_loss = std::numeric_limits<double>::infinity();
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t round) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (round + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Trains on (x, y). When a validation block is given, stops once its loss has
/// not improved for early_stopping_rounds and keeps only the best prefix of trees.
inline BoostedModel train(const FeatureTable& x, std::span<const double> y, const BoostParams& params,
                          const FeatureTable* valid = nullptr, std::span<const double> valid_y = {},
                          TrainLog* log = nullptr) {
  params.validate();
  const std::size_t n = x.rows();
  if (n == 0 || y.empty()) throw Error(Errc::insufficient_data, "train: empty training set");
  if (y.size() != n) throw Error(Errc::misaligned, "train: target length differs from feature rows");
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(Errc::domain, "train: non-finite target");
  }
  if (valid && valid_y.size() != valid->rows()) throw Error(Errc::misaligned, "train: validation target length");
  if (valid && valid->names != x.names) throw Error(Errc::misaligned, "train: validation features differ");

  BoostedModel model;
  model.params = params;
  model.feature_names = x.names;
  model.bins = build_bins(x, params.max_bin);
  double sum = 0.0;
  for (double v : y) sum += v;
  model.base_score = sum / static_cast<double>(n);

  const BinnedMatrix binned = bin_matrix(x, model.bins);
  BinnedMatrix vbinned;
  if (valid) vbinned = bin_matrix(*valid, model.bins);

  std::vector<double> pred(n, model.base_score), grad(n), hess(n), wgrad(n, 0.0), whess(n, 0.0);
  std::vector<double> vpred(valid ? valid->rows() : 0, model.base_score);
  TrainLog local;
  TrainLog& lg = log ? *log : local;
  lg = TrainLog{};
  if (valid) lg.best_valid_loss = mean_power_loss(vpred, valid_y, params.loss_power);
  int since_best = 0;

  GrowContext ctx{&binned, &model.bins, wgrad, whess, &params};
  for (int it = 0; it < params.num_iterations; ++it) {
    for (std::size_t r = 0; r < n; ++r) {
      const GradHess gh = loss_grad_hess(pred[r], y[r], params.loss_power);
      grad[r] = gh.grad;
      hess[r] = gh.hess;
    }
    GossSample sample = goss_sample(grad, params.goss_top_rate, params.goss_other_rate, mix_seed(params.seed, it));
    std::fill(wgrad.begin(), wgrad.end(), 0.0);
    std::fill(whess.begin(), whess.end(), 0.0);
    for (std::size_t i = 0; i < sample.rows.size(); ++i) {
      const std::uint32_t r = sample.rows[i];
      wgrad[r] = grad[r] * sample.weights[i];
      whess[r] = hess[r] * sample.weights[i];
    }
    Tree tree = grow_tree(ctx, std::move(sample.rows));
    if (tree.nodes.size() == 1) break;  // no split with positive gain

    for (std::size_t r = 0; r < n; ++r) {
      const int leaf = tree.leaf_for([&](int f) {
        return std::pair<std::uint16_t, std::uint16_t>{binned.columns[f][r], model.bins.features[f].missing_bin()};
      });
      pred[r] += params.learning_rate * tree.nodes[leaf].value;
    }
    lg.train_loss.push_back(mean_power_loss(pred, y, params.loss_power));
    model.trees.push_back(std::move(tree));

    if (valid) {
      const Tree& t = model.trees.back();
      for (std::size_t r = 0; r < vpred.size(); ++r) {
        const int leaf = t.leaf_for([&](int f) {
          return std::pair<std::uint16_t, std::uint16_t>{vbinned.columns[f][r], model.bins.features[f].missing_bin()};
        });
        vpred[r] += params.learning_rate * t.nodes[leaf].value;
      }
      const double vl = mean_power_loss(vpred, valid_y, params.loss_power);
      lg.valid_loss.push_back(vl);
      if (vl < lg.best_valid_loss) {
        lg.best_valid_loss = vl;
        lg.best_iteration = static_cast<int>(model.trees.size());
        since_best = 0;
      } else if (++since_best >= params.early_stopping_rounds) {
        break;
      }
    }
  }
  if (valid) {
    model.trees.resize(static_cast<std::size_t>(lg.best_iteration));
  } else {
    lg.best_iteration = static_cast<int>(model.trees.size());
  }
  model.best_iteration = static_cast<int>(model.trees.size());
  return model;
}

}  // namespace tsgbm::gbdt
