#include "geosynth/cart.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "geosynth/error.hpp"

namespace geosynth::cart {

std::size_t column_rows(const Column& c) {
  return std::visit(
      [](const auto& col) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(col)>, CategoricalColumn>) {
          return col.codes.size();
        } else {
          return col.values.size();
        }
      },
      c);
}

std::size_t Frame::add(std::string name, Column column) {
  const std::size_t n = column_rows(column);
  if (!columns_.empty() && n != rows_) throw InputError("frame: column '" + name + "' has wrong length");
  rows_ = n;
  names_.push_back(std::move(name));
  columns_.push_back(std::move(column));
  return columns_.size() - 1;
}

void Frame::set(std::size_t j, Column column) {
  if (column_rows(column) != rows_) throw InputError("frame: replacement column has wrong length");
  columns_.at(j) = std::move(column);
}

std::optional<std::size_t> Frame::find(const std::string& name) const {
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (names_[j] == name) return j;
  }
  return std::nullopt;
}

void CartConfig::validate() const {
  if (!(cp >= 0.0)) throw InputError("cart: cp must be non-negative");
  if (minbucket < 1) throw InputError("cart: minbucket must be at least 1");
  if (minsplit < 1) throw InputError("cart: minsplit must be at least 1");
}

double gini_impurity(std::span<const std::int64_t> counts) {
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw InputError("gini_impurity: negative count");
    total += c;
  }
  if (total == 0) throw InputError("gini_impurity: total count is zero");
  const double t = static_cast<double>(total);
  double sum_sq = 0.0;
  for (auto c : counts) sum_sq += (static_cast<double>(c) / t) * (static_cast<double>(c) / t);
  return 1.0 - sum_sq;
}

double variance_impurity(std::span<const double> values) {
  if (values.empty()) throw InputError("variance_impurity: empty input");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / n;
}

// ---------------------------------------------------------------- fitting

namespace {

constexpr std::size_t kExhaustiveLevels = 12;
// Risk decreases below this fraction of the parent risk count as no decrease.
constexpr double kRelativeTolerance = 1e-10;

struct Candidate {
  bool valid = false;
  double improvement = 0.0;
  Split split;
};

/// Top eigenvector of a symmetric PSD matrix by power iteration from a fixed
/// start, so results are reproducible.
std::vector<double> leading_eigenvector(const std::vector<double>& m, std::size_t q) {
  std::vector<double> v(q), w(q);
  for (std::size_t a = 0; a < q; ++a) v[a] = 1.0 + 1e-3 * static_cast<double>(a + 1) / static_cast<double>(q);
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0) for (double& e : x) e /= s;
    return s;
  };
  normalize(v);
  for (int it = 0; it < 500; ++it) {
    for (std::size_t a = 0; a < q; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < q; ++b) s += m[a * q + b] * v[b];
      w[a] = s;
    }
    if (normalize(w) == 0.0) return v;
    double delta = 0.0;
    for (std::size_t a = 0; a < q; ++a) delta = std::max(delta, std::abs(w[a] - v[a]));
    v.swap(w);
    if (delta < 1e-13) break;
  }
  return v;
}

class Splitter {
 public:
  Splitter(const Frame& frame, std::size_t target, const CartConfig& cfg)
      : frame_(frame), cfg_(cfg) {
    const Column& t = frame.column(target);
    if (const auto* cat = std::get_if<CategoricalColumn>(&t)) {
      target_codes_ = cat->codes.data();
      classes_ = cat->levels;
      left_counts_.assign(static_cast<std::size_t>(classes_) + 1, 0);
      right_counts_.assign(static_cast<std::size_t>(classes_) + 1, 0);
    } else {
      target_values_ = std::get<ContinuousColumn>(t).values.data();
    }
  }

  bool categorical_target() const { return target_codes_ != nullptr; }

  /// count * impurity of the target over `rows`; also sets the centering
  /// mean used for continuous targets within this node.
  double node_risk(std::span<const std::size_t> rows) {
    const double n = static_cast<double>(rows.size());
    if (categorical_target()) {
      double sum_sq = 0.0;
      for (std::size_t r : rows) {
        auto& c = right_counts_[target_codes_[r]];
        sum_sq += 2.0 * static_cast<double>(c) + 1.0;
        ++c;
      }
      for (std::size_t r : rows) right_counts_[target_codes_[r]] = 0;
      return std::max(0.0, n - sum_sq / n);
    }
    double sum = 0.0;
    for (std::size_t r : rows) sum += target_values_[r];
    center_ = sum / n;
    double ss = 0.0;
    for (std::size_t r : rows) {
      const double z = target_values_[r] - center_;
      ss += z * z;
    }
    return ss;
  }

  Candidate best_split(std::span<const std::size_t> rows, std::size_t predictor, double parent_risk) {
    const Column& p = frame_.column(predictor);
    if (const auto* cat = std::get_if<CategoricalColumn>(&p)) {
      return categorical_target() ? categorical_on_categorical(rows, predictor, *cat, parent_risk)
                                  : continuous_on_categorical(rows, predictor, *cat, parent_risk);
    }
    return on_continuous(rows, predictor, std::get<ContinuousColumn>(p), parent_risk);
  }

 private:
  struct LevelTable {
    std::vector<std::int32_t> codes;  // present levels, ascending
    std::vector<std::size_t> counts;
  };

  LevelTable present_levels(std::span<const std::size_t> rows, const CategoricalColumn& col) {
    level_pos_.assign(static_cast<std::size_t>(col.levels) + 1, -1);
    LevelTable t;
    for (std::size_t r : rows) level_pos_[col.codes[r]] = 0;
    for (std::int32_t c = 1; c <= col.levels; ++c) {
      if (level_pos_[c] == 0) {
        level_pos_[c] = static_cast<std::int32_t>(t.codes.size());
        t.codes.push_back(c);
      }
    }
    t.counts.assign(t.codes.size(), 0);
    for (std::size_t r : rows) ++t.counts[level_pos_[col.codes[r]]];
    return t;
  }

  Split make_categorical_split(std::size_t predictor, const CategoricalColumn& col, const LevelTable& t,
                               const std::vector<bool>& in_left, std::size_t n_left, std::size_t n) const {
    Split s;
    s.predictor = predictor;
    s.categorical = true;
    s.left_levels.assign(static_cast<std::size_t>(col.levels) + 1, 0);
    for (std::size_t a = 0; a < t.codes.size(); ++a) {
      if (in_left[a]) s.left_levels[t.codes[a]] = 1;
    }
    s.unseen_left = 2 * n_left >= n;
    return s;
  }

  bool admissible(std::size_t n_left, std::size_t n_right) const {
    return n_left >= cfg_.minbucket && n_right >= cfg_.minbucket;
  }

  Candidate categorical_on_categorical(std::span<const std::size_t> rows, std::size_t predictor,
                                       const CategoricalColumn& col, double parent_risk) {
    const LevelTable t = present_levels(rows, col);
    const std::size_t q = t.codes.size();
    if (q < 2) return {};
    const std::size_t n = rows.size();

    // gram[a][b] = sum over classes of count(a, class) * count(b, class), so
    // sum_c L_c^2 of any level subset L is the sum of its gram block.
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    pairs.reserve(n);
    for (std::size_t r : rows) pairs.emplace_back(target_codes_[r], level_pos_[col.codes[r]]);
    std::sort(pairs.begin(), pairs.end());
    std::vector<double> gram(q * q, 0.0);
    std::vector<std::pair<std::int32_t, double>> group;
    for (std::size_t i = 0; i < pairs.size();) {
      std::size_t j = i;
      group.clear();
      while (j < pairs.size() && pairs[j].first == pairs[i].first) {
        std::size_t k = j;
        while (k < pairs.size() && pairs[k].first == pairs[i].first && pairs[k].second == pairs[j].second) ++k;
        group.emplace_back(pairs[j].second, static_cast<double>(k - j));
        j = k;
      }
      for (const auto& [a, ca] : group) {
        for (const auto& [b, cb] : group) gram[static_cast<std::size_t>(a) * q + b] += ca * cb;
      }
      i = j;
    }
    double total = 0.0;
    for (double g : gram) total += g;

    Candidate best;
    std::vector<bool> in_left(q, false);
    auto consider = [&](std::size_t n_left, double s_left, double s_right) {
      const std::size_t n_right = n - n_left;
      if (!admissible(n_left, n_right)) return false;
      const double risk = (static_cast<double>(n_left) - s_left / static_cast<double>(n_left)) +
                          (static_cast<double>(n_right) - s_right / static_cast<double>(n_right));
      const double improvement = parent_risk - risk;
      if (!best.valid || improvement > best.improvement) {
        best.valid = true;
        best.improvement = improvement;
        return true;
      }
      return false;
    };

    if (q <= kExhaustiveLevels) {
      // The highest present level always stays right, so each bipartition
      // is visited once.
      const std::uint32_t masks = 1u << (q - 1);
      for (std::uint32_t mask = 1; mask < masks; ++mask) {
        std::size_t n_left = 0;
        for (std::size_t a = 0; a < q; ++a) {
          if (mask >> a & 1u) n_left += t.counts[a];
        }
        if (!admissible(n_left, n - n_left)) continue;
        double s_left = 0.0, s_right = 0.0;
        for (std::size_t a = 0; a < q; ++a) {
          const bool la = mask >> a & 1u;
          for (std::size_t b = 0; b < q; ++b) {
            const bool lb = mask >> b & 1u;
            if (la && lb) s_left += gram[a * q + b];
            else if (!la && !lb) s_right += gram[a * q + b];
          }
        }
        if (consider(n_left, s_left, s_right)) {
          for (std::size_t a = 0; a < q; ++a) in_left[a] = mask >> a & 1u;
          best.split = make_categorical_split(predictor, col, t, in_left, n_left, n);
        }
      }
      return best;
    }

    // Order levels by the first principal coordinate of their class
    // distributions (weighted by level size), then scan the q-1 ordered cuts.
    const double nd = static_cast<double>(n);
    std::vector<double> inner(q * q);  // <P_a, P_b>
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) {
        inner[a * q + b] = gram[a * q + b] / (static_cast<double>(t.counts[a]) * static_cast<double>(t.counts[b]));
      }
    }
    std::vector<double> with_mean(q, 0.0);  // <P_a, Pbar>
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) with_mean[a] += static_cast<double>(t.counts[b]) * inner[a * q + b];
      with_mean[a] /= nd;
    }
    double mean_sq = 0.0;  // <Pbar, Pbar>
    for (std::size_t a = 0; a < q; ++a) mean_sq += static_cast<double>(t.counts[a]) * with_mean[a];
    mean_sq /= nd;
    std::vector<double> sqrt_w(q);
    for (std::size_t a = 0; a < q; ++a) sqrt_w[a] = std::sqrt(static_cast<double>(t.counts[a]));
    std::vector<double> centered(q * q), weighted(q * q);
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) {
        centered[a * q + b] = inner[a * q + b] - with_mean[a] - with_mean[b] + mean_sq;
        weighted[a * q + b] = sqrt_w[a] * centered[a * q + b] * sqrt_w[b];
      }
    }
    const auto u = leading_eigenvector(weighted, q);
    std::vector<double> score(q, 0.0);
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) score[a] += centered[a * q + b] * sqrt_w[b] * u[b];
    }
    std::vector<std::size_t> order(q);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });

    std::vector<double> row_left(q, 0.0);  // sum over a in L of gram[a][b]
    std::vector<bool> left(q, false);
    std::size_t n_left = 0;
    double s_left = 0.0;
    std::size_t best_cut = 0;
    for (std::size_t j = 0; j + 1 < q; ++j) {
      const std::size_t a = order[j];
      s_left += 2.0 * row_left[a] + gram[a * q + a];
      for (std::size_t b = 0; b < q; ++b) row_left[b] += gram[a * q + b];
      left[a] = true;
      n_left += t.counts[a];
      double cross = 0.0;
      for (std::size_t b = 0; b < q; ++b) {
        if (!left[b]) cross += row_left[b];
      }
      const double s_right = total - s_left - 2.0 * cross;
      if (consider(n_left, s_left, s_right)) best_cut = j + 1;
    }
    if (best.valid) {
      std::vector<bool> chosen(q, false);
      std::size_t nl = 0;
      for (std::size_t j = 0; j < best_cut; ++j) {
        chosen[order[j]] = true;
        nl += t.counts[order[j]];
      }
      best.split = make_categorical_split(predictor, col, t, chosen, nl, n);
    }
    return best;
  }

  Candidate continuous_on_categorical(std::span<const std::size_t> rows, std::size_t predictor,
                                      const CategoricalColumn& col, double parent_risk) {
    const LevelTable t = present_levels(rows, col);
    const std::size_t q = t.codes.size();
    if (q < 2) return {};
    const std::size_t n = rows.size();
    std::vector<double> sum(q, 0.0), sum_sq(q, 0.0);
    for (std::size_t r : rows) {
      const auto a = static_cast<std::size_t>(level_pos_[col.codes[r]]);
      const double z = target_values_[r] - center_;
      sum[a] += z;
      sum_sq[a] += z * z;
    }
    // Ordering levels by mean target gives the optimal binary partition for
    // squared error, so the ordered scan is exact for every q.
    std::vector<std::size_t> order(q);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sum[a] / static_cast<double>(t.counts[a]) < sum[b] / static_cast<double>(t.counts[b]);
    });
    double tot = 0.0, tot_sq = 0.0;
    for (std::size_t a = 0; a < q; ++a) {
      tot += sum[a];
      tot_sq += sum_sq[a];
    }
    Candidate best;
    std::size_t best_cut = 0, n_left = 0;
    double s = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j + 1 < q; ++j) {
      const std::size_t a = order[j];
      n_left += t.counts[a];
      s += sum[a];
      s2 += sum_sq[a];
      const std::size_t n_right = n - n_left;
      if (!admissible(n_left, n_right)) continue;
      const double risk = (s2 - s * s / static_cast<double>(n_left)) +
                          ((tot_sq - s2) - (tot - s) * (tot - s) / static_cast<double>(n_right));
      const double improvement = parent_risk - risk;
      if (!best.valid || improvement > best.improvement) {
        best.valid = true;
        best.improvement = improvement;
        best_cut = j + 1;
      }
    }
    if (best.valid) {
      std::vector<bool> chosen(q, false);
      std::size_t nl = 0;
      for (std::size_t j = 0; j < best_cut; ++j) {
        chosen[order[j]] = true;
        nl += t.counts[order[j]];
      }
      best.split = make_categorical_split(predictor, col, t, chosen, nl, n);
    }
    return best;
  }

  Candidate on_continuous(std::span<const std::size_t> rows, std::size_t predictor, const ContinuousColumn& col,
                          double parent_risk) {
    const std::size_t n = rows.size();
    sorted_.assign(rows.begin(), rows.end());
    std::stable_sort(sorted_.begin(), sorted_.end(),
                     [&](std::size_t a, std::size_t b) { return col.values[a] < col.values[b]; });
    Candidate best;
    std::size_t best_pos = 0;

    if (categorical_target()) {
      double sq_left = 0.0, sq_right = 0.0;
      for (std::size_t r : sorted_) {
        auto& c = right_counts_[target_codes_[r]];
        sq_right += 2.0 * static_cast<double>(c) + 1.0;
        ++c;
      }
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::int32_t cls = target_codes_[sorted_[i]];
        sq_left += 2.0 * static_cast<double>(left_counts_[cls]) + 1.0;
        ++left_counts_[cls];
        sq_right -= 2.0 * static_cast<double>(right_counts_[cls]) - 1.0;
        --right_counts_[cls];
        if (!(col.values[sorted_[i]] < col.values[sorted_[i + 1]])) continue;
        const std::size_t n_left = i + 1, n_right = n - n_left;
        if (!admissible(n_left, n_right)) continue;
        const double risk = (static_cast<double>(n_left) - sq_left / static_cast<double>(n_left)) +
                            (static_cast<double>(n_right) - sq_right / static_cast<double>(n_right));
        const double improvement = parent_risk - risk;
        if (!best.valid || improvement > best.improvement) {
          best.valid = true;
          best.improvement = improvement;
          best_pos = i;
        }
      }
      for (std::size_t r : sorted_) {
        left_counts_[target_codes_[r]] = 0;
        right_counts_[target_codes_[r]] = 0;
      }
    } else {
      double tot = 0.0, tot_sq = 0.0;
      for (std::size_t r : sorted_) {
        const double z = target_values_[r] - center_;
        tot += z;
        tot_sq += z * z;
      }
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double z = target_values_[sorted_[i]] - center_;
        s += z;
        s2 += z * z;
        if (!(col.values[sorted_[i]] < col.values[sorted_[i + 1]])) continue;
        const std::size_t n_left = i + 1, n_right = n - n_left;
        if (!admissible(n_left, n_right)) continue;
        const double risk = (s2 - s * s / static_cast<double>(n_left)) +
                            ((tot_sq - s2) - (tot - s) * (tot - s) / static_cast<double>(n_right));
        const double improvement = parent_risk - risk;
        if (!best.valid || improvement > best.improvement) {
          best.valid = true;
          best.improvement = improvement;
          best_pos = i;
        }
      }
    }
    if (best.valid) {
      const double lo = col.values[sorted_[best_pos]];
      const double hi = col.values[sorted_[best_pos + 1]];
      double threshold = lo + (hi - lo) / 2.0;
      if (!(threshold < hi) || threshold < lo) threshold = lo;
      best.split.predictor = predictor;
      best.split.categorical = false;
      best.split.threshold = threshold;
      best.split.unseen_left = true;
    }
    return best;
  }

  const Frame& frame_;
  const CartConfig& cfg_;
  const std::int32_t* target_codes_ = nullptr;
  const double* target_values_ = nullptr;
  std::int32_t classes_ = 0;
  double center_ = 0.0;
  std::vector<std::int64_t> left_counts_, right_counts_;
  std::vector<std::int32_t> level_pos_;
  std::vector<std::size_t> sorted_;
};

bool goes_left(const Split& s, const Frame& frame, std::size_t row) {
  const Column& col = frame.column(s.predictor);
  if (s.categorical) {
    const std::int32_t c = std::get<CategoricalColumn>(col).codes[row];
    if (c < 1 || static_cast<std::size_t>(c) >= s.left_levels.size()) return s.unseen_left;
    return s.left_levels[c] != 0;
  }
  return std::get<ContinuousColumn>(col).values[row] <= s.threshold;
}

}  // namespace

CartTree fit_tree(const Frame& frame, std::size_t target, std::span<const std::size_t> predictors,
                  const CartConfig& cfg) {
  cfg.validate();
  if (target >= frame.size()) throw InputError("fit_tree: target column out of range");
  for (std::size_t p : predictors) {
    if (p >= frame.size()) throw InputError("fit_tree: predictor column out of range");
    if (p == target) throw InputError("fit_tree: target '" + frame.name(target) + "' listed as its own predictor");
  }
  if (frame.rows() == 0) throw InputError("fit_tree: no rows");

  CartTree tree;
  tree.target_ = target;
  tree.categorical_target_ = is_categorical(frame.column(target));
  tree.training_leaf_.assign(frame.rows(), -1);
  Splitter splitter(frame, target, cfg);

  struct Pending {
    std::int32_t node;
    std::vector<std::size_t> rows;
  };
  std::vector<std::size_t> all(frame.rows());
  std::iota(all.begin(), all.end(), 0);
  const double root_risk = splitter.node_risk(all);
  const double min_improvement = cfg.cp * root_risk;

  tree.nodes_.push_back(Node{});
  std::vector<Pending> stack;
  stack.push_back({0, std::move(all)});

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const double risk = splitter.node_risk(cur.rows);
    tree.nodes_[cur.node].count = cur.rows.size();
    tree.nodes_[cur.node].risk = risk;

    Candidate best;
    if (cur.rows.size() >= cfg.minsplit && cur.rows.size() >= 2 * cfg.minbucket && risk > 0.0) {
      for (std::size_t p : predictors) {
        Candidate c = splitter.best_split(cur.rows, p, risk);
        if (c.valid && (!best.valid || c.improvement > best.improvement)) best = std::move(c);
      }
    }
    const bool accept = best.valid && best.improvement > kRelativeTolerance * risk &&
                        best.improvement >= min_improvement;
    if (!accept) {
      Leaf leaf;
      leaf.node = cur.node;
      std::sort(cur.rows.begin(), cur.rows.end());
      const auto leaf_id = static_cast<std::int32_t>(tree.leaves_.size());
      for (std::size_t r : cur.rows) tree.training_leaf_[r] = leaf_id;
      if (tree.categorical_target_) {
        const auto& codes = std::get<CategoricalColumn>(frame.column(target)).codes;
        for (std::size_t r : cur.rows) leaf.codes.push_back(codes[r]);
      } else {
        const auto& values = std::get<ContinuousColumn>(frame.column(target)).values;
        for (std::size_t r : cur.rows) leaf.values.push_back(values[r]);
      }
      leaf.members = std::move(cur.rows);
      tree.nodes_[cur.node].leaf = leaf_id;
      tree.leaves_.push_back(std::move(leaf));
      continue;
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : cur.rows) (goes_left(best.split, frame, r) ? left_rows : right_rows).push_back(r);
    const auto left_id = static_cast<std::int32_t>(tree.nodes_.size());
    tree.nodes_.push_back(Node{});
    const auto right_id = static_cast<std::int32_t>(tree.nodes_.size());
    tree.nodes_.push_back(Node{});
    tree.nodes_[cur.node].left = left_id;
    tree.nodes_[cur.node].right = right_id;
    tree.nodes_[cur.node].split = std::move(best.split);
    // Right pushed first so the left subtree is expanded first.
    stack.push_back({right_id, std::move(right_rows)});
    stack.push_back({left_id, std::move(left_rows)});
  }
  return tree;
}

std::size_t CartTree::leaf_of(const Frame& frame, std::size_t row) const {
  std::int32_t node = 0;
  while (!nodes_[node].is_leaf()) {
    const Node& nd = nodes_[node];
    node = goes_left(nd.split, frame, row) ? nd.left : nd.right;
  }
  return static_cast<std::size_t>(nodes_[node].leaf);
}

std::string CartTree::dump(const Frame& frame) const {
  std::ostringstream out;
  out.precision(17);
  auto rec = [&](auto&& self, std::int32_t id, int depth) -> void {
    const Node& nd = nodes_[id];
    const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
    if (nd.is_leaf()) {
      out << pad << "leaf " << nd.leaf << ": n=" << nd.count << " risk=" << nd.risk << '\n';
      return;
    }
    const std::string& pname = frame.name(nd.split.predictor);
    out << pad << "node " << id << ": n=" << nd.count << " risk=" << nd.risk << " split ";
    if (nd.split.categorical) {
      out << pname << " in {";
      bool first = true;
      for (std::size_t c = 1; c < nd.split.left_levels.size(); ++c) {
        if (!nd.split.left_levels[c]) continue;
        out << (first ? "" : ",") << c;
        first = false;
      }
      out << "}\n";
    } else {
      out << pname << " <= " << nd.split.threshold << '\n';
    }
    self(self, nd.left, depth + 1);
    self(self, nd.right, depth + 1);
  };
  out << "target " << frame.name(target_) << (categorical_target_ ? " (categorical)" : " (continuous)") << '\n';
  rec(rec, 0, 0);
  return out.str();
}

void CartTree::write_leaf_membership_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "record_index,leaf_id\n";
  for (std::size_t i = 0; i < training_leaf_.size(); ++i) out << i << ',' << training_leaf_[i] << '\n';
  if (!out) throw Error("I/O failure writing " + path.string());
}

// ---------------------------------------------------------------- synthesis

std::vector<std::size_t> bayesian_bootstrap_indices(std::size_t n, std::size_t count, Rng& rng) {
  if (n == 0) throw InputError("bayesian_bootstrap: empty leaf");
  std::vector<std::size_t> out(count, 0);
  if (n == 1) return out;
  // The sorted uniforms are the cumulative weights, so a draw is the number
  // of cut points at or below a fresh uniform.
  std::vector<double> cuts(n - 1);
  for (double& u : cuts) u = uniform01(rng);
  std::sort(cuts.begin(), cuts.end());
  for (auto& o : out) {
    const double v = uniform01(rng);
    o = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
  }
  return out;
}

SrmiModel fit_srmi(const Frame& frame, std::span<const std::size_t> ordered_targets,
                   std::span<const std::size_t> base_predictors, const CartConfig& cfg) {
  if (ordered_targets.empty()) throw InputError("srmi: no targets");
  std::set<std::size_t> seen;
  for (std::size_t t : ordered_targets) {
    if (!seen.insert(t).second) throw InputError("srmi: duplicate target '" + frame.name(t) + "'");
  }
  for (std::size_t p : base_predictors) {
    if (seen.count(p)) throw InputError("srmi: '" + frame.name(p) + "' is both target and base predictor");
  }
  SrmiModel model;
  model.targets.assign(ordered_targets.begin(), ordered_targets.end());
  model.base_predictors.assign(base_predictors.begin(), base_predictors.end());
  std::vector<std::size_t> predictors(base_predictors.begin(), base_predictors.end());
  for (std::size_t t : ordered_targets) {
    model.trees.push_back(fit_tree(frame, t, predictors, cfg));
    predictors.push_back(t);
  }
  return model;
}

std::vector<std::vector<Column>> draw_srmi(const SrmiModel& model, const Frame& frame, std::size_t m,
                                           std::uint64_t seed) {
  std::vector<std::vector<Column>> out(m);
  const std::size_t n = frame.rows();
  for (std::size_t r = 0; r < m; ++r) {
    Rng rng = make_rng(derive_seed(seed, {r}));
    Frame work = frame;
    for (std::size_t l = 0; l < model.targets.size(); ++l) {
      const CartTree& tree = model.trees[l];
      const std::size_t target = model.targets[l];
      std::vector<std::vector<std::size_t>> routed(tree.leaf_count());
      if (l == 0) {
        // Nothing synthesized yet: every record sits in its training leaf.
        const auto lv = tree.training_leaves();
        for (std::size_t i = 0; i < n; ++i) routed[static_cast<std::size_t>(lv[i])].push_back(i);
      } else {
        for (std::size_t i = 0; i < n; ++i) routed[tree.leaf_of(work, i)].push_back(i);
      }
      Column replacement;
      if (tree.categorical_target()) {
        CategoricalColumn col = std::get<CategoricalColumn>(frame.column(target));
        for (std::size_t w = 0; w < routed.size(); ++w) {
          if (routed[w].empty()) continue;
          const Leaf& leaf = tree.leaves()[w];
          const auto picks = bayesian_bootstrap_indices(leaf.size(), routed[w].size(), rng);
          for (std::size_t j = 0; j < picks.size(); ++j) col.codes[routed[w][j]] = leaf.codes[picks[j]];
        }
        replacement = std::move(col);
      } else {
        ContinuousColumn col = std::get<ContinuousColumn>(frame.column(target));
        for (std::size_t w = 0; w < routed.size(); ++w) {
          if (routed[w].empty()) continue;
          const Leaf& leaf = tree.leaves()[w];
          const auto picks = bayesian_bootstrap_indices(leaf.size(), routed[w].size(), rng);
          for (std::size_t j = 0; j < picks.size(); ++j) col.values[routed[w][j]] = leaf.values[picks[j]];
        }
        replacement = std::move(col);
      }
      work.set(target, replacement);
      out[r].push_back(std::move(replacement));
    }
  }
  return out;
}

std::vector<Column> synthesize_variable(const Frame& frame, std::size_t target,
                                        std::span<const std::size_t> predictors, const CartConfig& cfg,
                                        std::size_t m, std::uint64_t seed) {
  const std::size_t targets[] = {target};
  auto drawn = srmi_synthesize(frame, targets, predictors, cfg, m, seed);
  std::vector<Column> out;
  out.reserve(m);
  for (auto& rep : drawn) out.push_back(std::move(rep.front()));
  return out;
}

std::vector<std::vector<Column>> srmi_synthesize(const Frame& frame, std::span<const std::size_t> ordered_targets,
                                                 std::span<const std::size_t> base_predictors,
                                                 const CartConfig& cfg, std::size_t m, std::uint64_t seed) {
  return draw_srmi(fit_srmi(frame, ordered_targets, base_predictors, cfg), frame, m, seed);
}

// ---------------------------------------------------------------- dataset level

DatasetFrame make_frame(const Dataset& ds, bool geocode_as_categorical) {
  DatasetFrame out;
  const Schema& schema = ds.schema();
  out.columns_of_variable.resize(schema.size());
  std::optional<GeocodeEncoding> enc;
  if (geocode_as_categorical && schema.geocode_index()) {
    enc = concat_geocode_as_categorical(ds);
    out.codebook = enc->codebook;
  }
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const Variable& v = schema.variable(k);
    if (!v.is_geocode()) {
      const auto codes = ds.column(k);
      out.columns_of_variable[k].push_back(
          out.frame.add(v.name, CategoricalColumn{{codes.begin(), codes.end()}, v.cardinality()}));
    } else if (enc) {
      const auto codes = enc->dataset.column(k);
      out.columns_of_variable[k].push_back(
          out.frame.add(v.name, CategoricalColumn{{codes.begin(), codes.end()}, enc->codebook.size()}));
    } else {
      ContinuousColumn xs, ys;
      for (const auto& p : ds.geocodes()) {
        xs.values.push_back(p.x);
        ys.values.push_back(p.y);
      }
      out.columns_of_variable[k].push_back(out.frame.add(std::string(kGeoXColumn), std::move(xs)));
      out.columns_of_variable[k].push_back(out.frame.add(std::string(kGeoYColumn), std::move(ys)));
    }
  }
  return out;
}

namespace {

struct PreparedSynthesis {
  DatasetFrame df;
  std::vector<std::size_t> targets;
  std::vector<std::size_t> base;
  std::vector<std::string> target_names;
};

PreparedSynthesis prepare(const Dataset& ds, std::span<const std::string> ordered_targets,
                          const CartSynthesisOptions& options) {
  const Schema& schema = ds.schema();
  if (ordered_targets.empty()) throw InputError("cart synthesis: no synthesis targets");
  const auto geo = schema.geocode_index();
  bool geo_targeted = false;
  std::set<std::size_t> target_vars;
  for (const auto& name : ordered_targets) {
    const std::size_t k = schema.index_of(name);
    if (!target_vars.insert(k).second) throw InputError("cart synthesis: duplicate target '" + name + "'");
    if (geo && k == *geo) geo_targeted = true;
  }
  PreparedSynthesis p;
  p.df = make_frame(ds, geo_targeted && options.geocode == GeocodeTreatment::categorical);
  for (const auto& name : ordered_targets) {
    auto cols = p.df.columns_of_variable[schema.index_of(name)];
    if (cols.size() == 2 && options.latitude_first) std::swap(cols[0], cols[1]);
    p.targets.insert(p.targets.end(), cols.begin(), cols.end());
    p.target_names.push_back(name);
  }
  std::vector<std::size_t> predictor_vars;
  if (options.predictors) {
    for (const auto& name : *options.predictors) predictor_vars.push_back(schema.index_of(name));
  } else {
    for (std::size_t k = 0; k < schema.size(); ++k) predictor_vars.push_back(k);
  }
  for (std::size_t k : predictor_vars) {
    if (target_vars.count(k)) continue;
    for (std::size_t c : p.df.columns_of_variable[k]) p.base.push_back(c);
  }
  return p;
}

Dataset apply_replacements(const Dataset& ds, const PreparedSynthesis& p, const std::vector<Column>& drawn) {
  const Schema& schema = ds.schema();
  Dataset out = ds;
  std::vector<const Column*> by_column(p.df.frame.size(), nullptr);
  for (std::size_t l = 0; l < p.targets.size(); ++l) by_column[p.targets[l]] = &drawn[l];
  for (const auto& name : p.target_names) {
    const std::size_t k = schema.index_of(name);
    const auto& cols = p.df.columns_of_variable[k];
    if (!schema.variable(k).is_geocode()) {
      out = out.with_column(k, std::get<CategoricalColumn>(*by_column[cols[0]]).codes);
      continue;
    }
    std::vector<GeoPoint> geo(ds.rows());
    if (cols.size() == 1) {
      const auto& codes = std::get<CategoricalColumn>(*by_column[cols[0]]).codes;
      for (std::size_t i = 0; i < geo.size(); ++i) geo[i] = p.df.codebook->decode(codes[i]);
    } else {
      const auto& xs = std::get<ContinuousColumn>(*by_column[cols[0]]).values;
      const auto& ys = std::get<ContinuousColumn>(*by_column[cols[1]]).values;
      for (std::size_t i = 0; i < geo.size(); ++i) geo[i] = {xs[i], ys[i]};
    }
    out = out.with_geocodes(std::move(geo));
  }
  return out;
}

}  // namespace

SyntheticRelease synthesize_cart(const Dataset& ds, std::span<const std::string> ordered_targets,
                                 const CartSynthesisOptions& options, std::size_t m, std::uint64_t seed) {
  const PreparedSynthesis p = prepare(ds, ordered_targets, options);
  const auto drawn = srmi_synthesize(p.df.frame, p.targets, p.base, options.cart, m, seed);
  SyntheticRelease release;
  release.synthesized_variables = p.target_names;
  for (const auto& rep : drawn) release.replicates.push_back(apply_replacements(ds, p, rep));
  return release;
}

SyntheticRelease synthesize_geocode_categorical(const Dataset& ds, std::span<const std::string> predictors,
                                                const CartConfig& cfg, std::size_t m, std::uint64_t seed) {
  const auto geo = ds.schema().geocode_index();
  if (!geo) throw InputError("synthesize_geocode_categorical: dataset has no geocode");
  const std::string targets[] = {ds.schema().variable(*geo).name};
  CartSynthesisOptions options{cfg, GeocodeTreatment::categorical, false,
                               std::vector<std::string>(predictors.begin(), predictors.end())};
  return synthesize_cart(ds, targets, options, m, seed);
}

SyntheticRelease synthesize_geocode_continuous(const Dataset& ds, std::span<const std::string> predictors,
                                               const CartConfig& cfg, std::size_t m, std::uint64_t seed,
                                               bool latitude_first) {
  const auto geo = ds.schema().geocode_index();
  if (!geo) throw InputError("synthesize_geocode_continuous: dataset has no geocode");
  const std::string targets[] = {ds.schema().variable(*geo).name};
  CartSynthesisOptions options{cfg, GeocodeTreatment::continuous, latitude_first,
                               std::vector<std::string>(predictors.begin(), predictors.end())};
  return synthesize_cart(ds, targets, options, m, seed);
}

}  // namespace geosynth::cart
