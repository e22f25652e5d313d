#pragma once

// CART synthesizers: binary recursive partitioning, Bayesian-bootstrap leaf
// draws, and sequential (SRMI) synthesis of several targets.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "geosynth/data_model.hpp"
#include "geosynth/rng.hpp"

namespace geosynth::cart {

/// Codes are 1-based, in 1..levels.
struct CategoricalColumn {
  std::vector<std::int32_t> codes;
  std::int32_t levels = 0;
};

struct ContinuousColumn {
  std::vector<double> values;
};

using Column = std::variant<CategoricalColumn, ContinuousColumn>;

std::size_t column_rows(const Column& c);
inline bool is_categorical(const Column& c) { return std::holds_alternative<CategoricalColumn>(c); }

/// Named columns of equal length; the modelling view of a Dataset.
class Frame {
 public:
  std::size_t add(std::string name, Column column);
  void set(std::size_t j, Column column);

  std::size_t rows() const { return rows_; }
  std::size_t size() const { return columns_.size(); }
  const Column& column(std::size_t j) const { return columns_.at(j); }
  const std::string& name(std::size_t j) const { return names_.at(j); }
  std::optional<std::size_t> find(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

struct CartConfig {
  double cp = 1e-5;
  std::size_t minsplit = 20;
  std::size_t minbucket = 7;

  void validate() const;
};

/// 1 - sum_c (n_c / n)^2. Throws InputError when the total is zero.
double gini_impurity(std::span<const std::int64_t> counts);
/// Population variance. Throws InputError on empty input.
double variance_impurity(std::span<const double> values);

struct Split {
  std::size_t predictor = 0;
  bool categorical = false;
  /// Continuous predictors: values <= threshold go left.
  double threshold = 0.0;
  /// Categorical predictors: left_levels[c] != 0 sends code c left.
  std::vector<std::uint8_t> left_levels;
  /// Direction for categorical codes absent from the node during fitting.
  bool unseen_left = true;
};

struct Node {
  std::size_t count = 0;
  /// count * impurity (Gini or variance) of the training targets in the node.
  double risk = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;
  Split split;

  bool is_leaf() const { return leaf >= 0; }
};

struct Leaf {
  std::int32_t node = -1;
  /// Training rows routed to the leaf, ascending.
  std::vector<std::size_t> members;
  /// Target values of the members (one of the two is populated).
  std::vector<std::int32_t> codes;
  std::vector<double> values;

  std::size_t size() const { return members.size(); }
};

class CartTree {
 public:
  std::size_t target() const { return target_; }
  bool categorical_target() const { return categorical_target_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Leaf>& leaves() const { return leaves_; }
  std::size_t leaf_count() const { return leaves_.size(); }
  /// Leaf reached by each training row.
  std::span<const std::int32_t> training_leaves() const { return training_leaf_; }

  /// Routes `row` of `frame` (same column layout as the training frame).
  std::size_t leaf_of(const Frame& frame, std::size_t row) const;

  /// Indented text rendering for audit.
  std::string dump(const Frame& frame) const;
  void write_leaf_membership_csv(const std::filesystem::path& path) const;

 private:
  friend CartTree fit_tree(const Frame&, std::size_t, std::span<const std::size_t>, const CartConfig&);

  std::size_t target_ = 0;
  bool categorical_target_ = true;
  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
  std::vector<std::int32_t> training_leaf_;
};

/// Greedy recursive splitting. A split is accepted only when the node holds
/// at least minsplit rows, both children hold at least minbucket rows, and
/// the risk decrease is positive and at least cp times the root risk.
/// Categorical predictors with at most 12 levels present in a node are split
/// by exhaustive subset search (categorical target); otherwise levels are
/// ordered (by target mean, or by first principal coordinate of the
/// level-conditional class distribution) and the ordered cuts are scanned.
CartTree fit_tree(const Frame& frame, std::size_t target, std::span<const std::size_t> predictors,
                  const CartConfig& cfg);

/// Positions in [0, n) drawn with Bayesian-bootstrap weights: the gaps of
/// n-1 sorted uniforms. One weight vector per call.
std::vector<std::size_t> bayesian_bootstrap_indices(std::size_t n, std::size_t count, Rng& rng);

template <class T>
std::vector<T> bayesian_bootstrap_draw(std::span<const T> leaf_values, std::size_t count, Rng& rng) {
  std::vector<T> out;
  out.reserve(count);
  for (std::size_t i : bayesian_bootstrap_indices(leaf_values.size(), count, rng)) {
    out.push_back(leaf_values[i]);
  }
  return out;
}

/// Trees for a sequence of targets: tree l regresses target l on the base
/// predictors plus targets 0..l-1, fitted once on original values.
struct SrmiModel {
  std::vector<std::size_t> targets;
  std::vector<std::size_t> base_predictors;
  std::vector<CartTree> trees;
};

SrmiModel fit_srmi(const Frame& frame, std::span<const std::size_t> ordered_targets,
                   std::span<const std::size_t> base_predictors, const CartConfig& cfg);

/// Replicate r uses the stream derive_seed(seed, {r}). For each target in
/// order, records are routed with the synthetic values drawn so far and the
/// original base predictors, and replaced by a Bayesian-bootstrap draw from
/// their leaf. Returns [replicate][target position] replacement columns.
std::vector<std::vector<Column>> draw_srmi(const SrmiModel& model, const Frame& frame, std::size_t m,
                                           std::uint64_t seed);

/// One tree, m replacement columns for `target`.
std::vector<Column> synthesize_variable(const Frame& frame, std::size_t target,
                                        std::span<const std::size_t> predictors, const CartConfig& cfg,
                                        std::size_t m, std::uint64_t seed);

std::vector<std::vector<Column>> srmi_synthesize(const Frame& frame, std::span<const std::size_t> ordered_targets,
                                                 std::span<const std::size_t> base_predictors,
                                                 const CartConfig& cfg, std::size_t m, std::uint64_t seed);

// ---------------------------------------------------------------- dataset level

enum class GeocodeTreatment { categorical, continuous };

struct CartSynthesisOptions {
  CartConfig cart;
  GeocodeTreatment geocode = GeocodeTreatment::categorical;
  /// Continuous treatment only: synthesize y before x.
  bool latitude_first = false;
  /// Predictor variables; defaults to every variable that is not a target.
  std::optional<std::vector<std::string>> predictors;
};

/// Modelling frame of a dataset plus the bookkeeping to map columns back.
struct DatasetFrame {
  Frame frame;
  /// Frame columns of each schema variable (two for a continuous geocode).
  std::vector<std::vector<std::size_t>> columns_of_variable;
  std::optional<GeoCodebook> codebook;
};

/// Geocode columns enter as categorical when `geocode_as_categorical`,
/// otherwise as continuous x and y.
DatasetFrame make_frame(const Dataset& ds, bool geocode_as_categorical);

SyntheticRelease synthesize_cart(const Dataset& ds, std::span<const std::string> ordered_targets,
                                 const CartSynthesisOptions& options, std::size_t m, std::uint64_t seed);

SyntheticRelease synthesize_geocode_categorical(const Dataset& ds, std::span<const std::string> predictors,
                                                const CartConfig& cfg, std::size_t m, std::uint64_t seed);

SyntheticRelease synthesize_geocode_continuous(const Dataset& ds, std::span<const std::string> predictors,
                                               const CartConfig& cfg, std::size_t m, std::uint64_t seed,
                                               bool latitude_first = false);

}  // namespace geosynth::cart
