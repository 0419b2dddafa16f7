#pragma once

// Quenched backbone sequences omega_1, omega_2, ... (stationary and ergodic).

#include "semiflex/rotgroup.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace semiflex {

enum class DisorderKind { iid, periodic, markov, constant };

std::string to_string(DisorderKind k);

/// Immutable generator of omega_n, n >= 1. Every element is a pure function
/// of (seed, n), so windows can be produced concurrently and out of order.
class DisorderModel {
 public:
  static DisorderModel iid(RotationLaw law, std::uint64_t seed);
  /// Cycle through `period`; with random_phase the starting offset is uniform
  /// on {0, ..., period - 1}, drawn from the seed.
  static DisorderModel periodic(std::vector<Rotation> period, bool random_phase, std::uint64_t seed);
  /// Markov chain on `states`. Rows of `transition` must sum to 1 and the
  /// chain must be irreducible.
  static DisorderModel markov(std::vector<Rotation> states, Matrix transition, bool stationary_start,
                              std::uint64_t seed);
  static DisorderModel constant(Rotation g);

  int dim() const;
  DisorderKind kind() const;
  std::uint64_t seed() const;
  std::uint64_t offset() const noexcept { return offset_; }
  bool is_identity() const;

  /// omega_n for n >= 1.
  Rotation at(std::uint64_t n) const;
  /// [omega_start, ..., omega_{start+length-1}].
  std::vector<Rotation> window(std::uint64_t start, std::size_t length) const;

  /// Same as window() but writes raw matrices; used by the simulation kernels.
  template <int D>
  void window_into(std::uint64_t start, std::size_t length,
                   std::vector<Eigen::Matrix<double, D, D>>& out) const;

  /// Angles of a d = 2 window.
  std::vector<double> angles(std::uint64_t start, std::size_t length) const;

  /// View with window(n, k) equal to this->window(n + by, k).
  DisorderModel shift(std::uint64_t by) const;
  /// Same construction, fresh realization.
  DisorderModel reseeded(std::uint64_t seed) const;

  /// Stationary mean E omega_1 (exact), when available.
  std::optional<Matrix> mean() const;
  /// Law of omega_1 for iid models.
  const RotationLaw* iid_law() const;
  /// Support of the marginal for periodic / markov / constant models.
  const std::vector<Rotation>& states() const;
  /// Stationary distribution (markov), uniform weights (periodic), {1} (constant).
  std::vector<double> stationary() const;

  nlohmann::json to_json() const;

  struct Impl;

 private:
  DisorderModel(std::shared_ptr<const Impl> impl, std::uint64_t offset)
      : impl_(std::move(impl)), offset_(offset) {}
  std::size_t state_index(std::uint64_t n) const;

  std::shared_ptr<const Impl> impl_;
  std::uint64_t offset_ = 0;
};

extern template void DisorderModel::window_into<2>(std::uint64_t, std::size_t,
                                                   std::vector<Eigen::Matrix<double, 2, 2>>&) const;
extern template void DisorderModel::window_into<3>(std::uint64_t, std::size_t,
                                                   std::vector<Eigen::Matrix<double, 3, 3>>&) const;
extern template void DisorderModel::window_into<Eigen::Dynamic>(std::uint64_t, std::size_t,
                                                                std::vector<Matrix>&) const;

/// Parse {"kind": "iid", "law": {...}}, {"kind": "periodic", "rotations": [...]},
/// {"kind": "markov", "states": [...], "transition": [[...]]} or
/// {"kind": "constant", "rotation": [...]}. A "seed" member overrides `seed`.
/// d = 2 shorthands: "angles" in place of rotation lists, "angle" for constant.
DisorderModel make_disorder(const nlohmann::json& spec, std::uint64_t seed);

/// Sequential reader over a model: emits omega_cursor, omega_cursor+1, ...
class DisorderStream {
 public:
  explicit DisorderStream(DisorderModel model, std::uint64_t cursor = 1);

  Rotation next();
  std::uint64_t cursor() const noexcept { return cursor_; }
  const DisorderModel& model() const noexcept { return model_; }

 private:
  DisorderModel model_;
  std::uint64_t cursor_;
};

/// Stationary distribution of an irreducible stochastic matrix.
Vector stationary_distribution(const Matrix& transition);

}  // namespace semiflex
