#pragma once

#include "replayq/compression.hpp"
#include "replayq/dpp_volume.hpp"
#include "replayq/exemplar_selection.hpp"
#include "replayq/feature_io.hpp"

#include <map>
#include <span>
#include <vector>

namespace replayq {

/// Candidate qualities Q and the feasibility threshold epsilon.
struct QualityCandidateSet {
  std::vector<int> candidates{10, 25, 50, 75, 90};
  double epsilon = 0.5;

  /// Non-empty, strictly increasing, inside `range`, epsilon > 0.
  void validate(QualityRange range = {}) const;
};

/// Original features plus one column-aligned matrix per compression quality.
struct FeatureFamily {
  FeatureMatrix original;
  std::map<int, FeatureMatrix> by_quality;

  /// Features at quality q. Throws ValidationError when missing.
  const FeatureMatrix &at(int q) const;
};

struct QualityReport {
  int quality = 0;
  std::size_t n_q_mb = 0;
  double ratio = 1.0;
  bool feasible = false;
  VolumeReport volume;
  PackingResult packing;
};

struct PhaseDecisionSummary {
  int phase_index = 0;
  int chosen_quality = 0;
  bool fallback_used = false;
  std::vector<int> feasible_set;
};

struct QualityDecision {
  int chosen_quality = 0;
  std::size_t chosen_n = 0;
  double epsilon = 0.0;
  std::vector<int> feasible_set;
  bool fallback_used = false;
  std::vector<QualityReport> reports;
  /// Filled by decide_across_phases; reported only, never acted on.
  std::vector<PhaseDecisionSummary> per_phase;
};

inline bool is_feasible(double ratio, double epsilon) { return std::abs(ratio - 1.0) < epsilon; }

/// One report per candidate (ascending q) for a phase: pack at q, slice the
/// original and quality-q features to each class's packed prefix, and
/// aggregate the per-class volume ratios. `q_max` is the backend's maximum
/// quality, used for compression rates.
std::vector<QualityReport> evaluate_candidates(const std::vector<ClassRanking> &rankings, int phase_index,
                                               const FeatureFamily &features, const QualityCandidateSet &config,
                                               const StorageBudget &budget, const QualitySizer &sizer,
                                               int q_max = 100);

/// Largest packable quantity among feasible candidates, ties toward the
/// larger q; max(Q) with fallback_used when nothing is feasible.
QualityDecision select_quality(std::span<const QualityReport> reports, const QualityCandidateSet &config);

/// Averages phase ratios per candidate (arithmetic mean) and selects on the
/// averaged rows. Quantities and packings are summed over phases.
QualityDecision decide_across_phases(const std::vector<std::vector<QualityReport>> &per_phase,
                                     std::span<const int> phase_indices, const QualityCandidateSet &config);

} // namespace replayq
