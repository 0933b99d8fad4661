#pragma once

#include "replayq/feature_io.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace replayq {

/// Unit-norm columns in double precision, column-major.
struct UnitColumns {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<double> values;

  std::size_t count() const noexcept { return ids.size(); }
  std::span<const double> column(std::size_t j) const { return {values.data() + j * dim, dim}; }
};

/// Diagonal jitter levels tried, in order, when the Gram matrix is not
/// numerically positive definite.
inline constexpr std::array<double, 4> kJitterLevels{0.0, 1e-12, 1e-10, 1e-8};

/// Divides each column by its Euclidean norm. A zero column throws
/// ValidationError naming the sample id.
UnitColumns normalize_columns(const FeatureMatrix &m);

struct LogVolume {
  double value = 0.0; ///< 0.5 * log det(M^T M)
  double jitter = 0.0;
};

/// Half the log-determinant of the Gram matrix of `m`, via Cholesky. Columns
/// are processed in ascending id order so the result is independent of their
/// order. Jitter levels below `min_jitter` are skipped.
///
/// Throws RankDeficientError when count > dim and NearSingularError when
/// every jitter level fails.
LogVolume log_volume(const UnitColumns &m, double min_jitter = 0.0);

struct VolumeReport {
  int quality = 0;
  std::string class_label; ///< empty for phase-level reports
  std::size_t n = 0;
  double log_vol_original = 0.0;
  double log_vol_compressed = 0.0;
  double log_ratio = 0.0;
  double ratio = 1.0;
  double jitter = 0.0;
  bool truncated = false; ///< subset cut to `dim` columns for the volume only
  std::vector<VolumeReport> per_class;
};

/// Ratio of the compressed subset's volume to the original subset's. Both
/// sides must hold the same ids in the same order; both are factorized at a
/// common jitter level.
VolumeReport volume_ratio(const FeatureMatrix &compressed, const FeatureMatrix &original, int quality = 0);

/// volume_ratio for one class's exemplar prefix. Prefixes longer than the
/// feature dimension are cut to their first `dim` ids and flagged.
VolumeReport class_volume_ratio(const FeatureMatrix &compressed_family, const FeatureMatrix &original_family,
                                std::span<const std::string> prefix_ids, int quality, std::string class_label);

/// Phase aggregate: mean of per-class log ratios. The inputs are kept in
/// `per_class`.
VolumeReport phase_ratio(std::vector<VolumeReport> per_class_reports);

/// Arithmetic mean of the phase ratios of one quality.
double averaged_ratio(std::span<const VolumeReport> phase_reports);

} // namespace replayq
