#include "replayq/dpp_volume.hpp"

#include "replayq/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

namespace replayq {

UnitColumns normalize_columns(const FeatureMatrix &m) {
  UnitColumns out;
  out.dim = m.dim();
  out.ids = m.ids();
  out.values.resize(m.dim() * m.count());
  for (std::size_t j = 0; j < m.count(); ++j) {
    auto col = m.column(j);
    double sq = 0.0;
    for (float v : col) sq += double(v) * double(v);
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0)) throw ValidationError("zero-norm feature column for sample '" + m.ids()[j] + "'");
    double *dst = out.values.data() + j * out.dim;
    for (std::size_t i = 0; i < out.dim; ++i) dst[i] = double(col[i]) / norm;
  }
  return out;
}

namespace {

/// Gram matrix (row-major n x n) with columns taken in ascending id order.
std::vector<double> gram_by_id(const UnitColumns &m) {
  const std::size_t n = m.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return m.ids[a] < m.ids[b]; });
  std::vector<double> g(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    auto ca = m.column(order[a]);
    for (std::size_t b = 0; b <= a; ++b) {
      auto cb = m.column(order[b]);
      double s = 0.0;
      for (std::size_t i = 0; i < m.dim; ++i) s += ca[i] * cb[i];
      g[a * n + b] = s;
      g[b * n + a] = s;
    }
  }
  return g;
}

/// Sum of log diagonal of the Cholesky factor of (g + jitter*I), or nothing
/// when a pivot is not positive.
std::optional<double> cholesky_half_logdet(std::vector<double> g, std::size_t n, double jitter) {
  for (std::size_t k = 0; k < n; ++k) g[k * n + k] += jitter;
  double half_logdet = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double d = g[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= g[j * n + k] * g[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    const double ljj = std::sqrt(d);
    g[j * n + j] = ljj;
    half_logdet += std::log(ljj);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= g[i * n + k] * g[j * n + k];
      g[i * n + j] = s / ljj;
    }
  }
  return half_logdet;
}

std::string jitter_list(const std::vector<double> &levels) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < levels.size(); ++i) ss << (i ? ", " : "") << levels[i];
  return ss.str();
}

void check_rank(const UnitColumns &m) {
  if (m.count() == 0) throw ValidationError("log_volume of an empty subset");
  if (m.count() > m.dim)
    throw RankDeficientError("subset of " + std::to_string(m.count()) + " columns in dimension " +
                             std::to_string(m.dim) + " has zero volume");
}

} // namespace

LogVolume log_volume(const UnitColumns &m, double min_jitter) {
  check_rank(m);
  const auto g = gram_by_id(m);
  std::vector<double> attempted;
  for (double jitter : kJitterLevels) {
    if (jitter < min_jitter) continue;
    attempted.push_back(jitter);
    if (auto v = cholesky_half_logdet(g, m.count(), jitter)) return {*v, jitter};
  }
  throw NearSingularError("Gram matrix not positive definite at jitter levels {" + jitter_list(attempted) + "}",
                          attempted);
}

VolumeReport volume_ratio(const FeatureMatrix &compressed, const FeatureMatrix &original, int quality) {
  if (compressed.count() != original.count())
    throw ValidationError("volume_ratio: compressed subset has " + std::to_string(compressed.count()) +
                          " columns, original has " + std::to_string(original.count()));
  if (compressed.dim() != original.dim()) throw ValidationError("volume_ratio: dimension mismatch");
  if (compressed.ids() != original.ids()) throw ValidationError("volume_ratio: columns not aligned by sample id");

  auto side = [](const char *which, const FeatureMatrix &m) {
    try {
      auto unit = normalize_columns(m);
      check_rank(unit);
      return std::make_pair(unit, gram_by_id(unit));
    } catch (const RankDeficientError &e) {
      throw RankDeficientError(std::string(which) + " side: " + e.what());
    } catch (const ValidationError &e) {
      throw ValidationError(std::string(which) + " side: " + e.what());
    }
  };
  const auto [unit_c, gram_c] = side("compressed", compressed);
  const auto [unit_o, gram_o] = side("original", original);
  const std::size_t n = original.count();

  std::vector<double> attempted;
  for (double jitter : kJitterLevels) {
    attempted.push_back(jitter);
    auto lc = cholesky_half_logdet(gram_c, n, jitter);
    auto lo = cholesky_half_logdet(gram_o, n, jitter);
    if (!lc || !lo) continue;
    VolumeReport r;
    r.quality = quality;
    r.n = n;
    r.log_vol_compressed = *lc;
    r.log_vol_original = *lo;
    r.log_ratio = *lc - *lo;
    r.ratio = std::exp(r.log_ratio);
    r.jitter = jitter;
    return r;
  }
  throw NearSingularError("volume_ratio: Gram not positive definite on both sides at jitter levels {" +
                              jitter_list(attempted) + "}",
                          attempted);
}

VolumeReport class_volume_ratio(const FeatureMatrix &compressed_family, const FeatureMatrix &original_family,
                                std::span<const std::string> prefix_ids, int quality, std::string class_label) {
  const bool truncated = prefix_ids.size() > original_family.dim();
  if (truncated) prefix_ids = prefix_ids.first(original_family.dim());
  auto r = volume_ratio(compressed_family.select(prefix_ids), original_family.select(prefix_ids), quality);
  r.truncated = truncated;
  r.class_label = std::move(class_label);
  return r;
}

VolumeReport phase_ratio(std::vector<VolumeReport> per_class_reports) {
  if (per_class_reports.empty()) throw ValidationError("phase_ratio of an empty class list");
  const int q = per_class_reports.front().quality;
  VolumeReport out;
  out.quality = q;
  for (const auto &r : per_class_reports) {
    if (r.quality != q) throw ValidationError("phase_ratio: mixed qualities in per-class reports");
    out.n += r.n;
    out.log_vol_original += r.log_vol_original;
    out.log_vol_compressed += r.log_vol_compressed;
    out.log_ratio += r.log_ratio;
    out.jitter = std::max(out.jitter, r.jitter);
    out.truncated = out.truncated || r.truncated;
  }
  const double k = static_cast<double>(per_class_reports.size());
  out.log_vol_original /= k;
  out.log_vol_compressed /= k;
  out.log_ratio /= k;
  out.ratio = std::exp(out.log_ratio);
  out.per_class = std::move(per_class_reports);
  return out;
}

double averaged_ratio(std::span<const VolumeReport> phase_reports) {
  if (phase_reports.empty()) throw ValidationError("averaged_ratio of an empty phase list");
  double s = 0.0;
  for (const auto &r : phase_reports) s += r.ratio;
  return s / static_cast<double>(phase_reports.size());
}

} // namespace replayq
