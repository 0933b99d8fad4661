#pragma once

#include "replayq/exemplar_selection.hpp"
#include "replayq/feature_io.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace replayq {

struct QualityRange {
  int min = 1;
  int max = 100;
  bool contains(int q) const noexcept { return q >= min && q <= max; }
};

/// The lossy compression function. Implementations must be deterministic:
/// the same payload at the same quality always yields the same bytes.
class CompressorBackend {
public:
  virtual ~CompressorBackend() = default;

  virtual std::string name() const = 0;
  virtual QualityRange quality_range() const { return {}; }

  /// Throws ValidationError for out-of-range q or an undecodable payload.
  virtual std::string compress(std::string_view payload, int q) const = 0;

  /// Size of the compressed sample. The default reads the payload file and
  /// compresses it.
  virtual std::uint64_t compressed_size(const SampleRecord &sample, int q) const;

  /// True when compression at quality_range().max returns the payload unchanged.
  virtual bool lossless_at_max() const { return false; }

  /// True when features of compressed samples equal the original features,
  /// so no per-quality feature files are needed.
  virtual bool preserves_features() const { return false; }

protected:
  void check_quality(int q) const;
};

/// Size model max(1, round(s0 * q / 100)); output bytes are a cyclic prefix of the payload.
class SyntheticBackend final : public CompressorBackend {
public:
  std::string name() const override { return "synthetic"; }
  std::string compress(std::string_view payload, int q) const override;
  std::uint64_t compressed_size(const SampleRecord &sample, int q) const override;
  bool lossless_at_max() const override { return true; }

  static std::uint64_t size_model(std::uint64_t original_bytes, int q);
};

/// Ideal codec: bytes shrink like the synthetic size model but the
/// features of a compressed sample are its original features.
class IdentityBackend final : public CompressorBackend {
public:
  std::string name() const override { return "identity"; }
  std::string compress(std::string_view payload, int q) const override;
  std::uint64_t compressed_size(const SampleRecord &sample, int q) const override;
  bool lossless_at_max() const override { return true; }
  bool preserves_features() const override { return true; }
};

/// Baseline JFIF via libjpeg. Accepts JPEG, binary PGM (P5) and PPM (P6)
/// payloads. A JPEG payload at q = 100 is passed through unchanged.
class JpegBackend final : public CompressorBackend {
public:
  std::string name() const override { return "jpeg"; }
  std::string compress(std::string_view payload, int q) const override;
};

/// "jpeg", "synthetic" or "identity"; ValidationError otherwise.
std::unique_ptr<CompressorBackend> make_backend(std::string_view name);

/// Byte size of sample `id` compressed at quality q.
using QualitySizer = std::function<std::uint64_t(const std::string &id, int q)>;

/// Sizer over a manifest that memoizes every (id, q) it is asked for.
QualitySizer make_cached_sizer(const DatasetManifest &manifest, const CompressorBackend &backend);

// ---------------------------------------------------------------------------
// Budgets and packing

enum class BudgetScope { PerClass, PerPhase };

std::string to_string(BudgetScope scope);
BudgetScope parse_budget_scope(std::string_view text);

/// Storage budget expressed as K equivalent originals per scope key (class
/// label, or the decimal phase index).
struct StorageBudget {
  BudgetScope scope = BudgetScope::PerClass;
  std::uint64_t equivalent_originals = 0;
  std::map<std::string, std::uint64_t> resolved_bytes;

  std::uint64_t bytes_for(const std::string &key) const;
};

/// Resolves each scope key to round(K * mean original size), at least 1.
/// When `training_ids` is given only those samples enter the mean.
StorageBudget resolve_budget(const DatasetManifest &manifest, BudgetScope scope, std::uint64_t equivalent_originals,
                             const std::vector<std::string> *training_ids = nullptr);

std::string scope_key(BudgetScope scope, const SampleRecord &sample);

struct PackingResult {
  int quality = 0;
  std::vector<std::string> selected_ids;
  std::size_t n_q_mb = 0;
  std::uint64_t bytes_used = 0;
  std::uint64_t budget_bytes = 0;
  /// N^mb: the count packed at the backend's maximum quality.
  std::size_t n_at_max_quality = 0;
  /// n_q_mb / N^mb. Empty when N^mb is zero or unknown.
  std::optional<double> compression_rate;

  void set_reference(std::size_t n_max) {
    n_at_max_quality = n_max;
    compression_rate.reset();
    if (n_max > 0) compression_rate = static_cast<double>(n_q_mb) / static_cast<double>(n_max);
  }
};

/// Greedy prefix packing: takes ranked ids in order and stops before the
/// first one that would overflow the budget.
PackingResult pack_for_quality(std::span<const std::string> ranked_ids, int q, std::uint64_t budget_bytes,
                               const std::function<std::uint64_t(const std::string &)> &sizer);

/// One packing per quality in `qualities`, with compression rates relative
/// to the packing at `q_max`.
std::vector<PackingResult> quantity_curve(std::span<const std::string> ranked_ids, std::span<const int> qualities,
                                          int q_max, std::uint64_t budget_bytes, const QualitySizer &sizer);

/// Round-robin merge of per-class rankings (rank 0 of every class, then rank 1, ...).
std::vector<std::string> interleave_rankings(const std::vector<ClassRanking> &rankings);

/// Packing of one phase at one quality. `per_class` is aligned with the
/// input rankings.
struct PhasePacking {
  PackingResult combined;
  std::vector<PackingResult> per_class;
};

PhasePacking pack_phase(const std::vector<ClassRanking> &rankings, int phase_index, int q,
                        const StorageBudget &budget, const QualitySizer &sizer);

} // namespace replayq
