#pragma once

#include "replayq/compression.hpp"
#include "replayq/feature_io.hpp"
#include "replayq/quality_selector.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace replayq {

/// Synthetic class-incremental benchmark. Defaults are the calibrated values
/// produced by tools/calibrate_synthetic.py.
struct SyntheticConfig {
  std::size_t dim = 32;
  std::size_t classes_per_phase = 4;
  std::size_t phases = 5;
  std::size_t samples_per_class = 300;
  double cluster_spread = 0.5;  ///< norm of each class mean
  double within_class_sd = 1.0; ///< expected norm of a sample's offset from its class mean
  double noise_scale = 4.0;     ///< c in c * (1 - q/100)^p
  double noise_exponent = 4.0;  ///< p
  std::uint64_t seed = 7;
  double test_fraction = 0.2;
  std::uint64_t payload_bytes = 1000;
  std::uint64_t budget_k = 5; ///< equivalent originals per class

  void validate() const;
};

SyntheticConfig default_synthetic_config();

struct SyntheticDataset {
  SyntheticConfig config;
  DatasetManifest manifest; ///< payload paths are `payloads/<id>.bin`
  FeatureFamily features;   ///< includes quality 100 (equal to the original)
  FeatureMatrix directions; ///< fixed per-sample degradation direction z_i
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  std::vector<int> phase_indices() const;
};

/// Class means on a sphere of radius cluster_spread, Gaussian samples around
/// them, and compressed features f_i + c (1 - q/100)^p z_i for every q in
/// `qualities` plus 100.
SyntheticDataset generate_synthetic(const SyntheticConfig &config, std::span<const int> qualities);

/// Writes manifest.json, split.json, features/original.fmx, features/q<q>.fmx
/// and the payload files under `dir`.
void save_synthetic(const SyntheticDataset &data, const std::filesystem::path &dir);

/// Feature file name used by save_synthetic for quality q.
std::string quality_feature_file(int q);

// ---------------------------------------------------------------------------

/// Samples stored for replay after one phase, read from the quality-q features.
struct ReplayBuffer {
  int quality = 100;
  std::map<std::string, std::vector<std::string>> ids_by_class;

  std::size_t size() const;
};

struct PhaseMetrics {
  std::vector<double> per_phase_accuracy;      ///< A_t over all classes seen so far
  std::vector<std::vector<double>> task_history; ///< [task][phase since the task arrived]
  double aic = 0.0;
  double averaged_forgetting = 0.0;
};

/// Mean of A_1..A_T.
double averaged_incremental_accuracy(std::span<const double> per_phase_accuracy);

/// Mean over tasks of (final accuracy - best accuracy). Always <= 0.
double averaged_forgetting(const std::vector<std::vector<double>> &task_history);

/// Nearest-class-mean continual run. At phase t, means of the phase's classes
/// come from their training features and means of older classes from the
/// buffers stored after earlier phases; classes with nothing replayed cannot
/// be predicted. A_t is single-head accuracy over the test samples of every
/// class seen so far. `buffers[t]` is the buffer stored after phase t; pass
/// an empty vector for no replay.
PhaseMetrics run_continual(const DatasetManifest &manifest, const FeatureFamily &features,
                           const std::vector<std::string> &train_ids, const std::vector<std::string> &test_ids,
                           const std::vector<ReplayBuffer> &buffers);

/// Ranks every phase's training samples and packs them at quality q.
std::vector<ReplayBuffer> plan_buffers(const DatasetManifest &manifest, const FeatureFamily &features,
                                       const std::vector<std::string> &train_ids, int q, const StorageBudget &budget,
                                       const QualitySizer &sizer);

/// Volume-ratio selection over every phase of a benchmark.
QualityDecision select_for_benchmark(const DatasetManifest &manifest, const FeatureFamily &features,
                                     const std::vector<std::string> &train_ids, const QualityCandidateSet &config,
                                     const StorageBudget &budget, const QualitySizer &sizer, int q_max = 100);

struct GridRow {
  int quality = 0;
  double n_per_class = 0.0;
  double aic = 0.0;
  double forgetting = 0.0;
};

struct GridResult {
  int best_quality = 0;
  std::vector<GridRow> rows;
};

/// One continual run per candidate; best by AIC, ties toward the larger q.
GridResult grid_search(const DatasetManifest &manifest, const FeatureFamily &features,
                       const std::vector<std::string> &train_ids, const std::vector<std::string> &test_ids,
                       std::span<const int> qualities, const StorageBudget &budget, const QualitySizer &sizer);

/// Convenience wrappers on a generated dataset with its per-class budget.
StorageBudget synthetic_budget(const SyntheticDataset &data);
QualitySizer synthetic_sizer(const SyntheticDataset &data);

} // namespace replayq
