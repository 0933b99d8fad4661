#include "replayq/replay_harness.hpp"

#include "replayq/error.hpp"
#include "replayq/exemplar_selection.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace replayq {

namespace fs = std::filesystem;

namespace {

/// Portable Gaussian source: mt19937_64 is fully specified by the standard,
/// std::normal_distribution is not.
class GaussianSource {
public:
  explicit GaussianSource(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x9e3779b9u};
    engine_.seed(seq);
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t bits() { return engine_(); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum Stream : std::uint64_t { kMeans = 1, kSamples = 2, kDirections = 3, kSplit = 4, kPayload = 5 };

std::string class_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%03zu", c);
  return buf;
}

std::string sample_name(std::size_t c, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "c%03zu_s%04zu", c, i);
  return buf;
}

} // namespace

void SyntheticConfig::validate() const {
  if (dim == 0 || classes_per_phase == 0 || phases == 0 || samples_per_class == 0)
    throw ValidationError("synthetic config counts must be positive");
  if (!(cluster_spread > 0) || !(within_class_sd > 0) || !(noise_scale >= 0) || !(noise_exponent > 0))
    throw ValidationError("synthetic config scales must be positive (noise_scale may be zero)");
  if (!(test_fraction > 0 && test_fraction < 1)) throw ValidationError("test_fraction must be in (0, 1)");
  if (payload_bytes == 0 || budget_k == 0) throw ValidationError("payload_bytes and budget_k must be positive");
}

SyntheticConfig default_synthetic_config() { return SyntheticConfig{}; }

std::vector<int> SyntheticDataset::phase_indices() const {
  std::vector<int> out;
  for (const auto &p : manifest.phases) out.push_back(p.index);
  return out;
}

std::string quality_feature_file(int q) { return "q" + std::to_string(q) + ".fmx"; }

SyntheticDataset generate_synthetic(const SyntheticConfig &config, std::span<const int> qualities) {
  config.validate();
  std::set<int> qs(qualities.begin(), qualities.end());
  qs.insert(100);
  for (int q : qs)
    if (q < 1 || q > 100) throw ValidationError("synthetic quality " + std::to_string(q) + " outside [1, 100]");

  SyntheticDataset out;
  out.config = config;
  const std::size_t d = config.dim;
  const std::size_t n_classes = config.classes_per_phase * config.phases;
  const double per_coord_sd = config.within_class_sd / std::sqrt(static_cast<double>(d));

  GaussianSource mean_rng(config.seed, kMeans), sample_rng(config.seed, kSamples),
      dir_rng(config.seed, kDirections), split_rng(config.seed, kSplit);

  out.features.original = FeatureMatrix(d);
  out.directions = FeatureMatrix(d);
  std::vector<float> col(d), zcol(d);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<double> mean(d);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto &v : mean) {
        v = mean_rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (auto &v : mean) v *= config.cluster_spread / norm;

    const int phase = static_cast<int>(c / config.classes_per_phase);
    if (out.manifest.phases.size() <= static_cast<std::size_t>(phase)) out.manifest.phases.push_back({phase, {}});
    out.manifest.phases[phase].classes.push_back(class_name(c));

    std::vector<std::string> ids;
    for (std::size_t i = 0; i < config.samples_per_class; ++i) {
      for (std::size_t k = 0; k < d; ++k) col[k] = static_cast<float>(mean[k] + per_coord_sd * sample_rng.normal());
      for (std::size_t k = 0; k < d; ++k) zcol[k] = static_cast<float>(per_coord_sd * dir_rng.normal());
      auto id = sample_name(c, i);
      out.features.original.append(id, col);
      out.directions.append(id, zcol);
      out.manifest.samples.push_back(
          {id, class_name(c), phase, "payloads/" + id + ".bin", config.payload_bytes});
      ids.push_back(std::move(id));
    }

    // Fisher-Yates with the generator's raw bits; modulo bias is irrelevant at these sizes
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[split_rng.bits() % i]);
    auto n_test = static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(ids.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, ids.size() > 1 ? ids.size() - 1 : 1);
    std::sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
    out.test_ids.insert(out.test_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train_ids.insert(out.train_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  }

  const auto &orig = out.features.original;
  for (int q : qs) {
    const double scale = config.noise_scale * std::pow(1.0 - q / 100.0, config.noise_exponent);
    std::vector<float> values(orig.values().begin(), orig.values().end());
    if (scale != 0.0) {
      auto z = out.directions.values();
      for (std::size_t k = 0; k < values.size(); ++k)
        values[k] = static_cast<float>(static_cast<double>(values[k]) + scale * static_cast<double>(z[k]));
    }
    out.features.by_quality.emplace(q, FeatureMatrix(d, std::move(values), orig.ids()));
  }
  out.manifest.validate();
  return out;
}

void save_synthetic(const SyntheticDataset &data, const fs::path &dir) {
  GaussianSource payload_rng(data.config.seed, kPayload);
  for (const auto &s : data.manifest.samples) {
    std::string bytes(s.original_byte_size, '\0');
    for (auto &b : bytes) b = static_cast<char>(payload_rng.bits() & 0xFF);
    write_file_atomic(dir / s.payload_path, bytes);
  }
  save_dataset_manifest(data.manifest, dir / "manifest.json");
  write_feature_matrix(data.features.original, dir / "features" / "original.fmx");
  for (const auto &[q, m] : data.features.by_quality)
    write_feature_matrix(m, dir / "features" / quality_feature_file(q));
  nlohmann::json split = {{"train", data.train_ids}, {"test", data.test_ids}};
  write_file_atomic(dir / "split.json", split.dump(1) + "\n");
}

// ---------------------------------------------------------------------------

std::size_t ReplayBuffer::size() const {
  std::size_t n = 0;
  for (const auto &[_, ids] : ids_by_class) n += ids.size();
  return n;
}

double averaged_incremental_accuracy(std::span<const double> per_phase_accuracy) {
  if (per_phase_accuracy.empty()) throw ValidationError("AIC of an empty accuracy list");
  double s = 0.0;
  for (double a : per_phase_accuracy) s += a;
  return s / static_cast<double>(per_phase_accuracy.size());
}

double averaged_forgetting(const std::vector<std::vector<double>> &task_history) {
  if (task_history.empty()) throw ValidationError("averaged forgetting of an empty history");
  double s = 0.0;
  for (const auto &h : task_history) {
    if (h.empty()) throw ValidationError("task with no recorded accuracy");
    s += h.back() - *std::max_element(h.begin(), h.end());
  }
  return s / static_cast<double>(task_history.size());
}

namespace {

void accumulate(std::vector<double> &sum, std::span<const float> col) {
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += col[k];
}

} // namespace

PhaseMetrics run_continual(const DatasetManifest &manifest, const FeatureFamily &features,
                           const std::vector<std::string> &train_ids, const std::vector<std::string> &test_ids,
                           const std::vector<ReplayBuffer> &buffers) {
  if (test_ids.empty()) throw ValidationError("run_continual: empty test split");
  const auto &orig = features.original;
  const std::size_t d = orig.dim();

  std::vector<int> phases;
  for (const auto &p : manifest.phases) phases.push_back(p.index);
  std::sort(phases.begin(), phases.end());
  if (!buffers.empty() && buffers.size() < phases.size() - 1)
    throw ValidationError("run_continual: need a buffer for every phase but the last");

  std::unordered_map<std::string, const SampleRecord *> records;
  for (const auto &s : manifest.samples) records.emplace(s.id, &s);
  std::unordered_map<std::string, std::vector<std::string>> train_by_class, test_by_class;
  for (const auto &id : train_ids) train_by_class[records.at(id)->class_label].push_back(id);
  for (const auto &id : test_ids) test_by_class[records.at(id)->class_label].push_back(id);

  // Class means fixed for old classes once their phase ends (replay-only).
  std::map<std::string, std::vector<double>> replay_means;
  PhaseMetrics metrics;
  std::vector<std::vector<std::string>> task_classes;

  for (std::size_t t = 0; t < phases.size(); ++t) {
    const auto current = manifest.phase_classes(phases[t]);
    task_classes.push_back(current);

    std::vector<std::pair<std::string, std::vector<double>>> means;
    for (const auto &[label, mean] : replay_means) means.emplace_back(label, mean);
    for (const auto &label : current) {
      const auto &ids = train_by_class[label];
      if (ids.empty()) continue;
      std::vector<double> sum(d, 0.0);
      for (const auto &id : ids) accumulate(sum, orig.column(orig.index_of(id)));
      for (auto &v : sum) v /= static_cast<double>(ids.size());
      means.emplace_back(label, std::move(sum));
    }
    std::sort(means.begin(), means.end());

    auto predict = [&](std::span<const float> x) -> const std::string * {
      const std::string *best = nullptr;
      double best_dist = std::numeric_limits<double>::infinity();
      for (const auto &[label, mean] : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = x[k] - mean[k];
          s += diff * diff;
        }
        if (s < best_dist) {
          best_dist = s;
          best = &label;
        }
      }
      return best;
    };

    std::size_t correct_all = 0, total_all = 0;
    for (std::size_t task = 0; task <= t; ++task) {
      std::size_t correct = 0, total = 0;
      for (const auto &label : task_classes[task]) {
        for (const auto &id : test_by_class[label]) {
          const auto *pred = predict(orig.column(orig.index_of(id)));
          correct += pred && *pred == label;
          ++total;
        }
      }
      correct_all += correct;
      total_all += total;
      if (metrics.task_history.size() <= task) metrics.task_history.emplace_back();
      metrics.task_history[task].push_back(total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0);
    }
    if (total_all == 0) throw ValidationError("run_continual: no test samples for the classes seen so far");
    metrics.per_phase_accuracy.push_back(static_cast<double>(correct_all) / static_cast<double>(total_all));

    // The phase's own training data is gone from here on; keep only what the buffer replays.
    if (t < buffers.size()) {
      const auto &buffer = buffers[t];
      const auto &replayed = features.at(buffer.quality);
      for (const auto &label : current) {
        auto it = buffer.ids_by_class.find(label);
        if (it == buffer.ids_by_class.end() || it->second.empty()) continue;
        std::vector<double> sum(d, 0.0);
        for (const auto &id : it->second) accumulate(sum, replayed.column(replayed.index_of(id)));
        for (auto &v : sum) v /= static_cast<double>(it->second.size());
        replay_means[label] = std::move(sum);
      }
    }
  }

  metrics.aic = averaged_incremental_accuracy(metrics.per_phase_accuracy);
  // the final task has a single record and no chance to be forgotten
  std::vector<std::vector<double>> forgettable(metrics.task_history.begin(),
                                               metrics.task_history.end() - (metrics.task_history.size() > 1));
  metrics.averaged_forgetting = averaged_forgetting(forgettable);
  return metrics;
}

std::vector<ReplayBuffer> plan_buffers(const DatasetManifest &manifest, const FeatureFamily &features,
                                       const std::vector<std::string> &train_ids, int q, const StorageBudget &budget,
                                       const QualitySizer &sizer) {
  std::vector<int> phases;
  for (const auto &p : manifest.phases) phases.push_back(p.index);
  std::sort(phases.begin(), phases.end());
  std::vector<ReplayBuffer> out;
  for (int phase : phases) {
    const auto rankings = rank_phase(manifest, features.original, phase, train_ids);
    const auto packed = pack_phase(rankings, phase, q, budget, sizer);
    ReplayBuffer b;
    b.quality = q;
    for (std::size_t k = 0; k < rankings.size(); ++k)
      b.ids_by_class[rankings[k].class_label] = packed.per_class[k].selected_ids;
    out.push_back(std::move(b));
  }
  return out;
}

QualityDecision select_for_benchmark(const DatasetManifest &manifest, const FeatureFamily &features,
                                     const std::vector<std::string> &train_ids, const QualityCandidateSet &config,
                                     const StorageBudget &budget, const QualitySizer &sizer, int q_max) {
  std::vector<int> phases;
  for (const auto &p : manifest.phases) phases.push_back(p.index);
  std::sort(phases.begin(), phases.end());
  std::vector<std::vector<QualityReport>> per_phase;
  for (int phase : phases) {
    const auto rankings = rank_phase(manifest, features.original, phase, train_ids);
    per_phase.push_back(evaluate_candidates(rankings, phase, features, config, budget, sizer, q_max));
  }
  return decide_across_phases(per_phase, phases, config);
}

GridResult grid_search(const DatasetManifest &manifest, const FeatureFamily &features,
                       const std::vector<std::string> &train_ids, const std::vector<std::string> &test_ids,
                       std::span<const int> qualities, const StorageBudget &budget, const QualitySizer &sizer) {
  if (qualities.empty()) throw ValidationError("grid_search needs at least one quality");
  std::set<std::string> classes;
  for (const auto &p : manifest.phases) classes.insert(p.classes.begin(), p.classes.end());

  GridResult out;
  const GridRow *best = nullptr;
  for (int q : qualities) {
    const auto buffers = plan_buffers(manifest, features, train_ids, q, budget, sizer);
    const auto metrics = run_continual(manifest, features, train_ids, test_ids, buffers);
    std::size_t stored = 0;
    for (const auto &b : buffers) stored += b.size();
    out.rows.push_back({q, classes.empty() ? 0.0 : static_cast<double>(stored) / static_cast<double>(classes.size()),
                        metrics.aic, metrics.averaged_forgetting});
  }
  for (const auto &row : out.rows)
    if (!best || row.aic > best->aic || (row.aic == best->aic && row.quality > best->quality)) best = &row;
  out.best_quality = best->quality;
  return out;
}

StorageBudget synthetic_budget(const SyntheticDataset &data) {
  return resolve_budget(data.manifest, BudgetScope::PerClass, data.config.budget_k, &data.train_ids);
}

QualitySizer synthetic_sizer(const SyntheticDataset &data) {
  std::unordered_map<std::string, std::uint64_t> sizes;
  for (const auto &s : data.manifest.samples) sizes.emplace(s.id, s.original_byte_size);
  return [sizes = std::move(sizes)](const std::string &id, int q) {
    auto it = sizes.find(id);
    if (it == sizes.end()) throw ValidationError("sizer: unknown sample id '" + id + "'");
    return SyntheticBackend::size_model(it->second, q);
  };
}

} // namespace replayq
