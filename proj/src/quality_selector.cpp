#include "replayq/quality_selector.hpp"

#include "replayq/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace replayq {

void QualityCandidateSet::validate(QualityRange range) const {
  if (candidates.empty()) throw ValidationError("quality candidate set is empty");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!range.contains(candidates[i]))
      throw ValidationError("quality " + std::to_string(candidates[i]) + " outside [" + std::to_string(range.min) +
                            ", " + std::to_string(range.max) + "]");
    if (i > 0 && candidates[i] <= candidates[i - 1])
      throw ValidationError("quality candidates must be strictly increasing");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be a positive number");
}

const FeatureMatrix &FeatureFamily::at(int q) const {
  auto it = by_quality.find(q);
  if (it == by_quality.end()) throw ValidationError("no feature matrix for quality " + std::to_string(q));
  return it->second;
}

namespace {

[[noreturn]] void rethrow_with_quality(int q) {
  const std::string ctx = "quality " + std::to_string(q) + ": ";
  try {
    throw;
  } catch (const NearSingularError &e) {
    throw NearSingularError(ctx + e.what(), e.attempted_jitters());
  } catch (const RankDeficientError &e) {
    throw RankDeficientError(ctx + e.what());
  } catch (const ValidationError &e) {
    throw ValidationError(ctx + e.what());
  } catch (const IoError &e) {
    throw IoError(ctx + e.what());
  }
}

} // namespace

std::vector<QualityReport> evaluate_candidates(const std::vector<ClassRanking> &rankings, int phase_index,
                                               const FeatureFamily &features, const QualityCandidateSet &config,
                                               const StorageBudget &budget, const QualitySizer &sizer, int q_max) {
  config.validate({1, q_max});
  const std::size_t reference = pack_phase(rankings, phase_index, q_max, budget, sizer).combined.n_q_mb;

  std::vector<QualityReport> reports;
  reports.reserve(config.candidates.size());
  for (int q : config.candidates) {
    try {
      const auto &compressed = features.at(q);
      auto packed = pack_phase(rankings, phase_index, q, budget, sizer);
      std::vector<VolumeReport> per_class;
      for (std::size_t k = 0; k < rankings.size(); ++k) {
        const auto &ids = packed.per_class[k].selected_ids;
        if (ids.empty()) continue;
        per_class.push_back(class_volume_ratio(compressed, features.original, ids, q, rankings[k].class_label));
      }
      if (per_class.empty())
        throw ValidationError("phase " + std::to_string(phase_index) + ": no exemplar fits the budget");

      QualityReport r;
      r.quality = q;
      r.volume = phase_ratio(std::move(per_class));
      r.ratio = r.volume.ratio;
      r.feasible = is_feasible(r.ratio, config.epsilon);
      r.packing = std::move(packed.combined);
      r.n_q_mb = r.packing.n_q_mb;
      r.packing.set_reference(reference);
      reports.push_back(std::move(r));
    } catch (const Error &) {
      rethrow_with_quality(q);
    }
  }
  return reports;
}

QualityDecision select_quality(std::span<const QualityReport> reports, const QualityCandidateSet &config) {
  config.validate();
  std::set<int> seen;
  for (const auto &r : reports)
    if (!seen.insert(r.quality).second)
      throw ValidationError("duplicate report for quality " + std::to_string(r.quality));
  if (seen != std::set<int>(config.candidates.begin(), config.candidates.end()))
    throw ValidationError("reports do not cover the candidate set exactly");

  QualityDecision d;
  d.epsilon = config.epsilon;
  d.reports.assign(reports.begin(), reports.end());
  std::sort(d.reports.begin(), d.reports.end(), [](auto &a, auto &b) { return a.quality < b.quality; });

  const QualityReport *best = nullptr;
  for (auto &r : d.reports) {
    r.feasible = is_feasible(r.ratio, config.epsilon);
    if (!r.feasible) continue;
    d.feasible_set.push_back(r.quality);
    // ascending q, so >= moves ties toward the larger quality
    if (!best || r.n_q_mb >= best->n_q_mb) best = &r;
  }
  if (!best) {
    d.fallback_used = true;
    best = &d.reports.back();
  }
  d.chosen_quality = best->quality;
  d.chosen_n = best->n_q_mb;
  return d;
}

QualityDecision decide_across_phases(const std::vector<std::vector<QualityReport>> &per_phase,
                                     std::span<const int> phase_indices, const QualityCandidateSet &config) {
  if (per_phase.empty()) throw ValidationError("decide_across_phases: no phases");
  if (phase_indices.size() != per_phase.size())
    throw ValidationError("decide_across_phases: phase index list does not match reports");

  std::vector<PhaseDecisionSummary> summaries;
  for (std::size_t p = 0; p < per_phase.size(); ++p) {
    QualityDecision d;
    try {
      d = select_quality(per_phase[p], config);
    } catch (const ValidationError &e) {
      throw ValidationError("phase " + std::to_string(phase_indices[p]) + ": ragged candidate coverage: " + e.what());
    }
    summaries.push_back({phase_indices[p], d.chosen_quality, d.fallback_used, d.feasible_set});
  }

  std::vector<QualityReport> averaged;
  for (int q : config.candidates) {
    QualityReport row;
    row.quality = q;
    row.volume.quality = q;
    row.packing.quality = q;
    std::vector<VolumeReport> phase_volumes;
    std::size_t reference = 0;
    for (const auto &reports : per_phase) {
      auto it = std::find_if(reports.begin(), reports.end(), [q](const auto &r) { return r.quality == q; });
      const auto &r = *it;
      row.n_q_mb += r.n_q_mb;
      row.packing.selected_ids.insert(row.packing.selected_ids.end(), r.packing.selected_ids.begin(),
                                      r.packing.selected_ids.end());
      row.packing.bytes_used += r.packing.bytes_used;
      row.packing.budget_bytes += r.packing.budget_bytes;
      reference += r.packing.n_at_max_quality;
      phase_volumes.push_back(r.volume);
    }
    row.packing.n_q_mb = row.n_q_mb;
    row.packing.set_reference(reference);

    row.ratio = averaged_ratio(phase_volumes);
    row.volume.ratio = row.ratio;
    row.volume.log_ratio = std::log(row.ratio);
    for (const auto &v : phase_volumes) {
      row.volume.n += v.n;
      row.volume.log_vol_original += v.log_vol_original / static_cast<double>(phase_volumes.size());
      row.volume.log_vol_compressed += v.log_vol_compressed / static_cast<double>(phase_volumes.size());
      row.volume.jitter = std::max(row.volume.jitter, v.jitter);
      row.volume.truncated = row.volume.truncated || v.truncated;
    }
    row.volume.per_class = std::move(phase_volumes);
    averaged.push_back(std::move(row));
  }

  auto decision = select_quality(averaged, config);
  decision.per_phase = std::move(summaries);
  return decision;
}

} // namespace replayq
