#include "replayq/exemplar_selection.hpp"

#include "replayq/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace replayq {

std::vector<double> class_mean(const FeatureMatrix &features) {
  if (features.empty()) throw ValidationError("class_mean of an empty class");
  std::vector<double> mean(features.dim(), 0.0);
  for (std::size_t j = 0; j < features.count(); ++j) {
    auto col = features.column(j);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += col[i];
  }
  for (auto &v : mean) v /= static_cast<double>(features.count());
  return mean;
}

ClassRanking rank_by_mean_of_feature(const FeatureMatrix &features, std::string class_label) {
  const auto mean = class_mean(features);
  const std::size_t n = features.count();
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto col = features.column(j);
    double s = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double d = col[i] - mean[i];
      s += d * d;
    }
    dist[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto &ids = features.ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return ids[a] < ids[b];
  });

  ClassRanking out;
  out.class_label = std::move(class_label);
  out.ranked_ids.reserve(n);
  out.distances.reserve(n);
  for (auto j : order) {
    out.ranked_ids.push_back(ids[j]);
    out.distances.push_back(dist[j]);
  }
  return out;
}

std::vector<ClassRanking> rank_phase(const DatasetManifest &manifest, const FeatureMatrix &features,
                                     int phase_index, const std::vector<std::string> &allowed) {
  const std::unordered_set<std::string> keep(allowed.begin(), allowed.end());
  std::vector<ClassRanking> out;
  for (const auto &label : manifest.phase_classes(phase_index)) {
    std::vector<std::string> ids;
    for (const auto *s : manifest.class_samples(label))
      if (keep.count(s->id)) ids.push_back(s->id);
    if (ids.empty()) {
      out.push_back(ClassRanking{label, {}, {}});
      continue;
    }
    out.push_back(rank_by_mean_of_feature(features.select(ids), label));
  }
  return out;
}

std::vector<ClassRanking> rank_phase(const DatasetManifest &manifest, const FeatureMatrix &features,
                                     int phase_index) {
  std::vector<std::string> all;
  all.reserve(manifest.samples.size());
  for (const auto &s : manifest.samples) all.push_back(s.id);
  return rank_phase(manifest, features, phase_index, all);
}

} // namespace replayq
