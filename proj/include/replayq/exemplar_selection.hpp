#pragma once

#include "replayq/feature_io.hpp"

#include <string>
#include <vector>

namespace replayq {

/// Samples of one class ordered by distance to the class feature mean, nearest first.
struct ClassRanking {
  std::string class_label;
  std::vector<std::string> ranked_ids;
  std::vector<double> distances;
};

/// Arithmetic mean of the columns. Throws ValidationError on an empty matrix.
std::vector<double> class_mean(const FeatureMatrix &features);

/// Mean-of-feature ranking on raw (unnormalized) features. Ties go to the
/// lexicographically smaller sample id.
ClassRanking rank_by_mean_of_feature(const FeatureMatrix &features, std::string class_label = {});

/// Ranks every class of `phase_index`, ascending class label. Columns are
/// looked up in `features` by sample id.
std::vector<ClassRanking> rank_phase(const DatasetManifest &manifest, const FeatureMatrix &features,
                                     int phase_index);

/// Same, restricted to the ids in `allowed` (e.g. a training split).
std::vector<ClassRanking> rank_phase(const DatasetManifest &manifest, const FeatureMatrix &features,
                                     int phase_index, const std::vector<std::string> &allowed);

} // namespace replayq
