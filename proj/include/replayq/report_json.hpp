#pragma once

// JSON forms of the report types. Objects use nlohmann::json's sorted keys,
// so serialized output is stable for diff-based regression tests.

#include "replayq/compression.hpp"
#include "replayq/dpp_volume.hpp"
#include "replayq/exemplar_selection.hpp"
#include "replayq/quality_selector.hpp"

#include <nlohmann/json.hpp>

namespace replayq {

void to_json(nlohmann::json &j, const ClassRanking &r);
void from_json(const nlohmann::json &j, ClassRanking &r);

void to_json(nlohmann::json &j, const StorageBudget &b);
void from_json(const nlohmann::json &j, StorageBudget &b);

void to_json(nlohmann::json &j, const PackingResult &p);
void to_json(nlohmann::json &j, const VolumeReport &v);
void to_json(nlohmann::json &j, const QualityReport &r);
void to_json(nlohmann::json &j, const PhaseDecisionSummary &s);
void to_json(nlohmann::json &j, const QualityDecision &d);

/// Pretty-printed with a trailing newline.
std::string dump_stable(const nlohmann::json &j);

} // namespace replayq
