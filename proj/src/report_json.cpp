#include "replayq/report_json.hpp"

namespace replayq {

using nlohmann::json;

void to_json(json &j, const ClassRanking &r) {
  j = {{"class", r.class_label}, {"ranked_ids", r.ranked_ids}, {"distances", r.distances}};
}

void from_json(const json &j, ClassRanking &r) {
  r.class_label = j.at("class").get<std::string>();
  r.ranked_ids = j.at("ranked_ids").get<std::vector<std::string>>();
  r.distances = j.at("distances").get<std::vector<double>>();
}

void to_json(json &j, const StorageBudget &b) {
  j = {{"scope", to_string(b.scope)},
       {"equivalent_originals", b.equivalent_originals},
       {"resolved_bytes", b.resolved_bytes}};
}

void from_json(const json &j, StorageBudget &b) {
  b.scope = parse_budget_scope(j.at("scope").get<std::string>());
  b.equivalent_originals = j.at("equivalent_originals").get<std::uint64_t>();
  b.resolved_bytes = j.at("resolved_bytes").get<std::map<std::string, std::uint64_t>>();
}

void to_json(json &j, const PackingResult &p) {
  j = {{"quality", p.quality},
       {"selected_ids", p.selected_ids},
       {"n_q_mb", p.n_q_mb},
       {"bytes_used", p.bytes_used},
       {"budget_bytes", p.budget_bytes},
       {"n_at_max_quality", p.n_at_max_quality},
       {"compression_rate", p.compression_rate ? json(*p.compression_rate) : json(nullptr)}};
}

void to_json(json &j, const VolumeReport &v) {
  j = {{"quality", v.quality},
       {"n", v.n},
       {"log_vol_original", v.log_vol_original},
       {"log_vol_compressed", v.log_vol_compressed},
       {"log_ratio", v.log_ratio},
       {"ratio", v.ratio},
       {"jitter", v.jitter},
       {"truncated", v.truncated}};
  if (!v.class_label.empty()) j["class"] = v.class_label;
  if (!v.per_class.empty()) j["per_class"] = v.per_class;
}

void to_json(json &j, const QualityReport &r) {
  j = {{"quality", r.quality},
       {"n_q_mb", r.n_q_mb},
       {"ratio", r.ratio},
       {"feasible", r.feasible},
       {"volume", r.volume},
       {"packing", r.packing}};
}

void to_json(json &j, const PhaseDecisionSummary &s) {
  j = {{"phase", s.phase_index},
       {"chosen_quality", s.chosen_quality},
       {"fallback_used", s.fallback_used},
       {"feasible_set", s.feasible_set}};
}

void to_json(json &j, const QualityDecision &d) {
  j = {{"chosen_quality", d.chosen_quality},
       {"chosen_n", d.chosen_n},
       {"epsilon", d.epsilon},
       {"feasible_set", d.feasible_set},
       {"fallback_used", d.fallback_used},
       {"reports", d.reports},
       {"per_phase", d.per_phase}};
}

std::string dump_stable(const json &j) { return j.dump(1) + "\n"; }

} // namespace replayq
