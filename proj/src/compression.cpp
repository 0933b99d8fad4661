#include "replayq/compression.hpp"

#include "jpeg_codec.hpp"
#include "replayq/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <memory>
#include <utility>

namespace replayq {

void CompressorBackend::check_quality(int q) const {
  const auto range = quality_range();
  if (!range.contains(q))
    throw ValidationError(name() + ": quality " + std::to_string(q) + " outside [" + std::to_string(range.min) +
                          ", " + std::to_string(range.max) + "]");
}

std::uint64_t CompressorBackend::compressed_size(const SampleRecord &sample, int q) const {
  return compress(read_file_bytes(sample.payload_path), q).size();
}

std::uint64_t SyntheticBackend::size_model(std::uint64_t original_bytes, int q) {
  const auto scaled = std::llround(static_cast<double>(original_bytes) * q / 100.0);
  return static_cast<std::uint64_t>(std::max<long long>(1, scaled));
}

std::string SyntheticBackend::compress(std::string_view payload, int q) const {
  check_quality(q);
  if (payload.empty()) throw ValidationError("synthetic: empty payload");
  const auto n = size_model(payload.size(), q);
  std::string out;
  out.reserve(n);
  while (out.size() < n) out.append(payload.substr(0, n - out.size()));
  return out;
}

std::uint64_t SyntheticBackend::compressed_size(const SampleRecord &sample, int q) const {
  check_quality(q);
  return size_model(sample.original_byte_size, q);
}

std::string IdentityBackend::compress(std::string_view payload, int q) const {
  return SyntheticBackend{}.compress(payload, q);
}

std::uint64_t IdentityBackend::compressed_size(const SampleRecord &sample, int q) const {
  check_quality(q);
  return SyntheticBackend::size_model(sample.original_byte_size, q);
}

std::string JpegBackend::compress(std::string_view payload, int q) const {
  check_quality(q);
  if (detail::looks_like_jpeg(payload)) {
    if (q == quality_range().max) return std::string(payload);
    return detail::encode_jpeg(detail::decode_jpeg(payload), q);
  }
  return detail::encode_jpeg(detail::decode_pnm(payload), q);
}

std::unique_ptr<CompressorBackend> make_backend(std::string_view name) {
  if (name == "jpeg") return std::make_unique<JpegBackend>();
  if (name == "synthetic") return std::make_unique<SyntheticBackend>();
  if (name == "identity") return std::make_unique<IdentityBackend>();
  throw ValidationError("unknown backend '" + std::string(name) + "' (expected jpeg, synthetic or identity)");
}

QualitySizer make_cached_sizer(const DatasetManifest &manifest, const CompressorBackend &backend) {
  struct State {
    std::map<std::string, const SampleRecord *> records;
    std::map<std::pair<std::string, int>, std::uint64_t> cache;
  };
  auto state = std::make_shared<State>();
  for (const auto &s : manifest.samples) state->records.emplace(s.id, &s);
  return [state, &backend](const std::string &id, int q) -> std::uint64_t {
    auto key = std::make_pair(id, q);
    if (auto it = state->cache.find(key); it != state->cache.end()) return it->second;
    auto rec = state->records.find(id);
    if (rec == state->records.end()) throw ValidationError("sizer: unknown sample id '" + id + "'");
    const auto size = backend.compressed_size(*rec->second, q);
    state->cache.emplace(std::move(key), size);
    return size;
  };
}

// ---------------------------------------------------------------------------

std::string to_string(BudgetScope scope) { return scope == BudgetScope::PerClass ? "class" : "phase"; }

BudgetScope parse_budget_scope(std::string_view text) {
  if (text == "class" || text == "per_class") return BudgetScope::PerClass;
  if (text == "phase" || text == "per_phase") return BudgetScope::PerPhase;
  throw ValidationError("unknown budget scope '" + std::string(text) + "' (expected class or phase)");
}

std::uint64_t StorageBudget::bytes_for(const std::string &key) const {
  auto it = resolved_bytes.find(key);
  if (it == resolved_bytes.end()) throw ValidationError("no budget resolved for scope key '" + key + "'");
  return it->second;
}

std::string scope_key(BudgetScope scope, const SampleRecord &sample) {
  return scope == BudgetScope::PerClass ? sample.class_label : std::to_string(sample.phase_index);
}

StorageBudget resolve_budget(const DatasetManifest &manifest, BudgetScope scope, std::uint64_t equivalent_originals,
                             const std::vector<std::string> *training_ids) {
  if (equivalent_originals == 0) throw ValidationError("budget must be at least one equivalent original");
  std::vector<std::string> allowed;
  if (training_ids) {
    allowed = *training_ids;
    std::sort(allowed.begin(), allowed.end());
  }
  std::map<std::string, std::pair<long double, std::uint64_t>> sums;
  for (const auto &s : manifest.samples) {
    if (training_ids && !std::binary_search(allowed.begin(), allowed.end(), s.id)) continue;
    auto &acc = sums[scope_key(scope, s)];
    acc.first += static_cast<long double>(s.original_byte_size);
    acc.second += 1;
  }
  StorageBudget budget;
  budget.scope = scope;
  budget.equivalent_originals = equivalent_originals;
  for (const auto &[key, acc] : sums) {
    const long double mean = acc.first / static_cast<long double>(acc.second);
    const auto bytes = std::llround(static_cast<double>(mean * equivalent_originals));
    budget.resolved_bytes[key] = static_cast<std::uint64_t>(std::max<long long>(1, bytes));
  }
  return budget;
}

PackingResult pack_for_quality(std::span<const std::string> ranked_ids, int q, std::uint64_t budget_bytes,
                               const std::function<std::uint64_t(const std::string &)> &sizer) {
  PackingResult r;
  r.quality = q;
  r.budget_bytes = budget_bytes;
  for (const auto &id : ranked_ids) {
    const auto size = sizer(id);
    if (size > budget_bytes - r.bytes_used) break;
    r.bytes_used += size;
    r.selected_ids.push_back(id);
  }
  r.n_q_mb = r.selected_ids.size();
  return r;
}

std::vector<PackingResult> quantity_curve(std::span<const std::string> ranked_ids, std::span<const int> qualities,
                                          int q_max, std::uint64_t budget_bytes, const QualitySizer &sizer) {
  if (qualities.empty()) throw ValidationError("quantity_curve needs at least one quality");
  auto pack_at = [&](int q) {
    return pack_for_quality(ranked_ids, q, budget_bytes, [&](const std::string &id) { return sizer(id, q); });
  };
  const std::size_t reference = pack_at(q_max).n_q_mb;
  std::vector<PackingResult> out;
  out.reserve(qualities.size());
  for (int q : qualities) {
    auto r = pack_at(q);
    r.set_reference(reference);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> interleave_rankings(const std::vector<ClassRanking> &rankings) {
  std::vector<std::string> out;
  std::size_t longest = 0;
  for (const auto &r : rankings) longest = std::max(longest, r.ranked_ids.size());
  for (std::size_t k = 0; k < longest; ++k)
    for (const auto &r : rankings)
      if (k < r.ranked_ids.size()) out.push_back(r.ranked_ids[k]);
  return out;
}

PhasePacking pack_phase(const std::vector<ClassRanking> &rankings, int phase_index, int q,
                        const StorageBudget &budget, const QualitySizer &sizer) {
  auto size_at_q = [&](const std::string &id) { return sizer(id, q); };
  PhasePacking out;
  out.combined.quality = q;
  if (budget.scope == BudgetScope::PerClass) {
    for (const auto &r : rankings) {
      auto p = pack_for_quality(r.ranked_ids, q, budget.bytes_for(r.class_label), size_at_q);
      out.combined.selected_ids.insert(out.combined.selected_ids.end(), p.selected_ids.begin(),
                                       p.selected_ids.end());
      out.combined.bytes_used += p.bytes_used;
      out.combined.budget_bytes += p.budget_bytes;
      out.per_class.push_back(std::move(p));
    }
    out.combined.n_q_mb = out.combined.selected_ids.size();
    return out;
  }

  const auto merged = interleave_rankings(rankings);
  out.combined = pack_for_quality(merged, q, budget.bytes_for(std::to_string(phase_index)), size_at_q);
  const std::set<std::string> chosen(out.combined.selected_ids.begin(), out.combined.selected_ids.end());
  for (const auto &r : rankings) {
    PackingResult p;
    p.quality = q;
    p.budget_bytes = out.combined.budget_bytes;
    // rank order is kept, and the chosen ids of a class always form a prefix of its ranking
    for (const auto &id : r.ranked_ids) {
      if (!chosen.count(id)) break;
      p.selected_ids.push_back(id);
      p.bytes_used += size_at_q(id);
    }
    p.n_q_mb = p.selected_ids.size();
    out.per_class.push_back(std::move(p));
  }
  return out;
}

} // namespace replayq
