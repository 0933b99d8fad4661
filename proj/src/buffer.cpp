#include "replayq/buffer.hpp"

#include "replayq/error.hpp"
#include "replayq/report_json.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <tuple>

namespace replayq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_path_component(const std::string &s, const char *what) {
  if (s.empty() || s == "." || s == ".." || s.find('/') != std::string::npos || s.find('\\') != std::string::npos)
    throw ValidationError(std::string("cannot store ") + what + " '" + s + "' as a path component");
}

bool entry_less(const BufferEntry &a, const BufferEntry &b) {
  return std::tie(a.phase, a.class_label, a.rank) < std::tie(b.phase, b.class_label, b.rank);
}

std::map<std::string, std::uint64_t> compute_totals(const std::vector<BufferEntry> &entries, BudgetScope scope) {
  std::map<std::string, std::uint64_t> totals;
  for (const auto &e : entries)
    totals[scope == BudgetScope::PerClass ? e.class_label : std::to_string(e.phase)] += e.bytes;
  return totals;
}

} // namespace

void BufferManifest::validate() const {
  if (version != kBufferManifestVersion)
    throw ValidationError("unsupported buffer manifest version " + std::to_string(version));
  if (compute_totals(entries, budget.scope) != totals)
    throw ValidationError("buffer totals do not match the sum of entry sizes");
  for (const auto &[key, bytes] : totals)
    if (bytes > budget.bytes_for(key))
      throw ValidationError("scope '" + key + "' stores " + std::to_string(bytes) + " bytes over its budget of " +
                            std::to_string(budget.bytes_for(key)));
  std::map<std::string, std::vector<std::size_t>> ranks;
  for (const auto &e : entries) ranks[e.class_label].push_back(e.rank);
  for (auto &[label, r] : ranks) {
    std::sort(r.begin(), r.end());
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r[i] != i) throw ValidationError("class '" + label + "' has a gap or duplicate in selection ranks");
  }
}

std::map<std::string, std::size_t> BufferManifest::per_class_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto &e : entries) ++out[e.class_label];
  return out;
}

std::uint64_t BufferManifest::total_bytes() const {
  std::uint64_t s = 0;
  for (const auto &e : entries) s += e.bytes;
  return s;
}

BufferManifest build_buffer(int chosen_quality, const DatasetManifest &dataset, const PhaseRankings &rankings,
                            const CompressorBackend &backend, const StorageBudget &budget, const fs::path &out_dir) {
  std::map<std::string, const SampleRecord *> records;
  for (const auto &s : dataset.samples) records.emplace(s.id, &s);

  std::map<std::string, std::string> blobs;
  QualitySizer sizer = [&](const std::string &id, int q) -> std::uint64_t {
    auto it = records.find(id);
    if (it == records.end()) throw ValidationError("ranked id '" + id + "' is not in the dataset");
    auto blob = blobs.find(id);
    if (blob == blobs.end())
      blob = blobs.emplace(id, backend.compress(read_file_bytes(it->second->payload_path), q)).first;
    return blob->second.size();
  };

  BufferManifest m;
  m.budget = budget;
  m.chosen_quality = chosen_quality;
  for (const auto &[phase, phase_rankings] : rankings) {
    // packing stops at the first id that does not fit; only that one is compressed beyond the selection
    const auto packed = pack_phase(phase_rankings, phase, chosen_quality, budget, sizer);
    for (std::size_t k = 0; k < phase_rankings.size(); ++k) {
      const auto &label = phase_rankings[k].class_label;
      check_path_component(label, "class label");
      const auto &ids = packed.per_class[k].selected_ids;
      for (std::size_t rank = 0; rank < ids.size(); ++rank) {
        check_path_component(ids[rank], "sample id");
        BufferEntry e;
        e.id = ids[rank];
        e.class_label = label;
        e.phase = phase;
        e.rank = rank;
        e.quality = chosen_quality;
        e.bytes = blobs.at(e.id).size();
        e.path = (fs::path(std::to_string(phase)) / label / (e.id + ".bin")).generic_string();
        m.entries.push_back(std::move(e));
      }
    }
  }
  std::sort(m.entries.begin(), m.entries.end(), entry_less);
  m.totals = compute_totals(m.entries, budget.scope);
  try {
    m.validate();
  } catch (const ValidationError &e) {
    throw Error(std::string("internal error: built buffer violates its invariants: ") + e.what());
  }

  for (const auto &e : m.entries) write_file_atomic(out_dir / e.path, blobs.at(e.id));
  save_buffer_manifest(m, out_dir / "manifest.json");
  return m;
}

std::string buffer_manifest_json(const BufferManifest &m) {
  json entries = json::array();
  for (const auto &e : m.entries)
    entries.push_back({{"id", e.id},
                       {"class", e.class_label},
                       {"phase", e.phase},
                       {"rank", e.rank},
                       {"quality", e.quality},
                       {"bytes", e.bytes},
                       {"path", e.path}});
  json doc = {{"version", m.version},
              {"budget", m.budget},
              {"chosen_quality", m.chosen_quality},
              {"entries", std::move(entries)},
              {"totals", m.totals}};
  return doc.dump(1) + "\n";
}

void save_buffer_manifest(const BufferManifest &manifest, const fs::path &manifest_path) {
  write_file_atomic(manifest_path, buffer_manifest_json(manifest));
}

BufferManifest load_buffer(const fs::path &manifest_path) {
  json doc;
  try {
    doc = json::parse(read_file_bytes(manifest_path));
  } catch (const json::parse_error &e) {
    throw ValidationError("'" + manifest_path.string() + "': " + e.what());
  }
  BufferManifest m;
  try {
    m.version = doc.at("version").get<int>();
    if (m.version != kBufferManifestVersion)
      throw ValidationError("unsupported buffer manifest version " + std::to_string(m.version));
    m.budget = doc.at("budget").get<StorageBudget>();
    m.chosen_quality = doc.at("chosen_quality").get<int>();
    for (const auto &j : doc.at("entries")) {
      BufferEntry e;
      e.id = j.at("id").get<std::string>();
      e.class_label = j.at("class").get<std::string>();
      e.phase = j.at("phase").get<int>();
      e.rank = j.at("rank").get<std::size_t>();
      e.quality = j.at("quality").get<int>();
      e.bytes = j.at("bytes").get<std::uint64_t>();
      e.path = j.at("path").get<std::string>();
      m.entries.push_back(std::move(e));
    }
    m.totals = doc.at("totals").get<std::map<std::string, std::uint64_t>>();
  } catch (const json::exception &e) {
    throw ValidationError("'" + manifest_path.string() + "': schema violation: " + e.what());
  }
  m.validate();

  const fs::path root = manifest_path.parent_path();
  for (const auto &e : m.entries) {
    std::error_code ec;
    const auto size = fs::file_size(root / e.path, ec);
    if (ec) throw IoError("buffer entry '" + e.id + "': cannot stat blob '" + e.path + "': " + ec.message());
    if (size != e.bytes)
      throw ValidationError("buffer entry '" + e.id + "': blob has " + std::to_string(size) +
                            " bytes, manifest records " + std::to_string(e.bytes));
  }
  return m;
}

ShrinkResult shrink_buffer(const BufferManifest &manifest, std::size_t keep_per_class) {
  ShrinkResult out;
  out.manifest = manifest;
  out.manifest.entries.clear();
  out.bytes_before = manifest.total_bytes();
  for (const auto &[label, count] : manifest.per_class_counts())
    if (count < keep_per_class) out.clamped_classes.push_back(label);
  for (const auto &e : manifest.entries) {
    if (e.rank < keep_per_class)
      out.manifest.entries.push_back(e);
    else
      out.dropped.push_back(e);
  }
  out.manifest.totals = compute_totals(out.manifest.entries, manifest.budget.scope);
  out.bytes_after = out.manifest.total_bytes();
  out.stored_fraction =
      out.bytes_before == 0 ? 1.0 : static_cast<double>(out.bytes_after) / static_cast<double>(out.bytes_before);
  return out;
}

} // namespace replayq
