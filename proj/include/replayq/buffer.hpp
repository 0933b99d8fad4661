#pragma once

#include "replayq/compression.hpp"
#include "replayq/exemplar_selection.hpp"
#include "replayq/feature_io.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace replayq {

inline constexpr int kBufferManifestVersion = 1;

struct BufferEntry {
  std::string id;
  std::string class_label;
  int phase = 0;
  std::size_t rank = 0;
  int quality = 0;
  std::uint64_t bytes = 0;
  std::string path; ///< relative to the buffer directory
};

/// Persistent record of a compressed replay buffer (`manifest.json`).
struct BufferManifest {
  int version = kBufferManifestVersion;
  StorageBudget budget;
  int chosen_quality = 0;
  std::vector<BufferEntry> entries; ///< sorted by (phase, class, rank)
  std::map<std::string, std::uint64_t> totals;

  /// Totals match the entries, stay within budget, and ranks per class are 0..n-1.
  void validate() const;
  std::map<std::string, std::size_t> per_class_counts() const;
  std::uint64_t total_bytes() const;
};

/// Rankings of every phase, keyed by phase index.
using PhaseRankings = std::map<int, std::vector<ClassRanking>>;

/// Packs each phase at `chosen_quality`, writes blobs under
/// `<out_dir>/<phase>/<class>/<id>.bin` and the manifest to
/// `<out_dir>/manifest.json`.
BufferManifest build_buffer(int chosen_quality, const DatasetManifest &dataset, const PhaseRankings &rankings,
                            const CompressorBackend &backend, const StorageBudget &budget,
                            const std::filesystem::path &out_dir);

/// Reads and validates a manifest, re-checking every blob's on-disk size.
BufferManifest load_buffer(const std::filesystem::path &manifest_path);

void save_buffer_manifest(const BufferManifest &manifest, const std::filesystem::path &manifest_path);
std::string buffer_manifest_json(const BufferManifest &manifest);

struct ShrinkResult {
  BufferManifest manifest;
  std::uint64_t bytes_before = 0;
  std::uint64_t bytes_after = 0;
  /// bytes_after / bytes_before (1 for an empty buffer).
  double stored_fraction = 1.0;
  /// Classes holding fewer than `keep_per_class` entries, left unchanged.
  std::vector<std::string> clamped_classes;
  std::vector<BufferEntry> dropped;
};

/// Keeps the `keep_per_class` lowest ranks of every class.
ShrinkResult shrink_buffer(const BufferManifest &manifest, std::size_t keep_per_class);

} // namespace replayq
