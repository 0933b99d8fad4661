#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace replayq {

/// Column-major d x n matrix of float32 embeddings, one column per sample.
class FeatureMatrix {
public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t dim) : dim_(dim) {}
  FeatureMatrix(std::size_t dim, std::vector<float> values, std::vector<std::string> ids);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  std::span<const float> values() const noexcept { return values_; }
  const std::vector<std::string> &ids() const noexcept { return ids_; }

  std::span<const float> column(std::size_t j) const {
    return {values_.data() + j * dim_, dim_};
  }
  std::span<float> column(std::size_t j) { return {values_.data() + j * dim_, dim_}; }

  void append(std::string id, std::span<const float> column);

  bool contains(const std::string &id) const { return index_.count(id) != 0; }
  /// Throws ValidationError when the id is absent.
  std::size_t index_of(const std::string &id) const;

  /// Columns for `ids`, in that order.
  FeatureMatrix select(std::span<const std::string> ids) const;

  /// Checks dim > 0, values.size() == dim*count, unique ids, finite values.
  void validate() const;

  friend bool operator==(const FeatureMatrix &a, const FeatureMatrix &b);

private:
  void rebuild_index();

  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

FeatureMatrix read_feature_matrix(const std::filesystem::path &path);
void write_feature_matrix(const FeatureMatrix &m, const std::filesystem::path &path);

/// Sidecar path holding the id list: `<path>.ids.json`.
std::filesystem::path ids_sidecar_path(const std::filesystem::path &path);

struct SampleRecord {
  std::string id;
  std::string class_label;
  int phase_index = 0;
  std::string payload_path;
  std::uint64_t original_byte_size = 0;
};

struct PhaseDescriptor {
  int index = 0;
  std::vector<std::string> classes;
};

struct DatasetManifest {
  std::vector<PhaseDescriptor> phases;
  std::vector<SampleRecord> samples;

  /// Throws ValidationError on duplicate ids, a class claimed by two phases, or
  /// a sample whose class/phase does not match the phase table.
  void validate() const;

  const SampleRecord &sample(const std::string &id) const;
  /// Samples of one class, manifest order.
  std::vector<const SampleRecord *> class_samples(const std::string &class_label) const;
  /// Class labels of a phase, sorted ascending.
  std::vector<std::string> phase_classes(int phase_index) const;
};

/// Payload paths are resolved relative to the manifest's directory when not absolute.
DatasetManifest load_dataset_manifest(const std::filesystem::path &path);
void save_dataset_manifest(const DatasetManifest &manifest, const std::filesystem::path &path);

/// Writes `bytes` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path &path, const std::string &bytes);
std::string read_file_bytes(const std::filesystem::path &path);

} // namespace replayq
