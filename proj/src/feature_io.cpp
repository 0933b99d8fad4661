#include "replayq/feature_io.hpp"

#include "replayq/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace replayq {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "FMX1 I/O assumes a little-endian host");

FeatureMatrix::FeatureMatrix(std::size_t dim, std::vector<float> values, std::vector<std::string> ids)
    : dim_(dim), values_(std::move(values)), ids_(std::move(ids)) {
  if (dim_ == 0) throw ValidationError("feature matrix dim must be positive");
  if (values_.size() != dim_ * ids_.size())
    throw ValidationError("feature matrix has " + std::to_string(values_.size()) + " values, expected " +
                          std::to_string(dim_ * ids_.size()));
  rebuild_index();
}

void FeatureMatrix::rebuild_index() {
  index_.clear();
  index_.reserve(ids_.size());
  for (std::size_t j = 0; j < ids_.size(); ++j) {
    if (!index_.emplace(ids_[j], j).second) throw ValidationError("duplicate sample id '" + ids_[j] + "'");
  }
}

void FeatureMatrix::append(std::string id, std::span<const float> column) {
  if (column.size() != dim_)
    throw ValidationError("column for '" + id + "' has length " + std::to_string(column.size()) +
                          ", expected " + std::to_string(dim_));
  if (!index_.emplace(id, ids_.size()).second) throw ValidationError("duplicate sample id '" + id + "'");
  ids_.push_back(std::move(id));
  values_.insert(values_.end(), column.begin(), column.end());
}

std::size_t FeatureMatrix::index_of(const std::string &id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("sample id '" + id + "' not present in feature matrix");
  return it->second;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::string> ids) const {
  FeatureMatrix out(dim_);
  out.values_.reserve(ids.size() * dim_);
  out.ids_.reserve(ids.size());
  for (const auto &id : ids) out.append(id, column(index_of(id)));
  return out;
}

void FeatureMatrix::validate() const {
  if (dim_ == 0) throw ValidationError("feature matrix dim must be positive");
  if (values_.size() != dim_ * ids_.size()) throw ValidationError("feature matrix size mismatch");
  std::set<std::string> seen;
  for (const auto &id : ids_)
    if (!seen.insert(id).second) throw ValidationError("duplicate sample id '" + id + "'");
  for (std::size_t k = 0; k < values_.size(); ++k)
    if (!std::isfinite(values_[k]))
      throw ValidationError("non-finite value at column " + std::to_string(k / dim_));
}

bool operator==(const FeatureMatrix &a, const FeatureMatrix &b) {
  if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.values_.size() != b.values_.size()) return false;
  // bitwise, so NaN payloads and signed zeros are distinguished
  return std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
}

fs::path ids_sidecar_path(const fs::path &path) {
  fs::path p = path;
  p += ".ids.json";
  return p;
}

std::string read_file_bytes(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file_atomic(const fs::path &path, const std::string &bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

namespace {

constexpr std::size_t kHeaderBytes = 12;

std::uint32_t read_u32le(const unsigned char *p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

void put_u32le(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

} // namespace

FeatureMatrix read_feature_matrix(const fs::path &path) {
  using Kind = FeatureFileError::Kind;
  const std::string bytes = read_file_bytes(path);
  const auto *p = reinterpret_cast<const unsigned char *>(bytes.data());
  if (bytes.size() < kHeaderBytes || std::memcmp(p, "FMX1", 4) != 0)
    throw FeatureFileError(Kind::MalformedHeader, "'" + path.string() + "': missing FMX1 header");
  const std::uint32_t dim = read_u32le(p + 4);
  const std::uint32_t count = read_u32le(p + 8);
  if (dim == 0) throw FeatureFileError(Kind::MalformedHeader, "'" + path.string() + "': dim is zero");

  const std::uint64_t n_values = std::uint64_t(dim) * count;
  if (n_values > std::numeric_limits<std::size_t>::max() / sizeof(float) ||
      n_values * sizeof(float) > bytes.size() - kHeaderBytes)
    throw FeatureFileError(Kind::DimensionOverflow, "'" + path.string() + "': header declares " +
                                                        std::to_string(dim) + "x" + std::to_string(count) +
                                                        " values but body holds " +
                                                        std::to_string(bytes.size() - kHeaderBytes) + " bytes");
  if (n_values * sizeof(float) != bytes.size() - kHeaderBytes)
    throw FeatureFileError(Kind::MalformedHeader, "'" + path.string() + "': trailing bytes after body");

  std::vector<float> values(n_values);
  std::memcpy(values.data(), p + kHeaderBytes, n_values * sizeof(float));
  for (std::uint64_t k = 0; k < n_values; ++k)
    if (!std::isfinite(values[k]))
      throw FeatureFileError(Kind::NonFinite, "'" + path.string() + "': non-finite value at column " +
                                                  std::to_string(k / dim));

  const fs::path sidecar = ids_sidecar_path(path);
  json ids_json;
  try {
    ids_json = json::parse(read_file_bytes(sidecar));
  } catch (const json::exception &e) {
    throw FeatureFileError(Kind::BadSidecar, "'" + sidecar.string() + "': " + e.what());
  }
  if (!ids_json.is_array())
    throw FeatureFileError(Kind::BadSidecar, "'" + sidecar.string() + "': expected a JSON array");
  if (ids_json.size() != count)
    throw FeatureFileError(Kind::IdCountMismatch, "'" + sidecar.string() + "': " +
                                                      std::to_string(ids_json.size()) + " ids for " +
                                                      std::to_string(count) + " columns");
  std::vector<std::string> ids;
  ids.reserve(count);
  for (const auto &v : ids_json) {
    if (!v.is_string()) throw FeatureFileError(Kind::BadSidecar, "'" + sidecar.string() + "': non-string id");
    ids.push_back(v.get<std::string>());
  }
  try {
    return FeatureMatrix(dim, std::move(values), std::move(ids));
  } catch (const ValidationError &e) {
    throw FeatureFileError(Kind::BadSidecar, "'" + sidecar.string() + "': " + e.what());
  }
}

void write_feature_matrix(const FeatureMatrix &m, const fs::path &path) {
  m.validate();
  if (m.dim() > std::numeric_limits<std::uint32_t>::max() || m.count() > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("feature matrix too large for FMX1");
  std::string out;
  out.reserve(kHeaderBytes + m.values().size() * sizeof(float));
  out.append("FMX1");
  put_u32le(out, static_cast<std::uint32_t>(m.dim()));
  put_u32le(out, static_cast<std::uint32_t>(m.count()));
  out.append(reinterpret_cast<const char *>(m.values().data()), m.values().size() * sizeof(float));
  write_file_atomic(path, out);
  write_file_atomic(ids_sidecar_path(path), json(m.ids()).dump());
}

// ---------------------------------------------------------------------------
// Dataset manifest

void DatasetManifest::validate() const {
  std::map<std::string, int> class_phase;
  std::set<int> phase_indices;
  for (const auto &ph : phases) {
    if (ph.index < 0) throw ValidationError("negative phase index");
    if (!phase_indices.insert(ph.index).second)
      throw ValidationError("phase index " + std::to_string(ph.index) + " listed twice");
    for (const auto &c : ph.classes) {
      auto [it, inserted] = class_phase.emplace(c, ph.index);
      if (!inserted)
        throw ValidationError("class '" + c + "' assigned to phases " + std::to_string(it->second) + " and " +
                              std::to_string(ph.index));
    }
  }
  std::set<std::string> ids;
  for (const auto &s : samples) {
    if (s.id.empty()) throw ValidationError("sample with empty id");
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sample id '" + s.id + "'");
    auto it = class_phase.find(s.class_label);
    if (it == class_phase.end())
      throw ValidationError("sample '" + s.id + "' has class '" + s.class_label + "' not listed in any phase");
    if (it->second != s.phase_index)
      throw ValidationError("sample '" + s.id + "' declares phase " + std::to_string(s.phase_index) +
                            " but class '" + s.class_label + "' belongs to phase " + std::to_string(it->second));
    if (s.original_byte_size == 0) throw ValidationError("sample '" + s.id + "' has zero byte size");
  }
}

const SampleRecord &DatasetManifest::sample(const std::string &id) const {
  auto it = std::find_if(samples.begin(), samples.end(), [&](const SampleRecord &s) { return s.id == id; });
  if (it == samples.end()) throw ValidationError("unknown sample id '" + id + "'");
  return *it;
}

std::vector<const SampleRecord *> DatasetManifest::class_samples(const std::string &class_label) const {
  std::vector<const SampleRecord *> out;
  for (const auto &s : samples)
    if (s.class_label == class_label) out.push_back(&s);
  return out;
}

std::vector<std::string> DatasetManifest::phase_classes(int phase_index) const {
  for (const auto &ph : phases) {
    if (ph.index != phase_index) continue;
    auto classes = ph.classes;
    std::sort(classes.begin(), classes.end());
    return classes;
  }
  throw ValidationError("unknown phase index " + std::to_string(phase_index));
}

DatasetManifest load_dataset_manifest(const fs::path &path) {
  json doc;
  try {
    doc = json::parse(read_file_bytes(path));
  } catch (const json::parse_error &e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
  DatasetManifest m;
  try {
    if (!doc.is_object()) throw ValidationError("manifest root must be an object");
    for (const auto &ph : doc.at("phases")) {
      PhaseDescriptor d;
      d.index = ph.at("index").get<int>();
      d.classes = ph.at("classes").get<std::vector<std::string>>();
      m.phases.push_back(std::move(d));
    }
    const fs::path base = path.parent_path();
    for (const auto &s : doc.at("samples")) {
      SampleRecord r;
      r.id = s.at("id").get<std::string>();
      r.class_label = s.at("class").get<std::string>();
      r.phase_index = s.at("phase").get<int>();
      fs::path payload = s.at("payload").get<std::string>();
      r.payload_path = (payload.is_absolute() || payload.empty() ? payload : base / payload).string();
      const auto bytes = s.at("bytes").get<std::int64_t>();
      if (bytes <= 0) throw ValidationError("sample '" + r.id + "' has non-positive byte size");
      r.original_byte_size = static_cast<std::uint64_t>(bytes);
      std::error_code ec;
      if (!r.payload_path.empty() && fs::is_regular_file(r.payload_path, ec)) {
        const auto on_disk = fs::file_size(r.payload_path, ec);
        if (!ec && on_disk != r.original_byte_size)
          throw ValidationError("sample '" + r.id + "' declares " + std::to_string(r.original_byte_size) +
                                " bytes but payload has " + std::to_string(on_disk));
      }
      m.samples.push_back(std::move(r));
    }
  } catch (const json::exception &e) {
    throw ValidationError("'" + path.string() + "': schema violation: " + e.what());
  }
  m.validate();
  return m;
}

void save_dataset_manifest(const DatasetManifest &manifest, const fs::path &path) {
  manifest.validate();
  json doc;
  doc["phases"] = json::array();
  for (const auto &ph : manifest.phases) doc["phases"].push_back({{"index", ph.index}, {"classes", ph.classes}});
  doc["samples"] = json::array();
  for (const auto &s : manifest.samples)
    doc["samples"].push_back({{"id", s.id},
                              {"class", s.class_label},
                              {"phase", s.phase_index},
                              {"payload", s.payload_path},
                              {"bytes", s.original_byte_size}});
  write_file_atomic(path, doc.dump(1) + "\n");
}

} // namespace replayq
