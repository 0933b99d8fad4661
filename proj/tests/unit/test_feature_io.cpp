#include "replayq/error.hpp"
#include "replayq/feature_io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

using namespace replayq;
using replayq::testing::make_matrix;
using replayq::testing::TempDir;

namespace {

void write_raw(const std::filesystem::path &p, const std::string &bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string header(std::uint32_t dim, std::uint32_t count) {
  std::string h = "FMX1";
  for (std::uint32_t v : {dim, count})
    for (int b = 0; b < 4; ++b) h.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  return h;
}

std::string le_float(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  std::string s;
  for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
  return s;
}

FeatureFileError::Kind read_error_kind(const std::filesystem::path &p) {
  try {
    read_feature_matrix(p);
  } catch (const FeatureFileError &e) {
    return e.kind();
  }
  ADD_FAILURE() << "no FeatureFileError for " << p;
  return FeatureFileError::Kind::BadSidecar;
}

} // namespace

TEST(FeatureIo, EmptyBodyGivesEmptyMatrix) {
  TempDir tmp;
  const auto p = tmp / "e.fmx";
  write_raw(p, header(2, 0));
  write_raw(ids_sidecar_path(p), "[]");
  const auto m = read_feature_matrix(p);
  EXPECT_EQ(m.dim(), 2u);
  EXPECT_EQ(m.count(), 0u);
}

TEST(FeatureIo, UnitColumnsRoundTripBitExact) {
  TempDir tmp;
  const auto m = make_matrix({{1, 0}, {0, 1}}, {"a", "b"});
  write_feature_matrix(m, tmp / "u.fmx");
  const auto back = read_feature_matrix(tmp / "u.fmx");
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.column(1)[1], 1.0f);
}

TEST(FeatureIo, HandWrittenBytesDecode) {
  TempDir tmp;
  const auto p = tmp / "h.fmx";
  write_raw(p, header(2, 2) + le_float(1) + le_float(0) + le_float(0) + le_float(1));
  write_raw(ids_sidecar_path(p), R"(["x","y"])");
  const auto m = read_feature_matrix(p);
  EXPECT_EQ(m, make_matrix({{1, 0}, {0, 1}}, {"x", "y"}));
}

TEST(FeatureIo, NanRejectedWithColumn) {
  TempDir tmp;
  const auto p = tmp / "nan.fmx";
  write_raw(p, header(2, 2) + le_float(1) + le_float(0) + le_float(0) +
                   le_float(std::numeric_limits<float>::quiet_NaN()));
  write_raw(ids_sidecar_path(p), R"(["a","b"])");
  try {
    read_feature_matrix(p);
    FAIL() << "NaN accepted";
  } catch (const FeatureFileError &e) {
    EXPECT_EQ(e.kind(), FeatureFileError::Kind::NonFinite);
    EXPECT_NE(std::string(e.what()).find("non-finite value at column 1"), std::string::npos) << e.what();
  }
}

TEST(FeatureIo, DistinctErrorKinds) {
  TempDir tmp;
  using K = FeatureFileError::Kind;

  write_raw(tmp / "magic.fmx", "FMX2" + header(1, 0).substr(4));
  write_raw(ids_sidecar_path(tmp / "magic.fmx"), "[]");
  EXPECT_EQ(read_error_kind(tmp / "magic.fmx"), K::MalformedHeader);

  write_raw(tmp / "short.fmx", "FMX1\x01");
  EXPECT_EQ(read_error_kind(tmp / "short.fmx"), K::MalformedHeader);

  // header promises more floats than the body has
  write_raw(tmp / "over.fmx", header(4, 1000) + le_float(1));
  write_raw(ids_sidecar_path(tmp / "over.fmx"), "[]");
  EXPECT_EQ(read_error_kind(tmp / "over.fmx"), K::DimensionOverflow);

  write_raw(tmp / "count.fmx", header(1, 2) + le_float(1) + le_float(2));
  write_raw(ids_sidecar_path(tmp / "count.fmx"), R"(["only"])");
  EXPECT_EQ(read_error_kind(tmp / "count.fmx"), K::IdCountMismatch);

  write_raw(tmp / "side.fmx", header(1, 1) + le_float(1));
  write_raw(ids_sidecar_path(tmp / "side.fmx"), "{not json");
  EXPECT_EQ(read_error_kind(tmp / "side.fmx"), K::BadSidecar);

  write_raw(tmp / "inf.fmx", header(1, 1) + le_float(std::numeric_limits<float>::infinity()));
  write_raw(ids_sidecar_path(tmp / "inf.fmx"), R"(["a"])");
  EXPECT_EQ(read_error_kind(tmp / "inf.fmx"), K::NonFinite);
}

TEST(FeatureIo, MissingFileIsIoError) {
  TempDir tmp;
  EXPECT_THROW(read_feature_matrix(tmp / "absent.fmx"), IoError);
}

TEST(FeatureIo, RandomRoundTripProperty) {
  TempDir tmp;
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const auto m = replayq::testing::random_matrix(rng, 3, 5, "t" + std::to_string(trial) + "_");
    const auto p = tmp / "r.fmx";
    write_feature_matrix(m, p);
    EXPECT_EQ(read_feature_matrix(p), m);
  }
}

TEST(FeatureIo, EmptyMatrixIsTwelveByteHeader) {
  TempDir tmp;
  const auto p = tmp / "empty.fmx";
  write_feature_matrix(FeatureMatrix(7), p);
  EXPECT_EQ(std::filesystem::file_size(p), 12u);
  EXPECT_EQ(read_file_bytes(p), header(7, 0));
  EXPECT_EQ(nlohmann::json::parse(read_file_bytes(ids_sidecar_path(p))), nlohmann::json::array());
}

TEST(FeatureIo, DuplicateIdsRejected) {
  EXPECT_THROW(make_matrix({{1}, {2}}, {"a", "a"}), ValidationError);
  FeatureMatrix m(1);
  m.append("a", std::vector<float>{1});
  EXPECT_THROW(m.append("a", std::vector<float>{2}), ValidationError);
}

TEST(FeatureIo, SelectKeepsRequestedOrder) {
  const auto m = make_matrix({{1}, {2}, {3}}, {"a", "b", "c"});
  const std::vector<std::string> ids{"c", "a"};
  const auto s = m.select(ids);
  EXPECT_EQ(s.ids(), ids);
  EXPECT_EQ(s.column(0)[0], 3.0f);
  EXPECT_THROW(m.index_of("zz"), ValidationError);
}

namespace {

nlohmann::json tiny_manifest_json() {
  nlohmann::json j;
  j["phases"] = {{{"index", 0}, {"classes", {"cat", "dog"}}}, {{"index", 1}, {"classes", {"eel", "fox"}}}};
  j["samples"] = nlohmann::json::array();
  int phase = 0;
  for (const std::string label : {"cat", "dog", "eel", "fox"}) {
    phase = (label == "eel" || label == "fox") ? 1 : 0;
    for (int i = 0; i < 3; ++i)
      j["samples"].push_back({{"id", label + std::to_string(i)},
                              {"class", label},
                              {"phase", phase},
                              {"payload", "p/" + label + std::to_string(i) + ".bin"},
                              {"bytes", 100 + i}});
  }
  return j;
}

} // namespace

TEST(DatasetManifest, TwoPhasesTwoClassesThreeSamples) {
  TempDir tmp;
  write_file_atomic(tmp / "m.json", tiny_manifest_json().dump());
  const auto m = load_dataset_manifest(tmp / "m.json");
  EXPECT_EQ(m.samples.size(), 12u);
  ASSERT_EQ(m.phases.size(), 2u);
  EXPECT_EQ(m.phases[0].index, 0);
  EXPECT_EQ(m.phase_classes(1), (std::vector<std::string>{"eel", "fox"}));
  EXPECT_EQ(m.class_samples("dog").size(), 3u);
  EXPECT_EQ(m.sample("fox2").original_byte_size, 102u);
  EXPECT_EQ(std::filesystem::path(m.sample("cat0").payload_path), tmp.path() / "p/cat0.bin");
}

TEST(DatasetManifest, ClassInTwoPhasesRejected) {
  TempDir tmp;
  auto j = tiny_manifest_json();
  j["phases"][1]["classes"].push_back("cat");
  write_file_atomic(tmp / "m.json", j.dump());
  EXPECT_THROW(load_dataset_manifest(tmp / "m.json"), ValidationError);
}

TEST(DatasetManifest, DuplicateIdRejected) {
  TempDir tmp;
  auto j = tiny_manifest_json();
  j["samples"][1]["id"] = "cat0";
  write_file_atomic(tmp / "m.json", j.dump());
  EXPECT_THROW(load_dataset_manifest(tmp / "m.json"), ValidationError);
}

TEST(DatasetManifest, SchemaViolationRejected) {
  TempDir tmp;
  auto j = tiny_manifest_json();
  j["samples"][0].erase("bytes");
  write_file_atomic(tmp / "m.json", j.dump());
  EXPECT_THROW(load_dataset_manifest(tmp / "m.json"), ValidationError);
}

TEST(DatasetManifest, PayloadSizeMustMatchDisk) {
  TempDir tmp;
  auto j = tiny_manifest_json();
  std::filesystem::create_directories(tmp / "p");
  write_file_atomic(tmp / "p/cat0.bin", std::string(99, 'x'));
  write_file_atomic(tmp / "m.json", j.dump());
  EXPECT_THROW(load_dataset_manifest(tmp / "m.json"), ValidationError);
  write_file_atomic(tmp / "p/cat0.bin", std::string(100, 'x'));
  EXPECT_NO_THROW(load_dataset_manifest(tmp / "m.json"));
}

TEST(DatasetManifest, EmptySamplesIsValid) {
  TempDir tmp;
  write_file_atomic(tmp / "m.json", R"({"phases":[],"samples":[]})");
  const auto m = load_dataset_manifest(tmp / "m.json");
  EXPECT_TRUE(m.samples.empty());
}

TEST(DatasetManifest, SaveLoadRoundTrip) {
  TempDir tmp;
  write_file_atomic(tmp / "m.json", tiny_manifest_json().dump());
  const auto m = load_dataset_manifest(tmp / "m.json");
  save_dataset_manifest(m, tmp / "again.json");
  const auto back = load_dataset_manifest(tmp / "again.json");
  ASSERT_EQ(back.samples.size(), m.samples.size());
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].id, m.samples[i].id);
    EXPECT_EQ(back.samples[i].original_byte_size, m.samples[i].original_byte_size);
  }
}
