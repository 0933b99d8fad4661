#include "replayq/buffer.hpp"
#include "replayq/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace replayq;
using replayq::testing::TempDir;

namespace {

struct Fixture {
  DatasetManifest dataset;
  PhaseRankings rankings;
  StorageBudget budget;
};

/// Two phases, two classes each, `per_class` payloads of 100 bytes.
Fixture make_fixture(const std::filesystem::path &dir, std::size_t per_class = 10) {
  Fixture f;
  f.dataset.phases = {{0, {"a", "b"}}, {1, {"c", "d"}}};
  std::filesystem::create_directories(dir / "payloads");
  for (const std::string label : {"a", "b", "c", "d"}) {
    const int phase = label < "c" ? 0 : 1;
    ClassRanking r{label, {}, {}};
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::string id = label + "_" + std::to_string(i);
      std::string payload(100, static_cast<char>('A' + i));
      write_file_atomic(dir / "payloads" / (id + ".bin"), payload);
      f.dataset.samples.push_back({id, label, phase, (dir / "payloads" / (id + ".bin")).string(), 100});
      // reverse id order so rank and id order differ
      r.ranked_ids.insert(r.ranked_ids.begin(), id);
      r.distances.push_back(static_cast<double>(i));
    }
    f.rankings[phase].push_back(r);
  }
  f.budget = resolve_budget(f.dataset, BudgetScope::PerClass, 3);
  return f;
}

BufferManifest uniform_manifest(std::size_t count, std::uint64_t blob = 10) {
  BufferManifest m;
  m.budget = StorageBudget{BudgetScope::PerClass, 1, {{"k", count * blob}}};
  m.chosen_quality = 50;
  for (std::size_t r = 0; r < count; ++r)
    m.entries.push_back({"id" + std::to_string(r), "k", 0, r, 50, blob, "0/k/id" + std::to_string(r) + ".bin"});
  m.totals["k"] = count * blob;
  return m;
}

} // namespace

TEST(BuildBuffer, PackingMatchesAndBudgetHolds) {
  TempDir tmp;
  const auto f = make_fixture(tmp / "data");
  SyntheticBackend backend;
  const auto m = build_buffer(50, f.dataset, f.rankings, backend, f.budget, tmp / "buf");

  // 300 bytes per class at 50 bytes per sample
  for (const auto &[label, n] : m.per_class_counts()) EXPECT_EQ(n, 6u) << label;
  for (const auto &[key, total] : m.totals) EXPECT_LE(total, f.budget.bytes_for(key));
  EXPECT_EQ(m.total_bytes(), 4u * 300u);
  EXPECT_EQ(m.chosen_quality, 50);

  const auto packed = pack_phase(f.rankings.at(0), 0, 50, f.budget,
                                 [](const std::string &, int q) { return SyntheticBackend::size_model(100, q); });
  EXPECT_EQ(packed.combined.n_q_mb, 12u);

  // rank 0 of class a is the last id in the fixture's ranking
  EXPECT_EQ(m.entries.front().id, "a_9");
  EXPECT_EQ(m.entries.front().rank, 0u);
  EXPECT_EQ(m.entries.front().path, "0/a/a_9.bin");
  EXPECT_EQ(std::filesystem::file_size(tmp / "buf" / "0/a/a_9.bin"), 50u);
}

TEST(BuildBuffer, RoundTripAndDeterminism) {
  TempDir tmp;
  const auto f = make_fixture(tmp / "data");
  SyntheticBackend backend;
  const auto m = build_buffer(25, f.dataset, f.rankings, backend, f.budget, tmp / "buf");
  const auto first = read_file_bytes(tmp / "buf" / "manifest.json");
  const auto loaded = load_buffer(tmp / "buf" / "manifest.json");
  EXPECT_EQ(buffer_manifest_json(loaded), buffer_manifest_json(m));
  build_buffer(25, f.dataset, f.rankings, backend, f.budget, tmp / "buf");
  EXPECT_EQ(read_file_bytes(tmp / "buf" / "manifest.json"), first);
  build_buffer(25, f.dataset, f.rankings, backend, f.budget, tmp / "other");
  EXPECT_EQ(read_file_bytes(tmp / "other" / "manifest.json"), first);
}

TEST(BuildBuffer, LosslessPassthroughAtMax) {
  TempDir tmp;
  const auto f = make_fixture(tmp / "data");
  SyntheticBackend backend;
  const auto m = build_buffer(100, f.dataset, f.rankings, backend, f.budget, tmp / "buf");
  ASSERT_FALSE(m.entries.empty());
  for (const auto &e : m.entries) {
    EXPECT_EQ(e.bytes, 100u);
    EXPECT_EQ(read_file_bytes(tmp / "buf" / e.path), read_file_bytes(f.dataset.sample(e.id).payload_path));
  }
}

TEST(BuildBuffer, EmptyDataset) {
  TempDir tmp;
  SyntheticBackend backend;
  const auto m = build_buffer(50, DatasetManifest{}, PhaseRankings{}, backend, StorageBudget{}, tmp / "buf");
  EXPECT_TRUE(m.entries.empty());
  EXPECT_NO_THROW(m.validate());
  EXPECT_TRUE(load_buffer(tmp / "buf" / "manifest.json").entries.empty());
}

TEST(LoadBuffer, TruncatedBlobNamesEntry) {
  TempDir tmp;
  const auto f = make_fixture(tmp / "data");
  SyntheticBackend backend;
  const auto m = build_buffer(50, f.dataset, f.rankings, backend, f.budget, tmp / "buf");
  const auto &victim = m.entries[3];
  std::filesystem::resize_file(tmp / "buf" / victim.path, 20);
  try {
    load_buffer(tmp / "buf" / "manifest.json");
    FAIL();
  } catch (const ValidationError &e) {
    EXPECT_NE(std::string(e.what()).find(victim.id), std::string::npos) << e.what();
  }
  std::filesystem::remove(tmp / "buf" / victim.path);
  EXPECT_THROW(load_buffer(tmp / "buf" / "manifest.json"), IoError);
}

TEST(LoadBuffer, UnknownVersionAndSchema) {
  TempDir tmp;
  const auto f = make_fixture(tmp / "data");
  SyntheticBackend backend;
  build_buffer(50, f.dataset, f.rankings, backend, f.budget, tmp / "buf");
  auto j = nlohmann::json::parse(read_file_bytes(tmp / "buf" / "manifest.json"));

  auto v2 = j;
  v2["version"] = 2;
  write_file_atomic(tmp / "buf" / "v2.json", v2.dump());
  EXPECT_THROW(load_buffer(tmp / "buf" / "v2.json"), ValidationError);

  auto broken = j;
  broken["entries"][0].erase("rank");
  write_file_atomic(tmp / "buf" / "broken.json", broken.dump());
  EXPECT_THROW(load_buffer(tmp / "buf" / "broken.json"), ValidationError);

  auto over = j;
  over["totals"]["a"] = 999;
  write_file_atomic(tmp / "buf" / "over.json", over.dump());
  EXPECT_THROW(load_buffer(tmp / "buf" / "over.json"), ValidationError);
}

TEST(BufferManifest, ValidateInvariants) {
  auto m = uniform_manifest(5);
  EXPECT_NO_THROW(m.validate());

  auto gap = m;
  gap.entries[2].rank = 7;
  EXPECT_THROW(gap.validate(), ValidationError);

  auto over = m;
  over.budget.resolved_bytes["k"] = 40;
  EXPECT_THROW(over.validate(), ValidationError);

  auto mismatch = m;
  mismatch.totals["k"] = 49;
  EXPECT_THROW(mismatch.validate(), ValidationError);
}

TEST(ShrinkBuffer, EightyFiveToForty) {
  const auto m = uniform_manifest(85);
  const auto r = shrink_buffer(m, 40);
  EXPECT_EQ(r.manifest.entries.size(), 40u);
  EXPECT_EQ(r.manifest.entries.back().rank, 39u);
  EXPECT_NEAR(r.stored_fraction, 40.0 / 85.0, 1e-12);
  EXPECT_NEAR(100.0 * r.stored_fraction, 47.06, 0.01);
  EXPECT_EQ(r.bytes_before, 850u);
  EXPECT_EQ(r.bytes_after, 400u);
  EXPECT_EQ(r.manifest.totals.at("k"), 400u);
  EXPECT_EQ(r.dropped.size(), 45u);
  EXPECT_NO_THROW(r.manifest.validate());
}

TEST(ShrinkBuffer, ClampAndEmpty) {
  const auto m = uniform_manifest(5);
  const auto keep_all = shrink_buffer(m, 9);
  EXPECT_EQ(buffer_manifest_json(keep_all.manifest), buffer_manifest_json(m));
  EXPECT_EQ(keep_all.clamped_classes, std::vector<std::string>{"k"});
  EXPECT_EQ(keep_all.stored_fraction, 1.0);

  const auto none = shrink_buffer(m, 0);
  EXPECT_TRUE(none.manifest.entries.empty());
  EXPECT_EQ(none.stored_fraction, 0.0);
  EXPECT_NO_THROW(none.manifest.validate());
}

TEST(ShrinkBuffer, RankPrefixAcrossClasses) {
  TempDir tmp;
  const auto f = make_fixture(tmp / "data");
  SyntheticBackend backend;
  const auto m = build_buffer(25, f.dataset, f.rankings, backend, f.budget, tmp / "buf");
  const auto r = shrink_buffer(m, 3);
  for (const auto &[label, n] : r.manifest.per_class_counts()) EXPECT_EQ(n, 3u) << label;
  for (const auto &e : r.manifest.entries) EXPECT_LT(e.rank, 3u);
  for (const auto &[key, total] : r.manifest.totals) EXPECT_LE(total, r.manifest.budget.bytes_for(key));
}
