#include "replayq/compression.hpp"
#include "replayq/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace replayq;

namespace {

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return ids;
}

PackingResult pack_sizes(const std::vector<std::uint64_t> &sizes, std::uint64_t budget, int q = 50) {
  const auto ids = ids_for(sizes.size());
  return pack_for_quality(ids, q, budget, [&](const std::string &id) { return sizes[std::stoul(id.substr(1))]; });
}

std::string corpus_image() {
  return read_file_bytes(replayq::testing::data_dir() / "jpeg_corpus" / "images" / "tex0_00.jpg");
}

} // namespace

TEST(SyntheticBackend, SizeFormula) {
  SyntheticBackend b;
  const std::string payload(1000, 'p');
  EXPECT_EQ(b.compress(payload, 50).size(), 500u);
  EXPECT_EQ(b.compress(payload, 100), payload);
  EXPECT_EQ(SyntheticBackend::size_model(1000, 1), 10u);
  EXPECT_EQ(SyntheticBackend::size_model(3, 1), 1u); // floor of one byte
  EXPECT_EQ(SyntheticBackend::size_model(10, 25), 3u); // 2.5 rounds away from zero
  SampleRecord s{"x", "c", 0, "unused", 1000};
  EXPECT_EQ(b.compressed_size(s, 50), 500u);
  EXPECT_EQ(b.compressed_size(s, 100), 1000u);
}

TEST(SyntheticBackend, QualityOutOfRange) {
  SyntheticBackend b;
  EXPECT_THROW(b.compress("abc", 0), ValidationError);
  EXPECT_THROW(b.compress("abc", 101), ValidationError);
}

TEST(IdentityBackend, FeaturePreservingAndLosslessAtMax) {
  IdentityBackend b;
  EXPECT_TRUE(b.preserves_features());
  EXPECT_TRUE(b.lossless_at_max());
  const std::string payload = "0123456789";
  EXPECT_EQ(b.compress(payload, 100), payload);
  EXPECT_EQ(b.compress(payload, 50).size(), 5u);
}

TEST(JpegBackend, SmallerAtLowQuality) {
  JpegBackend b;
  const auto img = corpus_image();
  const auto lo = b.compress(img, 10);
  const auto hi = b.compress(img, 90);
  EXPECT_LT(lo.size(), hi.size());
  EXPECT_EQ(lo.substr(0, 2), "\xff\xd8");
}

TEST(JpegBackend, DeterministicAndPassthroughAtMax) {
  JpegBackend b;
  const auto img = corpus_image();
  EXPECT_EQ(b.compress(img, 37), b.compress(img, 37));
  EXPECT_EQ(b.compress(img, 100), img);
  EXPECT_LE(b.compress(img, 100).size(), img.size() * 11 / 10);
}

TEST(JpegBackend, EncodesPortableGraymap) {
  std::string pgm = "P5\n8 8\n255\n";
  for (int i = 0; i < 64; ++i) pgm.push_back(static_cast<char>(i * 4));
  JpegBackend b;
  const auto out = b.compress(pgm, 75);
  EXPECT_EQ(out.substr(0, 2), "\xff\xd8");
}

TEST(JpegBackend, UndecodablePayload) {
  JpegBackend b;
  EXPECT_THROW(b.compress("definitely not an image", 50), ValidationError);
  EXPECT_THROW(b.compress(std::string("\xff\xd8\xff\xe0garbage", 11), 50), ValidationError);
}

TEST(MakeBackend, Names) {
  EXPECT_EQ(make_backend("jpeg")->name(), "jpeg");
  EXPECT_EQ(make_backend("synthetic")->name(), "synthetic");
  EXPECT_EQ(make_backend("identity")->name(), "identity");
  EXPECT_THROW(make_backend("webp"), ValidationError);
}

TEST(PackForQuality, WorkedExamples) {
  auto r = pack_sizes({4, 3, 3, 2}, 10);
  EXPECT_EQ(r.n_q_mb, 3u);
  EXPECT_EQ(r.bytes_used, 10u);
  EXPECT_EQ(r.selected_ids, (std::vector<std::string>{"s0", "s1", "s2"}));

  r = pack_sizes({4, 3, 3, 2}, 9);
  EXPECT_EQ(r.n_q_mb, 2u);
  EXPECT_EQ(r.bytes_used, 7u);

  r = pack_sizes({4, 3, 3, 2}, 3);
  EXPECT_EQ(r.n_q_mb, 0u);
  EXPECT_EQ(r.bytes_used, 0u);
  EXPECT_EQ(r.budget_bytes, 3u);
}

TEST(PackForQuality, MaximalityProperty) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> len(0, 12), size(1, 20), budget(0, 120);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint64_t> sizes(static_cast<std::size_t>(len(rng)));
    for (auto &s : sizes) s = static_cast<std::uint64_t>(size(rng));
    const auto b = static_cast<std::uint64_t>(budget(rng));
    const auto r = pack_sizes(sizes, b);
    // brute force: the longest prefix whose sum fits
    std::size_t best = 0;
    for (std::size_t k = 0; k <= sizes.size(); ++k)
      if (std::accumulate(sizes.begin(), sizes.begin() + static_cast<long>(k), std::uint64_t{0}) <= b) best = k;
    ASSERT_EQ(r.n_q_mb, best);
    ASSERT_LE(r.bytes_used, b);
    if (r.n_q_mb < sizes.size()) ASSERT_GT(r.bytes_used + sizes[r.n_q_mb], b);
  }
}

TEST(QuantityCurve, SyntheticBudgetExample) {
  const auto ids = ids_for(200);
  const std::vector<int> qs{10, 50, 100};
  const auto curve = quantity_curve(ids, qs, 100, 1000,
                                    [](const std::string &, int q) { return SyntheticBackend::size_model(100, q); });
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[0].n_q_mb, 100u);
  EXPECT_EQ(curve[1].n_q_mb, 20u);
  EXPECT_EQ(curve[2].n_q_mb, 10u);
  EXPECT_EQ(*curve[2].compression_rate, 1.0);
  EXPECT_DOUBLE_EQ(*curve[0].compression_rate, 10.0);
}

TEST(QuantityCurve, MonotoneUnderLinearModel) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> s0(50, 5000);
  const std::vector<int> qs{1, 10, 25, 33, 50, 75, 90, 100};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint64_t> originals(60);
    for (auto &o : originals) o = static_cast<std::uint64_t>(s0(rng));
    const auto ids = ids_for(originals.size());
    const auto curve = quantity_curve(ids, qs, 100, 20'000, [&](const std::string &id, int q) {
      return SyntheticBackend::size_model(originals[std::stoul(id.substr(1))], q);
    });
    for (std::size_t i = 1; i < curve.size(); ++i) ASSERT_LE(curve[i].n_q_mb, curve[i - 1].n_q_mb);
    for (const auto &p : curve)
      if (p.compression_rate) ASSERT_GE(*p.compression_rate, 1.0);
  }
}

TEST(PackingResult, QuantityRateFromCounts) {
  // 85 compressed samples where 20 originals fit
  PackingResult p;
  p.n_q_mb = 85;
  p.set_reference(20);
  EXPECT_DOUBLE_EQ(*p.compression_rate, 4.25);
  p.set_reference(0);
  EXPECT_FALSE(p.compression_rate.has_value());
}

TEST(Budget, MeanTimesK) {
  DatasetManifest dm;
  dm.phases = {{0, {"a", "b"}}, {1, {"c"}}};
  dm.samples = {{"a1", "a", 0, "", 100}, {"a2", "a", 0, "", 101}, {"b1", "b", 0, "", 40},
                {"c1", "c", 1, "", 7},   {"c2", "c", 1, "", 8}};
  const auto per_class = resolve_budget(dm, BudgetScope::PerClass, 20);
  EXPECT_EQ(per_class.bytes_for("a"), 2010u);
  EXPECT_EQ(per_class.bytes_for("b"), 800u);
  EXPECT_EQ(per_class.bytes_for("c"), 150u);

  const auto per_phase = resolve_budget(dm, BudgetScope::PerPhase, 3);
  EXPECT_EQ(per_phase.bytes_for("0"), 241u);
  EXPECT_EQ(per_phase.bytes_for("1"), 23u); // 3 * 7.5 = 22.5 rounds up

  const std::vector<std::string> train{"a1", "b1", "c2"};
  const auto restricted = resolve_budget(dm, BudgetScope::PerClass, 2, &train);
  EXPECT_EQ(restricted.bytes_for("a"), 200u);
  EXPECT_EQ(restricted.bytes_for("c"), 16u);

  EXPECT_THROW(resolve_budget(dm, BudgetScope::PerClass, 0), ValidationError);
  EXPECT_THROW(per_class.bytes_for("zz"), ValidationError);
}

TEST(Budget, ScopeParsing) {
  EXPECT_EQ(parse_budget_scope("class"), BudgetScope::PerClass);
  EXPECT_EQ(parse_budget_scope("phase"), BudgetScope::PerPhase);
  EXPECT_EQ(to_string(BudgetScope::PerPhase), "phase");
  EXPECT_THROW(parse_budget_scope("task"), ValidationError);
}

TEST(PackPhase, PerClassAndPerPhase) {
  const std::vector<ClassRanking> rankings{{"a", {"a0", "a1", "a2"}, {0, 1, 2}}, {"b", {"b0", "b1"}, {0, 1}}};
  const QualitySizer sizer = [](const std::string &id, int) -> std::uint64_t { return id[0] == 'a' ? 4 : 6; };

  StorageBudget per_class{BudgetScope::PerClass, 1, {{"a", 9}, {"b", 6}}};
  const auto pc = pack_phase(rankings, 0, 50, per_class, sizer);
  ASSERT_EQ(pc.per_class.size(), 2u);
  EXPECT_EQ(pc.per_class[0].n_q_mb, 2u);
  EXPECT_EQ(pc.per_class[1].n_q_mb, 1u);
  EXPECT_EQ(pc.combined.n_q_mb, 3u);
  EXPECT_EQ(pc.combined.bytes_used, 14u);

  // round robin a0 b0 a1 b1 a2 with 15 bytes: a0 + b0 + a1 = 14
  StorageBudget per_phase{BudgetScope::PerPhase, 1, {{"0", 15}}};
  const auto pp = pack_phase(rankings, 0, 50, per_phase, sizer);
  EXPECT_EQ(pp.combined.selected_ids, (std::vector<std::string>{"a0", "b0", "a1"}));
  EXPECT_EQ(pp.per_class[0].selected_ids, (std::vector<std::string>{"a0", "a1"}));
  EXPECT_EQ(pp.per_class[1].selected_ids, (std::vector<std::string>{"b0"}));
}

TEST(Interleave, RoundRobin) {
  const std::vector<ClassRanking> r{{"a", {"a0", "a1", "a2"}, {}}, {"b", {"b0"}, {}}, {"c", {"c0", "c1"}, {}}};
  EXPECT_EQ(interleave_rankings(r), (std::vector<std::string>{"a0", "b0", "c0", "a1", "c1", "a2"}));
}

TEST(CachedSizer, ReadsPayloadsOnce) {
  replayq::testing::TempDir tmp;
  write_file_atomic(tmp / "x.bin", std::string(200, 'x'));
  DatasetManifest dm;
  dm.phases = {{0, {"c"}}};
  dm.samples = {{"x", "c", 0, (tmp / "x.bin").string(), 200}};
  SyntheticBackend b;
  const auto sizer = make_cached_sizer(dm, b);
  EXPECT_EQ(sizer("x", 30), 60u);
  EXPECT_EQ(sizer("x", 30), 60u);
  EXPECT_THROW(sizer("nope", 30), ValidationError);
}
