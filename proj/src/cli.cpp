#include "replayq/cli.hpp"

#include "replayq/buffer.hpp"
#include "replayq/compression.hpp"
#include "replayq/dpp_volume.hpp"
#include "replayq/error.hpp"
#include "replayq/exemplar_selection.hpp"
#include "replayq/feature_io.hpp"
#include "replayq/quality_selector.hpp"
#include "replayq/replay_harness.hpp"
#include "replayq/report_json.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <optional>
#include <sstream>

namespace replayq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  fs::path manifest;
  fs::path features_dir;
  fs::path original_features;
  std::map<int, fs::path> quality_features;
  fs::path split;
  std::string backend = "jpeg";
  QualityCandidateSet selector;
  std::uint64_t budget_k = 20;
  BudgetScope scope = BudgetScope::PerClass;
  fs::path out = ".";
  std::uint64_t seed = 7;
  SyntheticConfig synthetic = default_synthetic_config();
};

/// Raw flag values; only the ones given on the command line override the config file.
struct Flags {
  std::string config, out, manifest, features_dir, split, backend, qualities, budget_scope;
  std::uint64_t seed = 0, budget_k = 0;
  double epsilon = 0;
  // subcommand-specific
  std::string report, buffer;
  int quality = 0;
  std::size_t keep = 0;
  bool no_replay = false;
  // synthetic overrides
  double noise_scale = 0, noise_exponent = 0, cluster_spread = 0, within_class_sd = 0;
  std::size_t dim = 0, phases = 0, classes_per_phase = 0, samples_per_class = 0;
};

std::vector<int> parse_quality_list(const std::string &text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const int q = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(q);
    } catch (const std::exception &) {
      throw ValidationError("bad quality '" + item + "' in --qualities");
    }
  }
  return out;
}

fs::path resolve_against(const fs::path &base, const fs::path &p) {
  return p.empty() || p.is_absolute() ? p : base / p;
}

void apply_synthetic_json(const json &j, SyntheticConfig &s) {
  s.dim = j.value("dim", s.dim);
  s.classes_per_phase = j.value("classes_per_phase", s.classes_per_phase);
  s.phases = j.value("phases", s.phases);
  s.samples_per_class = j.value("samples_per_class", s.samples_per_class);
  s.cluster_spread = j.value("cluster_spread", s.cluster_spread);
  s.within_class_sd = j.value("within_class_sd", s.within_class_sd);
  s.noise_scale = j.value("noise_scale", s.noise_scale);
  s.noise_exponent = j.value("noise_exponent", s.noise_exponent);
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  s.payload_bytes = j.value("payload_bytes", s.payload_bytes);
  s.budget_k = j.value("budget_k", s.budget_k);
}

RunConfig load_config(const CLI::App &app, const CLI::App &sub, const Flags &f) {
  auto given = [&](const char *name) {
    const auto *a = app.get_option_no_throw(name);
    const auto *s = sub.get_option_no_throw(name);
    return (a && a->count() > 0) || (s && s->count() > 0);
  };
  RunConfig c;
  bool budget_from_config = false;
  if (!f.config.empty()) {
    json j;
    try {
      j = json::parse(read_file_bytes(f.config));
    } catch (const json::parse_error &e) {
      throw ValidationError("config '" + f.config + "': " + e.what());
    }
    const fs::path base = fs::path(f.config).parent_path();
    try {
      if (j.contains("manifest")) c.manifest = resolve_against(base, j["manifest"].get<std::string>());
      if (j.contains("features_dir")) c.features_dir = resolve_against(base, j["features_dir"].get<std::string>());
      if (j.contains("features")) {
        const auto &fj = j["features"];
        if (fj.contains("original")) c.original_features = resolve_against(base, fj["original"].get<std::string>());
        if (fj.contains("qualities"))
          for (const auto &[key, path] : fj["qualities"].items())
            c.quality_features[std::stoi(key)] = resolve_against(base, path.get<std::string>());
      }
      if (j.contains("split")) c.split = resolve_against(base, j["split"].get<std::string>());
      c.backend = j.value("backend", c.backend);
      if (j.contains("qualities")) c.selector.candidates = j["qualities"].get<std::vector<int>>();
      c.selector.epsilon = j.value("epsilon", c.selector.epsilon);
      if (j.contains("budget_k")) {
        c.budget_k = j["budget_k"].get<std::uint64_t>();
        budget_from_config = true;
      }
      if (j.contains("budget_scope")) c.scope = parse_budget_scope(j["budget_scope"].get<std::string>());
      if (j.contains("out")) c.out = resolve_against(base, j["out"].get<std::string>());
      c.seed = j.value("seed", c.seed);
      if (j.contains("synthetic")) apply_synthetic_json(j["synthetic"], c.synthetic);
    } catch (const json::exception &e) {
      throw ValidationError("config '" + f.config + "': " + e.what());
    }
  }
  if (given("--out")) c.out = f.out;
  if (given("--manifest")) c.manifest = f.manifest;
  if (given("--features-dir")) c.features_dir = f.features_dir;
  if (given("--split")) c.split = f.split;
  if (given("--backend")) c.backend = f.backend;
  if (given("--qualities")) c.selector.candidates = parse_quality_list(f.qualities);
  if (given("--epsilon")) c.selector.epsilon = f.epsilon;
  if (given("--budget-k")) {
    c.budget_k = f.budget_k;
    budget_from_config = true;
  }
  if (given("--budget-scope")) c.scope = parse_budget_scope(f.budget_scope);
  if (given("--seed")) c.seed = f.seed;

  c.synthetic.seed = c.seed;
  if (budget_from_config) c.synthetic.budget_k = c.budget_k;
  if (given("--noise-scale")) c.synthetic.noise_scale = f.noise_scale;
  if (given("--noise-exponent")) c.synthetic.noise_exponent = f.noise_exponent;
  if (given("--cluster-spread")) c.synthetic.cluster_spread = f.cluster_spread;
  if (given("--within-class-sd")) c.synthetic.within_class_sd = f.within_class_sd;
  if (given("--dim")) c.synthetic.dim = f.dim;
  if (given("--phases")) c.synthetic.phases = f.phases;
  if (given("--classes-per-phase")) c.synthetic.classes_per_phase = f.classes_per_phase;
  if (given("--samples-per-class")) c.synthetic.samples_per_class = f.samples_per_class;

  if (c.original_features.empty() && !c.features_dir.empty()) c.original_features = c.features_dir / "original.fmx";
  return c;
}

void require_file(const fs::path &p, const char *what) {
  if (p.empty()) throw ValidationError(std::string("no ") + what + " configured");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw IoError(std::string(what) + " '" + p.string() + "' does not exist");
}

fs::path quality_features_path(const RunConfig &c, int q) {
  if (auto it = c.quality_features.find(q); it != c.quality_features.end()) return it->second;
  if (!c.features_dir.empty()) return c.features_dir / quality_feature_file(q);
  throw ValidationError("no feature file configured for quality " + std::to_string(q));
}

/// Everything the dataset-level subcommands share.
struct Workspace {
  DatasetManifest manifest;
  FeatureMatrix original;
  std::optional<std::vector<std::string>> train_ids;
  std::unique_ptr<CompressorBackend> backend;
  StorageBudget budget;

  std::vector<std::string> training() const {
    if (train_ids) return *train_ids;
    std::vector<std::string> all;
    for (const auto &s : manifest.samples) all.push_back(s.id);
    return all;
  }
  std::vector<int> phases() const {
    std::vector<int> out;
    for (const auto &p : manifest.phases) out.push_back(p.index);
    std::sort(out.begin(), out.end());
    return out;
  }
  PhaseRankings rankings() const {
    PhaseRankings out;
    const auto ids = training();
    for (int p : phases()) out[p] = rank_phase(manifest, original, p, ids);
    return out;
  }
};

Workspace open_workspace(const RunConfig &c, bool need_features = true) {
  require_file(c.manifest, "dataset manifest");
  Workspace w;
  w.manifest = load_dataset_manifest(c.manifest);
  if (need_features) {
    require_file(c.original_features, "original feature file");
    w.original = read_feature_matrix(c.original_features);
  }
  if (!c.split.empty()) {
    require_file(c.split, "split file");
    try {
      w.train_ids = json::parse(read_file_bytes(c.split)).at("train").get<std::vector<std::string>>();
    } catch (const json::exception &e) {
      throw ValidationError("split '" + c.split.string() + "': " + e.what());
    }
  }
  w.backend = make_backend(c.backend);
  c.selector.validate(w.backend->quality_range());
  const auto train = w.training();
  w.budget = resolve_budget(w.manifest, c.scope, c.budget_k, &train);
  return w;
}

FeatureFamily load_family(const RunConfig &c, const Workspace &w) {
  FeatureFamily family;
  family.original = w.original;
  for (int q : c.selector.candidates) {
    if (w.backend->preserves_features()) {
      family.by_quality.emplace(q, w.original);
      continue;
    }
    const auto path = quality_features_path(c, q);
    require_file(path, "feature file");
    family.by_quality.emplace(q, read_feature_matrix(path));
  }
  return family;
}

QualityDecision run_selection(const RunConfig &c, const Workspace &w) {
  const auto family = load_family(c, w);
  const auto sizer = make_cached_sizer(w.manifest, *w.backend);
  return select_for_benchmark(w.manifest, family, w.training(), c.selector, w.budget, sizer,
                              w.backend->quality_range().max);
}

std::string fmt_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_rank(const RunConfig &c, std::ostream &out, std::ostream &err) {
  const auto w = open_workspace(c);
  std::size_t written = 0;
  for (const auto &[phase, rankings] : w.rankings()) {
    for (const auto &r : rankings) {
      const auto path = c.out / "rankings" / (r.class_label + ".json");
      write_file_atomic(path, dump_stable(json(r)));
      out << path.string() << "\n";
      ++written;
    }
  }
  err << "ranked " << written << " classes\n";
  return kExitOk;
}

int cmd_pack(const RunConfig &c, std::ostream &out, std::ostream &) {
  const auto w = open_workspace(c);
  const auto sizer = make_cached_sizer(w.manifest, *w.backend);
  const int q_max = w.backend->quality_range().max;
  json doc = {{"budget", w.budget}, {"phases", json::array()}};
  out << "phase,quality,n_q_mb,bytes_used,compression_rate\n";
  for (const auto &[phase, rankings] : w.rankings()) {
    const auto reference = pack_phase(rankings, phase, q_max, w.budget, sizer).combined.n_q_mb;
    json rows = json::array();
    for (int q : c.selector.candidates) {
      auto packed = pack_phase(rankings, phase, q, w.budget, sizer).combined;
      packed.set_reference(reference);
      out << phase << "," << q << "," << packed.n_q_mb << "," << packed.bytes_used << ","
          << (packed.compression_rate ? fmt_double(*packed.compression_rate) : std::string()) << "\n";
      rows.push_back(packed);
    }
    doc["phases"].push_back({{"phase", phase}, {"packings", std::move(rows)}});
  }
  write_file_atomic(c.out / "packing.json", dump_stable(doc));
  return kExitOk;
}

int cmd_volumes(const RunConfig &c, std::ostream &out, std::ostream &) {
  const auto w = open_workspace(c);
  const auto family = load_family(c, w);
  const auto sizer = make_cached_sizer(w.manifest, *w.backend);
  json doc = json::array();
  out << "phase,quality,n,ratio\n";
  for (const auto &[phase, rankings] : w.rankings()) {
    const auto reports = evaluate_candidates(rankings, phase, family, c.selector, w.budget, sizer,
                                             w.backend->quality_range().max);
    json rows = json::array();
    for (const auto &r : reports) {
      out << phase << "," << r.quality << "," << r.volume.n << "," << fmt_double(r.ratio) << "\n";
      rows.push_back(r.volume);
    }
    doc.push_back({{"phase", phase}, {"volumes", std::move(rows)}});
  }
  write_file_atomic(c.out / "volumes.json", dump_stable(doc));
  return kExitOk;
}

int cmd_select(const RunConfig &c, const Flags &f, std::ostream &out, std::ostream &err) {
  const auto w = open_workspace(c);
  const auto decision = run_selection(c, w);
  const fs::path report = f.report.empty() ? c.out / "decision.json" : fs::path(f.report);
  write_file_atomic(report, dump_stable(json(decision)));
  if (decision.fallback_used) err << "no candidate satisfied |R_q - 1| < " << c.selector.epsilon
                                  << "; falling back to the highest quality\n";
  out << decision.chosen_quality << "\n";
  return kExitOk;
}

int cmd_build_buffer(const RunConfig &c, const Flags &f, std::ostream &out, std::ostream &err) {
  const auto w = open_workspace(c, true);
  int q = f.quality;
  if (q == 0) {
    q = run_selection(c, w).chosen_quality;
    err << "selected quality " << q << "\n";
  }
  const fs::path dir = f.buffer.empty() ? c.out / "buffer" : fs::path(f.buffer);
  const auto m = build_buffer(q, w.manifest, w.rankings(), *w.backend, w.budget, dir);
  load_buffer(dir / "manifest.json");
  err << "stored " << m.entries.size() << " samples, " << m.total_bytes() << " bytes\n";
  out << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_shrink(const RunConfig &c, const Flags &f, std::ostream &out, std::ostream &err) {
  const fs::path manifest_path = f.buffer.empty() ? c.out / "buffer" / "manifest.json" : fs::path(f.buffer);
  const auto m = load_buffer(manifest_path);
  const auto result = shrink_buffer(m, f.keep);
  save_buffer_manifest(result.manifest, manifest_path);
  for (const auto &e : result.dropped) {
    std::error_code ec;
    fs::remove(manifest_path.parent_path() / e.path, ec);
  }
  for (const auto &label : result.clamped_classes)
    err << "class '" << label << "' holds fewer than " << f.keep << " samples; left unchanged\n";
  out << fmt_double(result.stored_fraction) << "\n";
  return kExitOk;
}

void write_table(const fs::path &csv_path, const std::string &csv, const fs::path &json_path, const json &summary) {
  write_file_atomic(csv_path, csv);
  write_file_atomic(json_path, dump_stable(summary));
}

int cmd_simulate(const RunConfig &c, const Flags &f, std::ostream &out, std::ostream &err) {
  c.selector.validate();
  const auto data = generate_synthetic(c.synthetic, c.selector.candidates);
  const auto budget = synthetic_budget(data);
  const auto sizer = synthetic_sizer(data);
  const auto decision = select_for_benchmark(data.manifest, data.features, data.train_ids, c.selector, budget, sizer);
  const int q = f.quality ? f.quality : decision.chosen_quality;
  if (!data.features.by_quality.count(q)) throw ValidationError("quality " + std::to_string(q) + " not generated");

  std::vector<ReplayBuffer> buffers;
  if (!f.no_replay) buffers = plan_buffers(data.manifest, data.features, data.train_ids, q, budget, sizer);
  const auto metrics = run_continual(data.manifest, data.features, data.train_ids, data.test_ids, buffers);

  std::size_t stored = 0;
  for (const auto &b : buffers) stored += b.size();
  const double n_per_class =
      static_cast<double>(stored) / static_cast<double>(data.config.phases * data.config.classes_per_phase);
  double ratio = 1.0;
  for (const auto &r : decision.reports)
    if (r.quality == q) ratio = r.ratio;

  std::ostringstream csv;
  csv << "quality,n_per_class,ratio,aic,forgetting\n"
      << q << "," << fmt_double(n_per_class, 2) << "," << fmt_double(ratio) << "," << fmt_double(metrics.aic) << ","
      << fmt_double(metrics.averaged_forgetting) << "\n";
  json summary = {{"quality", q},
                  {"selected_quality", decision.chosen_quality},
                  {"replay", !f.no_replay},
                  {"seed", c.synthetic.seed},
                  {"aic", metrics.aic},
                  {"averaged_forgetting", metrics.averaged_forgetting},
                  {"per_phase_accuracy", metrics.per_phase_accuracy},
                  {"n_per_class", n_per_class},
                  {"ratio", ratio}};
  write_table(c.out / "simulate.csv", csv.str(), c.out / "simulate.json", summary);
  err << "aic " << fmt_double(metrics.aic, 4) << " at quality " << q << (f.no_replay ? " (no replay)" : "") << "\n";
  out << csv.str();
  return kExitOk;
}

int cmd_grid(const RunConfig &c, std::ostream &out, std::ostream &err) {
  c.selector.validate();
  using clock = std::chrono::steady_clock;
  const auto data = generate_synthetic(c.synthetic, c.selector.candidates);
  const auto budget = synthetic_budget(data);
  const auto sizer = synthetic_sizer(data);

  const auto t0 = clock::now();
  const auto decision = select_for_benchmark(data.manifest, data.features, data.train_ids, c.selector, budget, sizer);
  const auto t1 = clock::now();
  const auto grid = grid_search(data.manifest, data.features, data.train_ids, data.test_ids, c.selector.candidates,
                                budget, sizer);
  const auto t2 = clock::now();
  const double select_s = std::chrono::duration<double>(t1 - t0).count();
  const double grid_s = std::chrono::duration<double>(t2 - t1).count();

  std::ostringstream csv;
  csv << "quality,n_per_class,ratio,aic,forgetting\n";
  json rows = json::array();
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    const auto &row = grid.rows[i];
    const double ratio = decision.reports[i].ratio;
    csv << row.quality << "," << fmt_double(row.n_per_class, 2) << "," << fmt_double(ratio) << ","
        << fmt_double(row.aic) << "," << fmt_double(row.forgetting) << "\n";
    rows.push_back({{"quality", row.quality},
                    {"n_per_class", row.n_per_class},
                    {"ratio", ratio},
                    {"aic", row.aic},
                    {"forgetting", row.forgetting}});
  }
  // wall-clock times stay on stderr so the JSON summary is reproducible
  json summary = {{"best_quality", grid.best_quality},
                  {"selected_quality", decision.chosen_quality},
                  {"seed", c.synthetic.seed},
                  {"rows", std::move(rows)}};
  write_table(c.out / "grid.csv", csv.str(), c.out / "grid.json", summary);
  err << "grid best " << grid.best_quality << ", selector " << decision.chosen_quality << "; selector "
      << fmt_double(select_s, 3) << " s, grid " << fmt_double(grid_s, 3) << " s\n";
  out << csv.str();
  return kExitOk;
}

int cmd_synth(const RunConfig &c, std::ostream &out, std::ostream &) {
  c.selector.validate();
  const auto data = generate_synthetic(c.synthetic, c.selector.candidates);
  save_synthetic(data, c.out);
  json cfg = {{"manifest", "manifest.json"},
              {"features_dir", "features"},
              {"split", "split.json"},
              {"backend", "synthetic"},
              {"qualities", c.selector.candidates},
              {"epsilon", c.selector.epsilon},
              {"budget_k", data.config.budget_k},
              {"budget_scope", "class"},
              {"seed", data.config.seed}};
  write_file_atomic(c.out / "config.json", dump_stable(cfg));
  out << (c.out / "config.json").string() << "\n";
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Quality selection for compressed replay buffers"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--seed", f.seed, "Random seed");
  app.add_option("--epsilon", f.epsilon, "Feasibility threshold on |R_q - 1|");
  app.add_option("--qualities", f.qualities, "Comma-separated candidate qualities");
  app.add_option("--budget-k", f.budget_k, "Budget in equivalent original samples");
  app.add_option("--budget-scope", f.budget_scope, "class or phase")->check(CLI::IsMember({"class", "phase"}));
  app.add_option("--backend", f.backend, "jpeg, synthetic or identity")
      ->check(CLI::IsMember({"jpeg", "synthetic", "identity"}));
  app.add_option("--manifest", f.manifest, "Dataset manifest JSON");
  app.add_option("--features-dir", f.features_dir, "Directory with original.fmx and q<q>.fmx");
  app.add_option("--split", f.split, "JSON with a \"train\" id list");

  auto *rank = app.add_subcommand("rank", "Rank each class by distance to its feature mean");
  auto *pack = app.add_subcommand("pack", "Quantity packed per candidate quality");
  auto *volumes = app.add_subcommand("volumes", "Feature volume ratios per phase and quality");
  auto *select = app.add_subcommand("select", "Choose the compression quality");
  select->add_option("--report", f.report, "Where to write the decision JSON");
  auto *build = app.add_subcommand("build-buffer", "Write the compressed replay buffer");
  build->add_option("--quality", f.quality, "Use this quality instead of selecting one");
  build->add_option("--buffer", f.buffer, "Buffer directory (default <out>/buffer)");
  auto *shrink = app.add_subcommand("shrink", "Keep the best-ranked samples of each class");
  shrink->add_option("--buffer", f.buffer, "Buffer manifest path (default <out>/buffer/manifest.json)");
  shrink->add_option("--keep", f.keep, "Samples kept per class")->required();
  auto *simulate = app.add_subcommand("simulate", "Continual run on the synthetic benchmark");
  simulate->add_option("--quality", f.quality, "Replay at this quality instead of the selected one");
  simulate->add_flag("--no-replay", f.no_replay, "Store nothing between phases");
  auto *grid = app.add_subcommand("grid", "Grid search over candidate qualities on the synthetic benchmark");
  auto *synth = app.add_subcommand("synth", "Write the synthetic benchmark to disk");
  for (auto *sub : {simulate, grid, synth}) {
    sub->add_option("--noise-scale", f.noise_scale);
    sub->add_option("--noise-exponent", f.noise_exponent);
    sub->add_option("--cluster-spread", f.cluster_spread);
    sub->add_option("--within-class-sd", f.within_class_sd);
    sub->add_option("--dim", f.dim);
    sub->add_option("--phases", f.phases);
    sub->add_option("--classes-per-phase", f.classes_per_phase);
    sub->add_option("--samples-per-class", f.samples_per_class);
  }

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const CLI::App *sub = app.get_subcommands().front();
    const auto c = load_config(app, *sub, f);
    if (sub == rank) return cmd_rank(c, out, err);
    if (sub == pack) return cmd_pack(c, out, err);
    if (sub == volumes) return cmd_volumes(c, out, err);
    if (sub == select) return cmd_select(c, f, out, err);
    if (sub == build) return cmd_build_buffer(c, f, out, err);
    if (sub == shrink) return cmd_shrink(c, f, out, err);
    if (sub == simulate) return cmd_simulate(c, f, out, err);
    if (sub == grid) return cmd_grid(c, out, err);
    if (sub == synth) return cmd_synth(c, out, err);
  } catch (const IoError &e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error &e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

} // namespace replayq
