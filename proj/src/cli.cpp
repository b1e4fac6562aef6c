#include "cape/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cape/backend.hpp"
#include "cape/error.hpp"
#include "cape/hash.hpp"
#include "cape/metrics.hpp"
#include "cape/plot.hpp"
#include "cape/presets.hpp"
#include "cape/prompt.hpp"
#include "cape/scoring.hpp"
#include "cape/session.hpp"
#include "cape/stats.hpp"

#ifndef CAPE_DEFAULT_DATA_DIR
#define CAPE_DEFAULT_DATA_DIR ""
#endif

namespace cape::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << content;
    if (!f) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// manifest.json in an output directory: every artifact with its SHA-256.
// Entries already present from earlier commands are kept.
class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {}

  void add(const fs::path& artifact) { files_.insert(fs::relative(artifact, dir_).generic_string()); }

  void write(const std::string& command) const {
    const fs::path path = dir_ / "manifest.json";
    json doc = {{"schema_version", 1}, {"artifacts", json::object()}};
    if (fs::exists(path)) {
      try {
        doc = json::parse(read_file(path));
      } catch (const json::exception&) {
        // A corrupt manifest is rebuilt from this command's artifacts.
      }
    }
    for (const auto& f : files_) {
      doc["artifacts"][f] = {{"sha256", sha256_hex(read_file(dir_ / f))}, {"command", command}};
    }
    write_file(path, doc.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::set<std::string> files_;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

// Inventory given on the command line, or the bundled file whose name matches.
// `path` may also name a bundled inventory, e.g. "MPI-120".
std::shared_ptr<const Inventory> resolve_inventory(const std::string& path, std::string name) {
  if (!path.empty() && fs::exists(path)) return std::make_shared<const Inventory>(load_inventory(path));
  if (!path.empty()) name = path;
  const fs::path dir = fs::path(CAPE_DEFAULT_DATA_DIR) / "inventories";
  if (!name.empty() && fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() != ".json") continue;
      auto inv = load_inventory(e.path());
      if (inv.name() == name) return std::make_shared<const Inventory>(std::move(inv));
    }
  }
  if (!path.empty()) throw IoError("cannot open inventory " + path);
  throw InvalidArgument("no inventory given and none bundled under the name '" + name + "'; pass --inventory");
}

std::vector<Transcript> transcripts_in(const fs::path& dir) {
  auto ts = read_transcripts(dir);
  if (ts.empty()) throw InvalidArgument("no transcripts in " + dir.string());
  return ts;
}

std::optional<ScoringTrajectory> try_trajectory(const Transcript& t) {
  try {
    return trajectory_from_transcript(t);
  } catch (const InvalidTranscript&) {
    return std::nullopt;
  }
}

json ocean_json(const OceanScore& s) {
  json j = json::object();
  for (Trait t : kAllTraits) j[std::string(1, trait_letter(t))] = s[t];
  return j;
}

int parse_option(const std::string& text) {
  if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'E') return text[0] - 'A';
  if (text.size() == 1 && text[0] >= 'a' && text[0] <= 'e') return text[0] - 'a';
  if (text.size() == 1 && text[0] >= '0' && text[0] <= '4') return text[0] - '0';
  throw InvalidArgument("option must be a letter A-E or an index 0-4, got '" + text + "'");
}

std::set<Trait> parse_mask(const std::vector<std::string>& items) {
  std::set<Trait> mask;
  for (const auto& raw : items) {
    std::stringstream ss(raw);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      auto t = trait_from_letter(tok);
      if (!t) throw InvalidArgument("unknown trait in mask: '" + tok + "'");
      mask.insert(*t);
    }
  }
  return mask;
}

// Files matching a pattern whose last component may contain * and ?.
std::vector<fs::path> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const std::string name = p.filename().string();
  if (name.find_first_of("*?") == std::string::npos) {
    if (!fs::exists(p)) throw IoError("no such file: " + pattern);
    return {p};
  }
  std::string rx;
  for (char c : name) {
    if (c == '*') rx += ".*";
    else if (c == '?') rx += ".";
    else if (std::isalnum(static_cast<unsigned char>(c))) rx += c;
    else rx += std::string("\\") + c;
  }
  const std::regex re(rx);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  std::vector<fs::path> out;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && std::regex_match(e.path().filename().string(), re)) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no files match " + pattern);
  return out;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string inventory;
  std::string backend;
  std::string variant = "default";
  std::string variants_file;
  std::string mode = "context-free";
  std::string factor = "stability";
  int runs = 3;
  std::uint64_t seed = 0;
  std::string ordering = "canonical";
  std::string out;
  std::string paraphrases;
  std::string persona;
  std::optional<double> temperature;
  int max_tokens = 16;
  bool record = false;
  std::string force_option = "C";
  std::vector<int> fewshot = {1, 5, 10, 20};
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--inventory", a.inventory, "Inventory JSON file or bundled name (MPI-120, toy-10)")->required();
  cmd->add_option("--backend", a.backend, "Backend spec, e.g. constant:A or replay:DIR")->required();
  cmd->add_option("--variant", a.variant, "Prompt variant id")->capture_default_str();
  cmd->add_option("--variants", a.variants_file, "Variant bundle JSON (default: built-in)");
  cmd->add_option("--mode", a.mode, "context-free | context-dependent | few-shot:K")->capture_default_str();
  cmd->add_option("--runs", a.runs, "Replicate runs per level for non-factor presets")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  cmd->add_option("--ordering", a.ordering, "canonical | random:SEED | trait-grouped | cyclic-rotation")
      ->capture_default_str();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--paraphrases", a.paraphrases, "Paraphrase JSON file");
  cmd->add_option("--persona", a.persona, "System prompt prepended to every request");
  cmd->add_option("--temperature", a.temperature, "Sampling temperature");
  cmd->add_option("--max-tokens", a.max_tokens, "Reply token limit")->capture_default_str();
  cmd->add_flag("--record", a.record, "Record cassettes for scripted backends (always on for http)");
}

int do_run(const RunArgs& a, const std::string& preset_name, int jobs, bool deterministic, std::ostream& out) {
  auto inv = resolve_inventory(a.inventory, {});
  const VariantBundle bundle = a.variants_file.empty() ? VariantBundle::builtin() : VariantBundle::load(a.variants_file);
  const BackendSpec spec = parse_backend_spec(a.backend);
  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);

  SessionConfig base;
  base.inventory = inv;
  base.variant = bundle.get(a.variant);
  base.backend = make_backend(spec, inv.get());
  base.history = HistoryMode::parse(a.mode);
  base.ordering = Ordering::parse(a.ordering);
  if (!a.persona.empty()) base.persona = a.persona;
  if (a.temperature) base.params.temperature = *a.temperature;
  base.params.max_tokens = a.max_tokens;
  if (!a.paraphrases.empty()) {
    base.paraphrases = std::make_shared<const ParaphraseSet>(load_paraphrases(a.paraphrases, *inv));
  }
  base.deterministic = deterministic;
  base.out_dir = out_dir;

  PresetOptions popts;
  popts.runs = a.runs;
  popts.fewshot = a.fewshot;
  popts.force_option = parse_option(a.force_option);
  popts.ordering_seed = a.seed;
  const ExperimentPreset preset = expand_preset(preset_name, popts);
  const auto configs = apply_preset(preset, base, bundle);

  const bool record = spec.kind == BackendSpec::Kind::kHttpChat ||
                      (a.record && spec.kind != BackendSpec::Kind::kReplay);
  Manifest manifest(out_dir);
  std::vector<Transcript> all;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    BatchOptions opts;
    opts.runs_per_config = preset.levels[i].runs;
    opts.jobs = jobs;
    opts.master_seed = a.seed;
    if (record) {
      opts.prepare = [&](SessionConfig& c) {
        const fs::path cassette = out_dir / (c.run_id + ".cassette.jsonl");
        fs::remove(cassette);
        auto writer = std::make_shared<CassetteWriter>(cassette, deterministic);
        c.backend = std::make_shared<RecordingBackend>(c.backend, writer);
      };
    }
    const std::array<SessionConfig, 1> one = {configs[i]};
    auto ts = run_batch(one, opts);
    for (auto& t : ts) all.push_back(std::move(t));
  }

  write_file(out_dir / "preset.json", json({{"preset", preset.to_json()}, {"master_seed", a.seed}}).dump(2) + "\n");
  manifest.add(out_dir / "preset.json");
  std::size_t invalid = 0;
  for (const auto& t : all) {
    manifest.add(out_dir / (t.run_id + ".jsonl"));
    if (record && fs::exists(out_dir / (t.run_id + ".cassette.jsonl"))) {
      manifest.add(out_dir / (t.run_id + ".cassette.jsonl"));
    }
    out << t.run_id << " entries=" << t.entries.size() << " invalid=" << (t.invalid ? "true" : "false") << "\n";
    if (t.invalid) ++invalid;
  }
  manifest.write(preset_name == "adversarial" ? "attack" : "run");
  if (invalid > 0) {
    throw Error("invalid_run", std::to_string(invalid) + " of " + std::to_string(all.size()) +
                                   " runs are marked invalid; see their transcripts");
  }
  return 0;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string runs;
  std::string out;
  std::string inventory;
  std::string free;
  std::vector<std::string> pairs;
};

fs::path sibling(const fs::path& file, const std::string& name) {
  return file.has_parent_path() ? file.parent_path() / name : fs::path(name);
}

fs::path out_dir_of(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

std::string inventory_name(const std::vector<Transcript>& ts) {
  return ts.front().config.value("inventory", std::string{});
}

int do_score(const ScoreArgs& a, std::ostream& out) {
  const auto ts = transcripts_in(a.runs);
  const auto inv = resolve_inventory(a.inventory, inventory_name(ts));
  const fs::path out_file(a.out);
  Manifest manifest(out_dir_of(out_file));

  json runs = json::array();
  std::string traj_csv = "run_id,position,item_id,score\n";
  std::string ocean_csv = "run_id,O,C,E,A,N\n";
  std::vector<ScoringTrajectory> valid;
  for (const auto& t : ts) {
    json r = {{"run_id", t.run_id},
              {"factor", t.config.value("factor", "")},
              {"level", t.config.value("level", "")},
              {"history_mode", t.config.value("history_mode", "")},
              {"invalid", t.invalid}};
    auto traj = try_trajectory(t);
    if (traj) {
      const auto ocean = ocean_score(*traj, *inv);
      r["scores"] = traj->scores;
      r["item_ids"] = traj->item_ids;
      r["ocean"] = ocean_json(ocean);
      for (std::size_t k = 0; k < traj->size(); ++k) {
        traj_csv += t.run_id + "," + std::to_string(k + 1) + "," + traj->item_ids[k] + "," +
                    std::to_string(traj->scores[k]) + "\n";
      }
      ocean_csv += t.run_id;
      for (Trait tr : kAllTraits) ocean_csv += "," + format_number(ocean[tr]);
      ocean_csv += "\n";
      valid.push_back(std::move(*traj));
    } else {
      r["invalid"] = true;
    }
    runs.push_back(std::move(r));
  }
  write_file(out_file, json({{"schema_version", 1}, {"inventory", inv->name()}, {"runs", runs}}).dump(2) + "\n");
  manifest.add(out_file);
  write_file(sibling(out_file, "trajectories.csv"), traj_csv);
  manifest.add(sibling(out_file, "trajectories.csv"));
  write_file(sibling(out_file, "ocean.csv"), ocean_csv);
  manifest.add(sibling(out_file, "ocean.csv"));

  if (!a.free.empty()) {
    // The i-th dependent run is compared with the i-th free run.
    const auto free_ts = transcripts_in(a.free);
    std::string csv = "dependent_run,free_run,bucket,count\n";
    const std::size_t n = std::min(ts.size(), free_ts.size());
    for (std::size_t i = 0; i < n; ++i) {
      auto d = try_trajectory(ts[i]);
      auto f = try_trajectory(free_ts[i]);
      if (!d || !f) continue;
      const auto h = diff_histogram(*d, *f);
      for (int b = -4; b <= 4; ++b) {
        const auto it = h.buckets.find(b);
        csv += d->run_id + "," + f->run_id + "," + std::to_string(b) + "," +
               std::to_string(it == h.buckets.end() ? 0 : it->second) + "\n";
      }
    }
    write_file(sibling(out_file, "diff_histogram.csv"), csv);
    manifest.add(sibling(out_file, "diff_histogram.csv"));
  }

  if (!a.pairs.empty()) {
    std::string csv = "run_id,kind,accurate,total,accuracy\n";
    for (const auto& pf : a.pairs) {
      const auto pairs = load_pairs(pf, *inv);
      for (const auto& traj : valid) {
        const auto acc = logical_consistency(pairs, traj);
        csv += traj.run_id + "," + std::string(pair_kind_name(acc.kind)) + "," + std::to_string(acc.accurate) + "," +
               std::to_string(acc.total) + "," + format_number(acc.accuracy()) + "\n";
      }
    }
    write_file(sibling(out_file, "pairs.csv"), csv);
    manifest.add(sibling(out_file, "pairs.csv"));
  }
  manifest.write("score");
  out << "scored " << valid.size() << " of " << ts.size() << " runs\n";
  return 0;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string runs;
  std::string out;
  std::string inventory;
  std::string factor;
};

json group_settings(const std::vector<const Transcript*>& members) {
  const json& c = members.front()->config;
  std::set<std::string> levels, variants;
  for (const auto* t : members) {
    levels.insert(t->config.value("level", ""));
    variants.insert(t->config.value("variant", ""));
  }
  return {{"history_mode", c.value("history_mode", "")},
          {"backend", c.value("backend", "")},
          {"model", c.value("model", "")},
          {"inventory", c.value("inventory", "")},
          {"ordering", c.value("ordering", "")},
          {"levels", levels},
          {"variants", variants},
          {"preset_version", kPresetVersion}};
}

int do_metrics(const MetricsArgs& a, std::ostream& out, std::ostream& err) {
  const auto ts = transcripts_in(a.runs);
  const auto inv = resolve_inventory(a.inventory, inventory_name(ts));
  std::map<std::string, std::vector<const Transcript*>> groups;
  for (const auto& t : ts) {
    if (!a.factor.empty() && t.config.value("factor", "") != a.factor) continue;
    groups[report_group(t.config)].push_back(&t);
  }
  std::vector<ConsistencyReport> reports;
  for (const auto& [key, members] : groups) {
    std::vector<ScoringTrajectory> trajs;
    bool invalid = false;
    for (const auto* t : members) {
      auto traj = try_trajectory(*t);
      if (traj) trajs.push_back(std::move(*traj));
      else invalid = true;
    }
    if (trajs.size() < 2) {
      err << "warning: group " << key << " has fewer than two valid runs; skipped\n";
      continue;
    }
    auto r = consistency_report(trajs, *inv, members.front()->config.value("factor", ""), group_settings(members));
    r.invalid = invalid;
    reports.push_back(std::move(r));
  }
  if (reports.empty()) throw InvalidArgument("no group with at least two valid runs");

  const fs::path out_file(a.out);
  Manifest manifest(out_dir_of(out_file));
  json doc;
  if (reports.size() == 1) {
    doc = reports.front().to_json();
  } else {
    doc = json::array();
    for (const auto& r : reports) doc.push_back(r.to_json());
  }
  write_file(out_file, doc.dump(2) + "\n");
  manifest.add(out_file);
  std::string csv = ConsistencyReport::csv_header() + "\n";
  for (const auto& r : reports) csv += r.csv_row() + "\n";
  fs::path csv_file = out_file;
  csv_file.replace_extension(".csv");
  write_file(csv_file, csv);
  manifest.add(csv_file);
  manifest.write("metrics");
  for (const auto& r : reports) {
    out << r.factor << " " << r.settings.value("history_mode", "") << " TAR=" << format_number(r.tar, 2)
        << " ED=" << format_number(r.ed, 2) << " TC=" << format_number(r.tc, 2) << " OC=" << format_number(r.oc, 2)
        << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::vector<std::string> reports;
  std::string out;
  std::string runs;
};

std::vector<ConsistencyReport> load_reports(const std::vector<std::string>& patterns) {
  std::vector<ConsistencyReport> out;
  for (const auto& pat : patterns) {
    for (const auto& f : expand_glob(pat)) {
      // A glob over an output directory also matches its manifest.
      if (f.filename() == "manifest.json") continue;
      json doc;
      try {
        doc = json::parse(read_file(f));
      } catch (const json::exception& e) {
        throw SchemaError(f.string() + ": " + e.what());
      }
      if (doc.is_array()) {
        for (const auto& r : doc) out.push_back(ConsistencyReport::from_json(r));
      } else {
        out.push_back(ConsistencyReport::from_json(doc));
      }
    }
  }
  return out;
}

template <class Fn>
json guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return {{"error", e.code()}, {"message", e.what()}};
  }
}

int do_stats(const StatsArgs& a, std::ostream& out) {
  const auto reports = load_reports(a.reports);
  const std::vector<std::pair<std::string, double ConsistencyReport::*>> metrics = {
      {"tar", &ConsistencyReport::tar}, {"ed", &ConsistencyReport::ed},
      {"tc", &ConsistencyReport::tc},   {"oc", &ConsistencyReport::oc}};
  auto column = [&](double ConsistencyReport::*m, const std::vector<const ConsistencyReport*>& rs) {
    std::vector<double> v;
    for (const auto* r : rs) v.push_back(r->*m);
    return v;
  };
  std::vector<const ConsistencyReport*> all;
  for (const auto& r : reports) all.push_back(&r);

  json correlations = json::object();
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    for (std::size_t j = i + 1; j < metrics.size(); ++j) {
      const auto x = column(metrics[i].second, all), y = column(metrics[j].second, all);
      correlations[metrics[i].first + "~" + metrics[j].first] = {
          {"pearson", guarded([&] { return stats::pearson(x, y).to_json(); })},
          {"spearman", guarded([&] { return stats::spearman(x, y).to_json(); })}};
    }
  }

  // Context-dependent vs context-free reports, matched on factor and level.
  std::map<std::string, const ConsistencyReport*> dep, fre;
  for (const auto& r : reports) {
    const std::string mode = r.settings.value("history_mode", "");
    const std::string key = r.factor + "|" + r.settings.value("levels", json::array()).dump();
    if (mode == "context-dependent") dep[key] = &r;
    if (mode == "context-free") fre[key] = &r;
  }
  std::vector<const ConsistencyReport*> dep_rs, free_rs;
  for (const auto& [key, r] : dep) {
    if (auto it = fre.find(key); it != fre.end()) {
      dep_rs.push_back(r);
      free_rs.push_back(it->second);
    }
  }
  json conditions = json::object();
  conditions["matched_pairs"] = dep_rs.size();
  for (const auto& [name, m] : metrics) {
    const auto d = column(m, dep_rs), f = column(m, free_rs);
    conditions[name] = guarded([&] { return stats::condition_tests(d, f).to_json(); });
  }

  json reliability = json::object();
  if (!a.runs.empty()) {
    std::map<std::string, std::vector<ScoringTrajectory>> groups;
    for (const auto& t : transcripts_in(a.runs)) {
      if (auto traj = try_trajectory(t)) groups[report_group(t.config)].push_back(std::move(*traj));
    }
    for (const auto& [key, trajs] : groups) {
      reliability[key] = guarded([&]() -> json {
        if (trajs.size() < 2) throw InvalidArgument("need at least two runs");
        // Rows are items (by id), columns are runs.
        std::map<std::string, std::vector<double>> rows;
        for (const auto& tr : trajs) {
          for (std::size_t k = 0; k < tr.size(); ++k) rows[tr.item_ids[k]].push_back(tr.scores[k]);
        }
        stats::SampleMatrix m;
        for (auto& [id, row] : rows) {
          if (row.size() == trajs.size()) m.push_back(std::move(row));
        }
        return {{"runs", trajs.size()},
                {"cronbach_alpha", guarded([&] { return json(stats::cronbach_alpha(m)); })},
                {"test_retest", guarded([&] { return json(stats::test_retest(m)); })}};
      });
    }
  }

  const fs::path out_file(a.out);
  Manifest manifest(out_dir_of(out_file));
  const json doc = {{"schema_version", 1},
                    {"reports", reports.size()},
                    {"correlations", correlations},
                    {"condition_tests", conditions},
                    {"reliability", reliability}};
  write_file(out_file, doc.dump(2) + "\n");
  manifest.add(out_file);
  manifest.write("stats");
  out << "stats over " << reports.size() << " reports written to " << out_file.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
  std::string kind;
  std::string runs;
  std::string free;
  std::vector<std::string> series;
  std::string inventory;
  std::string out;
  int bin = 10;
  bool spline = false;
};

std::vector<std::pair<std::string, fs::path>> parse_series(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("--series expects NAME=DIR, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), fs::path(s.substr(eq + 1)));
  }
  return out;
}

OceanScore mean_ocean(const std::vector<Transcript>& ts, const Inventory& inv) {
  OceanScore acc;
  std::size_t n = 0;
  for (const auto& t : ts) {
    if (auto traj = try_trajectory(t)) {
      const auto s = ocean_score(*traj, inv);
      for (int i = 0; i < 5; ++i) acc.values[i] += s.values[i];
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("no valid runs to average");
  for (double& v : acc.values) v /= static_cast<double>(n);
  return acc;
}

int do_plot(const PlotArgs& a, bool deterministic, std::ostream& out) {
  const auto kind = plot::parse_plot_kind(a.kind);
  const auto series = parse_series(a.series);
  plot::PlotOutput result;
  switch (kind) {
    case plot::PlotKind::kTrajectoryLines: {
      std::vector<ScoringTrajectory> trajs;
      for (const auto& t : transcripts_in(a.runs)) {
        if (auto traj = try_trajectory(t)) trajs.push_back(std::move(*traj));
      }
      result = plot::trajectory_lines(trajs, deterministic);
      break;
    }
    case plot::PlotKind::kOceanBars: {
      std::vector<std::pair<std::string, OceanScore>> settings;
      if (!series.empty()) {
        for (const auto& [name, dir] : series) {
          const auto ts = transcripts_in(dir);
          const auto inv = resolve_inventory(a.inventory, inventory_name(ts));
          settings.emplace_back(name, mean_ocean(ts, *inv));
        }
      } else {
        const auto ts = transcripts_in(a.runs);
        const auto inv = resolve_inventory(a.inventory, inventory_name(ts));
        for (const auto& t : ts) {
          if (auto traj = try_trajectory(t)) settings.emplace_back(t.run_id, ocean_score(*traj, *inv));
        }
      }
      result = plot::ocean_bars(settings, deterministic);
      break;
    }
    case plot::PlotKind::kDiffDistribution: {
      if (a.free.empty()) throw InvalidArgument("diff-distribution needs --free DIR");
      const auto dep = transcripts_in(a.runs);
      const auto fre = transcripts_in(a.free);
      DiffHistogram total;
      for (std::size_t i = 0; i < std::min(dep.size(), fre.size()); ++i) {
        auto d = try_trajectory(dep[i]);
        auto f = try_trajectory(fre[i]);
        if (!d || !f) continue;
        for (const auto& [b, c] : diff_histogram(*d, *f).buckets) total.buckets[b] += c;
      }
      result = plot::diff_distribution(total, deterministic);
      break;
    }
    case plot::PlotKind::kOptionArea: {
      std::vector<std::pair<std::string, std::vector<Transcript>>> groups;
      if (!series.empty()) {
        for (const auto& [name, dir] : series) groups.emplace_back(name, transcripts_in(dir));
      } else {
        std::map<std::string, std::vector<Transcript>> by_level;
        for (auto& t : transcripts_in(a.runs)) by_level[t.config.value("level", "")].push_back(std::move(t));
        for (auto& [level, ts] : by_level) groups.emplace_back(level, std::move(ts));
      }
      result = plot::option_area(groups, a.bin, a.spline, deterministic);
      break;
    }
  }
  const fs::path dir(a.out);
  Manifest manifest(dir);
  const fs::path csv = dir / (a.kind + ".csv"), svg = dir / (a.kind + ".svg");
  write_file(csv, result.csv);
  write_file(svg, result.svg);
  manifest.add(csv);
  manifest.add(svg);
  manifest.write("plot");
  out << "wrote " << csv.string() << " and " << svg.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- align / pairs

struct AlignArgs {
  std::string human;
  std::string scores;
  std::vector<std::string> mask;
  std::string out;
};

// {"scale": "...", "scores": {"O": .., ...}}, or the output of `cape score`
// (mean of its valid runs on the 1-5 item scale).
ScaledOcean load_scaled_ocean(const fs::path& path) {
  const json doc = read_json_file(path);
  ScaledOcean s;
  auto read_vec = [&](const json& obj, OceanScore& dst) {
    for (Trait t : kAllTraits) {
      const std::string key(1, trait_letter(t));
      if (!obj.contains(key)) throw SchemaError(path.string() + ": missing trait " + key);
      dst[t] = obj.at(key).get<double>();
    }
  };
  try {
    if (doc.contains("runs")) {
      std::size_t n = 0;
      for (const auto& r : doc.at("runs")) {
        if (!r.contains("ocean")) continue;
        OceanScore v;
        read_vec(r.at("ocean"), v);
        for (int i = 0; i < 5; ++i) s.score.values[i] += v.values[i];
        ++n;
      }
      if (n == 0) throw SchemaError(path.string() + ": no scored runs");
      for (double& v : s.score.values) v /= static_cast<double>(n);
      s.scale = doc.value("scale", std::string("1-5"));
    } else {
      read_vec(doc.at("scores"), s.score);
      s.scale = doc.at("scale").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return s;
}

int do_align(const AlignArgs& a, std::ostream& out) {
  const auto human = load_scaled_ocean(a.human);
  const auto model = load_scaled_ocean(a.scores);
  const auto report = ocean_alignment(human, model, parse_mask(a.mask));
  const std::string text = report.to_json().dump(2) + "\n";
  if (!a.out.empty()) {
    const fs::path out_file(a.out);
    Manifest manifest(out_dir_of(out_file));
    write_file(out_file, text);
    manifest.add(out_file);
    manifest.write("align");
  }
  out << "OA=" << format_number(report.oa, 2) << " MAE=" << format_number(report.mae, 4) << "\n";
  return 0;
}

struct PairsArgs {
  std::string runs;
  std::vector<std::string> pairs;
  std::string inventory;
  std::string out;
};

int do_pairs(const PairsArgs& a, std::ostream& out) {
  const auto ts = transcripts_in(a.runs);
  const auto inv = resolve_inventory(a.inventory, inventory_name(ts));
  std::string csv = "run_id,kind,accurate,total,accuracy\n";
  for (const auto& pf : a.pairs) {
    const auto pairs = load_pairs(pf, *inv);
    for (const auto& t : ts) {
      auto traj = try_trajectory(t);
      if (!traj) continue;
      const auto acc = logical_consistency(pairs, *traj);
      csv += traj->run_id + "," + std::string(pair_kind_name(acc.kind)) + "," + std::to_string(acc.accurate) + "," +
             std::to_string(acc.total) + "," + format_number(acc.accuracy()) + "\n";
      out << traj->run_id << " " << pair_kind_name(acc.kind) << " " << acc.accurate << "/" << acc.total << "\n";
    }
  }
  const fs::path out_file(a.out);
  Manifest manifest(out_dir_of(out_file));
  write_file(out_file, csv);
  manifest.add(out_file);
  manifest.write("pairs");
  return 0;
}

}  // namespace

int run_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cape: personality consistency assessment for chat models", "cape"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file supplying defaults for any flag");
  bool deterministic = false;
  int jobs = 1;
  app.add_flag("--deterministic", deterministic, "Zero timestamps so outputs are byte-reproducible");
  app.add_option("--jobs", jobs, "Concurrent sessions")->check(CLI::PositiveNumber);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Administer an inventory under an experiment preset");
  add_run_options(run, run_args);
  run->add_option("--factor", run_args.factor, "Preset: " + [] {
    std::string s;
    for (const auto& n : preset_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }())->capture_default_str();
  run->add_option("--force-option", run_args.force_option, "Forced option for the adversarial preset");
  run->add_option("--fewshot", run_args.fewshot, "Window sizes for the fewshot-ablation preset")->delimiter(',');

  RunArgs attack_args;
  attack_args.mode = "context-dependent";
  auto* attack = app.add_subcommand("attack", "Adversarial history rewrite: baseline vs forced option");
  add_run_options(attack, attack_args);
  attack->add_option("--force-option", attack_args.force_option, "Option written into every prior reply")
      ->capture_default_str();

  RunArgs ablate_args;
  ablate_args.mode = "context-dependent";
  auto* ablate = app.add_subcommand("ablate", "Few-shot history window ablation");
  add_run_options(ablate, ablate_args);
  ablate->add_option("--fewshot", ablate_args.fewshot, "Comma-separated window sizes")->delimiter(',');

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Score transcripts into trajectories and OCEAN vectors");
  score->add_option("--runs", score_args.runs, "Transcript directory")->required();
  score->add_option("--out", score_args.out, "Output JSON file")->required();
  score->add_option("--inventory", score_args.inventory, "Inventory JSON (default: bundled by name)");
  score->add_option("--free", score_args.free, "Context-free transcripts for score-shift histograms");
  score->add_option("--pairs", score_args.pairs, "Pair files for logical-consistency accuracy");

  MetricsArgs metrics_args;
  auto* metrics = app.add_subcommand("metrics", "TAR, ED, TC and OC per run group");
  metrics->add_option("--runs", metrics_args.runs, "Transcript directory")->required();
  metrics->add_option("--out", metrics_args.out, "Report JSON file")->required();
  metrics->add_option("--inventory", metrics_args.inventory, "Inventory JSON (default: bundled by name)");
  metrics->add_option("--factor", metrics_args.factor, "Only runs of this factor");

  StatsArgs stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "Correlations, reliability and condition tests over reports");
  stats_cmd->add_option("--reports", stats_args.reports, "Report files or glob patterns")->required();
  stats_cmd->add_option("--out", stats_args.out, "Output JSON file")->required();
  stats_cmd->add_option("--runs", stats_args.runs, "Transcript directory for reliability");

  PlotArgs plot_args;
  auto* plot_cmd = app.add_subcommand("plot", "Emit CSV data and an SVG rendering");
  plot_cmd->add_option("--kind", plot_args.kind, "trajectory-lines | ocean-bars | diff-distribution | option-area")
      ->required();
  plot_cmd->add_option("--runs", plot_args.runs, "Transcript directory");
  plot_cmd->add_option("--free", plot_args.free, "Context-free transcripts (diff-distribution)");
  plot_cmd->add_option("--series", plot_args.series, "NAME=DIR transcript groups");
  plot_cmd->add_option("--inventory", plot_args.inventory, "Inventory JSON (default: bundled by name)");
  plot_cmd->add_option("--out", plot_args.out, "Output directory")->required();
  plot_cmd->add_option("--bin", plot_args.bin, "Positions per option-area bin")->capture_default_str();
  plot_cmd->add_flag("--spline", plot_args.spline, "Quadratic-spline smoothing of option shares");

  AlignArgs align_args;
  auto* align = app.add_subcommand("align", "OCEAN alignment (OA) and MAE against human scores");
  align->add_option("--human", align_args.human, "Human OCEAN JSON")->required();
  align->add_option("--scores", align_args.scores, "Model OCEAN JSON or `cape score` output")->required();
  align->add_option("--mask", align_args.mask, "Traits to exclude, e.g. N or N,A");
  align->add_option("--out", align_args.out, "Output JSON file");

  PairsArgs pairs_args;
  auto* pairs_cmd = app.add_subcommand("pairs", "Logical-consistency accuracy over item pairs");
  pairs_cmd->add_option("--runs", pairs_args.runs, "Transcript directory")->required();
  pairs_cmd->add_option("--pairs", pairs_args.pairs, "Pair JSON files")->required();
  pairs_cmd->add_option("--inventory", pairs_args.inventory, "Inventory JSON (default: bundled by name)");
  pairs_cmd->add_option("--out", pairs_args.out, "Output CSV file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "cape 0.1.0\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    err << "error code=usage message=" << json(one_line(e.what())).dump() << "\n";
    return 2;
  }

  try {
    if (run->parsed()) return do_run(run_args, run_args.factor, jobs, deterministic, out);
    if (attack->parsed()) return do_run(attack_args, "adversarial", jobs, deterministic, out);
    if (ablate->parsed()) return do_run(ablate_args, "fewshot-ablation", jobs, deterministic, out);
    if (score->parsed()) return do_score(score_args, out);
    if (metrics->parsed()) return do_metrics(metrics_args, out, err);
    if (stats_cmd->parsed()) return do_stats(stats_args, out);
    if (plot_cmd->parsed()) return do_plot(plot_args, deterministic, out);
    if (align->parsed()) return do_align(align_args, out);
    if (pairs_cmd->parsed()) return do_pairs(pairs_args, out);
  } catch (const Error& e) {
    err << "error code=" << e.code() << " message=" << json(one_line(e.what())).dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error code=internal message=" << json(one_line(e.what())).dump() << "\n";
    return 1;
  }
  return 2;
}

int run_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_main(args, std::cout, std::cerr);
}

}  // namespace cape::cli
