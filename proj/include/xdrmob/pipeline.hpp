#pragma once

// Pipeline stages behind the command-line tool. Each stage reads the
// artifacts of earlier stages from the output directory and writes its own.
//
//   synth     synth/{xdr.csv, catalog.csv, ground_truth.json}
//   ingest    ingest/{catalog.csv, provinces.csv, summary.json, <province>.xdr.csv}
//   features  features.csv, popularity.csv, flow.csv
//   profile   profiles.csv, importance.csv
//   encode    thresholds.csv, behaviors.csv, split.csv
//   train     model.txt
//   infer     infer.json, report_infer.csv
//   match     match.json, report_match.csv, report_hist.csv
//   eval      report.json, report_profiles.csv

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xdrmob/config.hpp"
#include "xdrmob/error.hpp"
#include "xdrmob/eval.hpp"
#include "xdrmob/features.hpp"
#include "xdrmob/ingest.hpp"
#include "xdrmob/markov.hpp"
#include "xdrmob/profiles.hpp"
#include "xdrmob/step.hpp"
#include "xdrmob/synthgen.hpp"

namespace xdrmob {

namespace fs = std::filesystem;

class StageLog {
 public:
  StageLog(std::ostream& os, std::string stage)
      : os_(os), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageLog() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    os_ << "[" << stage_ << "] done in " << dt.count() << " s\n";
  }

  template <class T>
  void count(std::string_view what, const T& n) {
    os_ << "[" << stage_ << "] " << what << ": " << n << '\n';
  }
  void note(std::string_view msg) { os_ << "[" << stage_ << "] " << msg << '\n'; }

 private:
  std::ostream& os_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

inline std::ifstream open_artifact(const fs::path& p) {
  if (!fs::exists(p)) throw InputError("missing artifact: " + p.string());
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  return in;
}

inline std::ofstream create_artifact(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + p.string());
  return out;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) {
  auto out = create_artifact(p);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& p) {
  auto in = open_artifact(p);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline void echo_config(const PipelineConfig& cfg, const std::string& stage) {
  auto out = create_artifact(fs::path(cfg.out) / ("config." + stage + ".txt"));
  write_config(out, cfg);
}

inline CellCatalog load_catalog(const fs::path& p) {
  auto in = open_artifact(p);
  return read_catalog(in);
}

// ---------------------------------------------------------------------------
// synth

inline void run_synth(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "synth");
  GeneratorSpec spec;
  spec.n_users = cfg.synth_users;
  spec.n_cells = cfg.synth_cells;
  spec.grid_extent_km = cfg.synth_extent_km;
  spec.coupling = cfg.synth_coupling;
  spec.full_fraction = cfg.synth_full_fraction;
  spec.n_provinces = cfg.synth_provinces;
  spec.seed = cfg.seed;
  const auto pop = generate(spec, resolve_threads(cfg.threads));
  const fs::path dir = fs::path(cfg.out) / "synth";
  {
    auto out = create_artifact(dir / "xdr.csv");
    write_xdr(out, pop.users, false);
  }
  {
    auto out = create_artifact(dir / "catalog.csv");
    write_catalog(out, pop.catalog);
  }
  {
    auto out = create_artifact(dir / "ground_truth.json");
    write_ground_truth(out, pop);
  }
  sl.count("users", pop.users.size());
  sl.count("cells", pop.catalog.size());
  sl.count("rows", pop.users.size() * static_cast<std::size_t>(kSlotsPerWeek));
  echo_config(cfg, "synth");
}

// ---------------------------------------------------------------------------
// ingest

inline void run_ingest(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "ingest");
  if (cfg.xdr.empty()) throw InputError("ingest needs --xdr");
  if (cfg.catalog.empty()) throw InputError("ingest needs --catalog");
  const auto catalog = load_catalog(cfg.catalog);
  auto in = open_artifact(cfg.xdr);
  auto parsed = parse_xdr(in, catalog);
  sl.count("records", parsed.records);
  sl.count("record errors", parsed.errors.size());
  for (std::size_t i = 0; i < parsed.errors.size() && i < 5; ++i)
    sl.note("line " + std::to_string(parsed.errors[i].line) + ": " + parsed.errors[i].message);
  sl.count("duplicate slots", parsed.duplicate_slots);
  const auto dropped = parsed.dropped_zero_volume_cells;
  const auto errors = parsed.errors.size();
  const auto records = parsed.records;
  auto data = preprocess(std::move(parsed), catalog, cfg.max_missing_rate);
  const auto& s = data.summary;
  sl.count("users parsed", s.users_parsed);
  sl.count("users accepted", s.accepted);
  sl.count("users rejected (missing locations)", s.rejected_missing);

  const fs::path dir = fs::path(cfg.out) / "ingest";
  fs::create_directories(dir);
  {
    auto out = create_artifact(dir / "catalog.csv");
    write_catalog(out, catalog);
  }
  std::map<std::string, std::string> stems;
  auto provinces = create_artifact(dir / "provinces.csv");
  provinces << "province,file,users,full_sequence\n";
  for (const auto& [province, users] : data.provinces) {
    const std::string stem = province_file_stem(province);
    if (!stems.emplace(stem, province).second)
      throw InputError("provinces '" + stems[stem] + "' and '" + province + "' map to the same file name");
    const std::string file = stem + ".xdr.csv";
    auto out = create_artifact(dir / file);
    write_xdr(out, users, true);
    std::size_t full = 0;
    for (const auto& u : users) full += u.full_sequence;
    provinces << province << ',' << file << ',' << users.size() << ',' << full << '\n';
  }
  write_json(dir / "summary.json", {{"records", records},
                                    {"record_errors", errors},
                                    {"dropped_zero_volume_cells", dropped},
                                    {"users_parsed", s.users_parsed},
                                    {"users_without_location", s.no_location},
                                    {"users_rejected_missing", s.rejected_missing},
                                    {"users_rejected_unimputable", s.rejected_unimputable},
                                    {"users_accepted", s.accepted},
                                    {"users_full_sequence", s.full_sequence},
                                    {"imputed_events", s.imputed_events},
                                    {"provinces", data.provinces.size()}});
  echo_config(cfg, "ingest");
}

struct ProvinceEntry {
  std::string province;
  std::string file;
  std::size_t users = 0;
};

/// The configured province, or the one with the most users (ties: smallest name).
inline ProvinceEntry resolve_province(const PipelineConfig& cfg) {
  auto in = open_artifact(fs::path(cfg.out) / "ingest" / "provinces.csv");
  text::expect_header(in, "province,file,users,full_sequence", "provinces.csv");
  std::vector<ProvinceEntry> all;
  std::string line;
  while (text::read_line(in, line)) {
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 4) throw InputError("provinces.csv: expected 4 fields");
    all.push_back({std::string(f[0]), std::string(f[1]), text::require_int<std::size_t>(f[2], "users")});
  }
  if (all.empty()) throw InputError("ingest produced no province datasets");
  if (!cfg.province.empty()) {
    for (const auto& p : all)
      if (p.province == cfg.province) return p;
    throw InputError("province '" + cfg.province + "' not found in ingest output");
  }
  const ProvinceEntry* best = &all.front();
  for (const auto& p : all)
    if (p.users > best->users || (p.users == best->users && p.province < best->province)) best = &p;
  return *best;
}

struct ProvinceData {
  ProvinceEntry entry;
  CellCatalog catalog;
  std::vector<UserSequence> users;
};

inline ProvinceData load_province(const PipelineConfig& cfg) {
  ProvinceData d;
  d.entry = resolve_province(cfg);
  d.catalog = load_catalog(fs::path(cfg.out) / "ingest" / "catalog.csv");
  auto in = open_artifact(fs::path(cfg.out) / "ingest" / d.entry.file);
  d.users = read_province_file(in, d.catalog, d.entry.province);
  return d;
}

// ---------------------------------------------------------------------------
// features

inline void run_features(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "features");
  const auto d = load_province(cfg);
  sl.note("province " + d.entry.province);
  const auto tables = build_population_tables(d.users, d.entry.province);
  FeatureOptions opt;
  opt.diversity_window = cfg.diversity_window;
  const auto feats = compute_all_features(d.users, d.catalog, tables, opt, resolve_threads(cfg.threads));
  const fs::path out = cfg.out;
  {
    auto f = create_artifact(out / "features.csv");
    write_features_csv(f, feats);
  }
  {
    auto f = create_artifact(out / "popularity.csv");
    write_popularity_csv(f, tables.popularity, d.catalog);
  }
  {
    auto f = create_artifact(out / "flow.csv");
    write_flow_csv(f, tables.flow, d.catalog);
  }
  sl.count("users", feats.size());
  sl.count("popularity keys", tables.popularity.counts.size());
  sl.count("flow keys", tables.flow.counts.size());
  echo_config(cfg, "features");
}

// ---------------------------------------------------------------------------
// profile

inline void run_profile(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "profile");
  auto in = open_artifact(fs::path(cfg.out) / "features.csv");
  const auto feats = read_features_csv(in);
  ProfileOptions opt;
  opt.seed = cfg.seed;
  const auto traffic = traffic_profiles(feats, opt);
  const auto mobility = mobility_profiles(feats, opt);
  std::vector<ProfileAssignment> rows;
  for (std::size_t i = 0; i < feats.size(); ++i) rows.push_back({feats[i].user_id, traffic[i], mobility[i]});
  {
    auto out = create_artifact(fs::path(cfg.out) / "profiles.csv");
    write_profiles_csv(out, rows);
  }
  std::vector<FeatureImportance> imp;
  if (feats.size() >= kMinImportanceUsers) {
    ForestOptions fo;
    fo.seed = cfg.seed;
    fo.threads = resolve_threads(cfg.threads);
    imp = feature_importance(feats, traffic, fo);
  } else {
    sl.note("fewer than " + std::to_string(kMinImportanceUsers) + " users; feature importance skipped");
  }
  auto out = create_artifact(fs::path(cfg.out) / "importance.csv");
  write_importance_csv(out, imp);
  sl.count("users", rows.size());
  echo_config(cfg, "profile");
}

// ---------------------------------------------------------------------------
// encode

inline void run_encode(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "encode");
  const auto d = load_province(cfg);
  const fs::path out = cfg.out;
  PopulationTables tables;
  {
    auto in = open_artifact(out / "popularity.csv");
    tables.popularity = read_popularity_csv(in, d.catalog, d.entry.province);
  }
  {
    auto in = open_artifact(out / "flow.csv");
    tables.flow = read_flow_csv(in, d.catalog, d.entry.province);
  }
  std::vector<UserSequence> training;
  for (const auto& u : d.users)
    if (!u.full_sequence) training.push_back(u);
  Thresholds th;
  if (cfg.threshold_source == "load") {
    if (cfg.thresholds_file.empty()) throw InputError("threshold_source = load needs thresholds_file");
    auto in = open_artifact(cfg.thresholds_file);
    th = read_thresholds(in);
    if (!th.province.empty() && th.province != d.entry.province)
      throw InputError("thresholds were fitted for province '" + th.province + "'");
    th.province = d.entry.province;
  } else {
    th = fit_thresholds(training, d.catalog, d.entry.province);
  }
  std::vector<EncodedUser> encoded;
  for (const auto& u : d.users) encoded.push_back({u.user_id, encode_sequence(u, th, tables, d.catalog, cfg.diversity_window)});
  {
    auto f = create_artifact(out / "thresholds.csv");
    write_thresholds(f, th);
  }
  {
    auto f = create_artifact(out / "behaviors.csv");
    write_behaviors_csv(f, encoded);
  }
  auto f = create_artifact(out / "split.csv");
  f << "user_id,split\n";
  for (const auto& u : d.users) f << u.user_id << ',' << (u.full_sequence ? "test" : "train") << '\n';
  sl.count("train users", training.size());
  sl.count("test users", d.users.size() - training.size());
  echo_config(cfg, "encode");
}

struct SplitCorpus {
  std::vector<std::string> train_ids, test_ids;
  std::vector<std::vector<RefinedBehavior>> train, test;
};

inline SplitCorpus load_split_corpus(const PipelineConfig& cfg) {
  const fs::path out = cfg.out;
  std::map<std::string, bool> is_test;
  {
    auto in = open_artifact(out / "split.csv");
    text::expect_header(in, "user_id,split", "split.csv");
    std::string line;
    while (text::read_line(in, line)) {
      if (line.empty()) continue;
      const auto f = text::split(line, ',');
      if (f.size() != 2 || (f[1] != "train" && f[1] != "test")) throw InputError("split.csv: malformed line '" + line + "'");
      is_test[std::string(f[0])] = f[1] == "test";
    }
  }
  auto in = open_artifact(out / "behaviors.csv");
  const auto users = read_behaviors_csv(in);
  SplitCorpus c;
  for (const auto& u : users) {
    auto it = is_test.find(u.user_id);
    if (it == is_test.end()) throw ConsistencyError("user " + u.user_id + " is missing from split.csv");
    (it->second ? c.test_ids : c.train_ids).push_back(u.user_id);
    (it->second ? c.test : c.train).push_back(refine(u.steps));
  }
  return c;
}

// ---------------------------------------------------------------------------
// train

inline MarkovConfig markov_config(const PipelineConfig& cfg) { return {cfg.time_mode, cfg.alpha, cfg.rt_mode}; }

inline void run_train(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "train");
  const auto c = load_split_corpus(cfg);
  const unsigned threads = resolve_threads(cfg.threads);
  const auto model = train_sharded(c.train, markov_config(cfg), threads, threads);
  auto out = create_artifact(fs::path(cfg.out) / "model.txt");
  write_model(out, model);
  sl.count("training sequences", c.train.size());
  sl.count("states", model.states().size());
  sl.count("transitions", model.counts().trans.size());
  echo_config(cfg, "train");
}

inline MarkovModel load_model(const PipelineConfig& cfg) {
  auto in = open_artifact(fs::path(cfg.out) / "model.txt");
  auto m = read_model(in);
  if (m.config().time_mode != cfg.time_mode)
    throw InputError("model.txt was trained with time_mode=" + std::string(to_string(m.config().time_mode)));
  // Scoring settings follow the current configuration; counts come from the file.
  return MarkovModel(markov_config(cfg), m.counts());
}

// ---------------------------------------------------------------------------
// infer

inline nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

inline nlohmann::json to_json(const AccuracySummary& a) {
  return {{"overall", to_json(a.overall)}, {"trc", to_json(a.trc)}, {"disc", to_json(a.disc)},
          {"rep", to_json(a.rep)},         {"sta", to_json(a.sta)}};
}

inline void run_infer(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "infer");
  const auto model = load_model(cfg);
  const auto c = load_split_corpus(cfg);
  if (c.test.empty()) throw InputError("no full-sequence test users to evaluate");
  const unsigned threads = resolve_threads(cfg.threads);
  nlohmann::json j;
  auto out = create_artifact(fs::path(cfg.out) / "report_infer.csv");
  out << "direction,metric,mean,std\n";
  for (auto dir : {Direction::mobility_given_traffic, Direction::traffic_given_mobility}) {
    const std::string name = dir == Direction::mobility_given_traffic ? "mobility_given_traffic" : "traffic_given_mobility";
    const auto r = run_prediction(model, c.test, dir, cfg.repeats, cfg.seed, threads);
    j[name] = to_json(r.across_users);
    j[name]["fallback_counts"] = r.fallback_counts;
    const std::pair<const char*, const MeanStd*> rows[] = {{"overall", &r.across_users.overall},
                                                           {"trc", &r.across_users.trc},
                                                           {"disc", &r.across_users.disc},
                                                           {"rep", &r.across_users.rep},
                                                           {"sta", &r.across_users.sta}};
    for (const auto& [metric, m] : rows)
      out << name << ',' << metric << ',' << text::format_double(m->mean) << ',' << text::format_double(m->std) << '\n';
    sl.count(name + " overall accuracy", r.across_users.overall.mean);
  }
  j["users"] = c.test.size();
  j["repeats"] = cfg.repeats;
  write_json(fs::path(cfg.out) / "infer.json", j);
  echo_config(cfg, "infer");
}

// ---------------------------------------------------------------------------
// match

inline void run_match(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "match");
  const auto model = load_model(cfg);
  const auto c = load_split_corpus(cfg);
  if (c.test.size() < 2) throw InputError("matching needs at least 2 full-sequence test users");
  const unsigned threads = resolve_threads(cfg.threads);

  const auto disc = run_discrimination(model, c.test, cfg.seed, cfg.bins);
  const auto m = match_datasets(model, c.test, c.test, threads);
  std::vector<std::size_t> truth(c.test.size());
  std::iota(truth.begin(), truth.end(), 0);
  const auto mm = match_metrics(m, truth, c.test);

  nlohmann::json j;
  auto& jd = j["discrimination"];
  jd["hellinger"] = disc.hellinger;
  jd["bins"] = cfg.bins;
  jd["regular_histogram"] = disc.regular_hist.mass;
  jd["shuffled_histogram"] = disc.shuffled_hist.mass;
  jd["regular_mean_pi"] = mean_std(disc.regular).mean;
  jd["shuffled_mean_pi"] = mean_std(disc.shuffled).mean;
  jd["skipped_pairs"] = disc.skipped;
  auto& jm = j["matching"];
  jm["top1"] = mm.top1;
  for (std::size_t k = 0; k < kTopPercents.size(); ++k) jm["top_percent"][std::to_string(kTopPercents[k])] = mm.top_percent[k];
  jm["mean_hamming"] = mm.mean_hamming;
  jm["mean_minmax_gt"] = mm.mean_minmax_gt;
  jm["skipped_pairs"] = m.skipped_pairs;
  j["users"] = c.test.size();
  write_json(fs::path(cfg.out) / "match.json", j);

  {
    auto out = create_artifact(fs::path(cfg.out) / "report_match.csv");
    out << "metric,value\n";
    out << "hellinger," << text::format_double(disc.hellinger) << '\n';
    out << "top1," << text::format_double(mm.top1) << '\n';
    for (std::size_t k = 0; k < kTopPercents.size(); ++k)
      out << "top" << kTopPercents[k] << "pct," << text::format_double(mm.top_percent[k]) << '\n';
    out << "mean_hamming," << text::format_double(mm.mean_hamming) << '\n';
    out << "mean_minmax_gt," << text::format_double(mm.mean_minmax_gt) << '\n';
  }
  {
    auto out = create_artifact(fs::path(cfg.out) / "report_hist.csv");
    out << "dataset,bin,lower,upper,mass\n";
    const double w = 1.0 / static_cast<double>(cfg.bins);
    for (const auto& [name, h] : {std::pair{"regular", &disc.regular_hist}, std::pair{"shuffled", &disc.shuffled_hist}})
      for (std::size_t b = 0; b < h->mass.size(); ++b)
        out << name << ',' << b << ',' << text::format_double(w * static_cast<double>(b)) << ','
            << text::format_double(w * static_cast<double>(b + 1)) << ',' << text::format_double(h->mass[b]) << '\n';
  }
  sl.count("users", c.test.size());
  sl.count("hellinger", disc.hellinger);
  sl.count("top1", mm.top1);
  echo_config(cfg, "match");
}

// ---------------------------------------------------------------------------
// eval

inline void run_eval(const PipelineConfig& cfg, std::ostream& log) {
  StageLog sl(log, "eval");
  const fs::path out = cfg.out;
  nlohmann::json r;
  r["ingest"] = read_json(out / "ingest" / "summary.json");
  r["province"] = resolve_province(cfg).province;
  r["prediction"] = read_json(out / "infer.json");
  const auto match = read_json(out / "match.json");
  r["discrimination"] = match.at("discrimination");
  r["matching"] = match.at("matching");
  r["model"] = {{"time_mode", to_string(cfg.time_mode)}, {"alpha", cfg.alpha}, {"rt_mode", to_string(cfg.rt_mode)}};

  std::vector<ProfileAssignment> profiles;
  {
    auto in = open_artifact(out / "profiles.csv");
    profiles = read_profiles_csv(in);
  }
  std::map<std::string, std::size_t> traffic_counts, mobility_counts;
  for (const auto& p : profiles) {
    ++traffic_counts[std::string(to_string(p.traffic))];
    ++mobility_counts[std::string(to_string(p.mobility))];
  }
  r["profiles"] = {{"traffic", traffic_counts}, {"mobility", mobility_counts}};
  {
    auto in = open_artifact(out / "importance.csv");
    text::expect_header(in, "feature,importance", "importance.csv");
    nlohmann::json imp = nlohmann::json::array();
    std::string line;
    while (text::read_line(in, line)) {
      if (line.empty()) continue;
      const auto f = text::split(line, ',');
      if (f.size() != 2) throw InputError("importance.csv: expected 2 fields");
      imp.push_back({{"feature", std::string(f[0])}, {"importance", text::require_double(f[1], "importance")}});
    }
    r["feature_importance"] = std::move(imp);
  }
  write_json(out / "report.json", r);
  {
    auto f = create_artifact(out / "report_profiles.csv");
    f << "dimension,profile,users\n";
    for (const auto& [k, v] : traffic_counts) f << "traffic," << k << ',' << v << '\n';
    for (const auto& [k, v] : mobility_counts) f << "mobility," << k << ',' << v << '\n';
  }
  sl.count("profiles", profiles.size());
  echo_config(cfg, "eval");
}

inline const std::map<std::string, std::function<void(const PipelineConfig&, std::ostream&)>>& stages() {
  static const std::map<std::string, std::function<void(const PipelineConfig&, std::ostream&)>> s{
      {"synth", run_synth},   {"ingest", run_ingest}, {"features", run_features},
      {"profile", run_profile}, {"encode", run_encode}, {"train", run_train},
      {"infer", run_infer},   {"match", run_match},   {"eval", run_eval}};
  return s;
}

/// Stage order of a full run after ingest inputs exist.
inline const std::vector<std::string>& pipeline_order() {
  static const std::vector<std::string> order{"ingest", "features", "profile", "encode", "train", "infer", "match", "eval"};
  return order;
}

}  // namespace xdrmob
