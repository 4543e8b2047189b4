#pragma once

// Pipeline configuration: a line-based `key = value` file whose entries can
// be overridden individually (command-line flags do this).

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "xdrmob/error.hpp"
#include "xdrmob/eval.hpp"
#include "xdrmob/markov.hpp"
#include "xdrmob/text.hpp"

namespace xdrmob {

struct PipelineConfig {
  std::string xdr;
  std::string catalog;
  std::string out = "out";
  std::string province;  // empty: the province with the most users
  TimeMode time_mode = TimeMode::hour;
  double alpha = 0.0;
  RateMode rt_mode = RateMode::all;
  std::size_t diversity_window = 2;
  std::size_t bins = kDefaultBins;
  std::size_t repeats = kDefaultRepeats;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: hardware concurrency
  std::string threshold_source = "fit";  // fit | load
  std::string thresholds_file;           // read when threshold_source = load
  double max_missing_rate = 0.05;

  std::size_t synth_users = 1000;
  std::size_t synth_cells = 400;
  double synth_extent_km = 40.0;
  double synth_coupling = 0.8;
  double synth_full_fraction = 0.5;
  std::size_t synth_provinces = 1;

  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> entries() const;
};

namespace detail {

template <class T>
T config_int(const std::string& key, const std::string& v) {
  return text::require_int<T>(v, key);
}

inline double config_double(const std::string& key, const std::string& v) { return text::require_double(v, key); }

inline double config_fraction(const std::string& key, const std::string& v) {
  const double x = config_double(key, v);
  if (x < 0.0 || x > 1.0) throw InputError(key + " must lie in [0, 1]");
  return x;
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& value) {
  using namespace detail;
  static const std::map<std::string, std::function<void(PipelineConfig&, const std::string&)>> setters{
      {"xdr", [](PipelineConfig& c, const std::string& v) { c.xdr = v; }},
      {"catalog", [](PipelineConfig& c, const std::string& v) { c.catalog = v; }},
      {"out", [](PipelineConfig& c, const std::string& v) { c.out = v; }},
      {"province", [](PipelineConfig& c, const std::string& v) { c.province = v; }},
      {"time_mode", [](PipelineConfig& c, const std::string& v) { c.time_mode = parse_time_mode(v); }},
      {"alpha", [](PipelineConfig& c, const std::string& v) { c.alpha = config_fraction("alpha", v); }},
      {"rt_mode", [](PipelineConfig& c, const std::string& v) { c.rt_mode = parse_rate_mode(v); }},
      {"diversity_window",
       [](PipelineConfig& c, const std::string& v) { c.diversity_window = config_int<std::size_t>("diversity_window", v); }},
      {"bins", [](PipelineConfig& c, const std::string& v) { c.bins = config_int<std::size_t>("bins", v); }},
      {"repeats", [](PipelineConfig& c, const std::string& v) { c.repeats = config_int<std::size_t>("repeats", v); }},
      {"seed", [](PipelineConfig& c, const std::string& v) { c.seed = config_int<std::uint64_t>("seed", v); }},
      {"threads", [](PipelineConfig& c, const std::string& v) { c.threads = config_int<unsigned>("threads", v); }},
      {"threshold_source",
       [](PipelineConfig& c, const std::string& v) {
         if (v != "fit" && v != "load") throw InputError("threshold_source must be fit or load");
         c.threshold_source = v;
       }},
      {"thresholds_file", [](PipelineConfig& c, const std::string& v) { c.thresholds_file = v; }},
      {"max_missing_rate",
       [](PipelineConfig& c, const std::string& v) { c.max_missing_rate = config_fraction("max_missing_rate", v); }},
      {"synth_users", [](PipelineConfig& c, const std::string& v) { c.synth_users = config_int<std::size_t>("synth_users", v); }},
      {"synth_cells", [](PipelineConfig& c, const std::string& v) { c.synth_cells = config_int<std::size_t>("synth_cells", v); }},
      {"synth_extent_km",
       [](PipelineConfig& c, const std::string& v) { c.synth_extent_km = config_double("synth_extent_km", v); }},
      {"synth_coupling",
       [](PipelineConfig& c, const std::string& v) { c.synth_coupling = config_fraction("synth_coupling", v); }},
      {"synth_full_fraction",
       [](PipelineConfig& c, const std::string& v) { c.synth_full_fraction = config_fraction("synth_full_fraction", v); }},
      {"synth_provinces",
       [](PipelineConfig& c, const std::string& v) { c.synth_provinces = config_int<std::size_t>("synth_provinces", v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw InputError("unknown config key '" + key + "'");
  it->second(*this, value);
}

inline std::map<std::string, std::string> PipelineConfig::entries() const {
  return {
      {"xdr", xdr},
      {"catalog", catalog},
      {"out", out},
      {"province", province},
      {"time_mode", std::string(to_string(time_mode))},
      {"alpha", text::format_double(alpha)},
      {"rt_mode", std::string(to_string(rt_mode))},
      {"diversity_window", std::to_string(diversity_window)},
      {"bins", std::to_string(bins)},
      {"repeats", std::to_string(repeats)},
      {"seed", std::to_string(seed)},
      {"threads", std::to_string(threads)},
      {"threshold_source", threshold_source},
      {"thresholds_file", thresholds_file},
      {"max_missing_rate", text::format_double(max_missing_rate)},
      {"synth_users", std::to_string(synth_users)},
      {"synth_cells", std::to_string(synth_cells)},
      {"synth_extent_km", text::format_double(synth_extent_km)},
      {"synth_coupling", text::format_double(synth_coupling)},
      {"synth_full_fraction", text::format_double(synth_full_fraction)},
      {"synth_provinces", std::to_string(synth_provinces)},
  };
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

/// Applies `key = value` lines; blank lines and `#` comments are skipped.
inline void load_config(std::istream& in, PipelineConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (text::read_line(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void write_config(std::ostream& out, const PipelineConfig& cfg) {
  for (const auto& [k, v] : cfg.entries()) out << k << " = " << v << '\n';
}

}  // namespace xdrmob
