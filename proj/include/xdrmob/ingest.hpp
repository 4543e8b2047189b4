#pragma once

// Raw XDR records -> canonical per-user week sequences.
//
// A user's week is a list of 30-minute slots (0 = Sunday 00:00, 335 = Saturday
// 23:30). Each recorded slot carries a data volume and, when the volume is
// nonzero, the code of the serving cell.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xdrmob/error.hpp"
#include "xdrmob/geo.hpp"
#include "xdrmob/text.hpp"

namespace xdrmob {

inline constexpr int kSlotsPerDay = 48;
inline constexpr int kDaysPerWeek = 7;
inline constexpr int kSlotsPerWeek = kSlotsPerDay * kDaysPerWeek;

inline constexpr std::string_view kXdrHeader = "user_id,slot,volume_bytes,cell_code";
inline constexpr std::string_view kXdrHeaderFull = "user_id,slot,volume_bytes,cell_code,full_sequence";
inline constexpr std::string_view kCatalogHeader = "cell_code,lat,lon,province";

using CellId = std::int32_t;
inline constexpr CellId kNoCell = -1;
// Population tables pack cell ids into 24 bits.
inline constexpr std::size_t kMaxCells = std::size_t{1} << 24;

struct CellInfo {
  double lat = 0.0;
  double lon = 0.0;
  std::string province;

  LatLon position() const { return {lat, lon}; }
};

class CellCatalog {
 public:
  CellId add(std::string code, CellInfo info) {
    if (info.lat < -90.0 || info.lat > 90.0) throw InputError("cell " + code + ": latitude out of range");
    if (info.lon < -180.0 || info.lon > 180.0) throw InputError("cell " + code + ": longitude out of range");
    if (info.province.empty()) throw InputError("cell " + code + ": empty province");
    if (code.empty()) throw InputError("empty cell code");
    if (codes_.size() >= kMaxCells) throw InputError("cell catalog too large");
    const auto id = static_cast<CellId>(codes_.size());
    auto [it, inserted] = index_.emplace(code, id);
    if (!inserted) throw InputError("duplicate cell code " + code);
    codes_.push_back(std::move(code));
    infos_.push_back(std::move(info));
    return id;
  }

  std::optional<CellId> find(const std::string& code) const {
    auto it = index_.find(code);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const CellInfo& info(CellId id) const { return infos_.at(static_cast<std::size_t>(id)); }
  const std::string& code(CellId id) const { return codes_.at(static_cast<std::size_t>(id)); }
  LatLon position(CellId id) const { return info(id).position(); }
  std::size_t size() const { return codes_.size(); }

 private:
  std::vector<std::string> codes_;
  std::vector<CellInfo> infos_;
  std::unordered_map<std::string, CellId> index_;
};

inline CellCatalog read_catalog(std::istream& in) {
  text::expect_header(in, kCatalogHeader, "cell catalog");
  CellCatalog catalog;
  std::string line;
  std::vector<std::string_view> f;
  std::size_t lineno = 1;
  while (text::read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    text::split(line, ',', f);
    try {
      if (f.size() != 4) throw InputError("expected 4 fields");
      catalog.add(std::string(f[0]), CellInfo{text::require_double(f[1], "lat"), text::require_double(f[2], "lon"),
                                              std::string(f[3])});
    } catch (const InputError& e) {
      throw InputError("cell catalog line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return catalog;
}

inline void write_catalog(std::ostream& out, const CellCatalog& catalog) {
  out << kCatalogHeader << '\n';
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto id = static_cast<CellId>(i);
    const auto& c = catalog.info(id);
    out << catalog.code(id) << ',' << text::format_double(c.lat) << ',' << text::format_double(c.lon) << ','
        << c.province << '\n';
  }
}

struct Event {
  int slot = 0;
  std::uint64_t volume = 0;
  std::string cell;          // raw code; empty iff volume == 0
  CellId cell_id = kNoCell;  // kNoCell when absent or not in the catalog

  bool located() const { return volume > 0; }
  bool resolved() const { return cell_id != kNoCell; }
  // A located event whose cell could not be resolved.
  bool missing() const { return located() && !resolved(); }
};

struct UserSequence {
  std::string user_id;
  std::string province;
  std::vector<Event> events;  // strictly increasing slot
  bool full_sequence = false;
  std::size_t n_imputed = 0;
};

/// A week with every slot active, every location resolved, none imputed.
inline bool is_full_sequence(const UserSequence& u) {
  if (u.events.size() != static_cast<std::size_t>(kSlotsPerWeek) || u.n_imputed != 0) return false;
  return std::all_of(u.events.begin(), u.events.end(), [](const Event& e) { return e.located() && e.resolved(); });
}

struct RecordError {
  std::size_t line = 0;
  std::string message;
};

struct XdrParseResult {
  std::vector<UserSequence> users;  // sorted by user_id
  std::vector<RecordError> errors;
  std::size_t duplicate_slots = 0;
  std::size_t dropped_zero_volume_cells = 0;
  std::size_t records = 0;
};

/// Parses an XDR CSV stream. Malformed records are reported and skipped; a
/// duplicate (user, slot) keeps the larger volume. Unknown cell codes are kept
/// with cell_id = kNoCell. Province is left unset.
inline XdrParseResult parse_xdr(std::istream& in, const CellCatalog& catalog) {
  std::string line;
  if (!text::read_line(in, line)) throw InputError("XDR: empty input, expected header");
  std::size_t expected_fields = 0;
  if (line == kXdrHeader) {
    expected_fields = 4;
  } else if (line == kXdrHeaderFull) {
    expected_fields = 5;
  } else {
    throw InputError("XDR: bad header '" + line + "'");
  }

  XdrParseResult result;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<char> declared_full;  // canonical files only
  std::vector<std::string_view> f;
  std::size_t lineno = 1;
  while (text::read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    text::split(line, ',', f);
    auto fail = [&](std::string msg) { result.errors.push_back({lineno, std::move(msg)}); };
    if (f.size() != expected_fields) {
      fail("expected " + std::to_string(expected_fields) + " fields, got " + std::to_string(f.size()));
      continue;
    }
    if (f[0].empty()) {
      fail("empty user_id");
      continue;
    }
    const auto slot = text::parse_int<int>(f[1]);
    if (!slot) {
      fail("non-integer slot '" + std::string(f[1]) + "'");
      continue;
    }
    if (*slot < 0 || *slot >= kSlotsPerWeek) {
      fail("slot " + std::to_string(*slot) + " outside [0,335]");
      continue;
    }
    int full_flag = 1;
    if (expected_fields == 5) {
      if (f[4] != "0" && f[4] != "1") {
        fail("full_sequence must be 0 or 1");
        continue;
      }
      full_flag = f[4] == "1";
    }
    if (!f[2].empty() && f[2].front() == '-') {
      fail("negative volume");
      continue;
    }
    const auto volume = text::parse_int<std::uint64_t>(f[2]);
    if (!volume) {
      fail("non-integer volume '" + std::string(f[2]) + "'");
      continue;
    }
    ++result.records;

    Event ev;
    ev.slot = *slot;
    ev.volume = *volume;
    if (ev.volume == 0) {
      if (!f[3].empty()) ++result.dropped_zero_volume_cells;
    } else {
      ev.cell = std::string(f[3]);
      if (!ev.cell.empty()) {
        if (auto id = catalog.find(ev.cell)) ev.cell_id = *id;
      }
    }

    std::string uid(f[0]);
    auto [it, inserted] = index.emplace(uid, result.users.size());
    if (inserted) {
      result.users.emplace_back();
      result.users.back().user_id = std::move(uid);
      declared_full.push_back(1);
    }
    if (!full_flag) declared_full[it->second] = 0;
    result.users[it->second].events.push_back(std::move(ev));
  }

  for (std::size_t ui = 0; ui < result.users.size(); ++ui) {
    auto& u = result.users[ui];
    std::stable_sort(u.events.begin(), u.events.end(), [](const Event& a, const Event& b) { return a.slot < b.slot; });
    std::vector<Event> dedup;
    dedup.reserve(u.events.size());
    for (auto& e : u.events) {
      if (!dedup.empty() && dedup.back().slot == e.slot) {
        ++result.duplicate_slots;
        if (e.volume > dedup.back().volume) dedup.back() = std::move(e);
        continue;
      }
      dedup.push_back(std::move(e));
    }
    u.events = std::move(dedup);
    u.full_sequence = declared_full[ui] && is_full_sequence(u);
  }
  std::sort(result.users.begin(), result.users.end(),
            [](const UserSequence& a, const UserSequence& b) { return a.user_id < b.user_id; });
  return result;
}

/// Canonical serialization: one row per event, users in the given order.
inline void write_xdr(std::ostream& out, std::span<const UserSequence> users, bool with_full_flag) {
  out << (with_full_flag ? kXdrHeaderFull : kXdrHeader) << '\n';
  for (const auto& u : users) {
    for (const auto& e : u.events) {
      out << u.user_id << ',' << e.slot << ',' << e.volume << ',' << e.cell;
      if (with_full_flag) out << ',' << (u.full_sequence ? 1 : 0);
      out << '\n';
    }
  }
}

/// Sets the user's province to the most frequent province among resolved
/// located events (ties: lexicographically smallest). Returns false when the
/// user has no resolved located event.
inline bool assign_province(UserSequence& user, const CellCatalog& catalog) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : user.events)
    if (e.located() && e.resolved()) ++counts[catalog.info(e.cell_id).province];
  if (counts.empty()) return false;
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  user.province = best->first;
  return true;
}

enum class Rejection { none, too_many_missing, nothing_to_impute };

struct FilterResult {
  Rejection rejection = Rejection::none;
  std::size_t expected = 0;  // events with volume > 0
  std::size_t missing = 0;   // of those, unresolved
  UserSequence user;

  bool accepted() const { return rejection == Rejection::none; }
};

/// Rejects users whose unresolved-location rate exceeds max_missing_rate and
/// fills the rest from the most recent earlier resolved location (leading gaps
/// take the first later one). Volumes and slots are untouched.
inline FilterResult filter_and_impute(UserSequence user, const CellCatalog& catalog, double max_missing_rate = 0.05) {
  FilterResult r;
  for (const auto& e : user.events) {
    if (!e.located()) continue;
    ++r.expected;
    if (!e.resolved()) ++r.missing;
  }
  if (r.missing > 0) {
    if (r.missing == r.expected) {
      r.rejection = Rejection::nothing_to_impute;
    } else if (static_cast<double>(r.missing) / static_cast<double>(r.expected) > max_missing_rate) {
      r.rejection = Rejection::too_many_missing;
    }
  }
  if (!r.accepted()) {
    r.user = std::move(user);
    return r;
  }

  if (r.missing > 0) {
    CellId last = kNoCell;
    for (auto& e : user.events) {
      if (!e.located()) continue;
      if (e.resolved()) {
        last = e.cell_id;
      } else if (last != kNoCell) {
        e.cell_id = last;
        e.cell = catalog.code(last);
      }
    }
    CellId next = kNoCell;
    for (auto it = user.events.rbegin(); it != user.events.rend(); ++it) {
      if (!it->located()) continue;
      if (it->resolved()) {
        next = it->cell_id;
      } else {
        it->cell_id = next;
        it->cell = catalog.code(next);
      }
    }
  }
  user.n_imputed = r.missing;
  user.full_sequence = is_full_sequence(user);
  r.user = std::move(user);
  return r;
}

struct PreprocessSummary {
  std::size_t users_parsed = 0;
  std::size_t no_location = 0;
  std::size_t rejected_missing = 0;
  std::size_t rejected_unimputable = 0;
  std::size_t accepted = 0;
  std::size_t full_sequence = 0;
  std::size_t imputed_events = 0;
};

struct ProvinceDatasets {
  std::map<std::string, std::vector<UserSequence>> provinces;  // users sorted by id
  PreprocessSummary summary;
};

/// Province assignment, filtering and imputation over a parsed file.
inline ProvinceDatasets preprocess(XdrParseResult parsed, const CellCatalog& catalog, double max_missing_rate = 0.05) {
  ProvinceDatasets out;
  out.summary.users_parsed = parsed.users.size();
  for (auto& u : parsed.users) {
    if (!assign_province(u, catalog)) {
      ++out.summary.no_location;
      continue;
    }
    auto r = filter_and_impute(std::move(u), catalog, max_missing_rate);
    switch (r.rejection) {
      case Rejection::too_many_missing: ++out.summary.rejected_missing; continue;
      case Rejection::nothing_to_impute: ++out.summary.rejected_unimputable; continue;
      case Rejection::none: break;
    }
    ++out.summary.accepted;
    out.summary.imputed_events += r.user.n_imputed;
    if (r.user.full_sequence) ++out.summary.full_sequence;
    out.provinces[r.user.province].push_back(std::move(r.user));
  }
  return out;
}

/// Reads a canonical per-province file back; every located cell must resolve.
inline std::vector<UserSequence> read_province_file(std::istream& in, const CellCatalog& catalog,
                                                    const std::string& province) {
  auto parsed = parse_xdr(in, catalog);
  if (!parsed.errors.empty())
    throw InputError("province file line " + std::to_string(parsed.errors.front().line) + ": " +
                     parsed.errors.front().message);
  for (auto& u : parsed.users) {
    for (const auto& e : u.events)
      if (e.missing()) throw InputError("user " + u.user_id + ": unresolved cell '" + e.cell + "' in province file");
    u.province = province;
  }
  return std::move(parsed.users);
}

/// File-system-safe name for a province dataset.
inline std::string province_file_stem(std::string_view province) {
  std::string s;
  for (char c : province) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    s.push_back(ok ? c : '_');
  }
  return s;
}

}  // namespace xdrmob
