#pragma once

// Cohort ingestion, orientation, normalization and trait aggregation, plus the
// synthetic cohort generator that stands in for the real battery data.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fts/error.hpp"
#include "fts/rng.hpp"
#include "fts/schema.hpp"

namespace fts {

enum class Direction { higher_is_better, lower_is_better };

struct CandidateRecord {
  std::string candidate_id;
  std::array<std::string, kAttributeCount> demographics;  // indexed by Attribute
  std::array<double, kTestCount> raw_tests{};             // indexed by kTestNames

  const std::string& attribute(Attribute a) const { return demographics[index_of(a)]; }

  friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

class TestDirectionConfig {
 public:
  // Timed trail-making tests are lower-is-better; everything else higher.
  TestDirectionConfig() {
    directions_.fill(Direction::higher_is_better);
    directions_[*find_test("trail_making_a")] = Direction::lower_is_better;
    directions_[*find_test("trail_making_b")] = Direction::lower_is_better;
  }

  Direction operator[](std::size_t test) const { return directions_.at(test); }
  void set(std::size_t test, Direction d) { directions_.at(test) = d; }

  // Parses `test_name=higher|lower` lines. Every one of the eleven tests
  // must appear exactly once; '#' starts a comment.
  static TestDirectionConfig parse(std::string_view text) {
    TestDirectionConfig cfg;
    std::array<bool, kTestCount> seen{};
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      std::string key = trim(line.substr(0, eq));
      if (key.empty() && eq == std::string::npos) continue;
      if (eq == std::string::npos)
        throw Error(ErrorCode::invalid_config, "expected test_name=higher|lower, got '" + line + "'");
      std::string value = trim(line.substr(eq + 1));
      auto idx = find_test(key);
      if (!idx) throw Error(ErrorCode::invalid_config, "unknown test '" + key + "'", key);
      if (seen[*idx]) throw Error(ErrorCode::invalid_config, "test listed twice: " + key, key);
      seen[*idx] = true;
      if (value == "higher") {
        cfg.directions_[*idx] = Direction::higher_is_better;
      } else if (value == "lower") {
        cfg.directions_[*idx] = Direction::lower_is_better;
      } else {
        throw Error(ErrorCode::invalid_config, "direction must be higher or lower: " + key, key);
      }
    }
    for (std::size_t i = 0; i < kTestCount; ++i)
      if (!seen[i])
        throw Error(ErrorCode::invalid_config,
                    "direction config misses test " + std::string(kTestNames[i]),
                    std::string(kTestNames[i]));
    return cfg;
  }

  static TestDirectionConfig load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::io_error, "cannot open direction config " + path, path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  std::string serialize() const {
    std::string out;
    for (std::size_t i = 0; i < kTestCount; ++i) {
      out += kTestNames[i];
      out += directions_[i] == Direction::higher_is_better ? "=higher\n" : "=lower\n";
    }
    return out;
  }

  friend bool operator==(const TestDirectionConfig&, const TestDirectionConfig&) = default;

 private:
  static std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    s.erase(s.find_last_not_of(ws) + 1);
    return s;
  }

  std::array<Direction, kTestCount> directions_{};
};

struct TraitProfile {
  std::string candidate_id;
  std::array<double, kTraitCount> traits{};  // each in [0,1], indexed by Trait

  double operator[](Trait t) const { return traits[index_of(t)]; }
  friend bool operator==(const TraitProfile&, const TraitProfile&) = default;
};

struct Cohort {
  std::vector<CandidateRecord> records;  // ascending candidate_id
  std::vector<TraitProfile> profiles;    // aligned with records
  std::string provenance;
  std::vector<std::string> degenerate_tests;  // zero-range columns mapped to 0.5

  std::size_t size() const { return records.size(); }
};

using CohortPtr = std::shared_ptr<const Cohort>;

// Orients each test (negating lower-is-better scores), min-max scales it to
// [0,1] across the given records and averages each trait's tests. A column
// with zero range maps to 0.5 for everyone and is reported through
// `degenerate` when non-null.
inline std::vector<TraitProfile> normalize_and_aggregate(
    std::span<const CandidateRecord> records, const TestDirectionConfig& directions,
    std::vector<std::string>* degenerate = nullptr) {
  if (records.empty()) throw Error(ErrorCode::empty_cohort, "cohort has no candidates");
  if (records.size() < 2)
    throw Error(ErrorCode::domain_error, "normalization needs at least two candidates");

  const std::size_t n = records.size();
  std::vector<std::array<double, kTestCount>> normalized(n);
  for (std::size_t t = 0; t < kTestCount; ++t) {
    const double sign = directions[t] == Direction::lower_is_better ? -1.0 : 1.0;
    double lo = sign * records[0].raw_tests[t];
    double hi = lo;
    for (const auto& r : records) {
      const double v = sign * r.raw_tests[t];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double range = hi - lo;
    if (!(range > 0.0)) {
      if (degenerate) degenerate->emplace_back(kTestNames[t]);
      for (std::size_t i = 0; i < n; ++i) normalized[i][t] = 0.5;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (sign * records[i].raw_tests[t] - lo) / range;
      normalized[i][t] = std::clamp(v, 0.0, 1.0);
    }
  }

  std::array<int, kTraitCount> members{};
  for (Trait tr : kTestTrait) ++members[index_of(tr)];

  std::vector<TraitProfile> profiles(n);
  for (std::size_t i = 0; i < n; ++i) {
    profiles[i].candidate_id = records[i].candidate_id;
    std::array<double, kTraitCount> sum{};
    for (std::size_t t = 0; t < kTestCount; ++t) sum[index_of(kTestTrait[t])] += normalized[i][t];
    for (std::size_t k = 0; k < kTraitCount; ++k)
      profiles[i].traits[k] = std::clamp(sum[k] / members[k], 0.0, 1.0);
  }
  return profiles;
}

// Validates records, sorts them by id and computes their trait profiles.
inline Cohort make_cohort(std::vector<CandidateRecord> records,
                          const TestDirectionConfig& directions, std::string provenance) {
  if (records.empty()) throw Error(ErrorCode::empty_cohort, "cohort has no candidates");
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.candidate_id < b.candidate_id; });
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && records[i - 1].candidate_id == r.candidate_id)
      throw Error(ErrorCode::duplicate_candidate_id, "duplicate candidate id " + r.candidate_id,
                  r.candidate_id);
    for (std::size_t t = 0; t < kTestCount; ++t)
      if (!std::isfinite(r.raw_tests[t]))
        throw Error(ErrorCode::non_finite_score,
                    "non-finite score for " + r.candidate_id + " in " + std::string(kTestNames[t]),
                    r.candidate_id);
  }
  Cohort c;
  c.profiles = normalize_and_aggregate(records, directions, &c.degenerate_tests);
  c.records = std::move(records);
  c.provenance = std::move(provenance);
  return c;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted)
    throw Error(ErrorCode::malformed_row, "unterminated quote on line " + std::to_string(line_no));
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline constexpr std::string_view kCohortHeader =
    "candidate_id,gender,age_group,education_level,country,forward_memory_span,"
    "reverse_memory_span,verbal_list_learning,delayed_verbal_list_learning,"
    "digit_symbol_coding,trail_making_a,trail_making_b,arithmetic_reasoning,"
    "grammatical_reasoning,divided_visual_attention,go_no_go";

// Parses the comma-separated cohort format. Column order may vary, but the
// header must name exactly the sixteen documented columns.
inline Cohort parse_cohort_csv(std::string_view text, const TestDirectionConfig& directions,
                               std::string provenance = "inline") {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::missing_column, "file has no header", "candidate_id");

  const auto header = detail::split_csv_line(lines[0], 1);
  const auto expected = detail::split_csv_line(kCohortHeader, 0);
  std::vector<std::size_t> column(expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    auto it = std::find(header.begin(), header.end(), expected[k]);
    if (it == header.end())
      throw Error(ErrorCode::missing_column, "missing column " + expected[k], expected[k]);
    column[k] = static_cast<std::size_t>(it - header.begin());
  }
  if (header.size() != expected.size()) {
    for (const auto& h : header)
      if (std::find(expected.begin(), expected.end(), h) == expected.end())
        throw Error(ErrorCode::malformed_row, "unexpected column " + h, h);
    throw Error(ErrorCode::malformed_row, "header repeats a column");
  }

  std::vector<CandidateRecord> records;
  records.reserve(lines.size() - 1);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = detail::split_csv_line(lines[ln], ln + 1);
    if (fields.size() != header.size())
      throw Error(ErrorCode::malformed_row,
                  "line " + std::to_string(ln + 1) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(header.size()));
    CandidateRecord r;
    r.candidate_id = fields[column[0]];
    if (r.candidate_id.empty())
      throw Error(ErrorCode::malformed_row, "empty candidate_id on line " + std::to_string(ln + 1));
    for (std::size_t a = 0; a < kAttributeCount; ++a) r.demographics[a] = fields[column[1 + a]];
    for (std::size_t t = 0; t < kTestCount; ++t) {
      const std::string& f = fields[column[1 + kAttributeCount + t]];
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v))
        throw Error(ErrorCode::non_finite_score,
                    "candidate " + r.candidate_id + " has non-finite " +
                        std::string(kTestNames[t]) + " ('" + f + "') on line " +
                        std::to_string(ln + 1),
                    r.candidate_id);
      r.raw_tests[t] = v;
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw Error(ErrorCode::empty_cohort, "cohort file has no data rows");
  return make_cohort(std::move(records), directions, std::move(provenance));
}

inline Cohort load_cohort(const std::string& path,
                          const TestDirectionConfig& directions = TestDirectionConfig{}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_error, "cannot open cohort file " + path, path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_cohort_csv(ss.str(), directions, "file:" + path);
}

inline std::string serialize_cohort_csv(std::span<const CandidateRecord> records) {
  std::string out(kCohortHeader);
  out += '\n';
  for (const auto& r : records) {
    out += detail::csv_escape(r.candidate_id);
    for (const auto& d : r.demographics) {
      out += ',';
      out += detail::csv_escape(d);
    }
    for (double v : r.raw_tests) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::string serialize_cohort_csv(const Cohort& c) { return serialize_cohort_csv(c.records); }

// Content hash of the canonical serialization, as 16 hex digits.
inline std::string cohort_fingerprint(const Cohort& c) {
  const std::uint64_t h = fnv1a64(serialize_cohort_csv(c));
  static constexpr char hex[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 0; i < 16; ++i) s[15 - i] = hex[(h >> (4 * i)) & 0xF];
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct GroupShift {
  Attribute attribute;
  std::string group;
  Trait trait;
  double shift_sigma;  // added to the latent trait ability of group members
};

struct SyntheticSpec {
  std::size_t size = 2000;
  // Per attribute: (group value, fraction) in presentation order.
  std::array<std::vector<std::pair<std::string, double>>, kAttributeCount> fractions;
  std::vector<GroupShift> shifts;
  double noise_scale = 0.5;  // per-test noise around the latent trait, in sd units
};

inline SyntheticSpec default_synthetic_spec(std::size_t size = 2000) {
  SyntheticSpec s;
  s.size = size;
  s.fractions[index_of(Attribute::gender)] = {{"female", 0.5}, {"male", 0.5}};
  s.fractions[index_of(Attribute::age_group)] = {
      {"18-29", 0.25}, {"30-44", 0.35}, {"45-59", 0.25}, {"60+", 0.15}};
  s.fractions[index_of(Attribute::education_level)] = {
      {"secondary", 0.3}, {"bachelor", 0.45}, {"graduate", 0.25}};
  s.fractions[index_of(Attribute::country)] = {
      {"United States", 0.6}, {"United Kingdom", 0.2}, {"Canada", 0.2}};
  return s;
}

namespace detail {

struct TestUnits {
  double mean;
  double sd;
};

// Plausible native units for each test (spans, counts, seconds, percent).
inline constexpr std::array<TestUnits, kTestCount> kTestUnits = {{
    {6.5, 1.3}, {5.0, 1.3}, {22.0, 5.0}, {7.0, 2.5}, {60.0, 12.0}, {32.0, 10.0},
    {75.0, 25.0}, {12.0, 3.0}, {20.0, 5.0}, {70.0, 12.0}, {85.0, 8.0},
}};

inline std::vector<std::size_t> allocate_counts(std::size_t size,
                                                const std::vector<std::pair<std::string, double>>& groups) {
  std::vector<std::size_t> counts(groups.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double exact = groups[g].second * static_cast<double>(size);
    counts[g] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[g];
    remainders.emplace_back(exact - std::floor(exact), g);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < size; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

}  // namespace detail

inline void validate(const SyntheticSpec& spec) {
  if (spec.size < 10)
    throw Error(ErrorCode::invalid_spec,
                "size must be at least 10, got " + std::to_string(spec.size));
  if (!(spec.noise_scale > 0.0) || !std::isfinite(spec.noise_scale))
    throw Error(ErrorCode::invalid_spec, "noise_scale must be positive and finite");
  for (Attribute a : kAllAttributes) {
    const auto& groups = spec.fractions[index_of(a)];
    if (groups.empty())
      throw Error(ErrorCode::invalid_spec, "no groups for " + std::string(name_of(a)),
                  std::string(name_of(a)));
    double sum = 0.0;
    std::set<std::string> names;
    for (const auto& [name, f] : groups) {
      if (!(f >= 0.0) || !std::isfinite(f))
        throw Error(ErrorCode::invalid_spec, "negative fraction for " + name, name);
      if (!names.insert(name).second)
        throw Error(ErrorCode::invalid_spec, "group listed twice: " + name, name);
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error(ErrorCode::invalid_spec,
                  "fractions for " + std::string(name_of(a)) + " sum to " +
                      detail::format_double(sum) + ", expected 1",
                  std::string(name_of(a)));
  }
  for (const auto& s : spec.shifts) {
    const auto& groups = spec.fractions[index_of(s.attribute)];
    if (std::none_of(groups.begin(), groups.end(), [&](const auto& g) { return g.first == s.group; }))
      throw Error(ErrorCode::invalid_spec, "shift names unknown group " + s.group, s.group);
    if (!std::isfinite(s.shift_sigma))
      throw Error(ErrorCode::invalid_spec, "shift must be finite", s.group);
  }
}

// Deterministic for (spec, seed). Group sizes follow the requested fractions
// by largest remainder (off by at most one); each candidate draws a latent
// standard-normal ability per trait, shifted by the configured amounts for
// their groups, and every test of that trait observes the ability plus
// `noise_scale` Gaussian noise, expressed in the test's native units.
inline Cohort generate_synthetic_cohort(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  Xoshiro256 rng(seed);
  const std::size_t n = spec.size;
  const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());

  std::vector<CandidateRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string num = std::to_string(i + 1);
    records[i].candidate_id = "c" + std::string(width - num.size(), '0') + num;
  }
  for (Attribute a : kAllAttributes) {
    const auto& groups = spec.fractions[index_of(a)];
    const auto counts = detail::allocate_counts(n, groups);
    std::vector<std::size_t> assignment;
    assignment.reserve(n);
    for (std::size_t g = 0; g < groups.size(); ++g) assignment.insert(assignment.end(), counts[g], g);
    rng.shuffle(assignment.begin(), assignment.end());
    for (std::size_t i = 0; i < n; ++i) records[i].demographics[index_of(a)] = groups[assignment[i]].first;
  }

  const TestDirectionConfig directions;
  for (auto& r : records) {
    std::array<double, kTraitCount> ability{};
    for (std::size_t k = 0; k < kTraitCount; ++k) ability[k] = rng.gaussian();
    for (const auto& s : spec.shifts)
      if (r.attribute(s.attribute) == s.group) ability[index_of(s.trait)] += s.shift_sigma;
    for (std::size_t t = 0; t < kTestCount; ++t) {
      const double z = ability[index_of(kTestTrait[t])] + spec.noise_scale * rng.gaussian();
      const double sign = directions[t] == Direction::lower_is_better ? -1.0 : 1.0;
      r.raw_tests[t] = detail::kTestUnits[t].mean + sign * detail::kTestUnits[t].sd * z;
    }
  }
  return make_cohort(std::move(records), directions,
                     "synthetic:size=" + std::to_string(n) + ",seed=" + std::to_string(seed));
}

}  // namespace fts
