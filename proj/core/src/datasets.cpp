#include "driftguard/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "driftguard/error.hpp"

namespace driftguard {

// ---------------------------------------------------------------------------
// Synthetic stream
// ---------------------------------------------------------------------------

namespace {

struct Bump {
  double amplitude, center, width;
};
constexpr double kBaseSpeed = 0.55;
constexpr std::array<Bump, 2> kBumps{{{1.05, 0.33, 0.10}, {0.75, 0.76, 0.08}}};

}  // namespace

double drift_speed(double t) {
  double s = kBaseSpeed;
  for (const auto& b : kBumps) {
    const double z = (t - b.center) / b.width;
    s += b.amplitude * std::exp(-z * z);
  }
  return s;
}

double drift_offset(double t) {
  const double half_sqrt_pi = 0.5 * std::sqrt(std::numbers::pi);
  double d = kBaseSpeed * t;
  for (const auto& b : kBumps)
    d += b.amplitude * b.width * half_sqrt_pi *
         (std::erf((t - b.center) / b.width) - std::erf(-b.center / b.width));
  return d;
}

void SyntheticConfig::validate() const {
  if (n_train == 0 || n_val == 0 || n_eval == 0) throw ValidationError("synthetic sample sizes must be positive");
  if (grid_points < 2) throw ValidationError("synthetic time grid needs at least two points");
}

Matrix SyntheticBase::features_at(double t) const {
  const double shift = drift_offset(t);
  Matrix x(size(), 2);
  for (std::size_t i = 0; i < size(); ++i) {
    const double s = 2.0 * labels[i] - 1.0;
    x(i, 0) = 1.05 * s + 0.90 * z1[i];
    x(i, 1) = 1.25 * s + shift + 0.55 * z2[i];
  }
  return x;
}

Matrix SyntheticBase::velocities_at(double t) const {
  Matrix v(size(), 2);
  const double speed = drift_speed(t);
  for (std::size_t i = 0; i < size(); ++i) v(i, 1) = speed;
  return v;
}

SyntheticBase sample_synthetic_base(std::size_t n, Rng& rng) {
  SyntheticBase b;
  b.labels.resize(n);
  b.z1.resize(n);
  b.z2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    b.labels[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    b.z1[i] = rng.normal();
    b.z2[i] = rng.normal();
  }
  return b;
}

LabeledSample sample_synthetic(double t, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample_synthetic needs n >= 1");
  Rng rng = Rng::for_stream(seed, Stream::sampling);
  const SyntheticBase base = sample_synthetic_base(n, rng);
  return {base.features_at(t), base.labels};
}

Vector synthetic_time_grid(std::size_t points) {
  if (points < 2) throw ValidationError("time grid needs at least two points");
  Vector t(points);
  for (std::size_t i = 0; i < points; ++i) t[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return t;
}

// ---------------------------------------------------------------------------
// BlockedSeries
// ---------------------------------------------------------------------------

std::string to_string(BlockRole r) {
  switch (r) {
    case BlockRole::train: return "train";
    case BlockRole::val: return "val";
    case BlockRole::deploy: return "deploy";
  }
  return "unknown";
}

std::size_t BlockedSeries::count(BlockRole role) const { return rows_with_role(role).size(); }

std::vector<std::size_t> BlockedSeries::rows_with_role(BlockRole role) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < block_ids.size(); ++i)
    if (roles.at(static_cast<std::size_t>(block_ids[i])) == role) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> BlockedSeries::rows_in_block(int block) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < block_ids.size(); ++i)
    if (block_ids[i] == block) rows.push_back(i);
  return rows;
}

std::vector<int> BlockedSeries::blocks_with_role(BlockRole role) const {
  std::vector<int> out;
  for (std::size_t b = 0; b < roles.size(); ++b)
    if (roles[b] == role) out.push_back(static_cast<int>(b));
  return out;
}

Matrix BlockedSeries::features_for(BlockRole role) const { return select_rows(features, rows_with_role(role)); }

Vector BlockedSeries::targets_for(BlockRole role) const {
  Vector y;
  for (auto i : rows_with_role(role)) y.push_back(targets[i]);
  return y;
}

Matrix BlockedSeries::block_features(int block) const { return select_rows(features, rows_in_block(block)); }

Vector BlockedSeries::block_targets(int block) const {
  Vector y;
  for (auto i : rows_in_block(block)) y.push_back(targets[i]);
  return y;
}

double BlockedSeries::block_midpoint(int block) const {
  const auto& span = block_time_spans.at(static_cast<std::size_t>(block));
  return 0.5 * (span.first + span.second);
}

void BlockedSeries::validate() const {
  const std::size_t n = features.rows();
  if (targets.size() != n || block_ids.size() != n) throw DataError(name + ": row count mismatch between arrays");
  if (!std::is_sorted(block_ids.begin(), block_ids.end())) throw DataError(name + ": block ids not nondecreasing");
  if (block_time_spans.size() != roles.size()) throw DataError(name + ": block span count mismatch");
  if (standardization.size() != features.cols()) throw DataError(name + ": standardization size mismatch");
  for (const auto& s : standardization)
    if (!(s.std > 0.0)) throw DataError(name + ": feature with zero training std");
  for (int b : block_ids)
    if (b < 0 || static_cast<std::size_t>(b) >= roles.size()) throw DataError(name + ": block id out of range");
  for (double v : features.data())
    if (!std::isfinite(v)) throw DataError(name + ": non-finite feature after cleaning");
  for (double v : targets)
    if (!std::isfinite(v)) throw DataError(name + ": non-finite target after cleaning");
}

SplitCounts split_counts(const BlockedSeries& s) {
  return {s.count(BlockRole::train), s.count(BlockRole::val), s.count(BlockRole::deploy),
          s.blocks_with_role(BlockRole::deploy).size()};
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return std::string(s.substr(b, e - b + 1));
}

// Column names in the Tetouan file contain doubled spaces ("Zone 2  Power ...").
std::string normalize_name(std::string_view s) {
  std::string out;
  for (char c : trim(s)) {
    if (c == ' ' && !out.empty() && out.back() == ' ') continue;
    out += c;
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(std::string text, bool decimal_comma, std::size_t line_no) {
  text = trim(text);
  if (decimal_comma) std::replace(text.begin(), text.end(), ',', '.');
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != last)
    throw DataError(fmt::format("line {}: cannot parse number '{}'", line_no, text));
  return v;
}

int parse_int(std::string_view s, std::size_t line_no) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(fmt::format("line {}: cannot parse integer '{}'", line_no, std::string(s)));
  return v;
}

std::vector<std::string_view> split_view(std::string_view s, std::string_view seps) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || seps.find(s[i]) != std::string_view::npos) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Minutes since 1970-01-01.
long long minutes_since_epoch(int year, int month, int day, int hour, int minute, std::size_t line_no) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour < 0 || hour > 23 || minute < 0 || minute > 59)
    throw DataError(fmt::format("line {}: invalid date/time", line_no));
  return static_cast<long long>(sys_days{ymd}.time_since_epoch().count()) * 1440LL + hour * 60LL + minute;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RawRow {
  long long minute;
  Vector features;
  double target;
};

std::size_t find_column(const std::vector<std::string>& header, const std::string& name, const std::string& file) {
  const std::string want = normalize_name(name);
  for (std::size_t i = 0; i < header.size(); ++i)
    if (normalize_name(header[i]) == want) return i;
  throw DataError(fmt::format("{}: missing column '{}'", file, name));
}

// Fill standardized features/targets and validate.
void finalize_series(BlockedSeries& s, std::vector<RawRow>& rows, std::vector<int>& block_of_row, bool standardize_target) {
  const std::size_t d = s.feature_names.size();
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(block_of_row[a], rows[a].minute) < std::tie(block_of_row[b], rows[b].minute);
  });

  s.features = Matrix(rows.size(), d);
  s.targets.assign(rows.size(), 0.0);
  s.block_ids.assign(rows.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = rows[order[i]];
    std::copy(r.features.begin(), r.features.end(), s.features.row(i).begin());
    s.targets[i] = r.target;
    s.block_ids[i] = block_of_row[order[i]];
  }

  const auto train_rows = s.rows_with_role(BlockRole::train);
  if (train_rows.empty()) throw DataError(s.name + ": empty training window");
  const double n_train = static_cast<double>(train_rows.size());
  s.standardization.assign(d, {});
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (auto i : train_rows) mean += s.features(i, c);
    mean /= n_train;
    double var = 0.0;
    for (auto i : train_rows) var += (s.features(i, c) - mean) * (s.features(i, c) - mean);
    const double sd = std::sqrt(var / n_train);
    if (!(sd > 0.0)) throw DataError(fmt::format("{}: feature '{}' constant on training window", s.name, s.feature_names[c]));
    s.standardization[c] = {mean, sd};
    for (std::size_t i = 0; i < s.features.rows(); ++i) s.features(i, c) = (s.features(i, c) - mean) / sd;
  }
  if (standardize_target) {
    double mean = 0.0;
    for (auto i : train_rows) mean += s.targets[i];
    mean /= n_train;
    double var = 0.0;
    for (auto i : train_rows) var += (s.targets[i] - mean) * (s.targets[i] - mean);
    const double sd = std::sqrt(var / n_train);
    if (!(sd > 0.0)) throw DataError(s.name + ": constant target on training window");
    s.target_scaling = {mean, sd};
    s.target_standardized = true;
    for (auto& y : s.targets) y = (y - mean) / sd;
  }
  s.validate();
}

void check_counts(const BlockedSeries& s, const SplitCounts& expected, const LoadOptions& opts) {
  if (!opts.enforce_reference_counts) return;
  const SplitCounts got = split_counts(s);
  if (got != expected)
    throw DataError(fmt::format(
        "{}: split counts train/val/deploy/blocks = {}/{}/{}/{}, expected {}/{}/{}/{}", s.name, got.train, got.val,
        got.deploy, got.deploy_blocks, expected.train, expected.val, expected.deploy, expected.deploy_blocks));
}

}  // namespace

BlockedSeries load_air_quality(const std::string& path, const LoadOptions& opts) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split(line, ';');
  const std::size_t date_col = find_column(header, "Date", path);
  const std::size_t time_col = find_column(header, "Time", path);
  const std::size_t target_col = find_column(header, kAirQualityTarget, path);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : kAirQualityFeatures) feature_cols.push_back(find_column(header, f, path));

  struct Parsed {
    long long minute;
    Vector features;
    double target;
    bool missing;
  };
  std::vector<Parsed> parsed;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = split(line, ';');
    if (cells.size() <= date_col || trim(cells[date_col]).empty()) continue;  // trailing ";;;;" rows
    if (cells.size() < header.size() - 2) throw DataError(fmt::format("{} line {}: too few fields", path, line_no));
    const std::string date_text = trim(cells[date_col]);
    const std::string time_text = trim(cells[time_col]);
    const auto date = split_view(date_text, "/");
    const auto time = split_view(time_text, ".:");
    if (date.size() != 3 || time.size() < 2) throw DataError(fmt::format("{} line {}: bad timestamp", path, line_no));
    Parsed p;
    p.minute = minutes_since_epoch(parse_int(date[2], line_no), parse_int(date[1], line_no), parse_int(date[0], line_no),
                                   parse_int(time[0], line_no), parse_int(time[1], line_no), line_no);
    p.target = parse_number(cells[target_col], true, line_no);
    p.missing = p.target == kAirQualityMissing;
    for (auto c : feature_cols) {
      const double v = parse_number(cells[c], true, line_no);
      p.missing = p.missing || v == kAirQualityMissing;
      p.features.push_back(v);
    }
    parsed.push_back(std::move(p));
  }
  if (parsed.empty()) throw DataError(path + ": no data rows");

  // Windows on the raw timeline, before dropping missing rows.
  const long long start = parsed.front().minute;
  long long last = start;
  for (const auto& p : parsed) last = std::max(last, p.minute);
  constexpr long long kDay = 1440;
  const long long train_end = start + 84 * kDay;
  const long long val_end = train_end + 28 * kDay;
  const long long block_len = 14 * kDay;

  BlockedSeries s;
  s.name = "air_quality";
  s.feature_names.assign(kAirQualityFeatures.begin(), kAirQualityFeatures.end());
  s.target_name = kAirQualityTarget;
  s.roles = {BlockRole::train, BlockRole::val};
  s.block_time_spans = {{0.0, 84.0}, {84.0, 112.0}};
  const long long deploy_blocks = last >= val_end ? (last - val_end) / block_len + 1 : 0;
  for (long long b = 0; b < deploy_blocks; ++b) {
    s.roles.push_back(BlockRole::deploy);
    const double lo = static_cast<double>(val_end + b * block_len - start) / kDay;
    const double hi = std::min(static_cast<double>(val_end + (b + 1) * block_len - start),
                               static_cast<double>(last + 60 - start)) / kDay;
    s.block_time_spans.emplace_back(lo, hi);
  }

  std::vector<RawRow> rows;
  std::vector<int> block_of_row;
  for (const auto& p : parsed) {
    if (p.missing) continue;
    if (p.minute < start) throw DataError(path + ": timestamps before the first row");
    int block;
    if (p.minute < train_end) block = 0;
    else if (p.minute < val_end) block = 1;
    else block = 2 + static_cast<int>((p.minute - val_end) / block_len);
    rows.push_back({p.minute, p.features, p.target});
    block_of_row.push_back(block);
  }
  finalize_series(s, rows, block_of_row, true);
  s.source_sha256 = sha256_hex(text);
  check_counts(s, kAirQualityCounts, opts);
  return s;
}

BlockedSeries load_tetouan(const std::string& path, const LoadOptions& opts) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split(line, ',');
  const std::size_t time_col = find_column(header, "DateTime", path);
  const std::size_t target_col = find_column(header, kTetouanTarget, path);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : kTetouanFeatures) feature_cols.push_back(find_column(header, f, path));

  BlockedSeries s;
  s.name = "tetouan";
  s.feature_names.assign(kTetouanFeatures.begin(), kTetouanFeatures.end());
  s.target_name = kTetouanTarget;

  std::vector<RawRow> rows;
  std::vector<int> months;
  int year_seen = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() < header.size()) throw DataError(fmt::format("{} line {}: too few fields", path, line_no));
    // "M/D/YYYY H:MM"
    const std::string stamp = trim(cells[time_col]);
    const auto dt = split_view(stamp, " ");
    if (dt.size() != 2) throw DataError(fmt::format("{} line {}: bad DateTime", path, line_no));
    const auto date = split_view(dt[0], "/");
    const auto time = split_view(dt[1], ":");
    if (date.size() != 3 || time.size() < 2) throw DataError(fmt::format("{} line {}: bad DateTime", path, line_no));
    const int month = parse_int(date[0], line_no), day = parse_int(date[1], line_no), year = parse_int(date[2], line_no);
    if (year_seen < 0) year_seen = year;
    if (year != year_seen) throw DataError(fmt::format("{} line {}: data spans more than one year", path, line_no));
    RawRow r;
    r.minute = minutes_since_epoch(year, month, day, parse_int(time[0], line_no), parse_int(time[1], line_no), line_no);
    for (auto c : feature_cols) r.features.push_back(parse_number(cells[c], false, line_no));
    r.target = parse_number(cells[target_col], false, line_no);
    rows.push_back(std::move(r));
    months.push_back(month);
  }
  if (rows.empty()) throw DataError(path + ": no data rows");

  using namespace std::chrono;
  const auto year_start = sys_days{std::chrono::year{year_seen} / January / 1};
  auto month_start_day = [&](int m) {
    const auto ms = sys_days{std::chrono::year{year_seen} / std::chrono::month{static_cast<unsigned>(m)} / 1};
    return static_cast<double>((ms - year_start).count());
  };
  s.roles = {BlockRole::train, BlockRole::val};
  s.block_time_spans = {{month_start_day(1), month_start_day(5)}, {month_start_day(5), month_start_day(7)}};
  long long last = rows.front().minute;
  for (const auto& r : rows) last = std::max(last, r.minute);
  const double last_day =
      static_cast<double>(last + 10 - static_cast<long long>(year_start.time_since_epoch().count()) * 1440) / 1440.0;
  for (int m = 7; m <= 12; ++m) {
    s.roles.push_back(BlockRole::deploy);
    const double hi = m < 12 ? month_start_day(m + 1) : 365.0 + (std::chrono::year{year_seen}.is_leap() ? 1 : 0);
    s.block_time_spans.emplace_back(month_start_day(m), std::min(hi, last_day));
  }

  std::vector<int> block_of_row(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int m = months[i];
    block_of_row[i] = m <= 4 ? 0 : (m <= 6 ? 1 : 2 + (m - 7));
  }
  finalize_series(s, rows, block_of_row, false);
  s.source_sha256 = sha256_hex(text);
  check_counts(s, kTetouanCounts, opts);
  return s;
}

}  // namespace driftguard
