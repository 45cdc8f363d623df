#pragma once

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <fmt/format.h>

namespace fixtures {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("driftguard_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Civil date from days since 1970-01-01.
struct Ymd {
  int y, m, d;
};
inline Ymd civil_from_days(long long z) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long y = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}
inline long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

inline std::string comma_decimal(double v) {
  std::string s = fmt::format("{}", v);
  for (auto& c : s)
    if (c == '.') c = ',';
  return s;
}

// Hourly Air Quality file in the UCI layout covering the original timeline
// (10/03/2004 18.00.00 to 04/04/2005 14.00.00, 9357 rows). `missing(i)`
// marks row i with -200, in CO(GT) for even i and in T for odd i. Feature values are smooth functions of
// the row index so standardization can be checked against them.
inline double aq_feature(std::size_t row, std::size_t j) {
  return 1000.0 + 50.0 * static_cast<double>(j) + 0.25 * static_cast<double>(row % 97) + 3.0 * static_cast<double>(j * row % 13);
}
inline double aq_target(std::size_t row) { return 0.5 + 0.1 * static_cast<double>(row % 37); }

inline std::size_t write_air_quality(const std::filesystem::path& path,
                                     const std::function<bool(std::size_t)>& missing = {},
                                     std::size_t rows = 9357) {
  std::ofstream out(path, std::ios::binary);
  out << "Date;Time;CO(GT);PT08.S1(CO);NMHC(GT);C6H6(GT);PT08.S2(NMHC);NOx(GT);PT08.S3(NOx);NO2(GT);"
         "PT08.S4(NO2);PT08.S5(O3);T;RH;AH;;\n";
  const long long start_day = days_from_civil(2004, 3, 10);
  for (std::size_t i = 0; i < rows; ++i) {
    const long long hour = 18 + static_cast<long long>(i);
    const Ymd ymd = civil_from_days(start_day + hour / 24);
    const bool miss = missing && missing(i);
    const std::string target = miss && i % 2 == 0 ? "-200" : comma_decimal(aq_target(i));
    auto f = [&](std::size_t j) { return miss && i % 2 == 1 && j == 5 ? std::string("-200") : comma_decimal(aq_feature(i, j)); };
    out << fmt::format("{:02}/{:02}/{};{:02}.00.00;{};{};150;11,9;{};166;{};113;{};{};{};{};{};;\n", ymd.d, ymd.m,
                       ymd.y, hour % 24, target, f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7));
  }
  out << ";;;;;;;;;;;;;;;;\n;;;;;;;;;;;;;;;;\n";
  return rows;
}

// Ten-minute Tetouan file for 2017-01-01 00:00 through 2017-12-30 23:50
// (52416 rows), in the UCI layout.
inline double tet_feature(std::size_t row, std::size_t j) {
  return 10.0 * static_cast<double>(j + 1) + 0.01 * static_cast<double>((row * (j + 3)) % 211);
}
inline double tet_target(std::size_t row) { return 30000.0 + 5.0 * static_cast<double>(row % 144); }

inline std::size_t write_tetouan(const std::filesystem::path& path, std::size_t days = 364) {
  std::ofstream out(path, std::ios::binary);
  out << "DateTime,Temperature,Humidity,Wind Speed,general diffuse flows,diffuse flows,Zone 1 Power Consumption,"
         "Zone 2  Power Consumption,Zone 3  Power Consumption\n";
  const long long start_day = days_from_civil(2017, 1, 1);
  std::size_t row = 0;
  for (std::size_t day = 0; day < days; ++day) {
    const Ymd ymd = civil_from_days(start_day + static_cast<long long>(day));
    for (int slot = 0; slot < 144; ++slot, ++row) {
      out << fmt::format("{}/{}/{} {}:{:02},{},{},{},{},{},{},20000,18000\n", ymd.m, ymd.d, ymd.y, slot / 6,
                         (slot % 6) * 10, tet_feature(row, 0), tet_feature(row, 1), tet_feature(row, 2),
                         tet_feature(row, 3), tet_feature(row, 4), tet_target(row));
    }
  }
  return row;
}

}  // namespace fixtures
