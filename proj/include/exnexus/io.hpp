#pragma once

// Serialization: locale-independent CSV, JSON metadata, atomic file writes
// and the measurement-set file format.

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exnexus/dynamics.hpp"
#include "exnexus/linalg.hpp"

namespace exnexus::io {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kUnits = "dimensionless: energies and rates in units of Omega_1 (Omega_1 = 1), time as Omega_1 t";

// Shortest form that still carries 17 significant digits, '.' separator.
std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  // Cells must match the header width.
  void add_row(std::vector<std::string> cells);
  void add_numbers(const std::vector<double>& values);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Parsed CSV: header plus string cells.
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws IoError when absent
};

CsvData parse_csv(std::string_view text);

// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

json complex_json(Complex z);
json vec_json(const Vec3& v);

// Fields shared by every metadata document.
json base_metadata(std::string_view command);

// Measurement sets: CSV with t, observable, mean, sd, repetitions, plus a
// JSON sidecar (same stem) holding w, nominal gamma and provenance.
CsvTable measurements_table(const MeasurementSet& m);
json measurements_json(const MeasurementSet& m);
std::filesystem::path sidecar_path(const std::filesystem::path& csv);
void write_measurements(const MeasurementSet& m, const std::filesystem::path& csv, json extra = json::object());
// The sidecar is optional on input; w and nominal gamma default to 0 without it.
MeasurementSet read_measurements(const std::filesystem::path& csv);

// "min:max:n" with n >= 2 (or "v" for a single point).
struct Range {
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 1;

  std::vector<double> values() const;
};

Range parse_range(std::string_view text);

}  // namespace exnexus::io
