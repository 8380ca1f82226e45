#include "exnexus/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace exnexus::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw std::invalid_argument("CsvTable: row width does not match header");
  rows_.push_back(std::move(cells));
}

void CsvTable::add_numbers(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  add_row(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::size_t CsvData::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw IoError("csv: missing column '" + std::string(name) + "'");
}

CsvData parse_csv(std::string_view text) {
  CsvData out;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (first) {
      out.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != out.header.size()) throw IoError("csv: ragged row");
      out.rows.push_back(std::move(cells));
    }
  }
  if (first) throw IoError("csv: empty input");
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  const auto parent = path.parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) {
      f.close();
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json vec_json(const Vec3& v) { return json::array({complex_json(v[0]), complex_json(v[1]), complex_json(v[2])}); }

json base_metadata(std::string_view command) {
  return json{{"toolkit", "exnexus"},
              {"version", kVersion},
              {"command", std::string(command)},
              {"units", kUnits},
              {"status", "ok"},
              {"flags", json::array()},
              {"parameters", json::object()},
              {"results", json::object()},
              {"tables", json::array()}};
}

CsvTable measurements_table(const MeasurementSet& m) {
  CsvTable t({"t", "observable", "mean", "sd", "repetitions"});
  for (const auto& r : m.records)
    t.add_row({format_number(r.t), to_string(r.label), format_number(r.mean), format_number(r.sd),
               std::to_string(r.repetitions)});
  return t;
}

json measurements_json(const MeasurementSet& m) {
  json j{{"w", m.w}, {"nominal_gamma", m.nominal_gamma}};
  if (m.provenance) {
    const auto& p = *m.provenance;
    j["provenance"] = {{"gamma1", p.gamma1},       {"gamma2", p.gamma2},
                       {"t_m", p.t_m},             {"noise_sigma", p.noise_sigma},
                       {"repetitions", p.repetitions}, {"initial_level", p.initial_level}};
    if (p.seed) j["provenance"]["seed"] = *p.seed;
  }
  return j;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  return p.replace_extension(".json");
}

void write_measurements(const MeasurementSet& m, const std::filesystem::path& csv, json extra) {
  write_atomic(csv, measurements_table(m).str());
  json meta = extra.is_null() ? json::object() : std::move(extra);
  meta["dataset"] = measurements_json(m);
  write_atomic(sidecar_path(csv), meta.dump(2) + "\n");
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IoError("csv: bad number '" + s + "'");
  return v;
}

}  // namespace

MeasurementSet read_measurements(const std::filesystem::path& csv) {
  const auto data = parse_csv(read_file(csv));
  const auto ct = data.column("t"), co = data.column("observable"), cm = data.column("mean"),
             cs = data.column("sd"), cr = data.column("repetitions");
  MeasurementSet m;
  for (const auto& row : data.rows) {
    MeasurementRecord r;
    r.t = parse_double(row[ct]);
    try {
      r.label = observable_from_string(row[co]);
    } catch (const std::invalid_argument&) {
      throw IoError("csv: unknown observable '" + row[co] + "'");
    }
    r.mean = parse_double(row[cm]);
    r.sd = parse_double(row[cs]);
    r.repetitions = static_cast<int>(parse_double(row[cr]));
    m.records.push_back(r);
  }
  const auto side = sidecar_path(csv);
  if (std::filesystem::exists(side)) {
    json j;
    try {
      j = json::parse(read_file(side));
    } catch (const json::exception& e) {
      throw IoError("sidecar " + side.string() + ": " + e.what());
    }
    const json& d = j.contains("dataset") ? j["dataset"] : j;
    m.w = d.value("w", 0.0);
    m.nominal_gamma = d.value("nominal_gamma", 0.0);
    if (d.contains("provenance")) {
      const auto& pj = d["provenance"];
      Provenance p;
      p.gamma1 = pj.value("gamma1", 0.0);
      p.gamma2 = pj.value("gamma2", 0.0);
      p.t_m = pj.value("t_m", 0.0);
      p.noise_sigma = pj.value("noise_sigma", 0.0);
      p.repetitions = pj.value("repetitions", 1);
      p.initial_level = pj.value("initial_level", 2);
      if (pj.contains("seed")) p.seed = pj["seed"].get<std::uint64_t>();
      m.provenance = p;
    }
  }
  return m;
}

std::vector<double> Range::values() const {
  if (n == 1) return {min};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = i + 1 == n ? max : min + (max - min) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

Range parse_range(std::string_view text) {
  auto num = [](std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
      throw std::invalid_argument("bad number '" + std::string(s) + "' in range");
    return v;
  };
  const auto c1 = text.find(':');
  if (c1 == std::string_view::npos) {
    const double v = num(text);
    return {v, v, 1};
  }
  const auto c2 = text.find(':', c1 + 1);
  if (c2 == std::string_view::npos) throw std::invalid_argument("range must be min:max:n");
  Range r;
  r.min = num(text.substr(0, c1));
  r.max = num(text.substr(c1 + 1, c2 - c1 - 1));
  const auto ns = text.substr(c2 + 1);
  std::size_t n = 0;
  const auto res = std::from_chars(ns.data(), ns.data() + ns.size(), n);
  if (ns.empty() || res.ec != std::errc{} || res.ptr != ns.data() + ns.size())
    throw std::invalid_argument("bad count in range");
  if (n < 2) throw std::invalid_argument("range count must be >= 2");
  if (!(r.max > r.min)) throw std::invalid_argument("range requires max > min");
  r.n = n;
  return r;
}

}  // namespace exnexus::io
