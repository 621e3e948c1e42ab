#ifndef GKPSIM_IO_HPP
#define GKPSIM_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gkpmath.hpp"

namespace gkpsim {

inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

// one comment line carrying the resolved run record
inline std::string csv_preamble(const std::string& what, const nlohmann::ordered_json& run) {
  return "# " + what + " " + run.dump() + "\n";
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<double>& v) {
    if (v.size() != header_.size()) throw Error(ErrorKind::dimension_mismatch, "csv row width mismatch");
    rows_.push_back(v);
  }
  std::string str() const {
    std::ostringstream o;
    for (size_t i = 0; i < header_.size(); ++i) o << (i ? "," : "") << header_[i];
    o << "\n";
    for (const auto& r : rows_) {
      for (size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << fmt_num(r[i]);
      o << "\n";
    }
    return o.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

// two header rows hold the axes; body row i is a_i followed by re,im pairs over b
inline std::string grid_csv(const CharGrid& g) {
  std::ostringstream o;
  o << "axis_a," << coord_name(g.axis_a);
  for (long i = 0; i < g.a.size(); ++i) o << "," << fmt_num(g.a(i));
  o << "\naxis_b," << coord_name(g.axis_b);
  for (long j = 0; j < g.b.size(); ++j) o << "," << fmt_num(g.b(j));
  o << "\n";
  for (long i = 0; i < g.a.size(); ++i) {
    o << fmt_num(g.a(i));
    for (long j = 0; j < g.b.size(); ++j) o << "," << fmt_num(g.values(i, j).real()) << "," << fmt_num(g.values(i, j).imag());
    o << "\n";
  }
  return o.str();
}

inline CharGrid grid_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  if (rows.size() < 2) throw Error(ErrorKind::invalid_config, "grid csv needs two axis rows");
  auto axis_index = [](const std::string& n) {
    for (int k = 0; k < 4; ++k)
      if (n == coord_name(k)) return k;
    throw Error(ErrorKind::invalid_config, "unknown axis '" + n + "'");
  };
  CharGrid g;
  g.axis_a = axis_index(rows[0].at(1));
  g.axis_b = axis_index(rows[1].at(1));
  g.a.resize(long(rows[0].size()) - 2);
  g.b.resize(long(rows[1].size()) - 2);
  for (long i = 0; i < g.a.size(); ++i) g.a(i) = std::stod(rows[0][size_t(i) + 2]);
  for (long j = 0; j < g.b.size(); ++j) g.b(j) = std::stod(rows[1][size_t(j) + 2]);
  if (long(rows.size()) - 2 != g.a.size()) throw Error(ErrorKind::invalid_config, "grid csv row count mismatch");
  g.values.resize(g.a.size(), g.b.size());
  for (long i = 0; i < g.a.size(); ++i) {
    const auto& r = rows[size_t(i) + 2];
    if (long(r.size()) != 1 + 2 * g.b.size()) throw Error(ErrorKind::invalid_config, "grid csv row width mismatch");
    for (long j = 0; j < g.b.size(); ++j) g.values(i, j) = cplx(std::stod(r[size_t(1 + 2 * j)]), std::stod(r[size_t(2 + 2 * j)]));
  }
  return g;
}

inline nlohmann::ordered_json grid_to_json(const CharGrid& g) {
  nlohmann::ordered_json j;
  j["axis_a"] = coord_name(g.axis_a);
  j["axis_b"] = coord_name(g.axis_b);
  j["a"] = std::vector<double>(g.a.data(), g.a.data() + g.a.size());
  j["b"] = std::vector<double>(g.b.data(), g.b.data() + g.b.size());
  nlohmann::ordered_json re = nlohmann::ordered_json::array(), im = nlohmann::ordered_json::array();
  for (long i = 0; i < g.a.size(); ++i) {
    std::vector<double> r, m;
    for (long k = 0; k < g.b.size(); ++k) {
      r.push_back(g.values(i, k).real());
      m.push_back(g.values(i, k).imag());
    }
    re.push_back(r);
    im.push_back(m);
  }
  j["re"] = re;
  j["im"] = im;
  j["shots_per_point"] = g.shots_per_point;
  return j;
}

// temp file + rename so readers never see a partial artifact
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace gkpsim

#endif
