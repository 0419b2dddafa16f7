#include "semiflex/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace semiflex {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  row_cells(header);
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(std::isnan(v) ? std::string() : format_double(v));
  row_cells(cells);
}

void CsvWriter::row_cells(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::invalid_argument("CsvWriter: row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) buf_ += ',';
    buf_ += cells[i];
  }
  buf_ += '\n';
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, buf_); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json superop_to_json(const SuperOp& a) {
  const auto& e = a.entries();
  std::vector<double> flat;
  flat.reserve(e.size());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) flat.push_back(e(i, j));
  return {{"d", a.dim()}, {"entries", flat}};
}

SuperOp superop_from_json(const json& j) {
  const int d = j.at("d").get<int>();
  return SuperOp(d, matrix_from_json(j.at("entries")));
}

CsvWriter trajectory_csv(const ChainTrajectory& traj) {
  std::vector<std::string> h{"step"};
  for (int i = 1; i <= traj.dim; ++i) h.push_back("x" + std::to_string(i));
  CsvWriter w(h);
  std::vector<double> row(traj.dim + 1);
  for (std::size_t n = 0; n < traj.positions.size(); ++n) {
    row[0] = static_cast<double>(n);
    for (int i = 0; i < traj.dim; ++i) row[i + 1] = traj.positions[n](i);
    w.row(row);
  }
  return w;
}

CsvWriter rescaled_csv(const RescaledPath& path) {
  const int d = path.knots.empty() ? 0 : static_cast<int>(path.knots.front().size());
  std::vector<std::string> h{"t"};
  for (int i = 1; i <= d; ++i) h.push_back("y" + std::to_string(i));
  CsvWriter w(h);
  std::vector<double> row(d + 1);
  for (std::size_t j = 0; j < path.knots.size(); ++j) {
    row[0] = static_cast<double>(j) / static_cast<double>(path.N);
    for (int i = 0; i < d; ++i) row[i + 1] = path.knots[j](i);
    w.row(row);
  }
  return w;
}

json number_or_string(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

json to_json(const CovarianceEstimate& c, std::uint64_t seed) {
  json mean = json::array(), mean_se = json::array();
  for (Eigen::Index i = 0; i < c.mean.size(); ++i) {
    mean.push_back(c.mean(i));
    mean_se.push_back(c.mean_se(i));
  }
  return {{"matrix", matrix_to_json(c.matrix)},
          {"se", matrix_to_json(c.se)},
          {"mean", mean},
          {"mean_se", mean_se},
          {"replicas", c.replicas},
          {"n", c.n},
          {"seed", seed}};
}

json to_json(const CltReport& r) {
  json ks = json::array(), p = json::array();
  for (double x : r.ks) ks.push_back(x);
  for (double x : r.p_values) p.push_back(x);
  json j{{"n", r.n},       {"replicas", r.replicas}, {"sigma2", r.sigma2}, {"alpha", r.alpha},
         {"centered", r.centered}, {"ks", ks},     {"p_values", p},        {"degenerate", r.degenerate},
         {"pass", r.pass}};
  if (r.correlation.size() > 0) j["correlation"] = matrix_to_json(r.correlation);
  return j;
}

}  // namespace semiflex
