#pragma once

// Output plumbing: 17-digit CSV, JSON reports, hashing.

#include "semiflex/chain.hpp"
#include "semiflex/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace semiflex {

/// Shortest decimal form that is not shorter than 17 significant digits ("%.17g").
std::string format_double(double x);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  /// Empty optional cells are written as empty fields.
  void row(const std::vector<double>& values);
  void row_cells(const std::vector<std::string>& cells);
  std::string str() const { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t width_;
  std::string buf_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
/// Pretty-printed with a trailing newline; key order is nlohmann's sorted order.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// FNV-1a 64-bit, lower-case hex.
std::string fnv1a_hex(const std::string& bytes);

nlohmann::json superop_to_json(const SuperOp& a);
SuperOp superop_from_json(const nlohmann::json& j);

CsvWriter trajectory_csv(const ChainTrajectory& traj);
CsvWriter rescaled_csv(const RescaledPath& path);

nlohmann::json to_json(const CovarianceEstimate& c, std::uint64_t seed);
nlohmann::json to_json(const CltReport& r);

/// Finite doubles pass through; inf/nan become strings.
nlohmann::json number_or_string(double x);

}  // namespace semiflex
