#pragma once

#include "mkt/core.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mkt {

/// Instance documents are JSON objects:
///
///   {"n": 2, "m": 2, "budgets": [1, 1], "valuation": "linear",
///    "matrix": [[1, 0], [0.5, 0.5]]}
///
/// "rho" is required for "ces" and ignored otherwise. Numbers are written
/// with 17 significant digits, so a write/read cycle is bit-exact.
std::string instance_to_text(const Instance& instance);
Instance instance_from_text(const std::string& text);
Instance read_instance(const std::string& path);
void write_instance(const std::string& path, const Instance& instance);

/// Named-matrix documents ({"bids": [[...]]}, {"reports": [[...]]}, ...).
Matrix matrix_from_text(const std::string& text, const std::string& key);
Matrix read_matrix(const std::string& path, const std::string& key);
Vector read_vector(const std::string& path, const std::string& key);
std::string matrix_to_text(const std::string& key, const Matrix& matrix);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Flat key-value report, one `key = value` line per entry in insertion
/// order. Reals use 12 significant digits; matrices are row-major nested
/// arrays.
class Report {
 public:
  Report& add(const std::string& key, double value);
  Report& add(const std::string& key, long long value);
  Report& add(const std::string& key, int value) { return add(key, static_cast<long long>(value)); }
  Report& add(const std::string& key, bool value);
  Report& add(const std::string& key, const std::string& value);
  Report& add(const std::string& key, const char* value) { return add(key, std::string(value)); }
  Report& add(const std::string& key, const Vector& value);
  Report& add(const std::string& key, const Matrix& value);
  Report& add(const std::string& key, const std::vector<Index>& value);
  /// Appends every entry of `other` as `prefix.key`.
  Report& merge(const std::string& prefix, const Report& other);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  /// Value text for `key`; throws std::out_of_range when absent.
  const std::string& at(const std::string& key) const;
  std::string str() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_real(double value);
std::ostream& operator<<(std::ostream& os, const Report& report);

}  // namespace mkt
