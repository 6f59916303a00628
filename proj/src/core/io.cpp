#include "mkt/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mkt {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) {
    throw std::invalid_argument(what + " must be a non-empty array of rows");
  }
  const auto n = static_cast<Index>(rows.size());
  if (!rows[0].is_array() || rows[0].empty()) {
    throw std::invalid_argument(what + " rows must be non-empty arrays");
  }
  const auto m = static_cast<Index>(rows[0].size());
  Matrix out(n, m);
  for (Index i = 0; i < n; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != m) {
      throw std::invalid_argument(what + " is ragged");
    }
    for (Index j = 0; j < m; ++j) {
      const json& cell = row[static_cast<std::size_t>(j)];
      if (!cell.is_number()) throw std::invalid_argument(what + " has a non-numeric entry");
      out(i, j) = cell.get<double>();
    }
  }
  return out;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed document: ") + e.what());
  }
}

}  // namespace

std::string instance_to_text(const Instance& instance) {
  json doc;
  doc["n"] = instance.n();
  doc["m"] = instance.m();
  doc["budgets"] = std::vector<double>(instance.budgets().data(),
                                       instance.budgets().data() + instance.n());
  doc["valuation"] = to_string(instance.kind());
  if (instance.kind() == ValuationKind::CES) doc["rho"] = instance.valuations().rho();
  doc["matrix"] = matrix_json(instance.valuations().matrix());
  return doc.dump(2) + "\n";
}

Instance instance_from_text(const std::string& text) {
  const json doc = parse_json(text);
  try {
    const auto n = doc.at("n").get<Index>();
    const auto m = doc.at("m").get<Index>();
    const auto budgets = doc.at("budgets").get<std::vector<double>>();
    const auto kind = parse_valuation_kind(doc.at("valuation").get<std::string>());
    Matrix v = matrix_from_json(doc.at("matrix"), "matrix");
    if (v.rows() != n || v.cols() != m) {
      throw std::invalid_argument("matrix shape does not match n, m");
    }
    if (static_cast<Index>(budgets.size()) != n) {
      throw std::invalid_argument("budgets length does not match n");
    }
    Vector b = Eigen::Map<const Vector>(budgets.data(), n);
    switch (kind) {
      case ValuationKind::Linear:
        return Instance(b, ValuationProfile::linear(std::move(v)));
      case ValuationKind::Leontief:
        return Instance(b, ValuationProfile::leontief(std::move(v)));
      case ValuationKind::CES:
        return Instance(b, ValuationProfile::ces(std::move(v), doc.at("rho").get<double>()));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed instance: ") + e.what());
  }
  throw std::invalid_argument("malformed instance");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << contents;
}

Instance read_instance(const std::string& path) { return instance_from_text(read_file(path)); }

void write_instance(const std::string& path, const Instance& instance) {
  write_file(path, instance_to_text(instance));
}

Matrix matrix_from_text(const std::string& text, const std::string& key) {
  const json doc = parse_json(text);
  if (!doc.contains(key)) throw std::invalid_argument("document has no '" + key + "' field");
  return matrix_from_json(doc.at(key), key);
}

Matrix read_matrix(const std::string& path, const std::string& key) {
  return matrix_from_text(read_file(path), key);
}

Vector read_vector(const std::string& path, const std::string& key) {
  const json doc = parse_json(read_file(path));
  if (!doc.contains(key)) throw std::invalid_argument("document has no '" + key + "' field");
  try {
    const auto values = doc.at(key).get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  } catch (const json::exception& e) {
    throw std::invalid_argument("'" + key + "' is not a numeric array");
  }
}

std::string matrix_to_text(const std::string& key, const Matrix& matrix) {
  json doc;
  doc["n"] = matrix.rows();
  doc["m"] = matrix.cols();
  doc[key] = matrix_json(matrix);
  return doc.dump(2) + "\n";
}

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

Report& Report::add(const std::string& key, double value) {
  entries_.emplace_back(key, format_real(value));
  return *this;
}

Report& Report::add(const std::string& key, long long value) {
  entries_.emplace_back(key, std::to_string(value));
  return *this;
}

Report& Report::add(const std::string& key, bool value) {
  entries_.emplace_back(key, value ? "true" : "false");
  return *this;
}

Report& Report::add(const std::string& key, const std::string& value) {
  entries_.emplace_back(key, value);
  return *this;
}

Report& Report::add(const std::string& key, const Vector& value) {
  std::string s = "[";
  for (Index i = 0; i < value.size(); ++i) {
    if (i) s += ", ";
    s += format_real(value(i));
  }
  entries_.emplace_back(key, s + "]");
  return *this;
}

Report& Report::add(const std::string& key, const Matrix& value) {
  std::string s = "[";
  for (Index i = 0; i < value.rows(); ++i) {
    if (i) s += ", ";
    s += "[";
    for (Index j = 0; j < value.cols(); ++j) {
      if (j) s += ", ";
      s += format_real(value(i, j));
    }
    s += "]";
  }
  entries_.emplace_back(key, s + "]");
  return *this;
}

Report& Report::add(const std::string& key, const std::vector<Index>& value) {
  std::string s = "[";
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(value[i]);
  }
  entries_.emplace_back(key, s + "]");
  return *this;
}

Report& Report::merge(const std::string& prefix, const Report& other) {
  for (const auto& [k, v] : other.entries_) entries_.emplace_back(prefix + "." + k, v);
  return *this;
}

const std::string& Report::at(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw std::out_of_range("report has no key '" + key + "'");
}

std::string Report::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::ostream& operator<<(std::ostream& os, const Report& report) { return os << report.str(); }

}  // namespace mkt
