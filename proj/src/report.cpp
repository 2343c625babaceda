#include "kinreg/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "kinreg/error.hpp"

namespace kinreg {

namespace {

// JSON has no infinity or NaN; encode them as strings so reports stay valid.
Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

Json CheckReport::to_json() const {
  Json j;
  j["check_name"] = check_name;
  j["proposition"] = proposition;
  j["params"] = params;
  j["samples"] = samples;
  j["excluded"] = excluded;
  j["violations"] = violations;
  j["empirical_sup"] = number(empirical_sup);
  j["sup_or_violations"] = violations > 0 ? Json(violations) : number(empirical_sup);
  j["stability_ratio"] = number(stability_ratio);
  j["seed"] = seed;
  j["passed"] = passed;
  j["details"] = details;
  return j;
}

void CheckReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

void StableSup::add(std::size_t index, double value) {
  if (std::isnan(value)) value = std::numeric_limits<double>::infinity();
  if (index < half_) first_ = std::max(first_, value);
  all_ = std::max(all_, value);
}

double StableSup::ratio() const {
  if (all_ == 0.0) return 1.0;
  if (first_ == 0.0) return std::numeric_limits<double>::infinity();
  return all_ / first_;
}

}  // namespace kinreg
