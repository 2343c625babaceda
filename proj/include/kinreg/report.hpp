#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace kinreg {

using Json = nlohmann::ordered_json;

/// Outcome of one numerical check. `proposition` states the inequality under test.
/// `stability_ratio` compares the empirical supremum over all samples with the
/// supremum over the first half (the sample set is prefix-shared).
struct CheckReport {
  std::string check_name;
  std::string proposition;
  Json params = Json::object();
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::size_t excluded = 0;
  std::size_t violations = 0;
  double empirical_sup = 0.0;
  double stability_ratio = 1.0;
  bool passed = false;
  Json details = Json::object();

  std::vector<std::string> columns;       // raw quotient dump header
  std::vector<std::vector<double>> rows;  // raw quotient dump

  Json to_json() const;
  void write_csv(const std::string& path) const;
};

/// Supremum over a prefix-shared sample sequence of length 2N: sup over the
/// first N and over all 2N.
class StableSup {
 public:
  explicit StableSup(std::size_t half) : half_(half) {}
  void add(std::size_t index, double value);
  double sup() const { return all_; }
  double half_sup() const { return first_; }
  /// sup(2N) / sup(N); 1 when both vanish.
  double ratio() const;

 private:
  std::size_t half_;
  double first_ = 0.0;
  double all_ = 0.0;
};

/// Maximum relative drift allowed between sup(N) and sup(2N).
inline constexpr double kStabilityTolerance = 1.2;

}  // namespace kinreg
