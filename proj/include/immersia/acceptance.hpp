#pragma once

#include <functional>
#include <string>
#include <vector>

namespace immersia {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  // measured values behind the verdict
  double seconds = 0.0;
};

inline constexpr int kCriterionCount = 14;

const char* criterion_name(int id);

// Runs one criterion; module errors are caught and reported as a failure.
CriterionResult run_criterion(int id);

// Runs the listed criteria (all when empty) in order; on_result fires after each one.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids = {},
                                            const std::function<void(const CriterionResult&)>& on_result = {});

// "[PASS] 01 sphere-energy (12.3 s): detail"
std::string format_result(const CriterionResult& r);

}  // namespace immersia
