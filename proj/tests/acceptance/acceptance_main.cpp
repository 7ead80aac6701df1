#include <cstdio>
#include <cstdlib>
#include <vector>

#include "immersia/acceptance.hpp"

// Usage: acceptance [id...]; exit 0 iff every selected criterion passes.
int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  int passed = 0;
  const auto results = immersia::run_acceptance(ids, [&](const immersia::CriterionResult& r) {
    std::printf("%s\n", immersia::format_result(r).c_str());
    std::fflush(stdout);
    passed += r.pass;
  });
  std::printf("%d/%zu criteria passed\n", passed, results.size());
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
