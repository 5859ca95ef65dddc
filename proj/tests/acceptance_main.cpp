// Runs every acceptance criterion and prints one line per criterion.
#include <cstdio>

#include "eos/acceptance.hpp"

int main() {
  int failed = 0;
  const auto results = eos::run_acceptance({}, [&](const eos::CriterionResult& r) {
    std::printf("%s %s\n", r.pass ? "PASS" : "FAIL", eos::format_result(r).c_str());
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  });
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
