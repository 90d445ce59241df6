// Acceptance battery: one PASS/FAIL line per criterion.
// usage: acceptance [--seed N] [criterion ...]
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "ccl/acceptance.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 1;
  std::vector<std::string> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--seed" && i + 1 < argc) {
      seed = std::strtoull(argv[++i], nullptr, 10);
    } else {
      ids.push_back(a);
    }
  }
  int failed = 0, ran = 0;
  for (const auto& cr : ccl::acceptance::criteria()) {
    bool want = ids.empty();
    for (const auto& id : ids) want = want || id == cr.id;
    if (!want) continue;
    const auto o = ccl::acceptance::run(cr, seed);
    std::cout << ccl::acceptance::line(o) << std::endl;
    ++ran;
    if (!o.passed) ++failed;
  }
  if (ran == 0) {
    std::cerr << "no matching criteria\n";
    return 2;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
