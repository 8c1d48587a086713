// Writes a small synthetic dataset directory for the CLI tests.
// Usage: make_dataset <output-dir> [seed]

#include "core/io.hpp"
#include "core/simgen.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_dataset <output-dir> [seed]\n";
    return 2;
  }
  try {
    cocreg::SimScenario sc = cocreg::preset_scenario("sim-i-small");
    sc.n = 30;
    sc.u = 60;
    sc.v = 60;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;
    cocreg::ReplicateData rd = cocreg::generate_replicate(sc, seed);
    cocreg::save_cohort(argv[1], rd.cohort);
  } catch (const std::exception& e) {
    std::cerr << "make_dataset: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
