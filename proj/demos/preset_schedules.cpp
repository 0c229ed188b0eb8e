// Prints the (alpha, beta) schedule-rate trajectory of every preset, making
// the family relationships visible: MLE at (1,1), REINFORCE at (0,0), the
// guided/schedule variants in between.

#include <cstdio>

#include "pgen/pgen.hpp"

int main() {
  const std::size_t iters[] = {0, 100, 1000, 3000, 6931, 20000};
  for (const std::string& name : pgen::preset_names()) {
    pgen::AlgorithmPreset p = pgen::preset_by_name(name, pgen::DatasetProfile::kQuora);
    std::printf("%-14s decode=%-6s reward=%s n=%zu\n", p.name.c_str(),
                pgen::decode_mode_name(p.decode),
                p.reward_mode == pgen::RewardMode::kUnit ? "unit" : "rouge2_baseline",
                p.n_samples);
    std::printf("  %-10s", "iteration");
    for (std::size_t i : iters) std::printf(" %8zu", i);
    std::printf("\n  %-10s", "alpha");
    for (std::size_t i : iters) std::printf(" %8.4f", pgen::rate(p.alpha, i));
    std::printf("\n  %-10s", "beta");
    for (std::size_t i : iters) std::printf(" %8.4f", pgen::rate(p.beta, i));
    std::printf("\n");
  }
  return 0;
}
