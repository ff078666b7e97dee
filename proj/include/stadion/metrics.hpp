#pragma once

#include "stadion/common.hpp"

namespace stadion {

enum class WassersteinMethod { exact_assignment, sorted_1d, sliced };
const char* to_string(WassersteinMethod method);

struct WassersteinOptions {
  long exact_limit = 1024;   // above this the sliced approximation kicks in
  int n_projections = 128;
  std::uint64_t seed = 0;    // resampling + projection directions
};

struct WassersteinReport {
  double value = 0.0;
  WassersteinMethod method = WassersteinMethod::exact_assignment;
  long n = 0;                 // matched sample count per side
  bool resampled = false;     // true when the smaller side was upsampled
};

// inf E |X - Z|_2 between two equal-size empirical samples: the optimal
// assignment minimizing the mean Euclidean distance. d = 1 uses sorted
// matching (optimal), moderate n uses an exact shortest-augmenting-path
// assignment, large n the sliced approximation (per-direction sorted
// matching, corrected by E|u_1| so translations are scored exactly).
WassersteinReport wasserstein(const Dataset& a, const Dataset& b,
                              const WassersteinOptions& options = {});

double mean_mse(const Dataset& a, const Dataset& b);

// Dense linear assignment by shortest augmenting paths (Jonker-Volgenant
// style). Returns the assigned column of each row; cost picks up the
// matched total.
std::vector<int> solve_assignment(const MatrixXd& cost, double* total = nullptr);

enum class TestDirection { ours_better, baseline_better };

struct WilcoxonResult {
  double p_value = 1.0;
  long n_effective = 0;   // pairs remaining after zero differences drop out
  double statistic = 0.0; // signed-rank sum of positive differences
  bool exact = false;
};

// Paired one-sided Wilcoxon signed-rank test on d_i = log(ours_i) -
// log(baseline_i) - log(1 - margin): small p favors "ours beats baseline by
// at least the margin". Exact null distribution (all sign patterns of the
// observed ranks) for n <= 25, normal approximation with continuity
// correction above; zero differences dropped, ties mid-ranked.
WilcoxonResult wilcoxon_margin_test(const std::vector<double>& ours,
                                    const std::vector<double>& baseline,
                                    double margin = 0.05,
                                    TestDirection direction =
                                        TestDirection::ours_better);

}  // namespace stadion
