#include "stadion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stadion {

const char* to_string(WassersteinMethod method) {
  switch (method) {
    case WassersteinMethod::exact_assignment: return "exact_assignment";
    case WassersteinMethod::sorted_1d: return "sorted_1d";
    case WassersteinMethod::sliced: return "sliced";
  }
  return "?";
}

std::vector<int> solve_assignment(const MatrixXd& cost, double* total) {
  const long n = cost.rows();
  require(cost.cols() == n && n >= 1, ErrorCode::invalid_input,
          "assignment needs a square cost matrix");
  require(cost.allFinite(), ErrorCode::invalid_input,
          "assignment cost must be finite");

  // Shortest augmenting path with dual potentials; one augmentation per row.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<long> way(n + 1, n), matched_row(n + 1, n);
  for (long i = 0; i < n; ++i) {
    long j0 = n;             // virtual column holding the current row
    matched_row[j0] = i;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const long i0 = matched_row[j0];
      double delta = inf;
      long j1 = n;
      for (long j = 0; j < n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (long j = 0; j <= n; ++j) {
        if (used[j]) {
          u[matched_row[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (matched_row[j0] != n);
    // Unwind the augmenting path.
    do {
      const long j1 = way[j0];
      matched_row[j0] = matched_row[j1];
      j0 = j1;
    } while (j0 != n);
  }

  std::vector<int> row_to_col(n, -1);
  double acc = 0.0;
  for (long j = 0; j < n; ++j) {
    if (matched_row[j] < n) {
      row_to_col[matched_row[j]] = static_cast<int>(j);
      acc += cost(matched_row[j], j);
    }
  }
  if (total != nullptr) *total = acc;
  return row_to_col;
}

namespace {

double sorted_match_1d(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

MatrixXd resample_rows(const MatrixXd& X, long n, std::uint64_t seed) {
  SeqRng rng(mix64(seed) ^ 0x3e5aULL);
  MatrixXd out(n, X.cols());
  for (long i = 0; i < n; ++i) {
    out.row(i) = X.row(rng.uniform_int(X.rows()));
  }
  return out;
}

// E|<u, e>| for u uniform on the unit sphere in R^d; the sliced estimate is
// divided by this so a pure translation scores exactly its length.
double mean_abs_projection(int d) {
  // Gamma(d/2) / (sqrt(pi) Gamma((d+1)/2))
  return std::exp(std::lgamma(0.5 * d) - std::lgamma(0.5 * (d + 1))) /
         std::sqrt(M_PI);
}

}  // namespace

WassersteinReport wasserstein(const Dataset& a, const Dataset& b,
                              const WassersteinOptions& options) {
  require(a.rows() >= 1 && b.rows() >= 1, ErrorCode::insufficient_data,
          "wasserstein needs nonempty samples");
  require(a.dim() == b.dim(), ErrorCode::invalid_input,
          "sample dimensions differ");

  MatrixXd A = a.X, B = b.X;
  WassersteinReport report;
  if (A.rows() != B.rows()) {
    report.resampled = true;
    const long n = std::max(A.rows(), B.rows());
    if (A.rows() < n) A = resample_rows(A, n, options.seed);
    if (B.rows() < n) B = resample_rows(B, n, options.seed + 1);
  }
  const long n = A.rows();
  const int d = static_cast<int>(A.cols());
  report.n = n;

  if (d == 1) {
    report.method = WassersteinMethod::sorted_1d;
    report.value = sorted_match_1d(
        std::vector<double>(A.data(), A.data() + n),
        std::vector<double>(B.data(), B.data() + n));
    return report;
  }

  if (n <= options.exact_limit) {
    report.method = WassersteinMethod::exact_assignment;
    MatrixXd cost(n, n);
    const int workers = worker_count();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
#endif
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < n; ++j) {
        cost(i, j) = (A.row(i) - B.row(j)).norm();
      }
    }
    double total = 0.0;
    solve_assignment(cost, &total);
    report.value = total / static_cast<double>(n);
    return report;
  }

  report.method = WassersteinMethod::sliced;
  const CounterRng rng(options.seed, 0x51cdULL);
  std::vector<double> pa(n), pb(n);
  double acc = 0.0;
  for (int k = 0; k < options.n_projections; ++k) {
    VectorXd dir(d);
    for (int j = 0; j < d; ++j) {
      dir[j] = rng.normal(static_cast<std::uint64_t>(k) * d + j);
    }
    dir.normalize();
    for (long i = 0; i < n; ++i) {
      pa[i] = A.row(i).dot(dir);
      pb[i] = B.row(i).dot(dir);
    }
    acc += sorted_match_1d(pa, pb);
  }
  report.value = acc / options.n_projections / mean_abs_projection(d);
  return report;
}

double mean_mse(const Dataset& a, const Dataset& b) {
  require(a.rows() >= 1 && b.rows() >= 1, ErrorCode::insufficient_data,
          "mean_mse needs nonempty samples");
  require(a.dim() == b.dim(), ErrorCode::invalid_input,
          "sample dimensions differ");
  const VectorXd ma = a.X.colwise().mean();
  const VectorXd mb = b.X.colwise().mean();
  return (ma - mb).squaredNorm() / static_cast<double>(a.dim());
}

WilcoxonResult wilcoxon_margin_test(const std::vector<double>& ours,
                                    const std::vector<double>& baseline,
                                    double margin, TestDirection direction) {
  require(ours.size() == baseline.size(), ErrorCode::invalid_input,
          "paired test needs equal lengths");
  require(ours.size() >= 5, ErrorCode::insufficient_data,
          "paired test needs at least 5 pairs");
  require(margin >= 0.0 && margin < 1.0, ErrorCode::invalid_input,
          "margin must be in [0, 1)");

  const std::vector<double>& lhs =
      direction == TestDirection::ours_better ? ours : baseline;
  const std::vector<double>& rhs =
      direction == TestDirection::ours_better ? baseline : ours;

  std::vector<double> diffs;
  for (size_t i = 0; i < lhs.size(); ++i) {
    require(lhs[i] > 0.0 && rhs[i] > 0.0, ErrorCode::non_positive_value,
            "metric values must be positive for the log-ratio test");
    // single-log form so values exactly at the margin cancel to zero
    const double di = std::log(lhs[i] / (rhs[i] * (1.0 - margin)));
    if (di != 0.0) diffs.push_back(di);
  }
  const long n = static_cast<long>(diffs.size());
  require(n >= 1, ErrorCode::insufficient_data,
          "all differences are exactly at the margin boundary");

  // Mid-ranks of |d_i|; ranks are multiples of 1/2.
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](long i, long j) {
    return std::abs(diffs[i]) < std::abs(diffs[j]);
  });
  std::vector<double> rank(n, 0.0);
  for (long pos = 0; pos < n;) {
    long end = pos;
    while (end + 1 < n && std::abs(diffs[order[end + 1]]) ==
                              std::abs(diffs[order[pos]])) {
      ++end;
    }
    const double mid = 0.5 * (pos + end) + 1.0;
    for (long q = pos; q <= end; ++q) rank[order[q]] = mid;
    pos = end + 1;
  }

  double w_pos = 0.0;
  for (long i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w_pos += rank[i];
  }

  WilcoxonResult result;
  result.n_effective = n;
  result.statistic = w_pos;

  if (n <= 25) {
    // Exact null: every sign pattern of the observed ranks equally likely.
    // Distribution of 2 W+ over the integers by subset-sum counting.
    result.exact = true;
    std::vector<long> r2(n);
    long total2 = 0;
    for (long i = 0; i < n; ++i) {
      r2[i] = static_cast<long>(std::llround(2.0 * rank[i]));
      total2 += r2[i];
    }
    std::vector<double> count(total2 + 1, 0.0);
    count[0] = 1.0;
    for (long i = 0; i < n; ++i) {
      for (long s = total2; s >= r2[i]; --s) {
        count[s] += count[s - r2[i]];
      }
    }
    const long w2 = static_cast<long>(std::llround(2.0 * w_pos));
    double below = 0.0;
    for (long s = 0; s <= std::min(w2, total2); ++s) below += count[s];
    result.p_value = below / std::ldexp(1.0, static_cast<int>(n));
  } else {
    // W+ = sum of Bernoulli(1/2)-selected ranks: mean sum(r)/2, variance
    // sum(r^2)/4 (mid-ranks make the usual tie correction automatic).
    double sum_r = 0.0, sum_r2 = 0.0;
    for (long i = 0; i < n; ++i) {
      sum_r += rank[i];
      sum_r2 += rank[i] * rank[i];
    }
    const double mu = 0.5 * sum_r;
    const double sigma = std::sqrt(0.25 * sum_r2);
    const double z = (w_pos - mu + 0.5) / sigma;
    result.p_value = 0.5 * std::erfc(-z / std::sqrt(2.0));
  }
  return result;
}

}  // namespace stadion
