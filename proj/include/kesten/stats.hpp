#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace kesten::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Sample mean and standard error of the mean (i.i.d. assumption).
MeanSe mean_se(std::span<const double> xs);

/// Mean with standard error from non-overlapping batch means; for
/// autocorrelated sequences such as Markov chain output.
MeanSe batch_means(std::span<const double> xs, std::size_t n_batches = 50);

/// Wilson score interval for a binomial proportion.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
Interval wilson(std::size_t successes, std::size_t n, double z = 1.959963984540054);

/// Two-sample Kolmogorov-Smirnov statistic sup|F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic critical value of the two-sample KS statistic at level alpha.
double ks_critical(std::size_t n, std::size_t m, double alpha);

/// Asymptotic p-value of an observed two-sample KS statistic.
double ks_pvalue(double stat, std::size_t n, std::size_t m);

/// Lag-1 sample autocorrelation.
double lag1_autocorrelation(std::span<const double> xs);

double normal_cdf(double z);

/// Upper tail probability of a chi-square variable with `dof` degrees of freedom.
double chi_square_sf(double x, double dof);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Goodness of fit of positive integer observations to Geometric(p) on {1,2,...}.
/// Cells 1..K are kept while the expected count is at least 5; the remainder is
/// pooled into one tail cell.
ChiSquareResult chi_square_geometric(std::span<const double> lengths, double p);

/// Empirical quantile (type 7, linear interpolation) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

/// Least-squares slope and intercept of y on x.
std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> xs);

}  // namespace kesten::stats
