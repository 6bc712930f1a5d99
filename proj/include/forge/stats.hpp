#pragma once

#include <span>

namespace forge::stats {

/// Regularized incomplete beta function I_x(a, b), a,b > 0, x in [0,1].
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t with (possibly fractional) df degrees of freedom.
double student_t_cdf(double t, double df);

/// Two-sided tail probability 2*P(T_df >= |t|).
double student_t_two_sided_p(double t, double df);

/// Quantile (inverse CDF) of Student's t, p in (0,1).
double student_t_quantile(double p, double df);

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, p in (0,1).
double normal_quantile(double p);

double mean(std::span<const double> v);

/// Sample standard deviation (n-1 denominator).
double sample_sd(std::span<const double> v);

/// Pearson correlation of two equal-length vectors.
double pearson(std::span<const double> x, std::span<const double> y);

struct TwoSampleTest {
    double t = 0;    // |t| statistic
    double df = 0;
    double p = 1;    // two-sided
};

/// Welch's t-test from summary statistics (Welch-Satterthwaite df).
TwoSampleTest welch_from_summary(double n1, double mean1, double sd1,
                                 double n2, double mean2, double sd2);

/// Equal-variance (pooled) two-sample t-test from summary statistics.
TwoSampleTest pooled_from_summary(double n1, double mean1, double sd1,
                                  double n2, double mean2, double sd2);

struct Interval {
    double lo = 0;
    double hi = 0;
};

/// t-based confidence interval for a mean: mean +- t(1-(1-level)/2, n-1)*sd/sqrt(n).
Interval mean_ci(double n, double mean, double sd, double level = 0.95);

}  // namespace forge::stats
