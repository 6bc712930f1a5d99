#include "forge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "forge/errors.hpp"

namespace forge::stats {

namespace {

// Continued-fraction evaluation for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw NumericError("incomplete_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (!(df > 0)) throw NumericError("student_t_cdf: df must be positive");
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0)) throw NumericError("student_t_two_sided_p: df must be positive");
    if (std::isinf(t)) return 0.0;
    const double at = std::fabs(t);
    if (at == 0.0) return 1.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + at * at));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("normal_quantile: p must be in (0,1)");
    if (p == 0.5) return 0.0;
    double lo = -1.0, hi = 1.0;
    while (normal_cdf(lo) > p) lo *= 2.0;
    while (normal_cdf(hi) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (normal_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * std::max(1.0, std::fabs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("student_t_quantile: p must be in (0,1)");
    if (!(df > 0)) throw NumericError("student_t_quantile: df must be positive");
    if (p == 0.5) return 0.0;
    // Bisection on the CDF; monotone, so this is robust for fractional df.
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, df) > p) lo *= 2.0;
    while (student_t_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-14 * std::max(1.0, std::fabs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

double mean(std::span<const double> v) {
    if (v.empty()) throw NumericError("mean: empty input");
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) throw NumericError("sample_sd: need at least 2 values");
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw NumericError("pearson: inputs must have equal length >= 2");
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) throw NumericError("pearson: zero-variance input");
    return sxy / std::sqrt(sxx * syy);
}

TwoSampleTest welch_from_summary(double n1, double mean1, double sd1,
                                 double n2, double mean2, double sd2) {
    if (n1 < 2 || n2 < 2) throw NumericError("welch_from_summary: each group needs n >= 2");
    const double v1 = sd1 * sd1 / n1;
    const double v2 = sd2 * sd2 / n2;
    const double se2 = v1 + v2;
    TwoSampleTest r;
    if (se2 == 0.0) {
        r.t = mean1 == mean2 ? 0.0 : std::numeric_limits<double>::infinity();
        r.df = n1 + n2 - 2;
        r.p = mean1 == mean2 ? 1.0 : 0.0;
        return r;
    }
    r.t = std::fabs(mean1 - mean2) / std::sqrt(se2);
    r.df = se2 * se2 / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

TwoSampleTest pooled_from_summary(double n1, double mean1, double sd1,
                                  double n2, double mean2, double sd2) {
    if (n1 < 2 || n2 < 2) throw NumericError("pooled_from_summary: each group needs n >= 2");
    const double df = n1 + n2 - 2;
    const double sp2 = ((n1 - 1) * sd1 * sd1 + (n2 - 1) * sd2 * sd2) / df;
    const double se2 = sp2 * (1.0 / n1 + 1.0 / n2);
    TwoSampleTest r;
    r.df = df;
    if (se2 == 0.0) {
        r.t = mean1 == mean2 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p = mean1 == mean2 ? 1.0 : 0.0;
        return r;
    }
    r.t = std::fabs(mean1 - mean2) / std::sqrt(se2);
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

Interval mean_ci(double n, double mean, double sd, double level) {
    if (n < 2) throw NumericError("mean_ci: need n >= 2");
    if (!(level > 0 && level < 1)) throw NumericError("mean_ci: level must be in (0,1)");
    const double q = student_t_quantile(1.0 - 0.5 * (1.0 - level), n - 1);
    const double margin = q * sd / std::sqrt(n);
    return {mean - margin, mean + margin};
}

}  // namespace forge::stats
