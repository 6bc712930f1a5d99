#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/model.hpp"
#include "forge/panel.hpp"
#include "forge/pls.hpp"
#include "forge/stats.hpp"

namespace forge {

struct BootstrapOptions {
    int resamples = 5000;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = runtime default
    FitOptions fit;
};

struct PathStat {
    std::string from;
    std::string to;
    double original = 0.0;   // O
    double boot_mean = 0.0;  // M
    double stdev = 0.0;      // sample SD over kept resamples
    double t_stat = 0.0;     // |O|/STDEV, inf when stdev == 0
    double p = 1.0;
    double ci_low = 0.0;  // percentile 2.5%
    double ci_high = 0.0;  // percentile 97.5%
    bool degenerate = false;  // stdev == 0 sentinel row
};

struct BootstrapResult {
    std::vector<PathStat> paths;  // aligned with spec.paths
    int resamples = 0;
    int discarded = 0;  // non-converged or degenerate resamples
    std::uint64_t seed = 0;
};

/// Deterministic per-resample seed: a fixed mix of the master seed and the
/// resample index, so results do not depend on scheduling or thread count.
std::uint64_t resample_seed(std::uint64_t master, int index);

/// Two-sided p for statistic t under Student-t with B-1 degrees of freedom.
double p_value(double t_stat, int resamples);

/// Type-7 (linear interpolation) percentile of sorted values, q in [0,1].
double percentile(const std::vector<double>& sorted_values, double q);

/// B resamples with replacement, PLS refit on each; non-converging resamples
/// are discarded and counted, more than 10% of them is a hard error.
/// OpenMP-parallel when available.
BootstrapResult bootstrap(const Panel& panel, const ModelSpec& spec, const BootstrapOptions& options);

/// Serial reference implementation; bit-identical to bootstrap().
BootstrapResult bootstrap_serial(const Panel& panel, const ModelSpec& spec,
                                 const BootstrapOptions& options);

struct GroupRow {
    std::string label;
    int n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct GroupComparison {
    std::string field;
    std::string variable;
    GroupRow a;
    GroupRow b;
    stats::TwoSampleTest welch;
    stats::TwoSampleTest pooled;
    int excluded = 0;  // rows in neither group
};

/// Two-group comparison on a construct mean-score (unweighted mean of raw
/// items) or an integer demographic. Per group: mean, sample SD, t-based CI95;
/// between groups: Welch test (pooled variant reported alongside). `scoring`
/// overrides where construct item sets come from (e.g. a reduced model);
/// items are still located by name in the panel's own column order.
GroupComparison welch_compare(const Panel& panel, const std::string& group_field,
                              const std::string& label_a, const std::string& label_b,
                              const std::string& variable, const ModelSpec* scoring = nullptr);

}  // namespace forge
