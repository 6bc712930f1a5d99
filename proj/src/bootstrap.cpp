#include "forge/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "forge/errors.hpp"

namespace forge {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct ResampleRun {
    Eigen::MatrixXd estimates;      // B x P, row valid iff kept[b]
    std::vector<char> kept;
    std::string first_error;        // diagnostic from the first discarded resample
};

ResampleRun run_resamples(const Eigen::MatrixXd& items, const ModelSpec& spec,
                          const BootstrapOptions& options, bool parallel) {
    const auto n = items.rows();
    const int B = options.resamples;
    const auto P = static_cast<Eigen::Index>(spec.paths.size());
    ResampleRun run;
    run.estimates = Eigen::MatrixXd::Zero(B, P);
    run.kept.assign(static_cast<std::size_t>(B), 0);
    std::vector<std::string> errors(static_cast<std::size_t>(B));

    auto one = [&](int b) {
        std::mt19937_64 rng(resample_seed(options.seed, b));
        Eigen::MatrixXd draw(n, items.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            draw.row(i) = items.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
        }
        try {
            FitResult fit = fit_pls(draw, spec, options.fit);
            if (!fit.converged) {
                errors[static_cast<std::size_t>(b)] = "no convergence";
                return;
            }
            for (Eigen::Index k = 0; k < P; ++k) {
                run.estimates(b, k) = fit.path_coefficients[static_cast<std::size_t>(k)];
            }
            run.kept[static_cast<std::size_t>(b)] = 1;
        } catch (const Error& e) {
            errors[static_cast<std::size_t>(b)] = e.what();
        }
    };

#ifdef _OPENMP
    if (parallel) {
        const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (int b = 0; b < B; ++b) one(b);
    } else {
        for (int b = 0; b < B; ++b) one(b);
    }
#else
    (void)parallel;
    for (int b = 0; b < B; ++b) one(b);
#endif

    for (int b = 0; b < B; ++b) {
        if (!run.kept[static_cast<std::size_t>(b)]) {
            run.first_error = errors[static_cast<std::size_t>(b)];
            break;
        }
    }
    return run;
}

BootstrapResult run_bootstrap(const Panel& panel, const ModelSpec& spec,
                              const BootstrapOptions& options, bool parallel) {
    if (options.resamples < 2) {
        throw ConfigError("bootstrap needs at least 2 resamples, got " +
                          std::to_string(options.resamples));
    }
    if (panel.rows.empty()) throw DataError("bootstrap: panel is empty");
    ItemMatrix items = item_matrix(panel, spec);

    FitResult original = fit_pls(items.values, spec, options.fit);
    if (!original.converged) {
        throw NumericError("original-sample PLS fit did not converge; bootstrap aborted");
    }

    ResampleRun run = run_resamples(items.values, spec, options, parallel);
    const int B = options.resamples;
    int kept_count = 0;
    for (char k : run.kept) kept_count += k;
    const int discarded = B - kept_count;
    if (10 * discarded > B) {
        throw NumericError(std::to_string(discarded) + " of " + std::to_string(B) +
                           " bootstrap resamples failed to converge (limit 10%); first failure: " +
                           run.first_error);
    }

    BootstrapResult result;
    result.resamples = B;
    result.discarded = discarded;
    result.seed = options.seed;
    result.paths.resize(spec.paths.size());
    for (std::size_t k = 0; k < spec.paths.size(); ++k) {
        PathStat& stat = result.paths[k];
        stat.from = spec.paths[k].from;
        stat.to = spec.paths[k].to;
        stat.original = original.path_coefficients[k];

        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(kept_count));
        for (int b = 0; b < B; ++b) {
            if (run.kept[static_cast<std::size_t>(b)]) {
                values.push_back(run.estimates(b, static_cast<Eigen::Index>(k)));
            }
        }
        stat.boot_mean = stats::mean(values);
        stat.stdev = stats::sample_sd(values);
        std::sort(values.begin(), values.end());
        stat.ci_low = percentile(values, 0.025);
        stat.ci_high = percentile(values, 0.975);
        if (stat.stdev > 0.0) {
            stat.t_stat = std::abs(stat.original) / stat.stdev;
            stat.p = p_value(stat.t_stat, B);
        } else {
            stat.degenerate = true;
            stat.t_stat = std::numeric_limits<double>::infinity();
            stat.p = 0.0;
        }
    }
    return result;
}

}  // namespace

std::uint64_t resample_seed(std::uint64_t master, int index) {
    return splitmix64(master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1));
}

double p_value(double t_stat, int resamples) {
    if (t_stat < 0.0) throw ConfigError("p_value expects a nonnegative statistic");
    return stats::student_t_two_sided_p(t_stat, static_cast<double>(resamples) - 1.0);
}

double percentile(const std::vector<double>& sorted_values, double q) {
    if (sorted_values.empty()) throw DataError("percentile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("percentile level must be in [0,1]");
    const auto m = sorted_values.size();
    if (m == 1) return sorted_values.front();
    const double h = q * (static_cast<double>(m) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= m) return sorted_values.back();
    const double frac = h - std::floor(h);
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

BootstrapResult bootstrap(const Panel& panel, const ModelSpec& spec, const BootstrapOptions& options) {
    return run_bootstrap(panel, spec, options, true);
}

BootstrapResult bootstrap_serial(const Panel& panel, const ModelSpec& spec,
                                 const BootstrapOptions& options) {
    return run_bootstrap(panel, spec, options, false);
}

GroupComparison welch_compare(const Panel& panel, const std::string& group_field,
                              const std::string& label_a, const std::string& label_b,
                              const std::string& variable, const ModelSpec* scoring) {
    const auto& spec = panel.model;
    const ModelSpec& score_spec = scoring != nullptr ? *scoring : spec;
    const DemographicField* field = spec.find_demographic(group_field);
    if (field == nullptr) throw DataError("unknown demographic field '" + group_field + "'");
    std::size_t field_index = 0;
    for (std::size_t i = 0; i < spec.demographics.size(); ++i) {
        if (spec.demographics[i].name == group_field) field_index = i;
    }

    // Row value: construct mean-score on the raw scale, or an integer demographic.
    const Construct* construct = score_spec.find_construct(variable);
    std::size_t demo_index = 0;
    if (construct == nullptr) {
        const DemographicField* demo = spec.find_demographic(variable);
        if (demo == nullptr) {
            throw DataError("'" + variable + "' is neither a construct nor a demographic field");
        }
        if (demo->kind != DemographicKind::integer) {
            throw DataError("demographic field '" + variable + "' is not numeric");
        }
        for (std::size_t i = 0; i < spec.demographics.size(); ++i) {
            if (spec.demographics[i].name == variable) demo_index = i;
        }
    }

    std::vector<int> item_positions;
    if (construct != nullptr) {
        const auto names = spec.item_names();
        for (const auto& item : construct->items) {
            const auto it = std::find(names.begin(), names.end(), item.name);
            if (it == names.end()) {
                throw DataError("item '" + item.name + "' is not a column of the panel");
            }
            item_positions.push_back(static_cast<int>(it - names.begin()));
        }
    }

    auto row_value = [&](const RespondentRow& row) {
        if (construct != nullptr) {
            double sum = 0.0;
            for (int pos : item_positions) sum += row.responses[static_cast<std::size_t>(pos)];
            return sum / static_cast<double>(item_positions.size());
        }
        return static_cast<double>(std::stol(row.demographics[demo_index]));
    };

    GroupComparison out;
    out.field = group_field;
    out.variable = variable;
    out.a.label = label_a;
    out.b.label = label_b;
    std::vector<double> va;
    std::vector<double> vb;
    for (const auto& row : panel.rows) {
        const std::string& g = row.demographics[field_index];
        if (g == label_a) {
            va.push_back(row_value(row));
        } else if (g == label_b) {
            vb.push_back(row_value(row));
        } else {
            ++out.excluded;
        }
    }
    auto fill = [](GroupRow& g, const std::vector<double>& v) {
        if (v.size() < 2) {
            throw DataError("group '" + g.label + "' has " + std::to_string(v.size()) +
                            " rows; need at least 2");
        }
        g.n = static_cast<int>(v.size());
        g.mean = stats::mean(v);
        g.sd = stats::sample_sd(v);
        const auto ci = stats::mean_ci(static_cast<double>(g.n), g.mean, g.sd);
        g.ci_low = ci.lo;
        g.ci_high = ci.hi;
    };
    fill(out.a, va);
    fill(out.b, vb);
    out.welch = stats::welch_from_summary(out.a.n, out.a.mean, out.a.sd, out.b.n, out.b.mean, out.b.sd);
    out.pooled = stats::pooled_from_summary(out.a.n, out.a.mean, out.a.sd, out.b.n, out.b.mean, out.b.sd);
    return out;
}

}  // namespace forge
