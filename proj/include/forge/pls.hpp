#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "forge/model.hpp"
#include "forge/panel.hpp"

namespace forge {

struct StandardizedData {
    Eigen::MatrixXd matrix;  // n x p, columns z-scored with sample (n-1) SD
    Eigen::VectorXd means;
    Eigen::VectorXd sds;
};

/// Column-wise z-scoring. Throws DataError for n < 2 and for zero-variance
/// columns (named via labels when provided).
StandardizedData standardize(const Eigen::MatrixXd& raw,
                             const std::vector<std::string>& labels = {});

enum class WeightingScheme { path, centroid, factor };

WeightingScheme scheme_from_string(std::string_view id);
std::string scheme_to_string(WeightingScheme scheme);

struct FitOptions {
    int max_iterations = 300;
    double tolerance = 1e-7;
    WeightingScheme scheme = WeightingScheme::path;
};

struct FitResult {
    ModelSpec model;
    std::vector<Eigen::VectorXd> outer_weights;  // per construct, scaled to unit composite variance
    std::vector<Eigen::VectorXd> loadings;       // per construct, corr(item, own score)
    Eigen::MatrixXd item_corr;                   // p x p standardized-item correlations
    Eigen::MatrixXd item_score_corr;             // p x #constructs cross-loadings
    Eigen::MatrixXd scores;                      // n x #constructs, unit variance, sign-anchored
    std::vector<double> path_coefficients;       // aligned with model.paths
    std::map<std::string, double> r2;            // endogenous construct -> R^2
    int iterations = 0;
    bool converged = false;
    bool small_sample = false;  // n <= item count

    double loading_of(std::string_view item) const;  // throws DataError if unknown
    double path_of(std::string_view from, std::string_view to) const;
};

/// Mode A PLS path-model estimation (Lohmoeller iteration): all-ones start,
/// inner proxies per the weighting scheme, outer weights proportional to
/// item/proxy correlations, scores sign-anchored to the block's first
/// indicator. Stops when the largest absolute weight change drops below
/// options.tolerance. Non-convergence yields converged=false, not a throw.
FitResult fit_pls(const Eigen::MatrixXd& items, const ModelSpec& spec,
                  const FitOptions& options = {});

FitResult fit_pls(const Panel& panel, const FitOptions& options = {});

/// Unit-variance latent scores of a converged fit; throws NumericError when
/// the fit did not converge.
const Eigen::MatrixXd& latent_scores(const FitResult& fit);

/// R^2 of one endogenous construct; throws DataError for exogenous names.
double r_squared(const FitResult& fit, std::string_view construct);

}  // namespace forge
