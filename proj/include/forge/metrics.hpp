#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "forge/model.hpp"
#include "forge/pls.hpp"

namespace forge {

struct BlockCorrelation {
    std::string construct;
    Eigen::MatrixXd S;  // K x K, symmetric, unit diagonal
};

/// Standardized-item alpha: K*rbar / (1 + (K-1)*rbar). Single-item blocks are
/// not applicable (nullopt).
std::optional<double> cronbach_alpha(const BlockCorrelation& block);

/// Dijkstra-Henseler rho_A with weights rescaled so w'Sw = 1. Single-item
/// blocks are not applicable; degenerate weights throw NumericError.
std::optional<double> rho_a(const BlockCorrelation& block, Eigen::VectorXd weights);

double rho_c(const Eigen::VectorXd& loadings);
double ave(const Eigen::VectorXd& loadings);

struct HtmtResult {
    std::vector<std::string> order;
    Eigen::MatrixXd values;  // C x C symmetric, NaN where a block is single-item
    std::vector<std::pair<std::string, std::string>> exceeds_one;
};

HtmtResult htmt(const Eigen::MatrixXd& item_corr, const ModelSpec& spec);

struct FornellLarcker {
    std::vector<std::string> order;
    Eigen::MatrixXd matrix;           // sqrt(AVE) diagonal, latent correlations off it
    std::vector<bool> exceeds_all;    // sqrt(AVE) beats every |r| in the row and column
    std::vector<bool> exceeds_below;  // sqrt(AVE) beats the |r| entries printed below it
};

FornellLarcker fornell_larcker(const FitResult& fit);

/// Verdicts for an already-assembled matrix (sqrt(AVE) diagonal, correlations
/// off it) — e.g. a published table.
FornellLarcker fornell_larcker_from_matrix(std::vector<std::string> order, Eigen::MatrixXd matrix);

/// Pairs of an HTMT matrix exceeding 1 (NaN cells skipped).
std::vector<std::pair<std::string, std::string>> htmt_flags(const std::vector<std::string>& order,
                                                            const Eigen::MatrixXd& values);

struct VifEntry {
    std::string endogenous;
    std::string predictor;
    double value = 1.0;
    bool infinite = false;  // perfectly collinear predictors
};

std::vector<VifEntry> inner_vif(const FitResult& fit);

enum class LoadingSeverity { drop, flag };

struct LoadingFlag {
    std::string construct;
    std::string item;
    double loading = 0.0;
    LoadingSeverity severity = LoadingSeverity::flag;
};

struct ScreenResult {
    std::vector<LoadingFlag> flags;
    std::vector<std::string> removed;   // items below the effective drop threshold
    std::optional<ModelSpec> reduced;   // present when anything was removed
};

/// Flags loadings below flag_below, lists loadings below drop_below for
/// removal, and emits the reduced model. auto_drop overrides drop_below as the
/// removal cut. Removing a construct's last item is an error.
ScreenResult low_loading_screen(const FitResult& fit, double drop_below = 0.40,
                                double flag_below = 0.70,
                                std::optional<double> auto_drop = std::nullopt);

struct ConstructReliability {
    std::string construct;
    int items = 0;
    std::optional<double> alpha;
    std::optional<double> rho_a;
    double rho_c = 0.0;
    double ave = 0.0;
};

struct MetricsReport {
    std::vector<ConstructReliability> reliability;
    HtmtResult htmt;
    FornellLarcker fornell;
    std::vector<VifEntry> vif;
    std::vector<LoadingFlag> flags;
};

BlockCorrelation block_correlation(const FitResult& fit, std::size_t construct);

MetricsReport compute_metrics(const FitResult& fit);

}  // namespace forge
