#include "forge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "forge/errors.hpp"

namespace forge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> block_offsets(const ModelSpec& spec) {
    std::vector<int> offsets;
    offsets.reserve(spec.constructs.size() + 1);
    int at = 0;
    for (const auto& c : spec.constructs) {
        offsets.push_back(at);
        at += static_cast<int>(c.items.size());
    }
    offsets.push_back(at);
    return offsets;
}

double mean_abs_within(const Eigen::MatrixXd& item_corr, int offset, int size) {
    double sum = 0.0;
    int count = 0;
    for (int a = 0; a < size; ++a) {
        for (int b = a + 1; b < size; ++b) {
            sum += std::abs(item_corr(offset + a, offset + b));
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

}  // namespace

BlockCorrelation block_correlation(const FitResult& fit, std::size_t construct) {
    if (construct >= fit.model.constructs.size()) throw DataError("construct index out of range");
    const auto offsets = block_offsets(fit.model);
    const int k = static_cast<int>(fit.model.constructs[construct].items.size());
    BlockCorrelation block;
    block.construct = fit.model.constructs[construct].name;
    block.S = fit.item_corr.block(offsets[construct], offsets[construct], k, k);
    return block;
}

std::optional<double> cronbach_alpha(const BlockCorrelation& block) {
    const auto k = block.S.rows();
    if (k < 2) return std::nullopt;
    const double rbar =
        (block.S.sum() - static_cast<double>(k)) / (static_cast<double>(k) * (static_cast<double>(k) - 1.0));
    return static_cast<double>(k) * rbar / (1.0 + (static_cast<double>(k) - 1.0) * rbar);
}

std::optional<double> rho_a(const BlockCorrelation& block, Eigen::VectorXd weights) {
    const auto k = block.S.rows();
    if (k < 2) return std::nullopt;
    if (weights.size() != k) throw DataError("weight vector does not match block size");
    const double var = weights.dot(block.S * weights);
    if (!(var > 0.0)) throw NumericError("degenerate outer weights for construct '" + block.construct + "'");
    weights /= std::sqrt(var);
    const double ww = weights.squaredNorm();
    const double numerator = weights.dot(block.S * weights) - weights.array().square().sum();
    const double denominator = ww * ww - weights.array().pow(4).sum();
    if (!(std::abs(denominator) > 0.0)) {
        throw NumericError("degenerate outer weights for construct '" + block.construct + "'");
    }
    return ww * ww * numerator / denominator;
}

double rho_c(const Eigen::VectorXd& loadings) {
    const double s = loadings.sum();
    const double unexplained = (1.0 - loadings.array().square()).sum();
    return s * s / (s * s + unexplained);
}

double ave(const Eigen::VectorXd& loadings) {
    return loadings.squaredNorm() / static_cast<double>(loadings.size());
}

HtmtResult htmt(const Eigen::MatrixXd& item_corr, const ModelSpec& spec) {
    const auto offsets = block_offsets(spec);
    const int C = static_cast<int>(spec.constructs.size());
    HtmtResult out;
    out.order.reserve(static_cast<std::size_t>(C));
    for (const auto& c : spec.constructs) out.order.push_back(c.name);
    out.values = Eigen::MatrixXd::Constant(C, C, kNaN);
    for (int i = 0; i < C; ++i) {
        const int ki = static_cast<int>(spec.constructs[static_cast<std::size_t>(i)].items.size());
        if (ki >= 2) out.values(i, i) = 1.0;
        for (int j = i + 1; j < C; ++j) {
            const int kj = static_cast<int>(spec.constructs[static_cast<std::size_t>(j)].items.size());
            if (ki < 2 || kj < 2) continue;  // single-item block: not applicable
            double cross = 0.0;
            for (int a = 0; a < ki; ++a) {
                for (int b = 0; b < kj; ++b) {
                    cross += std::abs(item_corr(offsets[static_cast<std::size_t>(i)] + a,
                                                offsets[static_cast<std::size_t>(j)] + b));
                }
            }
            cross /= static_cast<double>(ki * kj);
            const double within_i = mean_abs_within(item_corr, offsets[static_cast<std::size_t>(i)], ki);
            const double within_j = mean_abs_within(item_corr, offsets[static_cast<std::size_t>(j)], kj);
            const double denom = within_i * within_j;
            if (!(denom > 0.0)) continue;
            const double value = cross / std::sqrt(denom);
            out.values(i, j) = value;
            out.values(j, i) = value;
            if (value > 1.0) out.exceeds_one.emplace_back(out.order[static_cast<std::size_t>(i)],
                                                          out.order[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

FornellLarcker fornell_larcker_from_matrix(std::vector<std::string> order, Eigen::MatrixXd matrix) {
    const int C = static_cast<int>(order.size());
    if (matrix.rows() != C || matrix.cols() != C) {
        throw DataError("Fornell-Larcker matrix does not match the construct list");
    }
    FornellLarcker out;
    out.order = std::move(order);
    out.matrix = std::move(matrix);
    out.exceeds_all.resize(static_cast<std::size_t>(C), true);
    out.exceeds_below.resize(static_cast<std::size_t>(C), true);
    for (int i = 0; i < C; ++i) {
        for (int j = 0; j < C; ++j) {
            if (j == i) continue;
            if (std::abs(out.matrix(i, j)) >= out.matrix(i, i)) {
                out.exceeds_all[static_cast<std::size_t>(i)] = false;
            }
            // Reading down the construct's column of the printed lower triangle.
            if (j > i && std::abs(out.matrix(j, i)) >= out.matrix(i, i)) {
                out.exceeds_below[static_cast<std::size_t>(i)] = false;
            }
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> htmt_flags(const std::vector<std::string>& order,
                                                            const Eigen::MatrixXd& values) {
    std::vector<std::pair<std::string, std::string>> flags;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < values.cols(); ++j) {
            if (std::isnan(values(i, j))) continue;
            if (values(i, j) > 1.0) {
                flags.emplace_back(order[static_cast<std::size_t>(i)],
                                   order[static_cast<std::size_t>(j)]);
            }
        }
    }
    return flags;
}

FornellLarcker fornell_larcker(const FitResult& fit) {
    if (!fit.converged) throw NumericError("Fornell-Larcker requires a converged fit");
    const int C = static_cast<int>(fit.model.constructs.size());
    const auto n = static_cast<double>(fit.scores.rows());
    std::vector<std::string> order;
    order.reserve(static_cast<std::size_t>(C));
    for (const auto& c : fit.model.constructs) order.push_back(c.name);
    Eigen::MatrixXd matrix = (fit.scores.transpose() * fit.scores) / (n - 1.0);
    for (int i = 0; i < C; ++i) {
        for (int j = 0; j < C; ++j) {
            if (i != j) matrix(i, j) = std::clamp(matrix(i, j), -1.0, 1.0);
        }
        matrix(i, i) = std::sqrt(ave(fit.loadings[static_cast<std::size_t>(i)]));
    }
    return fornell_larcker_from_matrix(std::move(order), std::move(matrix));
}

std::vector<VifEntry> inner_vif(const FitResult& fit) {
    const auto& spec = fit.model;
    const auto n = static_cast<double>(fit.scores.rows());
    std::vector<VifEntry> out;
    for (const auto& construct : spec.constructs) {
        const auto pred_names = spec.predecessors(construct.name);
        if (pred_names.empty()) continue;
        const int m = static_cast<int>(pred_names.size());
        Eigen::MatrixXd gram(m, m);
        for (int a = 0; a < m; ++a) {
            const int ia = spec.construct_index(pred_names[static_cast<std::size_t>(a)]);
            for (int b = 0; b < m; ++b) {
                const int ib = spec.construct_index(pred_names[static_cast<std::size_t>(b)]);
                gram(a, b) = fit.scores.col(ia).dot(fit.scores.col(ib)) / (n - 1.0);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        lu.setThreshold(1e-12);
        const bool invertible = lu.isInvertible();
        Eigen::MatrixXd inv;
        if (invertible) inv = lu.inverse();
        for (int a = 0; a < m; ++a) {
            VifEntry entry;
            entry.endogenous = construct.name;
            entry.predictor = pred_names[static_cast<std::size_t>(a)];
            if (m == 1) {
                entry.value = 1.0;
            } else if (!invertible) {
                entry.value = std::numeric_limits<double>::infinity();
                entry.infinite = true;
            } else {
                entry.value = std::max(1.0, inv(a, a));
            }
            out.push_back(std::move(entry));
        }
    }
    return out;
}

ScreenResult low_loading_screen(const FitResult& fit, double drop_below, double flag_below,
                                std::optional<double> auto_drop) {
    if (!fit.converged) throw NumericError("loading screen requires a converged fit");
    const double drop_cut = auto_drop.value_or(drop_below);
    ScreenResult out;
    ModelSpec reduced = fit.model;
    bool any_removed = false;
    for (std::size_t c = 0; c < fit.model.constructs.size(); ++c) {
        const auto& construct = fit.model.constructs[c];
        std::vector<Item> kept;
        for (std::size_t i = 0; i < construct.items.size(); ++i) {
            const double lam = fit.loadings[c](static_cast<Eigen::Index>(i));
            if (lam < drop_cut) {
                out.flags.push_back({construct.name, construct.items[i].name, lam, LoadingSeverity::drop});
                out.removed.push_back(construct.items[i].name);
                any_removed = true;
            } else {
                if (lam < flag_below) {
                    out.flags.push_back({construct.name, construct.items[i].name, lam, LoadingSeverity::flag});
                }
                kept.push_back(construct.items[i]);
            }
        }
        if (kept.empty()) {
            throw DataError("removing low-loading items would leave construct '" + construct.name +
                            "' with no items");
        }
        reduced.constructs[c].items = std::move(kept);
    }
    if (any_removed) out.reduced = std::move(reduced);
    return out;
}

MetricsReport compute_metrics(const FitResult& fit) {
    if (!fit.converged) throw NumericError("metrics require a converged fit");
    MetricsReport report;
    for (std::size_t c = 0; c < fit.model.constructs.size(); ++c) {
        BlockCorrelation block = block_correlation(fit, c);
        ConstructReliability row;
        row.construct = block.construct;
        row.items = static_cast<int>(block.S.rows());
        row.alpha = cronbach_alpha(block);
        row.rho_a = rho_a(block, fit.outer_weights[c]);
        row.rho_c = rho_c(fit.loadings[c]);
        row.ave = ave(fit.loadings[c]);
        report.reliability.push_back(std::move(row));
    }
    report.htmt = htmt(fit.item_corr, fit.model);
    report.fornell = fornell_larcker(fit);
    report.vif = inner_vif(fit);
    report.flags = low_loading_screen(fit).flags;
    return report;
}

}  // namespace forge
