#include "forge/pls.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "forge/errors.hpp"

namespace forge {

namespace {

double column_sample_sd(const Eigen::VectorXd& v) {
    const auto n = static_cast<double>(v.size());
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / (n - 1.0));
}

// Correlation of two mean-zero unit-sample-variance columns.
double unit_corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(b) / (static_cast<double>(a.size()) - 1.0);
}

struct Block {
    int offset = 0;
    int size = 0;
};

Eigen::VectorXd solve_inner_ols(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                const std::string& construct) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        throw NumericError("singular predictor correlation matrix for construct '" + construct +
                           "': latent scores are collinear");
    }
    return lu.solve(rhs);
}

}  // namespace

StandardizedData standardize(const Eigen::MatrixXd& raw, const std::vector<std::string>& labels) {
    const auto n = raw.rows();
    const auto p = raw.cols();
    if (n < 2) throw DataError("standardization requires at least 2 rows, got " + std::to_string(n));
    StandardizedData out;
    out.matrix.resize(n, p);
    out.means.resize(p);
    out.sds.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = raw.col(j).mean();
        const double sd = std::sqrt((raw.col(j).array() - mean).square().sum() /
                                    (static_cast<double>(n) - 1.0));
        if (!(sd > 0.0)) {
            std::string label = j < static_cast<Eigen::Index>(labels.size())
                                    ? labels[static_cast<std::size_t>(j)]
                                    : "column " + std::to_string(j);
            throw DataError("item '" + label + "' has zero variance; cannot standardize");
        }
        out.matrix.col(j) = (raw.col(j).array() - mean) / sd;
        out.means(j) = mean;
        out.sds(j) = sd;
    }
    return out;
}

WeightingScheme scheme_from_string(std::string_view id) {
    if (id == "path") return WeightingScheme::path;
    if (id == "centroid") return WeightingScheme::centroid;
    if (id == "factor") return WeightingScheme::factor;
    throw ConfigError("unknown weighting scheme '" + std::string(id) +
                      "' (expected path, centroid, or factor)");
}

std::string scheme_to_string(WeightingScheme scheme) {
    switch (scheme) {
        case WeightingScheme::path: return "path";
        case WeightingScheme::centroid: return "centroid";
        case WeightingScheme::factor: return "factor";
    }
    return "path";
}

double FitResult::loading_of(std::string_view item) const {
    for (std::size_t c = 0; c < model.constructs.size(); ++c) {
        const auto& items = model.constructs[c].items;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].name == item) return loadings[c](static_cast<Eigen::Index>(i));
        }
    }
    throw DataError("unknown item '" + std::string(item) + "'");
}

double FitResult::path_of(std::string_view from, std::string_view to) const {
    for (std::size_t k = 0; k < model.paths.size(); ++k) {
        if (model.paths[k].from == from && model.paths[k].to == to) return path_coefficients[k];
    }
    throw DataError("no structural path " + std::string(from) + " -> " + std::string(to));
}

FitResult fit_pls(const Eigen::MatrixXd& items, const ModelSpec& spec, const FitOptions& options) {
    if (options.max_iterations < 1) throw ConfigError("max_iterations must be positive");
    if (!(options.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
    const auto report = validate_model(spec);
    if (!report.ok()) {
        throw DataError("model failed validation: " + report.violations.front().rule + " (" +
                        report.violations.front().detail + ")");
    }
    const int p = spec.item_count();
    if (items.cols() != p) {
        throw DataError("data has " + std::to_string(items.cols()) + " item columns, model expects " +
                        std::to_string(p));
    }
    const auto n = items.rows();
    const int C = static_cast<int>(spec.constructs.size());

    // Adjacency over the structural graph; a construct with no incident path
    // has no inner proxy and cannot be estimated.
    std::vector<std::vector<int>> preds(static_cast<std::size_t>(C));
    std::vector<std::vector<int>> succs(static_cast<std::size_t>(C));
    for (const auto& path : spec.paths) {
        const int f = spec.construct_index(path.from);
        const int t = spec.construct_index(path.to);
        preds[static_cast<std::size_t>(t)].push_back(f);
        succs[static_cast<std::size_t>(f)].push_back(t);
    }
    for (int c = 0; c < C; ++c) {
        if (preds[static_cast<std::size_t>(c)].empty() && succs[static_cast<std::size_t>(c)].empty()) {
            throw DataError("construct '" + spec.constructs[static_cast<std::size_t>(c)].name +
                            "' is not on any structural path; PLS weights are undefined");
        }
    }

    std::vector<Block> blocks(static_cast<std::size_t>(C));
    {
        int offset = 0;
        for (int c = 0; c < C; ++c) {
            blocks[static_cast<std::size_t>(c)] = {offset,
                                                   static_cast<int>(spec.constructs[static_cast<std::size_t>(c)].items.size())};
            offset += blocks[static_cast<std::size_t>(c)].size;
        }
    }

    std::vector<std::string> labels = spec.item_names();
    StandardizedData std_data = standardize(items, labels);
    const Eigen::MatrixXd& Z = std_data.matrix;

    FitResult fit;
    fit.model = spec;
    fit.small_sample = n <= p;
    fit.item_corr = (Z.transpose() * Z) / (static_cast<double>(n) - 1.0);
    for (int i = 0; i < p; ++i) {
        fit.item_corr(i, i) = 1.0;
        for (int j = i + 1; j < p; ++j) {
            double r = std::clamp(0.5 * (fit.item_corr(i, j) + fit.item_corr(j, i)), -1.0, 1.0);
            fit.item_corr(i, j) = r;
            fit.item_corr(j, i) = r;
        }
    }

    // Rescale composite X_b w to unit sample variance and anchor its sign to
    // the block's first indicator. Returns the anchored weights and score.
    auto make_score = [&](int c, Eigen::VectorXd w) {
        const Block& b = blocks[static_cast<std::size_t>(c)];
        Eigen::VectorXd y = Z.middleCols(b.offset, b.size) * w;
        const double sd = column_sample_sd(y);
        if (!(sd > 1e-12)) {
            throw NumericError("composite for construct '" +
                               spec.constructs[static_cast<std::size_t>(c)].name +
                               "' has zero variance");
        }
        w /= sd;
        y /= sd;
        if (unit_corr(y, Z.col(b.offset)) < 0.0) {
            w = -w;
            y = -y;
        }
        return std::pair<Eigen::VectorXd, Eigen::VectorXd>(std::move(w), std::move(y));
    };

    std::vector<Eigen::VectorXd> weights(static_cast<std::size_t>(C));
    Eigen::MatrixXd Y(n, C);
    for (int c = 0; c < C; ++c) {
        auto [w, y] = make_score(c, Eigen::VectorXd::Ones(blocks[static_cast<std::size_t>(c)].size));
        weights[static_cast<std::size_t>(c)] = std::move(w);
        Y.col(c) = y;
    }

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        // Inner step: proxy Z_c as scheme-weighted sum of adjacent scores.
        Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(n, C);
        for (int c = 0; c < C; ++c) {
            const auto& pr = preds[static_cast<std::size_t>(c)];
            const auto& su = succs[static_cast<std::size_t>(c)];
            if (options.scheme == WeightingScheme::path && !pr.empty()) {
                Eigen::MatrixXd gram(pr.size(), pr.size());
                Eigen::VectorXd rhs(pr.size());
                for (std::size_t a = 0; a < pr.size(); ++a) {
                    rhs(static_cast<Eigen::Index>(a)) = unit_corr(Y.col(pr[a]), Y.col(c));
                    for (std::size_t bb = 0; bb < pr.size(); ++bb) {
                        gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(bb)) =
                            unit_corr(Y.col(pr[a]), Y.col(pr[bb]));
                    }
                }
                Eigen::VectorXd beta =
                    solve_inner_ols(gram, rhs, spec.constructs[static_cast<std::size_t>(c)].name);
                for (std::size_t a = 0; a < pr.size(); ++a) {
                    inner.col(c) += beta(static_cast<Eigen::Index>(a)) * Y.col(pr[a]);
                }
            } else {
                for (int k : pr) {
                    double r = unit_corr(Y.col(k), Y.col(c));
                    double e = options.scheme == WeightingScheme::centroid
                                   ? (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0))
                                   : r;
                    inner.col(c) += e * Y.col(k);
                }
            }
            for (int k : su) {
                double r = unit_corr(Y.col(k), Y.col(c));
                double e = options.scheme == WeightingScheme::centroid
                               ? (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0))
                               : r;
                inner.col(c) += e * Y.col(k);
            }
        }

        // Outer update, Mode A: weights proportional to item/proxy correlations.
        double max_delta = 0.0;
        for (int c = 0; c < C; ++c) {
            const Block& b = blocks[static_cast<std::size_t>(c)];
            Eigen::VectorXd raw = Z.middleCols(b.offset, b.size).transpose() * inner.col(c);
            if (raw.norm() < 1e-14) {
                throw NumericError("inner proxy for construct '" +
                                   spec.constructs[static_cast<std::size_t>(c)].name +
                                   "' vanished; weights are undefined");
            }
            auto [w, y] = make_score(c, std::move(raw));
            max_delta = std::max(max_delta,
                                 (w - weights[static_cast<std::size_t>(c)]).cwiseAbs().maxCoeff());
            weights[static_cast<std::size_t>(c)] = std::move(w);
            Y.col(c) = y;
        }

        fit.iterations = iter;
        if (max_delta < options.tolerance) {
            fit.converged = true;
            break;
        }
    }

    fit.outer_weights = weights;
    fit.scores = Y;

    fit.item_score_corr.resize(p, C);
    for (int i = 0; i < p; ++i) {
        for (int c = 0; c < C; ++c) {
            fit.item_score_corr(i, c) = std::clamp(unit_corr(Z.col(i), Y.col(c)), -1.0, 1.0);
        }
    }
    fit.loadings.resize(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        const Block& b = blocks[static_cast<std::size_t>(c)];
        fit.loadings[static_cast<std::size_t>(c)] =
            fit.item_score_corr.block(b.offset, c, b.size, 1).col(0);
    }

    fit.path_coefficients.assign(spec.paths.size(), 0.0);
    for (int c = 0; c < C; ++c) {
        const auto& pr = preds[static_cast<std::size_t>(c)];
        if (pr.empty()) continue;
        Eigen::MatrixXd gram(pr.size(), pr.size());
        Eigen::VectorXd rhs(pr.size());
        for (std::size_t a = 0; a < pr.size(); ++a) {
            rhs(static_cast<Eigen::Index>(a)) = unit_corr(Y.col(pr[a]), Y.col(c));
            for (std::size_t bb = 0; bb < pr.size(); ++bb) {
                gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(bb)) =
                    unit_corr(Y.col(pr[a]), Y.col(pr[bb]));
            }
        }
        Eigen::VectorXd beta =
            solve_inner_ols(gram, rhs, spec.constructs[static_cast<std::size_t>(c)].name);
        for (std::size_t a = 0; a < pr.size(); ++a) {
            for (std::size_t k = 0; k < spec.paths.size(); ++k) {
                if (spec.construct_index(spec.paths[k].to) == c &&
                    spec.construct_index(spec.paths[k].from) == pr[a]) {
                    fit.path_coefficients[k] = beta(static_cast<Eigen::Index>(a));
                }
            }
        }
        fit.r2[spec.constructs[static_cast<std::size_t>(c)].name] = beta.dot(rhs);
    }

    return fit;
}

FitResult fit_pls(const Panel& panel, const FitOptions& options) {
    ItemMatrix mat = item_matrix(panel);
    return fit_pls(mat.values, panel.model, options);
}

const Eigen::MatrixXd& latent_scores(const FitResult& fit) {
    if (!fit.converged) {
        throw NumericError("PLS estimation did not converge after " +
                           std::to_string(fit.iterations) + " iterations");
    }
    return fit.scores;
}

double r_squared(const FitResult& fit, std::string_view construct) {
    auto it = fit.r2.find(std::string(construct));
    if (it == fit.r2.end()) {
        throw DataError("construct '" + std::string(construct) +
                        "' is not endogenous; R^2 is undefined");
    }
    return it->second;
}

}  // namespace forge
