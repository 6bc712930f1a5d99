#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "forge/errors.hpp"
#include "forge/generate.hpp"
#include "forge/model.hpp"
#include "forge/panel.hpp"
#include "forge/pls.hpp"

using namespace forge;

namespace {

ModelSpec ab_model() {
    ModelSpec spec;
    spec.scale = {1, 7};
    spec.constructs = {{"A", {{"A1", ""}, {"A2", ""}}}, {"B", {{"B1", ""}}}};
    spec.paths = {{"A", "B"}};
    return spec;
}

// Exact two-indicator design: orthogonal +-1 contrast columns e1, e2 give
// items a1 = e1, a2 = r*e1 + sqrt(1-r^2)*e2 with sample correlation exactly r,
// and B's single indicator y = a1 + a2 keeps the outer weights equal at every
// iteration.
Eigen::MatrixXd closed_form_data(double r) {
    Eigen::VectorXd e1(8), e2(8);
    e1 << 1, 1, 1, 1, -1, -1, -1, -1;
    e2 << 1, 1, -1, -1, 1, 1, -1, -1;
    Eigen::MatrixXd X(8, 3);
    X.col(0) = e1;
    X.col(1) = r * e1 + std::sqrt(1.0 - r * r) * e2;
    X.col(2) = X.col(0) + X.col(1);
    return X;
}

ModelSpec chain_model(int items_per_block) {
    ModelSpec spec;
    spec.scale = {1, 7};
    for (const char* name : {"PEOU", "PU", "BI"}) {
        Construct c;
        c.name = name;
        for (int i = 1; i <= items_per_block; ++i)
            c.items.push_back({std::string(name) + std::to_string(i), ""});
        spec.constructs.push_back(std::move(c));
    }
    spec.paths = {{"PEOU", "PU"}, {"PU", "BI"}};
    return spec;
}

PlantedModel chain_planted(const ModelSpec& spec, double lambda, double r) {
    PlantedModel planted;
    planted.phi = Eigen::MatrixXd::Identity(3, 3);
    planted.phi(0, 1) = planted.phi(1, 0) = r;
    planted.phi(1, 2) = planted.phi(2, 1) = r;
    planted.phi(0, 2) = planted.phi(2, 0) = r * r;
    planted.lambda = Eigen::VectorXd::Constant(spec.item_count(), lambda);
    return planted;
}

}  // namespace

TEST_CASE("standardize") {
    Eigen::MatrixXd raw(4, 2);
    raw << 1, 10, 2, 20, 3, 30, 4, 40;
    const StandardizedData z = standardize(raw);
    for (int j = 0; j < 2; ++j) {
        CHECK(z.matrix.col(j).mean() == doctest::Approx(0.0).epsilon(1e-12));
        const double sd = std::sqrt(z.matrix.col(j).squaredNorm() / 3.0);
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(z.means(1) == doctest::Approx(25.0));

    CHECK_THROWS_AS(standardize(Eigen::MatrixXd::Zero(1, 2)), DataError);
    Eigen::MatrixXd flat(3, 2);
    flat << 1, 5, 2, 5, 3, 5;
    try {
        standardize(flat, {"X1", "X2"});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("X2") != std::string::npos);
    }
}

TEST_CASE("closed-form two-indicator block") {
    for (double r : {0.0, 0.5, 0.923, 1.0 - 1e-6}) {
        CAPTURE(r);
        const FitResult fit = fit_pls(closed_form_data(r), ab_model());
        REQUIRE(fit.converged);
        CHECK(fit.iterations <= 5);
        const double expected_loading = std::sqrt((1.0 + r) / 2.0);
        CHECK(fit.loading_of("A1") == doctest::Approx(expected_loading).epsilon(1e-9));
        CHECK(fit.loading_of("A2") == doctest::Approx(expected_loading).epsilon(1e-9));
        CHECK(fit.loading_of("B1") == doctest::Approx(1.0).epsilon(1e-12));
        // y is exactly the composite, so the structural fit is perfect.
        CHECK(fit.path_of("A", "B") == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(fit.r2.at("B") == doctest::Approx(1.0).epsilon(1e-9));
        // Equal outer weights by symmetry.
        CHECK(fit.outer_weights[0](0) == doctest::Approx(fit.outer_weights[0](1)).epsilon(1e-9));
        // Item correlation matrix reproduces r exactly.
        CHECK(fit.item_corr(0, 1) == doctest::Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("scores have unit variance and anchor to the first indicator") {
    const ModelSpec spec = chain_model(3);
    const SyntheticPanel syn = generate_synthetic(chain_planted(spec, 0.9, 0.8), spec, 500, 3);
    Eigen::MatrixXd X = syn.continuous;

    // Flip every PU item; the block score re-anchors to PU1, so within-block
    // loadings stay positive.
    for (int j = 3; j < 6; ++j) X.col(j) = -X.col(j);
    const FitResult fit = fit_pls(X, spec);
    REQUIRE(fit.converged);
    const int n = static_cast<int>(X.rows());
    for (int c = 0; c < 3; ++c) {
        const double sd = std::sqrt(fit.scores.col(c).squaredNorm() / (n - 1));
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
        for (int k = 0; k < fit.loadings[c].size(); ++k) CHECK(fit.loadings[c](k) > 0.5);
    }
    // The flipped block's score now runs against the other constructs.
    CHECK(fit.path_of("PEOU", "PU") < -0.5);
    CHECK(fit.path_of("PU", "BI") < -0.5);
}

TEST_CASE("chain recovery on planted continuous data") {
    // On the default 7-point scale this fixture would redraw ~20% of rows to
    // keep response keys distinct, which attenuates the planted covariance
    // well past these tolerances; a fine scale makes rejection negligible.
    ModelSpec spec = chain_model(2);
    spec.scale = {1, 49};
    const double lambda = 0.9, r = 0.8;
    const SyntheticPanel syn = generate_synthetic(chain_planted(spec, lambda, r), spec, 2000, 11);
    const FitResult fit = fit_pls(syn.continuous, spec);
    REQUIRE(fit.converged);
    CHECK_FALSE(fit.small_sample);

    // K = 2 equal-weight composite: corr(item, composite) = sqrt((1+lambda^2)/2)
    // and the composite-level path attenuates to r * 2*lambda^2/(1+lambda^2).
    const double loading_theory = std::sqrt((1.0 + lambda * lambda) / 2.0);
    const double attenuation = 2.0 * lambda * lambda / (1.0 + lambda * lambda);
    for (const char* item : {"PEOU1", "PU2", "BI1"}) {
        CHECK(std::abs(fit.loading_of(item) - loading_theory) < 0.02);
    }
    CHECK(std::abs(fit.path_of("PEOU", "PU") - r * attenuation) < 0.05);
    CHECK(std::abs(fit.path_of("PU", "BI") - r * attenuation) < 0.05);
    CHECK(fit.r2.at("PU") == doctest::Approx(fit.path_of("PEOU", "PU") *
                                             fit.path_of("PEOU", "PU")).epsilon(1e-9));

    // All three schemes land in the same neighborhood here.
    for (WeightingScheme scheme : {WeightingScheme::centroid, WeightingScheme::factor}) {
        FitOptions options;
        options.scheme = scheme;
        const FitResult alt = fit_pls(syn.continuous, spec, options);
        REQUIRE(alt.converged);
        CHECK(std::abs(alt.path_of("PEOU", "PU") - fit.path_of("PEOU", "PU")) < 0.01);
    }
}

TEST_CASE("weighting scheme ids") {
    CHECK(scheme_from_string("path") == WeightingScheme::path);
    CHECK(scheme_from_string("centroid") == WeightingScheme::centroid);
    CHECK(scheme_from_string("factor") == WeightingScheme::factor);
    CHECK(scheme_to_string(WeightingScheme::factor) == "factor");
    CHECK_THROWS_AS(scheme_from_string("magic"), ConfigError);
}

TEST_CASE("fit_pls on a panel and accessor errors") {
    const ModelSpec spec = chain_model(2);
    const SyntheticPanel syn = generate_synthetic(chain_planted(spec, 0.9, 0.8), spec, 300, 5);
    const FitResult fit = fit_pls(syn.panel);
    REQUIRE(fit.converged);
    CHECK(latent_scores(fit).rows() == 300);
    CHECK(r_squared(fit, "PU") > 0.0);
    CHECK_THROWS_AS(r_squared(fit, "PEOU"), DataError);   // exogenous
    CHECK_THROWS_AS(r_squared(fit, "nope"), DataError);
    CHECK_THROWS_AS(fit.loading_of("XX9"), DataError);
    CHECK_THROWS_AS(fit.path_of("BI", "PEOU"), DataError);
    CHECK(fit.small_sample == false);
}

TEST_CASE("non-convergence is reported, not thrown") {
    const ModelSpec spec = chain_model(2);
    const SyntheticPanel syn = generate_synthetic(chain_planted(spec, 0.9, 0.8), spec, 200, 5);
    FitOptions options;
    options.max_iterations = 2;  // the all-ones start cannot settle this fast
    const FitResult fit = fit_pls(syn.continuous, spec, options);
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 2);
    CHECK_THROWS_AS(latent_scores(fit), NumericError);

    options.max_iterations = 0;
    CHECK_THROWS_AS(fit_pls(syn.continuous, spec, options), ConfigError);
    options.max_iterations = 300;
    options.tolerance = 0.0;
    CHECK_THROWS_AS(fit_pls(syn.continuous, spec, options), ConfigError);
}

TEST_CASE("small-sample flag") {
    const ModelSpec spec = chain_model(2);
    const SyntheticPanel syn = generate_synthetic(chain_planted(spec, 0.9, 0.8), spec, 100, 9);
    const Eigen::MatrixXd X = syn.continuous.topRows(3).leftCols(3);
    const FitResult fit = fit_pls(X, ab_model());
    CHECK(fit.small_sample);  // n = 3 <= 3 items
}

TEST_CASE("structural errors") {
    // A construct on no structural path cannot be estimated.
    ModelSpec isolated = chain_model(2);
    isolated.constructs.push_back({"LONER", {{"L1", ""}, {"L2", ""}}});
    const SyntheticPanel syn =
        generate_synthetic(chain_planted(chain_model(2), 0.9, 0.8), chain_model(2), 100, 5);
    Eigen::MatrixXd X(100, 8);
    X.leftCols(6) = syn.continuous;
    X.col(6) = syn.continuous.col(0);
    X.col(7) = syn.continuous.col(1);
    CHECK_THROWS_AS(fit_pls(X, isolated), DataError);

    // Perfectly collinear predictor scores make the inner regression singular.
    ModelSpec twin;
    twin.scale = {1, 7};
    twin.constructs = {{"A", {{"A1", ""}}}, {"B", {{"B1", ""}}}, {"C", {{"C1", ""}}}};
    twin.paths = {{"A", "C"}, {"B", "C"}};
    Eigen::MatrixXd D(100, 3);
    D.col(0) = syn.continuous.col(0);
    D.col(1) = syn.continuous.col(0);  // B duplicates A exactly
    D.col(2) = syn.continuous.col(2);
    CHECK_THROWS_AS(fit_pls(D, twin), NumericError);

    // Column count must match the model.
    CHECK_THROWS_AS(fit_pls(Eigen::MatrixXd::Random(50, 2), ab_model()), DataError);
}
