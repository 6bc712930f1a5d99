#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "forge/model.hpp"
#include "forge/panel.hpp"

namespace forge {

struct LabelDistribution {
    std::vector<std::string> labels;
    std::vector<double> probs;  // same length, positive, sums to 1 (+-1e-9)
};

/// Planted factor model: latent eta ~ N(0, phi), item = lambda*eta + sqrt(1-lambda^2)*eps,
/// then Likert discretization at `cutpoints` (empty = equal-probability bins).
struct PlantedModel {
    Eigen::MatrixXd phi;       // construct correlation matrix, unit diagonal, PSD
    Eigen::VectorXd lambda;    // per item, in model item order, each in (0,1]
    std::string bias_field;    // demographic driving the latent mean shift; may be empty
    std::map<std::string, double> bias_shifts;  // group label -> shift added to all latents
    double duplicate_rate = 0.0;                // fraction of rows that are injected copies
    std::vector<double> cutpoints;              // ascending, categories-1 entries when set
    std::map<std::string, LabelDistribution> label_fields;
};

struct SyntheticPanel {
    Panel panel;
    Eigen::MatrixXd latent;      // n x #constructs, pre-discretization
    Eigen::MatrixXd continuous;  // n x p, pre-discretization item values
    std::vector<int> duplicate_of;  // source row index, -1 for base rows
};

/// Validates a planted model against the spec it will generate for.
void validate_planted(const PlantedModel& planted, const ModelSpec& spec);

/// JSON keys: "phi", "lambda" (scalar or per-item array), "bias"
/// ({"field":..., "shifts":{label:shift}}), "duplicate_rate", "cutpoints",
/// "demographics" ({field:{"labels":[...],"probs":[...]}}).
PlantedModel parse_planted(const std::string& text, const ModelSpec& spec);
std::string emit_planted(const PlantedModel& planted);

/// Defaults mirroring each study's published construct intercorrelations,
/// loadings, gender gap, and duplicate share.
PlantedModel builtin_planted(StudyPreset preset);

/// Deterministic synthetic panel: base rows are distinct on the responses key
/// and duplicate rows are exact copies of earlier base rows, so deduplication
/// recovers the base count exactly.
SyntheticPanel generate_synthetic(const PlantedModel& planted, const ModelSpec& spec, int n,
                                  std::uint64_t seed);

/// Equal-probability Likert cut points: z-quantiles at k/categories.
std::vector<double> default_cutpoints(int categories);

/// Likert score for a continuous value under ascending cut points.
int discretize(double value, const std::vector<double>& cutpoints, const LikertScale& scale);

}  // namespace forge
