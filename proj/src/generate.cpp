#include "forge/generate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "forge/errors.hpp"
#include "forge/stats.hpp"

namespace forge {

namespace {

using nlohmann::json;

std::string responses_key(const std::vector<int>& responses) {
    std::string key;
    for (int v : responses) {
        key += std::to_string(v);
        key += ';';
    }
    return key;
}

}  // namespace

std::vector<double> default_cutpoints(int categories) {
    if (categories < 2) throw ConfigError("Likert scale needs at least 2 categories");
    std::vector<double> cuts;
    cuts.reserve(static_cast<std::size_t>(categories) - 1);
    for (int k = 1; k < categories; ++k) {
        cuts.push_back(stats::normal_quantile(static_cast<double>(k) / categories));
    }
    return cuts;
}

int discretize(double value, const std::vector<double>& cutpoints, const LikertScale& scale) {
    const auto above = std::upper_bound(cutpoints.begin(), cutpoints.end(), value);
    return scale.min + static_cast<int>(above - cutpoints.begin());
}

void validate_planted(const PlantedModel& planted, const ModelSpec& spec) {
    const auto C = static_cast<Eigen::Index>(spec.constructs.size());
    const auto p = static_cast<Eigen::Index>(spec.item_count());
    if (planted.phi.rows() != C || planted.phi.cols() != C) {
        throw ConfigError("phi must be " + std::to_string(C) + "x" + std::to_string(C) +
                          " for this model");
    }
    for (Eigen::Index i = 0; i < C; ++i) {
        if (std::abs(planted.phi(i, i) - 1.0) > 1e-9) {
            throw ConfigError("phi diagonal must be 1");
        }
        for (Eigen::Index j = 0; j < C; ++j) {
            if (std::abs(planted.phi(i, j) - planted.phi(j, i)) > 1e-9) {
                throw ConfigError("phi must be symmetric");
            }
            if (std::abs(planted.phi(i, j)) > 1.0 + 1e-12) {
                throw ConfigError("phi entries must lie in [-1,1]");
            }
        }
    }
    if (planted.lambda.size() != p) {
        throw ConfigError("lambda must have one entry per item (" + std::to_string(p) + ")");
    }
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(planted.lambda(i) > 0.0 && planted.lambda(i) <= 1.0)) {
            throw ConfigError("lambda entries must lie in (0,1]");
        }
    }
    if (!(planted.duplicate_rate >= 0.0 && planted.duplicate_rate < 1.0)) {
        throw ConfigError("duplicate_rate must lie in [0,1)");
    }
    if (!planted.cutpoints.empty()) {
        if (static_cast<int>(planted.cutpoints.size()) != spec.scale.categories() - 1) {
            throw ConfigError("cutpoints must have categories-1 entries");
        }
        if (!std::is_sorted(planted.cutpoints.begin(), planted.cutpoints.end())) {
            throw ConfigError("cutpoints must be ascending");
        }
    }
    if (!planted.bias_field.empty()) {
        const DemographicField* field = spec.find_demographic(planted.bias_field);
        if (field == nullptr) {
            throw ConfigError("bias field '" + planted.bias_field + "' is not in the model");
        }
        if (field->kind != DemographicKind::label) {
            throw ConfigError("bias field '" + planted.bias_field + "' must be a label field");
        }
    }
    for (const auto& [name, dist] : planted.label_fields) {
        const DemographicField* field = spec.find_demographic(name);
        if (field == nullptr || field->kind != DemographicKind::label) {
            throw ConfigError("'" + name + "' is not a label demographic of the model");
        }
        if (dist.labels.empty() || dist.labels.size() != dist.probs.size()) {
            throw ConfigError("label distribution for '" + name + "' is malformed");
        }
        double total = 0.0;
        for (double pr : dist.probs) {
            if (!(pr > 0.0)) throw ConfigError("label probabilities must be positive");
            total += pr;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ConfigError("label probabilities for '" + name + "' must sum to 1");
        }
    }
}

PlantedModel parse_planted(const std::string& text, const ModelSpec& spec) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("planted config is not valid JSON: ") + e.what());
    }
    PlantedModel planted;
    try {
        const auto& phi = doc.at("phi");
        const auto C = phi.size();
        planted.phi.resize(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(C));
        for (std::size_t i = 0; i < C; ++i) {
            if (phi[i].size() != C) throw DataError("phi must be square");
            for (std::size_t j = 0; j < C; ++j) {
                planted.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    phi[i][j].get<double>();
            }
        }
        const auto p = static_cast<Eigen::Index>(spec.item_count());
        const auto& lambda = doc.at("lambda");
        if (lambda.is_number()) {
            planted.lambda = Eigen::VectorXd::Constant(p, lambda.get<double>());
        } else {
            if (static_cast<Eigen::Index>(lambda.size()) != p) {
                throw DataError("lambda array must have one entry per item");
            }
            planted.lambda.resize(p);
            for (Eigen::Index i = 0; i < p; ++i) {
                planted.lambda(i) = lambda[static_cast<std::size_t>(i)].get<double>();
            }
        }
        if (doc.contains("bias")) {
            planted.bias_field = doc["bias"].at("field").get<std::string>();
            for (const auto& [label, shift] : doc["bias"].at("shifts").items()) {
                planted.bias_shifts[label] = shift.get<double>();
            }
        }
        planted.duplicate_rate = doc.value("duplicate_rate", 0.0);
        if (doc.contains("cutpoints")) {
            planted.cutpoints = doc["cutpoints"].get<std::vector<double>>();
        }
        if (doc.contains("demographics")) {
            for (const auto& [name, entry] : doc["demographics"].items()) {
                LabelDistribution dist;
                dist.labels = entry.at("labels").get<std::vector<std::string>>();
                dist.probs = entry.at("probs").get<std::vector<double>>();
                planted.label_fields[name] = std::move(dist);
            }
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("planted config: ") + e.what());
    }
    validate_planted(planted, spec);
    return planted;
}

std::string emit_planted(const PlantedModel& planted) {
    json doc;
    doc["phi"] = json::array();
    for (Eigen::Index i = 0; i < planted.phi.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < planted.phi.cols(); ++j) row.push_back(planted.phi(i, j));
        doc["phi"].push_back(std::move(row));
    }
    doc["lambda"] = std::vector<double>(planted.lambda.data(),
                                        planted.lambda.data() + planted.lambda.size());
    if (!planted.bias_field.empty()) {
        doc["bias"]["field"] = planted.bias_field;
        for (const auto& [label, shift] : planted.bias_shifts) {
            doc["bias"]["shifts"][label] = shift;
        }
    }
    doc["duplicate_rate"] = planted.duplicate_rate;
    if (!planted.cutpoints.empty()) doc["cutpoints"] = planted.cutpoints;
    for (const auto& [name, dist] : planted.label_fields) {
        doc["demographics"][name]["labels"] = dist.labels;
        doc["demographics"][name]["probs"] = dist.probs;
    }
    return doc.dump(2) + "\n";
}

PlantedModel builtin_planted(StudyPreset preset) {
    PlantedModel planted;
    planted.bias_field = "gender";
    planted.label_fields["gender"] = {{"male", "female"}, {0.493, 0.507}};
    planted.label_fields["major"] = {{"Computer Science", "Information Systems", "Business", "Engineering"},
                                     {0.4, 0.3, 0.2, 0.1}};
    if (preset == StudyPreset::study1) {
        // Construct order PU, PEOU, CPLAY, BI.
        planted.phi.resize(4, 4);
        planted.phi << 1.000, 0.839, 0.859, 0.901,
                       0.839, 1.000, 0.830, 0.745,
                       0.859, 0.830, 1.000, 0.813,
                       0.901, 0.745, 0.813, 1.000;
        const double lam[4] = {0.938, 0.929, 0.944, 0.980};
        const int counts[4] = {6, 6, 4, 2};
        planted.lambda.resize(18);
        Eigen::Index at = 0;
        for (int c = 0; c < 4; ++c) {
            for (int i = 0; i < counts[c]; ++i) planted.lambda(at++) = lam[c];
        }
        planted.bias_shifts["female"] = 0.35;
        planted.duplicate_rate = 0.2625;
    } else {
        // Construct order IMGM, IMRN, INTR, ITU, PEU, PU (reduced item set).
        planted.phi.resize(6, 6);
        planted.phi << 1.000, 0.749, 0.543, 0.674, 0.587, 0.601,
                       0.749, 1.000, 0.564, 0.700, 0.647, 0.686,
                       0.543, 0.564, 1.000, 0.609, 0.650, 0.697,
                       0.674, 0.700, 0.609, 1.000, 0.832, 0.715,
                       0.587, 0.647, 0.650, 0.832, 1.000, 0.744,
                       0.601, 0.686, 0.697, 0.715, 0.744, 1.000;
        const double lam[6] = {0.877, 0.930, 0.863, 0.835, 0.822, 0.883};
        const int counts[6] = {3, 3, 3, 3, 3, 2};
        planted.lambda.resize(17);
        Eigen::Index at = 0;
        for (int c = 0; c < 6; ++c) {
            for (int i = 0; i < counts[c]; ++i) planted.lambda(at++) = lam[c];
        }
        planted.bias_shifts["female"] = 0.30;
        planted.duplicate_rate = 0.40;
    }
    return planted;
}

SyntheticPanel generate_synthetic(const PlantedModel& planted, const ModelSpec& spec, int n,
                                  std::uint64_t seed) {
    if (n < 1) throw ConfigError("panel size must be positive");
    validate_planted(planted, spec);
    const auto report = validate_model(spec);
    if (!report.ok()) {
        throw DataError("model failed validation: " + report.violations.front().rule);
    }

    Eigen::LLT<Eigen::MatrixXd> llt(planted.phi);
    if (llt.info() != Eigen::Success) {
        throw NumericError("phi is not positive definite; Cholesky factorization failed");
    }
    const Eigen::MatrixXd chol = llt.matrixL();

    const int C = static_cast<int>(spec.constructs.size());
    const int p = spec.item_count();
    const std::vector<double> cuts =
        planted.cutpoints.empty() ? default_cutpoints(spec.scale.categories()) : planted.cutpoints;

    const int duplicates = static_cast<int>(std::lround(planted.duplicate_rate * n));
    const int base = n - duplicates;
    if (base < 1) throw ConfigError("duplicate_rate leaves no base rows");

    int bias_index = -1;
    if (!planted.bias_field.empty()) {
        for (std::size_t i = 0; i < spec.demographics.size(); ++i) {
            if (spec.demographics[i].name == planted.bias_field) bias_index = static_cast<int>(i);
        }
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto draw_demographics = [&]() {
        std::vector<std::string> values;
        values.reserve(spec.demographics.size());
        for (const auto& field : spec.demographics) {
            if (field.kind == DemographicKind::integer) {
                std::uniform_int_distribution<int> dist(field.min.value(), field.max.value());
                values.push_back(std::to_string(dist(rng)));
            } else {
                const auto it = planted.label_fields.find(field.name);
                if (it == planted.label_fields.end()) {
                    throw ConfigError("no label distribution configured for demographic '" +
                                      field.name + "'");
                }
                double u = unit(rng);
                std::size_t pick = it->second.labels.size() - 1;
                double cum = 0.0;
                for (std::size_t k = 0; k < it->second.probs.size(); ++k) {
                    cum += it->second.probs[k];
                    if (u < cum) {
                        pick = k;
                        break;
                    }
                }
                values.push_back(it->second.labels[pick]);
            }
        }
        return values;
    };

    SyntheticPanel out;
    out.panel.model = spec;
    out.panel.rows.reserve(static_cast<std::size_t>(n));
    out.latent.resize(n, C);
    out.continuous.resize(n, p);
    out.duplicate_of.assign(static_cast<std::size_t>(n), -1);

    std::set<std::string> seen;
    for (int r = 0; r < base; ++r) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            RespondentRow row;
            row.demographics = draw_demographics();
            Eigen::VectorXd z(C);
            for (int c = 0; c < C; ++c) z(c) = gauss(rng);
            Eigen::VectorXd eta = chol * z;
            if (bias_index >= 0) {
                const auto it = planted.bias_shifts.find(row.demographics[static_cast<std::size_t>(bias_index)]);
                if (it != planted.bias_shifts.end()) eta.array() += it->second;
            }
            Eigen::VectorXd values(p);
            row.responses.resize(static_cast<std::size_t>(p));
            int at = 0;
            for (int c = 0; c < C; ++c) {
                const auto items = static_cast<int>(spec.constructs[static_cast<std::size_t>(c)].items.size());
                for (int i = 0; i < items; ++i, ++at) {
                    const double lam = planted.lambda(at);
                    values(at) = lam * eta(c) + std::sqrt(1.0 - lam * lam) * gauss(rng);
                    row.responses[static_cast<std::size_t>(at)] = discretize(values(at), cuts, spec.scale);
                }
            }
            if (!seen.insert(responses_key(row.responses)).second) continue;  // collision: redraw
            out.latent.row(r) = eta.transpose();
            out.continuous.row(r) = values.transpose();
            out.panel.rows.push_back(std::move(row));
            placed = true;
        }
        if (!placed) {
            throw NumericError("could not generate distinct base rows; scale too coarse for n=" +
                               std::to_string(n));
        }
    }

    for (int j = 0; j < duplicates; ++j) {
        const auto src = static_cast<int>(rng() % static_cast<std::uint64_t>(base));
        const int r = base + j;
        out.panel.rows.push_back(out.panel.rows[static_cast<std::size_t>(src)]);
        out.latent.row(r) = out.latent.row(src);
        out.continuous.row(r) = out.continuous.row(src);
        out.duplicate_of[static_cast<std::size_t>(r)] = src;
    }

    std::ostringstream detail;
    detail << "seed=" << seed << " base=" << base << " duplicates=" << duplicates;
    out.panel.provenance = {"synthetic", detail.str()};
    return out;
}

}  // namespace forge
