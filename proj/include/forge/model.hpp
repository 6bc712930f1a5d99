#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

struct LikertScale {
    int min = 1;
    int max = 7;
    int categories() const { return max - min + 1; }
};

struct Item {
    std::string name;
    std::string text;  // statement shown to respondents; may be empty
};

struct Construct {
    std::string name;
    std::vector<Item> items;
};

struct StructuralPath {
    std::string from;
    std::string to;
};

enum class DemographicKind { integer, label };

struct DemographicField {
    std::string name;
    DemographicKind kind = DemographicKind::label;
    std::optional<int> min;  // integer fields only
    std::optional<int> max;
};

// Measurement + structural model. Immutable by convention after construction;
// all operations take it by const reference.
struct ModelSpec {
    std::vector<Construct> constructs;
    std::vector<StructuralPath> paths;
    LikertScale scale;
    std::vector<DemographicField> demographics;  // sidecar schema for panel CSVs

    const Construct* find_construct(std::string_view name) const;
    int construct_index(std::string_view name) const;  // -1 if absent
    const DemographicField* find_demographic(std::string_view name) const;

    /// All item names, construct order then within-construct order.
    std::vector<std::string> item_names() const;
    int item_count() const;

    bool is_endogenous(std::string_view construct) const;
    /// Predecessors of `construct` in path declaration order.
    std::vector<std::string> predecessors(std::string_view construct) const;
};

struct Violation {
    std::string rule;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> endogenous;
    std::vector<std::string> exogenous;
    bool ok() const { return violations.empty(); }
};

/// Checks all ModelSpec invariants and classifies constructs. Violations are
/// data, not exceptions.
ValidationReport validate_model(const ModelSpec& spec);

/// Parses the JSON model document; throws DataError with position info on
/// syntax errors and DataError listing violations when validation fails.
ModelSpec parse_model(const std::string& text);

/// Serializes to the JSON model document format; parse_model(emit_model(m))
/// reproduces m.
std::string emit_model(const ModelSpec& spec);

enum class StudyPreset { study1, study2 };

/// Maps "study1"/"study2" onto the enum; anything else throws ConfigError.
StudyPreset preset_from_string(std::string_view id);
std::string preset_to_string(StudyPreset preset);

/// Built-in models. study2 defaults to the reduced item set fitted after the
/// low-loading removals; full_items restores PU3 and PEOU4.
ModelSpec builtin_model(StudyPreset preset, bool full_items = false);

}  // namespace forge
