#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "forge/model.hpp"

namespace forge {

struct RespondentRow {
    std::vector<std::string> demographics;  // aligned with ModelSpec::demographics
    std::vector<int> responses;             // aligned with ModelSpec::item_names()
};

struct Provenance {
    std::string kind;    // "file" | "llm" | "synthetic"
    std::string detail;  // path, transcript file, or seed
};

// A validated respondent panel. Immutable by convention after construction.
struct Panel {
    ModelSpec model;
    std::vector<RespondentRow> rows;
    Provenance provenance;

    std::size_t size() const { return rows.size(); }
};

struct DedupReport {
    std::size_t total = 0;
    std::size_t unique = 0;
    double duplicate_rate = 0.0;  // (total - unique) / total, 0 for empty panels
};

enum class DedupKey { responses, responses_and_demographics };

DedupKey dedup_key_from_string(std::string_view id);
std::string dedup_key_to_string(DedupKey key);

/// Validates one row against the model; throws DataError naming the offending
/// cell. `where` prefixes diagnostics (e.g. "row 12").
void validate_row(const RespondentRow& row, const ModelSpec& model, const std::string& where);

/// Parses panel CSV text (header: demographics then items). Throws DataError
/// on schema or value errors, reporting row and column.
Panel parse_panel_csv(const std::string& text, const ModelSpec& model, Provenance provenance);

Panel ingest_csv(const std::filesystem::path& file, const ModelSpec& model);

/// Emits the panel as CSV, bit-stable for identical input.
std::string emit_csv(const Panel& panel);
void write_csv(const Panel& panel, const std::filesystem::path& file);

/// Keeps the first occurrence of each distinct key, preserving order.
std::pair<Panel, DedupReport> dedupe(const Panel& panel, DedupKey key = DedupKey::responses);

struct FrequencyRow {
    std::string value;
    std::size_t count = 0;
    double percent = 0.0;  // exact; display rounding happens at emit time
};

/// Frequency table of one demographic field. Rows sorted numerically when all
/// values parse as integers, lexicographically otherwise.
std::vector<FrequencyRow> demographics_table(const Panel& panel, std::string_view field);

struct ItemMatrix {
    Eigen::MatrixXd values;           // n x p raw scores
    std::vector<std::string> labels;  // column item names, model order
};

/// Raw score matrix in model item order; throws DataError on empty panels.
ItemMatrix item_matrix(const Panel& panel);

/// Columns for `spec`'s items pulled out of a (possibly wider) panel, in
/// spec order. Throws DataError when an item is missing from the panel.
ItemMatrix item_matrix(const Panel& panel, const ModelSpec& spec);

}  // namespace forge
