#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/model.hpp"
#include "forge/panel.hpp"
#include "forge/pls.hpp"

namespace forge {

inline constexpr const char* kToolVersion = "0.1.0";

/// One emitted CSV table. Numeric cells are pre-formatted with format_number
/// so emission is byte-stable; blank cells are empty strings.
struct Table {
    std::string name;  // file stem, e.g. "reliability"
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Full precision (%.17g); "inf"/"-inf" for infinities, "NA" for NaN.
std::string format_number(double value);

std::string table_to_csv(const Table& table);
Table table_from_csv(const std::string& name, const std::string& text);

struct GroupPlan {
    std::string field;
    std::string label_a;
    std::string label_b;
    std::vector<std::string> variables;  // empty = integer demographics + all constructs
};

struct PipelineConfig {
    std::optional<std::string> model_path;   // exactly one of model_path/preset
    std::optional<StudyPreset> preset;
    bool full_items = false;                 // preset variant with screened items restored
    std::string data_path;
    DedupKey dedup = DedupKey::responses;
    FitOptions fit;
    int bootstrap_resamples = 5000;
    std::uint64_t seed = 1;
    int threads = 0;  // bootstrap worker count; does not affect results
    std::optional<double> auto_drop;
    std::optional<GroupPlan> groups;
};

struct ReportBundle {
    std::vector<Table> tables;           // emission order
    std::vector<std::string> manifest;   // manifest.txt lines (no timestamps)

    const Table* find(std::string_view name) const;
};

/// ingest -> dedupe -> fit -> screen (-> refit) -> metrics -> bootstrap ->
/// groups -> tables. Any stage failure throws with a stage-named diagnostic;
/// nothing is written to disk here.
ReportBundle run_pipeline(const PipelineConfig& config);

/// Writes one CSV per table plus manifest.txt. All file contents are built
/// before anything is written; on a write failure the partial bundle is
/// removed.
void emit_report(const ReportBundle& bundle, const std::filesystem::path& dir);

struct DiffReport {
    std::vector<std::string> mismatches;
    int tables_compared = 0;
    bool pass() const { return mismatches.empty(); }
};

/// Cell-by-cell |difference| check of every reference CSV against the bundle.
/// Tolerance per table stem ("default" applies elsewhere, fallback 1e-9).
/// Schema mismatches (missing table, different shape or header) are errors,
/// not comparison failures.
DiffReport compare_to_reference(const std::filesystem::path& bundle_dir,
                                const std::filesystem::path& reference_dir,
                                const std::map<std::string, double>& tolerances);

}  // namespace forge
