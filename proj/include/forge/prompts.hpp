#pragma once

#include <string>
#include <vector>

#include "forge/model.hpp"

namespace forge {

/// Batch prompt skeleton. Occurrences of {rows} in the text fields are
/// replaced with rows_per_batch at render time.
struct PromptTemplate {
    std::string study;
    std::string background;
    std::string instruction;
    std::string scale_line;
    std::vector<Item> items;  // statement text required for rendering
    std::string table_instruction;
    int rows_per_batch = 20;
};

/// The per-batch prompt. Deterministic; the batch index does not alter the
/// text (profile constraints are restated every batch). Throws DataError when
/// an item has no statement text or a name would not appear exactly once.
std::string render_prompt(const PromptTemplate& tmpl, int batch_index);

/// Study templates wired to a model's items. study1 carries the published
/// wording; study2 is a structural clone whose item texts come from the model
/// (user-supplied unless the built-in full-item model is used).
PromptTemplate builtin_template(StudyPreset preset, const ModelSpec& model);

}  // namespace forge
