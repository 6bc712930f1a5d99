#include "forge/prompts.hpp"

#include <cctype>
#include <sstream>

#include "forge/errors.hpp"

namespace forge {

namespace {

std::string replace_all(std::string text, const std::string& what, const std::string& with) {
    std::size_t at = 0;
    while ((at = text.find(what, at)) != std::string::npos) {
        text.replace(at, what.size(), with);
        at += with.size();
    }
    return text;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

int count_token(const std::string& text, const std::string& token) {
    int count = 0;
    std::size_t at = 0;
    while ((at = text.find(token, at)) != std::string::npos) {
        const bool left_ok = at == 0 || !word_char(text[at - 1]);
        const std::size_t end = at + token.size();
        const bool right_ok = end >= text.size() || !word_char(text[end]);
        if (left_ok && right_ok) ++count;
        at = end;
    }
    return count;
}

}  // namespace

std::string render_prompt(const PromptTemplate& tmpl, int batch_index) {
    if (batch_index < 0) throw ConfigError("batch index must be nonnegative");
    if (tmpl.rows_per_batch < 1) throw ConfigError("rows_per_batch must be at least 1");
    const std::string rows = std::to_string(tmpl.rows_per_batch);
    std::ostringstream out;
    out << "Background:\n" << replace_all(tmpl.background, "{rows}", rows) << "\n\n";
    out << "Instruction:\n" << replace_all(tmpl.instruction, "{rows}", rows) << "\n\n";
    out << tmpl.scale_line << "\n\n";
    for (const auto& item : tmpl.items) {
        if (item.text.empty()) {
            throw DataError("item '" + item.name +
                            "' has no statement text; supply item texts before prompting");
        }
        out << item.name << " " << item.text << "\n";
    }
    out << "\n" << replace_all(tmpl.table_instruction, "{rows}", rows) << "\n";
    std::string text = out.str();
    for (const auto& item : tmpl.items) {
        if (count_token(text, item.name) != 1) {
            throw DataError("item name '" + item.name +
                            "' must appear exactly once in the rendered prompt");
        }
    }
    return text;
}

PromptTemplate builtin_template(StudyPreset preset, const ModelSpec& model) {
    PromptTemplate tmpl;
    tmpl.study = preset_to_string(preset);
    for (const auto& construct : model.constructs) {
        for (const auto& item : construct.items) tmpl.items.push_back(item);
    }
    std::string constructs;
    for (std::size_t i = 0; i < model.constructs.size(); ++i) {
        if (i > 0) constructs += i + 1 == model.constructs.size() ? ", and " : ", ";
        constructs += model.constructs[i].name;
    }
    tmpl.scale_line =
        "On a 7-point scale, 1. Highly Unlikely;2. Unlikely;3. Somewhat Unlikely;4. Neutral;"
        "5. Somewhat Likely;6. Likely; 7. Highly Likely";
    if (preset == StudyPreset::study1) {
        tmpl.background =
            "Assume we have a student population with an equal number of gender, different age "
            "groups, majors and years in university with various ChatGPT experiences.";
        tmpl.instruction =
            "Construct a list of {rows} student samples with the above profile and their response "
            "based on the student experiences with ChatGPT. Response to the following statements "
            "that reflect the individual, no need to explain.\n"
            "The correlation between constructs PU, PEOU, BI, and CPLAY should be at the "
            "acceptable range\n"
            "The correlation within the construct should be at the acceptable range.\n"
            "Do you understand the requirement for correlation on constructs? Answer this "
            "question first. Explain the requirements.";
        tmpl.table_instruction =
            "Present a nice response table of your option that can copy to Excel. Each row "
            "represents a trial and the column represents the item's number. Include columns on "
            "the left that indicate trial, student age, gender (male :1, female:2), major, year "
            "in university (1 to 4), and ChatGPT experience (0 to 4). Produce a total of {rows} "
            "rows.";
    } else {
        tmpl.background =
            "Assume we have a student population with an equal number of gender, different age "
            "groups, majors and English abilities with various virtual-reality experiences.";
        tmpl.instruction =
            "Construct a list of {rows} student samples with the above profile and their response "
            "based on the student experiences with an English-learning virtual reality game. "
            "Response to the following statements that reflect the individual, no need to "
            "explain.\n"
            "The correlation between constructs " + constructs + " should be at the acceptable "
            "range\n"
            "The correlation within the construct should be at the acceptable range.\n"
            "Do you understand the requirement for correlation on constructs? Answer this "
            "question first. Explain the requirements.";
        tmpl.table_instruction =
            "Present a nice response table of your option that can copy to Excel. Each row "
            "represents a trial and the column represents the item's number. Include columns on "
            "the left that indicate trial, student age, gender (male :1, female:2), major, "
            "English ability (1 to 4), and virtual reality experience (1 to 4). Produce a total "
            "of {rows} rows.";
    }
    return tmpl;
}

}  // namespace forge
