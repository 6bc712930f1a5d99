#include "forge/panel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "forge/errors.hpp"

namespace forge {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool parse_int(const std::string& s, int& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = begin + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

DedupKey dedup_key_from_string(std::string_view id) {
    if (id == "responses") return DedupKey::responses;
    if (id == "all" || id == "responses+demographics")
        return DedupKey::responses_and_demographics;
    throw ConfigError("unknown dedup key '" + std::string(id) + "' (expected responses or all)");
}

std::string dedup_key_to_string(DedupKey key) {
    return key == DedupKey::responses ? "responses" : "all";
}

void validate_row(const RespondentRow& row, const ModelSpec& model, const std::string& where) {
    if (row.demographics.size() != model.demographics.size())
        throw DataError(where + ": expected " + std::to_string(model.demographics.size()) +
                        " demographic values, got " + std::to_string(row.demographics.size()));
    if (row.responses.size() != static_cast<std::size_t>(model.item_count()))
        throw DataError(where + ": expected " + std::to_string(model.item_count()) +
                        " item responses, got " + std::to_string(row.responses.size()));
    for (std::size_t i = 0; i < model.demographics.size(); ++i) {
        const auto& field = model.demographics[i];
        if (field.kind != DemographicKind::integer) continue;
        int value = 0;
        if (!parse_int(row.demographics[i], value))
            throw DataError(where + ", column '" + field.name + "': expected an integer, got '" +
                            row.demographics[i] + "'");
        if ((field.min && value < *field.min) || (field.max && value > *field.max))
            throw DataError(where + ", column '" + field.name + "': value " +
                            std::to_string(value) + " outside [" +
                            std::to_string(field.min.value_or(value)) + ", " +
                            std::to_string(field.max.value_or(value)) + "]");
    }
    const auto items = model.item_names();
    for (std::size_t i = 0; i < row.responses.size(); ++i) {
        const int score = row.responses[i];
        if (score < model.scale.min || score > model.scale.max)
            throw DataError(where + ", column '" + items[i] + "': score " + std::to_string(score) +
                            " outside scale [" + std::to_string(model.scale.min) + ", " +
                            std::to_string(model.scale.max) + "]");
    }
}

Panel parse_panel_csv(const std::string& text, const ModelSpec& model, Provenance provenance) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("panel CSV: empty input, header required");

    const auto header = split_csv_line(line);
    std::vector<std::string> expected;
    for (const auto& d : model.demographics) expected.push_back(d.name);
    for (const auto& n : model.item_names()) expected.push_back(n);
    if (header.size() != expected.size()) {
        throw DataError("panel CSV: header has " + std::to_string(header.size()) +
                        " columns, model expects " + std::to_string(expected.size()) +
                        " (demographics then items)");
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (trim(header[i]) != expected[i])
            throw DataError("panel CSV: header column " + std::to_string(i + 1) + " is '" +
                            trim(header[i]) + "', expected '" + expected[i] + "'");
    }

    Panel panel;
    panel.model = model;
    panel.provenance = std::move(provenance);
    const std::size_t n_demo = model.demographics.size();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string where = "row " + std::to_string(line_no - 1);
        if (fields.size() != expected.size())
            throw DataError(where + ": expected " + std::to_string(expected.size()) +
                            " fields, got " + std::to_string(fields.size()));
        RespondentRow row;
        for (std::size_t i = 0; i < n_demo; ++i) row.demographics.push_back(trim(fields[i]));
        for (std::size_t i = n_demo; i < fields.size(); ++i) {
            int score = 0;
            if (!parse_int(fields[i], score))
                throw DataError(where + ", column '" + expected[i] + "': expected an integer, got '" +
                                trim(fields[i]) + "'");
            row.responses.push_back(score);
        }
        validate_row(row, model, where);
        panel.rows.push_back(std::move(row));
    }
    return panel;
}

Panel ingest_csv(const std::filesystem::path& file, const ModelSpec& model) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open panel CSV '" + file.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_panel_csv(buf.str(), model, {"file", file.string()});
}

std::string emit_csv(const Panel& panel) {
    std::ostringstream out;
    bool first = true;
    for (const auto& d : panel.model.demographics) {
        if (!first) out << ',';
        out << csv_quote(d.name);
        first = false;
    }
    for (const auto& n : panel.model.item_names()) {
        if (!first) out << ',';
        out << csv_quote(n);
        first = false;
    }
    out << '\n';
    for (const auto& row : panel.rows) {
        first = true;
        for (const auto& v : row.demographics) {
            if (!first) out << ',';
            out << csv_quote(v);
            first = false;
        }
        for (int score : row.responses) {
            if (!first) out << ',';
            out << score;
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

void write_csv(const Panel& panel, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write panel CSV '" + file.string() + "'");
    out << emit_csv(panel);
}

std::pair<Panel, DedupReport> dedupe(const Panel& panel, DedupKey key) {
    Panel out;
    out.model = panel.model;
    out.provenance = panel.provenance;
    std::set<std::string> seen;
    for (const auto& row : panel.rows) {
        std::string k;
        for (int score : row.responses) {
            k += std::to_string(score);
            k += ';';
        }
        if (key == DedupKey::responses_and_demographics) {
            for (const auto& d : row.demographics) {
                k += d;
                k += ';';
            }
        }
        if (seen.insert(std::move(k)).second) out.rows.push_back(row);
    }
    DedupReport report;
    report.total = panel.rows.size();
    report.unique = out.rows.size();
    report.duplicate_rate =
        report.total == 0
            ? 0.0
            : static_cast<double>(report.total - report.unique) / static_cast<double>(report.total);
    return {std::move(out), report};
}

std::vector<FrequencyRow> demographics_table(const Panel& panel, std::string_view field) {
    const auto& demos = panel.model.demographics;
    std::size_t idx = demos.size();
    for (std::size_t i = 0; i < demos.size(); ++i)
        if (demos[i].name == field) idx = i;
    if (idx == demos.size())
        throw DataError("unknown demographic field '" + std::string(field) + "'");

    std::vector<std::pair<std::string, std::size_t>> counts;
    for (const auto& row : panel.rows) {
        const std::string& value = row.demographics[idx];
        auto it = std::find_if(counts.begin(), counts.end(),
                               [&](const auto& kv) { return kv.first == value; });
        if (it == counts.end())
            counts.emplace_back(value, 1);
        else
            ++it->second;
    }
    const bool all_int = std::all_of(counts.begin(), counts.end(), [](const auto& kv) {
        int v;
        return parse_int(kv.first, v);
    });
    std::sort(counts.begin(), counts.end(), [&](const auto& a, const auto& b) {
        if (all_int) {
            int va = 0, vb = 0;
            parse_int(a.first, va);
            parse_int(b.first, vb);
            if (va != vb) return va < vb;
        }
        return a.first < b.first;
    });

    std::vector<FrequencyRow> table;
    const double total = static_cast<double>(panel.rows.size());
    for (const auto& [value, count] : counts)
        table.push_back({value, count, 100.0 * static_cast<double>(count) / total});
    return table;
}

ItemMatrix item_matrix(const Panel& panel, const ModelSpec& spec) {
    ItemMatrix full = item_matrix(panel);
    ItemMatrix m;
    m.labels = spec.item_names();
    m.values.resize(full.values.rows(), static_cast<Eigen::Index>(m.labels.size()));
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
        auto it = std::find(full.labels.begin(), full.labels.end(), m.labels[j]);
        if (it == full.labels.end())
            throw DataError("panel has no column for item '" + m.labels[j] + "'");
        m.values.col(static_cast<Eigen::Index>(j)) =
            full.values.col(it - full.labels.begin());
    }
    return m;
}

ItemMatrix item_matrix(const Panel& panel) {
    if (panel.rows.empty()) throw DataError("item_matrix: panel is empty");
    ItemMatrix m;
    m.labels = panel.model.item_names();
    const auto n = static_cast<Eigen::Index>(panel.rows.size());
    const auto p = static_cast<Eigen::Index>(m.labels.size());
    m.values.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            m.values(i, j) = panel.rows[static_cast<std::size_t>(i)]
                                 .responses[static_cast<std::size_t>(j)];
    return m;
}

}  // namespace forge
