#include "forge/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "forge/bootstrap.hpp"
#include "forge/errors.hpp"
#include "forge/metrics.hpp"

namespace forge {

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage ") + name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string("stage ") + name + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string("stage ") + name + ": " + e.what());
    }
}

std::string csv_quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char c : cell) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

std::optional<double> cell_number(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    char* end = nullptr;
    const double value = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size()) return std::nullopt;
    return value;
}

// 3-decimal display for real-valued cells; integers and labels pass through.
std::string display_cell(const std::string& cell) {
    if (cell.empty() || !cell_number(cell).has_value()) return cell;
    if (cell.find_first_of(".eE") == std::string::npos) return cell;
    const double value = *cell_number(cell);
    if (std::isinf(value)) return cell;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3f", value);
    return buf;
}

void render_table(const Table& table, std::vector<std::string>& out) {
    out.push_back("");
    out.push_back("== " + table.name + " ==");
    std::vector<std::vector<std::string>> grid;
    grid.push_back(table.header);
    for (const auto& row : table.rows) {
        grid.emplace_back();
        for (const auto& cell : row) grid.back().push_back(display_cell(cell));
    }
    std::vector<std::size_t> widths;
    for (const auto& row : grid) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t j = 0; j < row.size(); ++j) widths[j] = std::max(widths[j], row[j].size());
    }
    for (const auto& row : grid) {
        std::string line;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) line += "  ";
            line += row[j];
            if (j + 1 < row.size()) line.append(widths[j] - row[j].size(), ' ');
        }
        out.push_back(line);
    }
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string table_to_csv(const Table& table) {
    std::string out;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (j > 0) out += ',';
        out += csv_quote(table.header[j]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) out += ',';
            out += csv_quote(row[j]);
        }
        out += '\n';
    }
    return out;
}

Table table_from_csv(const std::string& name, const std::string& text) {
    Table table;
    table.name = name;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.eof()) break;
        auto cells = csv_split(line);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) throw DataError("table '" + name + "' is empty");
    return table;
}

const Table* ReportBundle::find(std::string_view name) const {
    for (const auto& table : tables) {
        if (table.name == name) return &table;
    }
    return nullptr;
}

ReportBundle run_pipeline(const PipelineConfig& config) {
    if (config.model_path.has_value() == config.preset.has_value()) {
        throw ConfigError("exactly one of a model file and a preset must be given");
    }
    if (config.data_path.empty()) throw ConfigError("a data file is required");

    const ModelSpec spec = stage("model", [&] {
        if (config.preset) return builtin_model(*config.preset, config.full_items);
        std::ifstream in(*config.model_path);
        if (!in) throw ConfigError("cannot open model file '" + *config.model_path + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse_model(buffer.str());
    });

    const Panel raw = stage("ingest", [&] { return ingest_csv(config.data_path, spec); });

    auto dedup_pair = stage("dedup", [&] { return dedupe(raw, config.dedup); });
    const Panel& panel = dedup_pair.first;
    const DedupReport& dedup_report = dedup_pair.second;

    const FitResult fit0 = stage("fit", [&] {
        FitResult f = fit_pls(panel, config.fit);
        if (!f.converged) {
            throw NumericError("PLS estimation did not converge in " +
                               std::to_string(config.fit.max_iterations) + " iterations");
        }
        return f;
    });

    const ScreenResult screen =
        stage("screen", [&] { return low_loading_screen(fit0, 0.40, 0.70, config.auto_drop); });

    ModelSpec final_spec = spec;
    FitResult fit = fit0;
    bool reduction_applied = false;
    if (config.auto_drop.has_value() && screen.reduced.has_value()) {
        final_spec = *screen.reduced;
        reduction_applied = true;
        fit = stage("refit", [&] {
            const ItemMatrix reduced = item_matrix(panel, final_spec);
            FitResult f = fit_pls(reduced.values, final_spec, config.fit);
            if (!f.converged) {
                throw NumericError("PLS refit on the reduced model did not converge");
            }
            return f;
        });
    }

    const MetricsReport metrics = stage("metrics", [&] { return compute_metrics(fit); });

    BootstrapOptions boot_options;
    boot_options.resamples = config.bootstrap_resamples;
    boot_options.seed = config.seed;
    boot_options.threads = config.threads;
    boot_options.fit = config.fit;
    const BootstrapResult boot =
        stage("bootstrap", [&] { return bootstrap(panel, final_spec, boot_options); });

    std::vector<GroupComparison> groups;
    std::vector<std::string> group_variables;
    if (config.groups.has_value()) {
        stage("groups", [&] {
            group_variables = config.groups->variables;
            if (group_variables.empty()) {
                for (const auto& field : spec.demographics) {
                    if (field.kind == DemographicKind::integer &&
                        field.name != config.groups->field) {
                        group_variables.push_back(field.name);
                    }
                }
                for (const auto& construct : final_spec.constructs) {
                    group_variables.push_back(construct.name);
                }
            }
            for (const auto& variable : group_variables) {
                groups.push_back(welch_compare(panel, config.groups->field, config.groups->label_a,
                                               config.groups->label_b, variable, &final_spec));
            }
            return 0;
        });
    }

    return stage("tables", [&] {
        ReportBundle bundle;

        Table demographics{"demographics", {"field", "value", "count", "percent"}, {}};
        for (const auto& field : spec.demographics) {
            for (const auto& row : demographics_table(panel, field.name)) {
                demographics.rows.push_back(
                    {field.name, row.value, std::to_string(row.count), format_number(row.percent)});
            }
        }
        bundle.tables.push_back(std::move(demographics));

        Table reliability{
            "reliability",
            {"construct", "item", "loading", "cronbach_alpha", "rho_a", "rho_c", "ave"},
            {}};
        for (std::size_t c = 0; c < final_spec.constructs.size(); ++c) {
            const auto& construct = final_spec.constructs[c];
            const auto& row_metrics = metrics.reliability[c];
            for (std::size_t i = 0; i < construct.items.size(); ++i) {
                std::vector<std::string> row{construct.name, construct.items[i].name,
                                             format_number(fit.loadings[c](static_cast<Eigen::Index>(i)))};
                if (i == 0) {
                    row.push_back(row_metrics.alpha ? format_number(*row_metrics.alpha) : "NA");
                    row.push_back(row_metrics.rho_a ? format_number(*row_metrics.rho_a) : "NA");
                    row.push_back(format_number(row_metrics.rho_c));
                    row.push_back(format_number(row_metrics.ave));
                } else {
                    row.insert(row.end(), {"", "", "", ""});
                }
                reliability.rows.push_back(std::move(row));
            }
        }
        bundle.tables.push_back(std::move(reliability));

        const auto construct_names = [&] {
            std::vector<std::string> names;
            for (const auto& construct : final_spec.constructs) names.push_back(construct.name);
            return names;
        }();

        Table htmt_table{"htmt", {}, {}};
        htmt_table.header.push_back("construct");
        for (const auto& name : construct_names) htmt_table.header.push_back(name);
        for (std::size_t i = 0; i < construct_names.size(); ++i) {
            std::vector<std::string> row{construct_names[i]};
            for (std::size_t j = 0; j < construct_names.size(); ++j) {
                if (j >= i) {
                    row.push_back("");  // blank diagonal and upper triangle
                } else {
                    const double value = metrics.htmt.values(static_cast<Eigen::Index>(i),
                                                             static_cast<Eigen::Index>(j));
                    row.push_back(format_number(value));
                }
            }
            htmt_table.rows.push_back(std::move(row));
        }
        bundle.tables.push_back(std::move(htmt_table));

        Table fl_table{"fornell_larcker", {}, {}};
        fl_table.header.push_back("construct");
        for (const auto& name : construct_names) fl_table.header.push_back(name);
        for (std::size_t i = 0; i < construct_names.size(); ++i) {
            std::vector<std::string> row{construct_names[i]};
            for (std::size_t j = 0; j < construct_names.size(); ++j) {
                if (j > i) {
                    row.push_back("");
                } else {
                    row.push_back(format_number(metrics.fornell.matrix(static_cast<Eigen::Index>(i),
                                                                       static_cast<Eigen::Index>(j))));
                }
            }
            fl_table.rows.push_back(std::move(row));
        }
        bundle.tables.push_back(std::move(fl_table));

        Table vif_table{"vif", {"endogenous", "predictor", "vif"}, {}};
        for (const auto& entry : metrics.vif) {
            vif_table.rows.push_back({entry.endogenous, entry.predictor, format_number(entry.value)});
        }
        bundle.tables.push_back(std::move(vif_table));

        Table paths_table{"paths",
                          {"from", "to", "original", "mean", "stdev", "t", "p", "ci_low", "ci_high"},
                          {}};
        for (const auto& stat : boot.paths) {
            paths_table.rows.push_back({stat.from, stat.to, format_number(stat.original),
                                        format_number(stat.boot_mean), format_number(stat.stdev),
                                        format_number(stat.t_stat), format_number(stat.p),
                                        format_number(stat.ci_low), format_number(stat.ci_high)});
        }
        bundle.tables.push_back(std::move(paths_table));

        Table r2_table{"r2", {"construct", "r2"}, {}};
        for (const auto& construct : final_spec.constructs) {
            const auto it = fit.r2.find(construct.name);
            if (it != fit.r2.end()) {
                r2_table.rows.push_back({construct.name, format_number(it->second)});
            }
        }
        bundle.tables.push_back(std::move(r2_table));

        if (!groups.empty()) {
            Table groups_table{"groups",
                               {"variable", "group", "n", "mean", "sd", "ci_low", "ci_high",
                                "p_welch", "p_pooled"},
                               {}};
            for (const auto& cmp : groups) {
                groups_table.rows.push_back({cmp.variable, cmp.a.label, std::to_string(cmp.a.n),
                                             format_number(cmp.a.mean), format_number(cmp.a.sd),
                                             format_number(cmp.a.ci_low), format_number(cmp.a.ci_high),
                                             format_number(cmp.welch.p), format_number(cmp.pooled.p)});
                groups_table.rows.push_back({cmp.variable, cmp.b.label, std::to_string(cmp.b.n),
                                             format_number(cmp.b.mean), format_number(cmp.b.sd),
                                             format_number(cmp.b.ci_low), format_number(cmp.b.ci_high),
                                             "", ""});
            }
            bundle.tables.push_back(std::move(groups_table));
        }

        Table dedup_table{"dedup", {"key", "total", "unique", "duplicate_rate"}, {}};
        dedup_table.rows.push_back({dedup_key_to_string(config.dedup),
                                    std::to_string(dedup_report.total),
                                    std::to_string(dedup_report.unique),
                                    format_number(dedup_report.duplicate_rate)});
        bundle.tables.push_back(std::move(dedup_table));

        // Manifest: config echo + pipeline facts; timestamps and worker counts
        // are deliberately absent so reruns are byte-identical.
        auto& m = bundle.manifest;
        m.push_back("construct-forge report manifest");
        m.push_back(std::string("version: ") + kToolVersion);
        m.push_back("");
        m.push_back("[config]");
        if (config.preset) {
            m.push_back("model: preset=" + preset_to_string(*config.preset) +
                        (config.full_items ? " (full items)" : ""));
        } else {
            m.push_back("model: file=" + *config.model_path);
        }
        m.push_back("data: " + config.data_path);
        m.push_back("dedup_key: " + dedup_key_to_string(config.dedup));
        m.push_back("scheme: " + scheme_to_string(config.fit.scheme));
        {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%g", config.fit.tolerance);
            m.push_back(std::string("tolerance: ") + buf);
        }
        m.push_back("max_iterations: " + std::to_string(config.fit.max_iterations));
        m.push_back("bootstrap_resamples: " + std::to_string(config.bootstrap_resamples));
        m.push_back("seed: " + std::to_string(config.seed));
        m.push_back("auto_drop: " +
                    (config.auto_drop ? format_number(*config.auto_drop) : std::string("none")));
        m.push_back("");
        m.push_back("[pipeline]");
        m.push_back("ingested_rows: " + std::to_string(raw.rows.size()));
        m.push_back("dedup: total=" + std::to_string(dedup_report.total) +
                    " unique=" + std::to_string(dedup_report.unique) +
                    " duplicate_rate=" + format_number(dedup_report.duplicate_rate));
        m.push_back("fit: iterations=" + std::to_string(fit.iterations) +
                    " converged=yes n=" + std::to_string(panel.rows.size()) +
                    " items=" + std::to_string(final_spec.item_count()));
        m.push_back(std::string("small_sample_warning: ") + (fit.small_sample ? "yes" : "no"));
        {
            std::vector<std::string> flags;
            for (const auto& flag : screen.flags) {
                flags.push_back(flag.item + " loading=" + display_cell(format_number(flag.loading)) +
                                (flag.severity == LoadingSeverity::drop ? " (below drop cut)"
                                                                        : " (below 0.7)"));
            }
            m.push_back("screening_flags: " + (flags.empty() ? "none" : join(flags, "; ")));
            if (reduction_applied) {
                m.push_back("removed_items: " + join(screen.removed, ", ") + " (auto-drop applied)");
            } else if (!screen.removed.empty()) {
                m.push_back("removal_candidates: " + join(screen.removed, ", ") +
                            " (not applied; rerun with --auto-drop)");
            } else {
                m.push_back("removed_items: none");
            }
        }
        m.push_back("bootstrap: resamples=" + std::to_string(boot.resamples) +
                    " discarded=" + std::to_string(boot.discarded));
        if (!groups.empty()) {
            m.push_back("groups: field=" + config.groups->field + " a=" + config.groups->label_a +
                        " b=" + config.groups->label_b + " variables=" + join(group_variables, ",") +
                        " excluded_rows=" + std::to_string(groups.front().excluded));
        } else {
            m.push_back("groups: none requested; groups.csv omitted");
        }
        {
            std::vector<std::string> names;
            for (const auto& table : bundle.tables) names.push_back(table.name + ".csv");
            names.push_back("manifest.txt");
            m.push_back("files: " + join(names, " "));
        }
        m.push_back("");
        m.push_back("[tables, 3-decimal display]");
        for (const auto& table : bundle.tables) render_table(table, m);
        return bundle;
    });
}

void emit_report(const ReportBundle& bundle, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());

    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& table : bundle.tables) {
        files.emplace_back(table.name + ".csv", table_to_csv(table));
    }
    std::string manifest;
    for (const auto& line : bundle.manifest) {
        manifest += line;
        manifest += '\n';
    }
    files.emplace_back("manifest.txt", std::move(manifest));

    std::vector<fs::path> written;
    try {
        for (const auto& [name, content] : files) {
            const fs::path target = dir / name;
            std::ofstream out(target, std::ios::binary | std::ios::trunc);
            if (!out) throw ConfigError("cannot write '" + target.string() + "'");
            out << content;
            out.flush();
            if (!out) throw ConfigError("write failed for '" + target.string() + "'");
            written.push_back(target);
        }
    } catch (...) {
        for (const auto& path : written) fs::remove(path, ec);
        throw;
    }
}

DiffReport compare_to_reference(const std::filesystem::path& bundle_dir,
                                const std::filesystem::path& reference_dir,
                                const std::map<std::string, double>& tolerances) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(reference_dir)) {
        throw ConfigError("reference directory '" + reference_dir.string() + "' does not exist");
    }
    if (!fs::is_directory(bundle_dir)) {
        throw ConfigError("bundle directory '" + bundle_dir.string() + "' does not exist");
    }
    std::vector<fs::path> refs;
    for (const auto& entry : fs::directory_iterator(reference_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            refs.push_back(entry.path());
        }
    }
    std::sort(refs.begin(), refs.end());
    if (refs.empty()) throw ConfigError("reference directory contains no CSV tables");

    auto read_file = [](const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open '" + path.string() + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    };

    const double default_tol = [&] {
        const auto it = tolerances.find("default");
        return it == tolerances.end() ? 1e-9 : it->second;
    }();

    DiffReport report;
    for (const auto& ref_path : refs) {
        const std::string stem = ref_path.stem().string();
        const fs::path bundle_path = bundle_dir / ref_path.filename();
        if (!fs::exists(bundle_path)) {
            throw DataError("bundle is missing table '" + ref_path.filename().string() + "'");
        }
        const Table ref = table_from_csv(stem, read_file(ref_path));
        const Table got = table_from_csv(stem, read_file(bundle_path));
        if (ref.header != got.header) {
            throw DataError("schema mismatch in '" + stem + "': headers differ");
        }
        if (ref.rows.size() != got.rows.size()) {
            throw DataError("schema mismatch in '" + stem + "': " + std::to_string(got.rows.size()) +
                            " rows vs " + std::to_string(ref.rows.size()) + " in the reference");
        }
        const double tol = [&] {
            const auto it = tolerances.find(stem);
            return it == tolerances.end() ? default_tol : it->second;
        }();
        ++report.tables_compared;
        for (std::size_t i = 0; i < ref.rows.size(); ++i) {
            if (ref.rows[i].size() != got.rows[i].size()) {
                throw DataError("schema mismatch in '" + stem + "' row " + std::to_string(i + 1));
            }
            for (std::size_t j = 0; j < ref.rows[i].size(); ++j) {
                const auto& a = got.rows[i][j];
                const auto& b = ref.rows[i][j];
                const auto header =
                    j < ref.header.size() ? ref.header[j] : "col " + std::to_string(j + 1);
                const auto na = cell_number(a);
                const auto nb = cell_number(b);
                if (na.has_value() && nb.has_value()) {
                    if (*na == *nb) continue;  // covers equal infinities
                    const double diff = std::abs(*na - *nb);
                    if (!(diff <= tol)) {
                        report.mismatches.push_back(
                            stem + " row " + std::to_string(i + 1) + " (" + header + "): " + a +
                            " vs " + b + ", |diff| " + format_number(diff) + " > " +
                            format_number(tol));
                    }
                } else if (a != b) {
                    report.mismatches.push_back(stem + " row " + std::to_string(i + 1) + " (" +
                                                header + "): '" + a + "' vs '" + b + "'");
                }
            }
        }
    }
    return report;
}

}  // namespace forge
