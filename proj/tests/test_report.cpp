#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "forge/errors.hpp"
#include "forge/generate.hpp"
#include "forge/model.hpp"
#include "forge/panel.hpp"
#include "forge/report.hpp"

using namespace forge;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// One study1 synthetic panel reused across the report tests.
const fs::path& study1_csv() {
    static const fs::path path = [] {
        const fs::path dir = fresh_dir("forge_report_fixture");
        const ModelSpec spec = builtin_model(StudyPreset::study1);
        const SyntheticPanel syn =
            generate_synthetic(builtin_planted(StudyPreset::study1), spec, 200, 21);
        const fs::path csv = dir / "panel.csv";
        std::ofstream out(csv, std::ios::binary);
        out << emit_csv(syn.panel);
        return csv;
    }();
    return path;
}

PipelineConfig base_config() {
    PipelineConfig config;
    config.preset = StudyPreset::study1;
    config.data_path = study1_csv().string();
    config.bootstrap_resamples = 80;
    config.seed = 3;
    return config;
}

void check_bundles_equal(const ReportBundle& a, const ReportBundle& b) {
    REQUIRE(a.tables.size() == b.tables.size());
    for (std::size_t i = 0; i < a.tables.size(); ++i) {
        CHECK(a.tables[i].name == b.tables[i].name);
        CHECK(table_to_csv(a.tables[i]) == table_to_csv(b.tables[i]));
    }
    CHECK(a.manifest == b.manifest);
}

}  // namespace

TEST_CASE("format_number prints shortest-exact decimals and sentinels") {
    CHECK(format_number(std::nan("")) == "NA");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(0.1) == "0.10000000000000001");
    for (double value : {0.1, -3.25, 1e-17, 123456.789, 2.0 / 3.0}) {
        CHECK(std::strtod(format_number(value).c_str(), nullptr) == value);
    }
}

TEST_CASE("table CSV round trip preserves quoting") {
    Table table;
    table.name = "demo";
    table.header = {"field", "value"};
    table.rows = {{"a", "plain"},
                  {"b", "has,comma"},
                  {"c", "has \"quotes\""},
                  {"d", ""}};
    const std::string csv = table_to_csv(table);
    CHECK(csv.find("\"has,comma\"") != std::string::npos);
    CHECK(csv.find("\"has \"\"quotes\"\"\"") != std::string::npos);
    const Table back = table_from_csv("demo", csv);
    CHECK(back.header == table.header);
    CHECK(back.rows == table.rows);
    CHECK_THROWS_WITH_AS(table_from_csv("demo", ""), doctest::Contains("empty"), DataError);
}

TEST_CASE("run_pipeline produces the full table set") {
    const ReportBundle bundle = run_pipeline(base_config());

    const std::vector<std::string> expected = {"demographics", "reliability", "htmt",
                                               "fornell_larcker", "vif", "paths",
                                               "r2", "dedup"};
    REQUIRE(bundle.tables.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(bundle.tables[i].name == expected[i]);
    CHECK(bundle.find("paths") != nullptr);
    CHECK(bundle.find("groups") == nullptr);
    CHECK(bundle.find("nonesuch") == nullptr);

    // Injected duplicates are deterministic: lround(0.2625 * 200) = 53.
    const Table* dedup = bundle.find("dedup");
    REQUIRE(dedup->rows.size() == 1);
    CHECK(dedup->rows[0][0] == "responses");
    CHECK(dedup->rows[0][1] == "200");
    CHECK(dedup->rows[0][2] == "147");

    const Table* reliability = bundle.find("reliability");
    REQUIRE(reliability->rows.size() == 18);
    CHECK(reliability->rows[0][0] == "PU");
    CHECK(reliability->rows[0][1] == "PU1");
    CHECK(reliability->rows[0][3] != "");   // alpha on the block's first row
    CHECK(reliability->rows[1][3] == "");   // blank on later rows

    const Table* paths = bundle.find("paths");
    REQUIRE(paths->rows.size() == 4);
    CHECK(paths->rows[0][0] == "CPLAY");
    CHECK(paths->rows[0][1] == "BI");
    CHECK(paths->rows[2][0] == "PEOU");
    CHECK(paths->rows[2][1] == "PU");

    const Table* r2 = bundle.find("r2");
    REQUIRE(r2->rows.size() == 2);  // endogenous constructs only
    CHECK(r2->rows[0][0] == "PU");
    CHECK(r2->rows[1][0] == "BI");

    const Table* htmt = bundle.find("htmt");
    REQUIRE(htmt->rows.size() == 4);
    CHECK(htmt->rows[0][1] == "");   // diagonal and upper triangle stay blank
    CHECK(htmt->rows[1][1] != "");

    bool saw_groups_note = false;
    bool saw_files = false;
    for (const auto& line : bundle.manifest) {
        if (line == "groups: none requested; groups.csv omitted") saw_groups_note = true;
        if (line.rfind("files: ", 0) == 0) {
            saw_files = true;
            CHECK(line.find("paths.csv") != std::string::npos);
            CHECK(line.find("manifest.txt") != std::string::npos);
            CHECK(line.find("groups.csv") == std::string::npos);
        }
    }
    CHECK(saw_groups_note);
    CHECK(saw_files);
    CHECK(bundle.manifest[1] == std::string("version: ") + kToolVersion);
}

TEST_CASE("run_pipeline config validation") {
    PipelineConfig config = base_config();
    config.model_path = "model.json";  // both a preset and a file
    CHECK_THROWS_AS(run_pipeline(config), ConfigError);
    config.model_path.reset();
    config.preset.reset();
    CHECK_THROWS_AS(run_pipeline(config), ConfigError);
    config = base_config();
    config.data_path = "";
    CHECK_THROWS_AS(run_pipeline(config), ConfigError);
}

TEST_CASE("reruns are byte-identical regardless of thread count") {
    PipelineConfig config = base_config();
    config.threads = 1;
    const ReportBundle serial = run_pipeline(config);
    config.threads = 4;
    const ReportBundle threaded = run_pipeline(config);
    check_bundles_equal(serial, threaded);
}

TEST_CASE("a model file reproduces the preset tables") {
    const fs::path dir = fresh_dir("forge_report_modelfile");
    const fs::path model_path = dir / "model.json";
    write_file(model_path, emit_model(builtin_model(StudyPreset::study1)));

    PipelineConfig preset_config = base_config();
    PipelineConfig file_config = base_config();
    file_config.preset.reset();
    file_config.model_path = model_path.string();

    const ReportBundle a = run_pipeline(preset_config);
    const ReportBundle b = run_pipeline(file_config);
    REQUIRE(a.tables.size() == b.tables.size());
    for (std::size_t i = 0; i < a.tables.size(); ++i) {
        CHECK(table_to_csv(a.tables[i]) == table_to_csv(b.tables[i]));
    }
}

TEST_CASE("group plans add a groups table with default variables") {
    PipelineConfig config = base_config();
    config.groups = GroupPlan{"gender", "male", "female", {}};
    const ReportBundle bundle = run_pipeline(config);

    const Table* groups = bundle.find("groups");
    REQUIRE(groups != nullptr);
    // Defaults: integer demographics minus the grouping field, then constructs.
    const std::vector<std::string> expected = {"age",   "year", "chatgpt_exp", "PU",
                                               "PEOU", "CPLAY", "BI"};
    REQUIRE(groups->rows.size() == expected.size() * 2);
    for (std::size_t v = 0; v < expected.size(); ++v) {
        CHECK(groups->rows[2 * v][0] == expected[v]);
        CHECK(groups->rows[2 * v][1] == "male");
        CHECK(groups->rows[2 * v + 1][1] == "female");
        CHECK(groups->rows[2 * v][7] != "");      // p_welch on the first row
        CHECK(groups->rows[2 * v + 1][7] == "");  // blank on the mirror row
    }
    bool saw_line = false;
    for (const auto& line : bundle.manifest) {
        if (line.rfind("groups: field=gender a=male b=female", 0) == 0) {
            saw_line = true;
            CHECK(line.find("variables=age,year,chatgpt_exp,PU,PEOU,CPLAY,BI") != std::string::npos);
        }
    }
    CHECK(saw_line);

    config.groups = GroupPlan{"gender", "male", "female", {"PU"}};
    const ReportBundle narrow = run_pipeline(config);
    REQUIRE(narrow.find("groups")->rows.size() == 2);
}

TEST_CASE("stage names prefix pipeline diagnostics") {
    SUBCASE("model stage") {
        PipelineConfig config = base_config();
        config.preset.reset();
        config.model_path = "/nonexistent/model.json";
        CHECK_THROWS_WITH_AS(run_pipeline(config), doctest::Contains("stage model:"), ConfigError);
    }
    SUBCASE("ingest stage") {
        PipelineConfig config = base_config();
        config.data_path = "/nonexistent/panel.csv";
        CHECK_THROWS_WITH_AS(run_pipeline(config), doctest::Contains("stage ingest:"), DataError);
    }
    SUBCASE("fit stage") {
        PipelineConfig config = base_config();
        config.fit.max_iterations = 1;  // the all-ones start cannot settle this fast
        CHECK_THROWS_WITH_AS(run_pipeline(config), doctest::Contains("stage fit:"), NumericError);
    }
    SUBCASE("groups stage") {
        PipelineConfig config = base_config();
        config.groups = GroupPlan{"nonesuch", "a", "b", {}};
        CHECK_THROWS_WITH_AS(run_pipeline(config), doctest::Contains("stage groups:"), DataError);
    }
}

TEST_CASE("screening candidates and auto-drop refits show up in the manifest") {
    // Chain model with one deliberately weak indicator.
    ModelSpec spec;
    spec.scale = {1, 7};
    spec.constructs = {{"PEOU", {{"PEOU1", ""}, {"PEOU2", ""}, {"PEOU3", ""}}},
                       {"PU", {{"PU1", ""}, {"PU2", ""}, {"PU3", ""}}},
                       {"BI", {{"BI1", ""}, {"BI2", ""}, {"BI3", ""}}}};
    spec.paths = {{"PEOU", "PU"}, {"PU", "BI"}};
    PlantedModel planted;
    planted.phi.resize(3, 3);
    planted.phi << 1.0, 0.8, 0.64, 0.8, 1.0, 0.8, 0.64, 0.8, 1.0;
    // Mode A inflation keeps weak items well above their planted lambda;
    // 0.10 lands near 0.29 here, safely inside the sub-0.40 removal band.
    planted.lambda.resize(9);
    planted.lambda << 0.9, 0.10, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9;
    const SyntheticPanel syn = generate_synthetic(planted, spec, 400, 17);

    const fs::path dir = fresh_dir("forge_report_screen");
    write_file(dir / "panel.csv", emit_csv(syn.panel));
    write_file(dir / "model.json", emit_model(spec));

    PipelineConfig config;
    config.model_path = (dir / "model.json").string();
    config.data_path = (dir / "panel.csv").string();
    config.bootstrap_resamples = 50;
    config.seed = 5;

    const ReportBundle flagged = run_pipeline(config);
    CHECK(flagged.find("reliability")->rows.size() == 9);
    bool saw_candidate = false;
    for (const auto& line : flagged.manifest) {
        if (line.rfind("removal_candidates: PEOU2", 0) == 0) {
            saw_candidate = true;
            CHECK(line.find("not applied") != std::string::npos);
        }
    }
    CHECK(saw_candidate);

    config.auto_drop = 0.40;
    const ReportBundle reduced = run_pipeline(config);
    CHECK(reduced.find("reliability")->rows.size() == 8);
    bool saw_removed = false;
    for (const auto& line : reduced.manifest) {
        if (line == "removed_items: PEOU2 (auto-drop applied)") saw_removed = true;
    }
    CHECK(saw_removed);
}

TEST_CASE("emit_report writes the bundle and compare_to_reference verifies it") {
    const ReportBundle bundle = run_pipeline(base_config());
    const fs::path run_a = fresh_dir("forge_report_a");
    const fs::path run_b = fresh_dir("forge_report_b");
    emit_report(bundle, run_a);
    emit_report(bundle, run_b);

    for (const auto& table : bundle.tables) {
        CHECK(fs::exists(run_a / (table.name + ".csv")));
        CHECK(read_file(run_a / (table.name + ".csv")) == table_to_csv(table));
    }
    CHECK(fs::exists(run_a / "manifest.txt"));
    CHECK(read_file(run_a / "manifest.txt").find("construct-forge report manifest") == 0);

    const DiffReport same = compare_to_reference(run_a, run_b, {});
    CHECK(same.pass());
    CHECK(same.tables_compared == 8);

    SUBCASE("a perturbed cell is named, and a loose tolerance forgives it") {
        Table vif = table_from_csv("vif", read_file(run_b / "vif.csv"));
        REQUIRE(!vif.rows.empty());
        const double old_value = std::strtod(vif.rows[0][2].c_str(), nullptr);
        vif.rows[0][2] = format_number(old_value + 0.5);
        write_file(run_b / "vif.csv", table_to_csv(vif));

        const DiffReport diff = compare_to_reference(run_a, run_b, {});
        CHECK(!diff.pass());
        REQUIRE(diff.mismatches.size() == 1);
        CHECK(diff.mismatches[0].find("vif row 1 (vif)") != std::string::npos);

        CHECK(compare_to_reference(run_a, run_b, {{"vif", 1.0}}).pass());
        CHECK(!compare_to_reference(run_a, run_b, {{"default", 1.0}, {"vif", 1e-9}}).pass());
        CHECK(compare_to_reference(run_a, run_b, {{"default", 1.0}}).pass());
    }

    SUBCASE("label changes are mismatches too") {
        Table dedup = table_from_csv("dedup", read_file(run_b / "dedup.csv"));
        dedup.rows[0][0] = "all";
        write_file(run_b / "dedup.csv", table_to_csv(dedup));
        const DiffReport diff = compare_to_reference(run_a, run_b, {});
        REQUIRE(diff.mismatches.size() == 1);
        // Bundle cell first, reference cell second.
        CHECK(diff.mismatches[0].find("'responses' vs 'all'") != std::string::npos);
    }

    SUBCASE("schema problems are fatal") {
        fs::remove(run_b / "vif.csv");
        CHECK_THROWS_WITH_AS(compare_to_reference(run_b, run_a, {}),
                             doctest::Contains("missing table"), DataError);

        Table paths = table_from_csv("paths", read_file(run_b / "paths.csv"));
        paths.header[0] = "source";
        write_file(run_b / "paths.csv", table_to_csv(paths));
        CHECK_THROWS_WITH_AS(compare_to_reference(run_a, run_b, {}),
                             doctest::Contains("headers differ"), DataError);

        paths = table_from_csv("paths", read_file(run_a / "paths.csv"));
        paths.rows.pop_back();
        write_file(run_b / "paths.csv", table_to_csv(paths));
        CHECK_THROWS_AS(compare_to_reference(run_a, run_b, {}), DataError);
    }

    SUBCASE("directory validation") {
        CHECK_THROWS_AS(compare_to_reference(run_a, run_a / "nope", {}), ConfigError);
        CHECK_THROWS_AS(compare_to_reference(run_a / "nope", run_a, {}), ConfigError);
        const fs::path empty = fresh_dir("forge_report_empty");
        CHECK_THROWS_WITH_AS(compare_to_reference(run_a, empty, {}),
                             doctest::Contains("no CSV tables"), ConfigError);
    }
}

TEST_CASE("emit_report refuses an unwritable destination") {
    const fs::path dir = fresh_dir("forge_report_unwritable");
    write_file(dir / "blocker", "file, not a directory");
    ReportBundle bundle;
    bundle.tables.push_back(Table{"t", {"a"}, {{"1"}}});
    bundle.manifest = {"m"};
    CHECK_THROWS_AS(emit_report(bundle, dir / "blocker" / "out"), ConfigError);
    CHECK(!fs::exists(dir / "blocker" / "out"));
}
