#include <doctest.h>

#include <string>
#include <vector>

#include "forge/errors.hpp"
#include "forge/model.hpp"
#include "forge/panel.hpp"

using namespace forge;

namespace {

ModelSpec two_block_model() {
    ModelSpec spec;
    spec.scale = {1, 7};
    spec.constructs = {{"A", {{"A1", ""}, {"A2", ""}}}, {"B", {{"B1", ""}}}};
    spec.paths = {{"A", "B"}};
    spec.demographics = {{"gender", DemographicKind::label, std::nullopt, std::nullopt},
                         {"year", DemographicKind::integer, 1, 4}};
    return spec;
}

Panel small_panel() {
    const ModelSpec spec = two_block_model();
    const std::string csv =
        "gender,year,A1,A2,B1\n"
        "male,1,4,5,6\n"
        "female,2,3,3,2\n"
        "male,1,4,5,6\n"
        "female,4,7,7,7\n";
    return parse_panel_csv(csv, spec, {"file", "inline"});
}

}  // namespace

TEST_CASE("panel CSV parse and emit round trip") {
    const Panel panel = small_panel();
    REQUIRE(panel.size() == 4);
    CHECK(panel.rows[0].demographics == std::vector<std::string>{"male", "1"});
    CHECK(panel.rows[0].responses == std::vector<int>{4, 5, 6});
    CHECK(panel.rows[3].responses == std::vector<int>{7, 7, 7});

    const std::string emitted = emit_csv(panel);
    const Panel back = parse_panel_csv(emitted, panel.model, panel.provenance);
    CHECK(back.rows.size() == panel.rows.size());
    CHECK(emit_csv(back) == emitted);
    CHECK(emitted.substr(0, emitted.find('\n')) == "gender,year,A1,A2,B1");
}

TEST_CASE("parse_panel_csv validates schema and values") {
    const ModelSpec spec = two_block_model();
    // Wrong header order.
    CHECK_THROWS_AS(parse_panel_csv("year,gender,A1,A2,B1\n1,male,4,5,6\n", spec, {"file", "x"}),
                    DataError);
    // Out-of-scale response.
    CHECK_THROWS_AS(
        parse_panel_csv("gender,year,A1,A2,B1\nmale,1,4,9,6\n", spec, {"file", "x"}), DataError);
    // Non-integer response.
    CHECK_THROWS_AS(
        parse_panel_csv("gender,year,A1,A2,B1\nmale,1,4,high,6\n", spec, {"file", "x"}), DataError);
    // Integer demographic out of declared range.
    CHECK_THROWS_AS(
        parse_panel_csv("gender,year,A1,A2,B1\nmale,9,4,5,6\n", spec, {"file", "x"}), DataError);
    // Short row.
    CHECK_THROWS_AS(parse_panel_csv("gender,year,A1,A2,B1\nmale,1,4,5\n", spec, {"file", "x"}),
                    DataError);
    // Diagnostics carry the row number.
    try {
        parse_panel_csv("gender,year,A1,A2,B1\nmale,1,4,5,6\nmale,1,4,9,6\n", spec, {"file", "x"});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        CHECK(std::string(e.what()).find("A2") != std::string::npos);
    }
}

TEST_CASE("validate_row reports the offending cell") {
    const ModelSpec spec = two_block_model();
    RespondentRow row{{"male", "2"}, {4, 5, 6}};
    CHECK_NOTHROW(validate_row(row, spec, "row 1"));
    row.responses[2] = 0;
    CHECK_THROWS_AS(validate_row(row, spec, "row 1"), DataError);
    row.responses[2] = 6;
    row.demographics.pop_back();
    CHECK_THROWS_AS(validate_row(row, spec, "row 1"), DataError);
}

TEST_CASE("dedupe on responses key keeps first occurrences") {
    const Panel panel = small_panel();
    const auto [unique, report] = dedupe(panel, DedupKey::responses);
    CHECK(report.total == 4);
    CHECK(report.unique == 3);
    CHECK(report.duplicate_rate == doctest::Approx(0.25));
    REQUIRE(unique.size() == 3);
    CHECK(unique.rows[0].demographics[0] == "male");
    CHECK(unique.rows[1].responses == std::vector<int>{3, 3, 2});
}

TEST_CASE("dedupe key including demographics distinguishes twin responses") {
    Panel panel = small_panel();
    panel.rows[2].demographics[0] = "female";  // same answers, different person
    const auto [by_resp, r1] = dedupe(panel, DedupKey::responses);
    CHECK(r1.unique == 3);
    const auto [by_all, r2] = dedupe(panel, DedupKey::responses_and_demographics);
    CHECK(r2.unique == 4);
    CHECK(dedup_key_from_string("responses") == DedupKey::responses);
    CHECK(dedup_key_from_string("all") == DedupKey::responses_and_demographics);
    CHECK_THROWS_AS(dedup_key_from_string("nope"), ConfigError);
}

TEST_CASE("demographics frequency table") {
    const Panel panel = small_panel();
    const auto gender = demographics_table(panel, "gender");
    REQUIRE(gender.size() == 2);
    CHECK(gender[0].value == "female");
    CHECK(gender[0].count == 2);
    CHECK(gender[0].percent == doctest::Approx(50.0));
    // Integer-valued fields sort numerically.
    const auto year = demographics_table(panel, "year");
    REQUIRE(year.size() == 3);
    CHECK(year[0].value == "1");
    CHECK(year[0].count == 2);
    CHECK(year[2].value == "4");
    CHECK_THROWS_AS(demographics_table(panel, "shoe_size"), DataError);
}

TEST_CASE("item matrix extraction") {
    const Panel panel = small_panel();
    const ItemMatrix m = item_matrix(panel);
    REQUIRE(m.values.rows() == 4);
    REQUIRE(m.values.cols() == 3);
    CHECK(m.labels == std::vector<std::string>{"A1", "A2", "B1"});
    CHECK(m.values(0, 0) == 4.0);
    CHECK(m.values(3, 2) == 7.0);

    // Narrower spec pulls a column subset by name.
    ModelSpec reduced = two_block_model();
    reduced.constructs[0].items.pop_back();  // drop A2
    const ItemMatrix sub = item_matrix(panel, reduced);
    REQUIRE(sub.values.cols() == 2);
    CHECK(sub.labels == std::vector<std::string>{"A1", "B1"});
    CHECK(sub.values(0, 1) == 6.0);

    ModelSpec foreign = two_block_model();
    foreign.constructs[0].items[0].name = "ZZ1";
    CHECK_THROWS_AS(item_matrix(panel, foreign), DataError);

    Panel empty = panel;
    empty.rows.clear();
    CHECK_THROWS_AS(item_matrix(empty), DataError);
}

TEST_CASE("ingest_csv reads files and records provenance") {
    const Panel panel = small_panel();
    const auto path = std::filesystem::temp_directory_path() / "forge_panel_test.csv";
    write_csv(panel, path);
    const Panel back = ingest_csv(path, panel.model);
    CHECK(back.size() == panel.size());
    CHECK(back.provenance.kind == "file");
    CHECK(back.provenance.detail == path.string());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(ingest_csv(path, panel.model), DataError);
}

TEST_CASE("tab-separated sample sheet maps onto a study1-shaped panel") {
    // A transcript-style data row: demographics then 18 items, tab-delimited.
    const ModelSpec spec = builtin_model(StudyPreset::study1);
    const std::string tsv_row = "21\tmale\tComputer Science\t2\t1\t5\t4\t6\t5\t5\t6\t4\t5\t6\t4\t5\t5\t6\t5\t6\t5\t6\t7";
    std::string csv = "age,gender,major,year,chatgpt_exp";
    for (const auto& name : spec.item_names()) csv += "," + name;
    csv += "\n";
    std::string row = tsv_row;
    for (auto& ch : row)
        if (ch == '\t') ch = ',';
    csv += row + "\n";
    const Panel panel = parse_panel_csv(csv, spec, {"file", "sample"});
    REQUIRE(panel.size() == 1);
    CHECK(panel.rows[0].responses.front() == 5);
    CHECK(panel.rows[0].responses.back() == 7);
    CHECK(panel.rows[0].demographics[4] == "1");
}
