// construct-forge: panel generation, PLS estimation, and report bundles.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "forge/bootstrap.hpp"
#include "forge/errors.hpp"
#include "forge/generate.hpp"
#include "forge/llm.hpp"
#include "forge/model.hpp"
#include "forge/panel.hpp"
#include "forge/pls.hpp"
#include "forge/prompts.hpp"
#include "forge/report.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw forge::ConfigError("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

json load_config(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw forge::ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

// Config-file fallback: a JSON key (same spelling as the long flag, without
// the leading dashes) fills any option not given on the command line.
template <typename T>
void merge(const json& cfg, CLI::App* cmd, const std::string& flag, T& value) {
    const std::string key = flag.substr(2);
    if (!cfg.contains(key)) return;
    if (cmd->get_option(flag)->count() > 0) return;
    try {
        value = cfg.at(key).get<T>();
    } catch (const json::exception& e) {
        throw forge::ConfigError("config key '" + key + "': " + e.what());
    }
}

void merge_optional(const json& cfg, CLI::App* cmd, const std::string& flag,
                    std::optional<double>& value) {
    const std::string key = flag.substr(2);
    if (!cfg.contains(key)) return;
    if (cmd->get_option(flag)->count() > 0) return;
    value = cfg.at(key).get<double>();
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw forge::ConfigError("cannot write '" + path.string() + "'");
    out << content;
}

struct GenerateOpts {
    std::string study = "study1";
    std::string source = "synthetic";
    int batches = 20;
    int rows = 20;
    std::uint64_t seed = 1;
    std::string out;
    std::string model_path;
    std::string planted_path;
    bool full_items = false;
    std::string base_url = "https://api.openai.com";
    std::string llm_model = "gpt-4";
    double temperature = 1.0;
    int retries = 3;
    int reprompts = 3;
    int backoff_ms = 250;
    int timeout_s = 60;
    int parallel = 1;
    std::string config_path;
};

int run_generate(const GenerateOpts& opts) {
    if (opts.out.empty()) throw forge::ConfigError("--out is required");
    if (opts.batches < 1 || opts.rows < 1) {
        throw forge::ConfigError("--batches and --rows must be positive");
    }
    const forge::StudyPreset preset = forge::preset_from_string(opts.study);
    const forge::ModelSpec model =
        opts.model_path.empty() ? forge::builtin_model(preset, opts.full_items)
                                : forge::parse_model(read_file(opts.model_path));
    fs::create_directories(opts.out);

    forge::Panel panel;
    if (forge::source_from_string(opts.source) == forge::Source::synthetic) {
        const forge::PlantedModel planted =
            opts.planted_path.empty() ? forge::builtin_planted(preset)
                                      : forge::parse_planted(read_file(opts.planted_path), model);
        const int n = opts.batches * opts.rows;
        const forge::SyntheticPanel syn = forge::generate_synthetic(planted, model, n, opts.seed);
        panel = syn.panel;

        forge::Table latent{"latent", {}, {}};
        for (const auto& construct : model.constructs) latent.header.push_back(construct.name);
        for (Eigen::Index i = 0; i < syn.latent.rows(); ++i) {
            std::vector<std::string> row;
            for (Eigen::Index j = 0; j < syn.latent.cols(); ++j) {
                row.push_back(forge::format_number(syn.latent(i, j)));
            }
            latent.rows.push_back(std::move(row));
        }
        forge::Table continuous{"continuous", model.item_names(), {}};
        for (Eigen::Index i = 0; i < syn.continuous.rows(); ++i) {
            std::vector<std::string> row;
            for (Eigen::Index j = 0; j < syn.continuous.cols(); ++j) {
                row.push_back(forge::format_number(syn.continuous(i, j)));
            }
            continuous.rows.push_back(std::move(row));
        }
        write_text(fs::path(opts.out) / "latent.csv", forge::table_to_csv(latent));
        write_text(fs::path(opts.out) / "continuous.csv", forge::table_to_csv(continuous));
        write_text(fs::path(opts.out) / "planted.json", forge::emit_planted(planted));
    } else {
        forge::PromptTemplate tmpl = forge::builtin_template(preset, model);
        tmpl.rows_per_batch = opts.rows;
        forge::GenerationConfig config;
        config.source = forge::Source::llm;
        config.batches = opts.batches;
        config.rows_per_batch = opts.rows;
        config.seed = opts.seed;
        config.reprompt_limit = opts.reprompts;
        config.parallel = opts.parallel;
        config.llm.base_url = opts.base_url;
        config.llm.model = opts.llm_model;
        config.llm.temperature = opts.temperature;
        config.llm.retry_limit = opts.retries;
        config.llm.backoff_ms = opts.backoff_ms;
        config.llm.timeout_s = opts.timeout_s;
        forge::TranscriptLog log(fs::path(opts.out) / "transcripts.jsonl");
        forge::GenerationResult result = forge::generate_llm_panel(model, tmpl, config, log);
        for (const auto& warning : result.warnings) std::cerr << "warning: " << warning << "\n";
        panel = std::move(result.panel);
    }

    forge::write_csv(panel, fs::path(opts.out) / "panel.csv");
    write_text(fs::path(opts.out) / "model.json", forge::emit_model(model));
    std::cout << "generated " << panel.rows.size() << " rows (" << panel.provenance.kind << ": "
              << panel.provenance.detail << ") in " << opts.out << "\n";
    return 0;
}

struct FitOpts {
    std::string model_path;
    std::string preset_id;
    bool full_items = false;
    std::string data;
    std::string dedup = "responses";
    int bootstrap = 5000;
    std::uint64_t seed = 1;
    int threads = 0;
    std::optional<double> auto_drop;
    std::string scheme = "path";
    double tolerance = 1e-7;
    int max_iterations = 300;
    std::string group_field;
    std::string group_a;
    std::string group_b;
    std::vector<std::string> group_vars;
    std::string out;
    std::string config_path;
};

int run_fit(const FitOpts& opts) {
    if (opts.out.empty()) throw forge::ConfigError("--out is required");
    if (opts.data.empty()) throw forge::ConfigError("--data is required");
    forge::PipelineConfig config;
    if (!opts.model_path.empty() && !opts.preset_id.empty()) {
        throw forge::ConfigError("give either --model or --preset, not both");
    }
    if (!opts.model_path.empty()) {
        config.model_path = opts.model_path;
    } else if (!opts.preset_id.empty()) {
        config.preset = forge::preset_from_string(opts.preset_id);
        config.full_items = opts.full_items;
    } else {
        throw forge::ConfigError("a model is required (--model FILE or --preset ID)");
    }
    config.data_path = opts.data;
    config.dedup = forge::dedup_key_from_string(opts.dedup);
    config.fit.scheme = forge::scheme_from_string(opts.scheme);
    config.fit.tolerance = opts.tolerance;
    config.fit.max_iterations = opts.max_iterations;
    config.bootstrap_resamples = opts.bootstrap;
    config.seed = opts.seed;
    config.threads = opts.threads;
    config.auto_drop = opts.auto_drop;
    if (!opts.group_field.empty()) {
        if (opts.group_a.empty() || opts.group_b.empty()) {
            throw forge::ConfigError("--group-field needs --group-a and --group-b");
        }
        config.groups = forge::GroupPlan{opts.group_field, opts.group_a, opts.group_b, opts.group_vars};
    }
    const forge::ReportBundle bundle = forge::run_pipeline(config);
    forge::emit_report(bundle, opts.out);
    std::cout << "report bundle (" << bundle.tables.size() << " tables + manifest) written to "
              << opts.out << "\n";
    return 0;
}

struct CompareOpts {
    std::string bundle;
    std::string reference;
    std::vector<std::string> tol;
    std::string config_path;
};

int run_compare(const CompareOpts& opts) {
    if (opts.bundle.empty() || opts.reference.empty()) {
        throw forge::ConfigError("--bundle and --reference are required");
    }
    std::map<std::string, double> tolerances;
    for (const auto& spec : opts.tol) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
            throw forge::ConfigError("--tol expects TABLE=EPS, got '" + spec + "'");
        }
        try {
            tolerances[spec.substr(0, eq)] = std::stod(spec.substr(eq + 1));
        } catch (const std::exception&) {
            throw forge::ConfigError("--tol expects a numeric tolerance in '" + spec + "'");
        }
    }
    const forge::DiffReport diff = forge::compare_to_reference(opts.bundle, opts.reference, tolerances);
    if (diff.pass()) {
        std::cout << "comparison passed: " << diff.tables_compared << " tables within tolerance\n";
        return 0;
    }
    std::cerr << "comparison failed: " << diff.mismatches.size() << " cells out of tolerance\n";
    for (const auto& mismatch : diff.mismatches) std::cerr << "  " << mismatch << "\n";
    return 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"construct-forge: survey panel generation, PLS path-model estimation, reports"};
    app.require_subcommand(1);

    GenerateOpts gen;
    CLI::App* generate = app.add_subcommand("generate", "Produce a respondent panel");
    generate->add_option("--study", gen.study, "study1 or study2")->capture_default_str();
    generate->add_option("--source", gen.source, "llm or synthetic")->capture_default_str();
    generate->add_option("--batches", gen.batches)->capture_default_str();
    generate->add_option("--rows", gen.rows, "rows per batch")->capture_default_str();
    generate->add_option("--seed", gen.seed)->capture_default_str();
    generate->add_option("--out", gen.out, "output directory");
    generate->add_option("--model", gen.model_path, "model JSON overriding the preset");
    generate->add_option("--planted", gen.planted_path, "planted-model JSON (synthetic source)");
    generate->add_flag("--full-items", gen.full_items, "preset with screened items restored");
    generate->add_option("--base-url", gen.base_url)->capture_default_str();
    generate->add_option("--llm-model", gen.llm_model)->capture_default_str();
    generate->add_option("--temperature", gen.temperature)->capture_default_str();
    generate->add_option("--retries", gen.retries, "transport retries per request")->capture_default_str();
    generate->add_option("--reprompts", gen.reprompts, "re-prompts per short batch")->capture_default_str();
    generate->add_option("--backoff-ms", gen.backoff_ms)->capture_default_str();
    generate->add_option("--timeout-s", gen.timeout_s)->capture_default_str();
    generate->add_option("--parallel", gen.parallel, "concurrent LLM batches")->capture_default_str();
    generate->add_option("--config", gen.config_path, "JSON config (keys = flag names)");

    FitOpts fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate the model and write a report bundle");
    fit_cmd->add_option("--model", fit.model_path, "model JSON file");
    fit_cmd->add_option("--preset", fit.preset_id, "study1 or study2");
    fit_cmd->add_flag("--full-items", fit.full_items, "preset with screened items restored");
    fit_cmd->add_option("--data", fit.data, "panel CSV");
    fit_cmd->add_option("--dedup", fit.dedup, "responses or all")->capture_default_str();
    fit_cmd->add_option("--bootstrap", fit.bootstrap, "bootstrap resamples")->capture_default_str();
    fit_cmd->add_option("--seed", fit.seed)->capture_default_str();
    fit_cmd->add_option("--threads", fit.threads, "bootstrap workers (0 = default)")->capture_default_str();
    fit_cmd->add_option("--auto-drop", fit.auto_drop, "remove items loading below this");
    fit_cmd->add_option("--scheme", fit.scheme, "path, centroid, or factor")->capture_default_str();
    fit_cmd->add_option("--tolerance", fit.tolerance)->capture_default_str();
    fit_cmd->add_option("--max-iterations", fit.max_iterations)->capture_default_str();
    fit_cmd->add_option("--group-field", fit.group_field, "demographic for two-group comparison");
    fit_cmd->add_option("--group-a", fit.group_a);
    fit_cmd->add_option("--group-b", fit.group_b);
    fit_cmd->add_option("--group-vars", fit.group_vars, "comparison variables")->delimiter(',');
    fit_cmd->add_option("--out", fit.out, "output directory");
    fit_cmd->add_option("--config", fit.config_path, "JSON config (keys = flag names)");

    CompareOpts cmp;
    CLI::App* compare = app.add_subcommand("compare", "Diff a bundle against reference tables");
    compare->add_option("--bundle", cmp.bundle, "bundle directory");
    compare->add_option("--reference", cmp.reference, "reference directory");
    compare->add_option("--tol", cmp.tol, "TABLE=EPS (repeatable; 'default' sets the fallback)");
    compare->add_option("--config", cmp.config_path, "JSON config (keys = flag names)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (generate->parsed()) {
            if (!gen.config_path.empty()) {
                const json cfg = load_config(gen.config_path);
                merge(cfg, generate, "--study", gen.study);
                merge(cfg, generate, "--source", gen.source);
                merge(cfg, generate, "--batches", gen.batches);
                merge(cfg, generate, "--rows", gen.rows);
                merge(cfg, generate, "--seed", gen.seed);
                merge(cfg, generate, "--out", gen.out);
                merge(cfg, generate, "--model", gen.model_path);
                merge(cfg, generate, "--planted", gen.planted_path);
                merge(cfg, generate, "--full-items", gen.full_items);
                merge(cfg, generate, "--base-url", gen.base_url);
                merge(cfg, generate, "--llm-model", gen.llm_model);
                merge(cfg, generate, "--temperature", gen.temperature);
                merge(cfg, generate, "--retries", gen.retries);
                merge(cfg, generate, "--reprompts", gen.reprompts);
                merge(cfg, generate, "--backoff-ms", gen.backoff_ms);
                merge(cfg, generate, "--timeout-s", gen.timeout_s);
                merge(cfg, generate, "--parallel", gen.parallel);
            }
            return run_generate(gen);
        }
        if (fit_cmd->parsed()) {
            if (!fit.config_path.empty()) {
                const json cfg = load_config(fit.config_path);
                merge(cfg, fit_cmd, "--model", fit.model_path);
                merge(cfg, fit_cmd, "--preset", fit.preset_id);
                merge(cfg, fit_cmd, "--full-items", fit.full_items);
                merge(cfg, fit_cmd, "--data", fit.data);
                merge(cfg, fit_cmd, "--dedup", fit.dedup);
                merge(cfg, fit_cmd, "--bootstrap", fit.bootstrap);
                merge(cfg, fit_cmd, "--seed", fit.seed);
                merge(cfg, fit_cmd, "--threads", fit.threads);
                merge_optional(cfg, fit_cmd, "--auto-drop", fit.auto_drop);
                merge(cfg, fit_cmd, "--scheme", fit.scheme);
                merge(cfg, fit_cmd, "--tolerance", fit.tolerance);
                merge(cfg, fit_cmd, "--max-iterations", fit.max_iterations);
                merge(cfg, fit_cmd, "--group-field", fit.group_field);
                merge(cfg, fit_cmd, "--group-a", fit.group_a);
                merge(cfg, fit_cmd, "--group-b", fit.group_b);
                merge(cfg, fit_cmd, "--group-vars", fit.group_vars);
                merge(cfg, fit_cmd, "--out", fit.out);
            }
            return run_fit(fit);
        }
        if (compare->parsed()) {
            if (!cmp.config_path.empty()) {
                const json cfg = load_config(cmp.config_path);
                merge(cfg, compare, "--bundle", cmp.bundle);
                merge(cfg, compare, "--reference", cmp.reference);
                merge(cfg, compare, "--tol", cmp.tol);
            }
            return run_compare(cmp);
        }
    } catch (const forge::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
