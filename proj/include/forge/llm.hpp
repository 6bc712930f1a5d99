#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "forge/model.hpp"
#include "forge/panel.hpp"
#include "forge/prompts.hpp"

namespace forge {

struct LlmConfig {
    std::string base_url;  // scheme://host[:port]
    std::string endpoint_path = "/v1/chat/completions";
    std::string model = "gpt-4";
    double temperature = 1.0;
    std::string system_prompt = "You are a helpful assistant.";
    int retry_limit = 3;      // transport retries per request
    int backoff_ms = 250;     // doubled per retry
    int timeout_s = 60;
    std::string api_key_env = "CONSTRUCT_FORGE_API_KEY";
};

enum class Source { llm, synthetic };

Source source_from_string(std::string_view id);
std::string source_to_string(Source source);

struct GenerationConfig {
    Source source = Source::synthetic;
    int batches = 20;
    int rows_per_batch = 20;
    std::uint64_t seed = 1;  // synthetic source
    int reprompt_limit = 3;  // extra prompts per short batch
    int parallel = 1;        // concurrent LLM batches
    LlmConfig llm;
};

struct TranscriptRecord {
    std::string ts;
    std::string direction;  // "exchange" | "parse"
    int batch = 0;
    int attempt = 0;
    std::string request;
    std::string response;
    int status = 0;
    std::string outcome;  // "ok" or the retry/abort reason
};

/// Append-only newline-delimited JSON provenance log; writes are serialized,
/// so concurrent batches produce a totally ordered file.
class TranscriptLog {
public:
    explicit TranscriptLog(const std::filesystem::path& file);
    void append(const TranscriptRecord& record);

    static std::vector<TranscriptRecord> read(const std::filesystem::path& file);

private:
    std::ofstream out_;
    std::mutex mutex_;
};

/// One chat completion. Reads the credential from the environment before any
/// request (ConfigError when missing), retries transient transport failures
/// (connect errors, 5xx, empty completions) with exponential backoff, and
/// appends one exchange record per attempt to the log.
std::string call_llm(const std::string& prompt, const LlmConfig& config, TranscriptLog* log,
                     int batch, int attempt);

struct RejectedLine {
    int line = 0;  // 1-based within the response text
    std::string reason;
};

struct ParseOutcome {
    std::vector<RespondentRow> rows;
    std::vector<RejectedLine> rejected;
};

/// Extracts respondent rows from free-form assistant text: pipe-, tab-, or
/// comma-delimited data lines, optional leading trial column, headers and
/// prose skipped, invalid lines rejected with reasons.
ParseOutcome parse_table(const std::string& text, const ModelSpec& spec);

struct GenerationResult {
    Panel panel;
    std::vector<std::string> warnings;  // short batches, rejected-line summaries
};

/// Full batch protocol: per batch, prompt + up to reprompt_limit re-prompts,
/// accumulating validated rows up to rows_per_batch; short batches are
/// accepted with a warning. Batches may run concurrently (config.parallel).
GenerationResult generate_llm_panel(const ModelSpec& spec, const PromptTemplate& tmpl,
                                    const GenerationConfig& config, TranscriptLog& log);

/// Rebuilds the identical panel offline from a transcript log written by
/// generate_llm_panel.
Panel replay_transcripts(const std::filesystem::path& file, const ModelSpec& spec,
                         const GenerationConfig& config);

}  // namespace forge
