#include "forge/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "forge/errors.hpp"

namespace forge {

namespace {

using nlohmann::json;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - secs).count();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms));
    return buf;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) --e;
    return std::string(s.substr(b, e - b));
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

std::optional<long> parse_int(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    long value = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

std::vector<std::string> split_cells(const std::string& line) {
    char delim = ',';
    if (line.find('|') != std::string::npos) {
        delim = '|';
    } else if (line.find('\t') != std::string::npos) {
        delim = '\t';
    }
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == delim) {
            cells.push_back(unquote(trim(cell)));
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(unquote(trim(cell)));
    // Pipe tables produce empty edge cells.
    while (!cells.empty() && cells.front().empty()) cells.erase(cells.begin());
    while (!cells.empty() && cells.back().empty()) cells.pop_back();
    return cells;
}

bool separator_line(const std::vector<std::string>& cells) {
    for (const auto& cell : cells) {
        if (cell.empty()) continue;
        for (char c : cell) {
            if (c != '-' && c != ':' && c != '=' && c != ' ') return false;
        }
    }
    return !cells.empty();
}

bool equals_ci(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

}  // namespace

Source source_from_string(std::string_view id) {
    if (id == "llm") return Source::llm;
    if (id == "synthetic") return Source::synthetic;
    throw ConfigError("unknown source '" + std::string(id) + "' (expected llm or synthetic)");
}

std::string source_to_string(Source source) {
    return source == Source::llm ? "llm" : "synthetic";
}

TranscriptLog::TranscriptLog(const std::filesystem::path& file) : out_(file, std::ios::app) {
    if (!out_) throw ConfigError("cannot open transcript log '" + file.string() + "' for writing");
}

void TranscriptLog::append(const TranscriptRecord& record) {
    json doc;
    doc["ts"] = record.ts.empty() ? iso_timestamp() : record.ts;
    doc["direction"] = record.direction;
    doc["batch"] = record.batch;
    doc["attempt"] = record.attempt;
    if (!record.request.empty()) doc["request"] = record.request;
    if (!record.response.empty()) doc["response"] = record.response;
    if (record.status != 0) doc["status"] = record.status;
    doc["outcome"] = record.outcome;
    const std::string line = doc.dump();
    std::lock_guard<std::mutex> lock(mutex_);
    out_ << line << "\n";
    out_.flush();
}

std::vector<TranscriptRecord> TranscriptLog::read(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open transcript log '" + file.string() + "'");
    std::vector<TranscriptRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("transcript line " + std::to_string(line_no) + " is not JSON: " + e.what());
        }
        TranscriptRecord record;
        record.ts = doc.value("ts", "");
        record.direction = doc.value("direction", "");
        record.batch = doc.value("batch", 0);
        record.attempt = doc.value("attempt", 0);
        record.request = doc.value("request", "");
        record.response = doc.value("response", "");
        record.status = doc.value("status", 0);
        record.outcome = doc.value("outcome", "");
        records.push_back(std::move(record));
    }
    return records;
}

std::string call_llm(const std::string& prompt, const LlmConfig& config, TranscriptLog* log,
                     int batch, int attempt) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("authentication: environment variable " + config.api_key_env +
                          " is not set");
    }
    if (config.base_url.empty()) throw ConfigError("LLM base URL is not configured");

    json body;
    body["model"] = config.model;
    body["temperature"] = config.temperature;
    body["messages"] = json::array({json{{"role", "system"}, {"content", config.system_prompt}},
                                    json{{"role", "user"}, {"content", prompt}}});
    const std::string payload = body.dump();

    std::string last_failure = "no attempt made";
    for (int transport = 0; transport <= config.retry_limit; ++transport) {
        if (transport > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long>(config.backoff_ms) << (transport - 1)));
        }
        httplib::Client client(config.base_url);
        client.set_connection_timeout(config.timeout_s, 0);
        client.set_read_timeout(config.timeout_s, 0);
        httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
        auto res = client.Post(config.endpoint_path, headers, payload, "application/json");

        TranscriptRecord record;
        record.direction = "exchange";
        record.batch = batch;
        record.attempt = attempt * (config.retry_limit + 1) + transport;
        record.request = prompt;

        if (!res) {
            last_failure = "transport: " + httplib::to_string(res.error());
            record.outcome = "retry: " + last_failure;
            if (log != nullptr) log->append(record);
            continue;
        }
        record.status = res->status;
        if (res->status == 401 || res->status == 403) {
            record.outcome = "authentication failure";
            if (log != nullptr) log->append(record);
            throw ConfigError("authentication failed (HTTP " + std::to_string(res->status) + ")");
        }
        if (res->status >= 500 || res->status == 429) {
            last_failure = "HTTP " + std::to_string(res->status);
            record.outcome = "retry: " + last_failure;
            if (log != nullptr) log->append(record);
            continue;
        }
        if (res->status != 200) {
            record.outcome = "HTTP " + std::to_string(res->status);
            if (log != nullptr) log->append(record);
            throw DataError("LLM endpoint returned HTTP " + std::to_string(res->status));
        }
        std::string content;
        try {
            const json reply = json::parse(res->body);
            content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            last_failure = std::string("malformed completion body: ") + e.what();
            record.outcome = "retry: " + last_failure;
            if (log != nullptr) log->append(record);
            continue;
        }
        if (trim(content).empty()) {
            last_failure = "empty completion";
            record.outcome = "retry: " + last_failure;
            if (log != nullptr) log->append(record);
            continue;
        }
        record.response = content;
        record.outcome = "ok";
        if (log != nullptr) log->append(record);
        return content;
    }
    throw DataError("LLM request failed after " + std::to_string(config.retry_limit + 1) +
                    " attempts; last failure: " + last_failure);
}

ParseOutcome parse_table(const std::string& text, const ModelSpec& spec) {
    const auto item_names = spec.item_names();
    const auto D = spec.demographics.size();
    const auto P = item_names.size();
    ParseOutcome out;

    std::size_t start = 0;
    int line_no = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find('\n', start);
        const std::string line =
            trim(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
        start = end == std::string::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (line.empty()) continue;

        auto cells = split_cells(line);
        if (cells.empty() || separator_line(cells)) continue;

        bool header = false;
        for (const auto& cell : cells) {
            if (equals_ci(cell, "trial")) header = true;
            for (const auto& name : item_names) {
                if (equals_ci(cell, name)) header = true;
            }
        }
        if (header) continue;

        std::size_t numeric = 0;
        for (const auto& cell : cells) {
            if (parse_int(cell).has_value()) ++numeric;
        }
        if (numeric * 2 < cells.size()) continue;  // prose, not data

        if (cells.size() == 1 + D + P && parse_int(cells.front()).has_value()) {
            cells.erase(cells.begin());  // leading trial counter
        }
        if (cells.size() != D + P) {
            out.rejected.push_back({line_no, "column count: got " + std::to_string(cells.size()) +
                                                 ", expected " + std::to_string(D + P)});
            continue;
        }
        RespondentRow row;
        row.demographics.assign(cells.begin(), cells.begin() + static_cast<long>(D));
        bool bad = false;
        for (std::size_t i = D; i < cells.size(); ++i) {
            const auto value = parse_int(cells[i]);
            if (!value.has_value()) {
                out.rejected.push_back(
                    {line_no, "item " + item_names[i - D] + ": '" + cells[i] + "' is not an integer"});
                bad = true;
                break;
            }
            row.responses.push_back(static_cast<int>(*value));
        }
        if (bad) continue;
        try {
            validate_row(row, spec, "line " + std::to_string(line_no));
            out.rows.push_back(std::move(row));
        } catch (const DataError& e) {
            out.rejected.push_back({line_no, e.what()});
        }
    }
    return out;
}

namespace {

struct BatchOutcome {
    std::vector<RespondentRow> rows;
    std::vector<std::string> warnings;
};

// Shared by the live path and transcript replay so both accumulate rows
// identically: responses arrive per batch in attempt order, rows are accepted
// up to rows_per_batch.
BatchOutcome accumulate_batch(int batch, const std::vector<std::string>& responses,
                              const ModelSpec& spec, int rows_per_batch) {
    BatchOutcome out;
    std::size_t rejected = 0;
    for (const auto& text : responses) {
        const ParseOutcome parsed = parse_table(text, spec);
        rejected += parsed.rejected.size();
        for (const auto& row : parsed.rows) {
            if (out.rows.size() < static_cast<std::size_t>(rows_per_batch)) out.rows.push_back(row);
        }
        if (out.rows.size() >= static_cast<std::size_t>(rows_per_batch)) break;
    }
    if (out.rows.size() < static_cast<std::size_t>(rows_per_batch)) {
        out.warnings.push_back("batch " + std::to_string(batch) + ": accepted " +
                               std::to_string(out.rows.size()) + " of " +
                               std::to_string(rows_per_batch) + " rows after all attempts");
    }
    if (rejected > 0) {
        out.warnings.push_back("batch " + std::to_string(batch) + ": rejected " +
                               std::to_string(rejected) + " malformed lines");
    }
    return out;
}

}  // namespace

GenerationResult generate_llm_panel(const ModelSpec& spec, const PromptTemplate& tmpl,
                                    const GenerationConfig& config, TranscriptLog& log) {
    if (config.batches < 1) throw ConfigError("batches must be at least 1");
    if (config.rows_per_batch < 1) throw ConfigError("rows per batch must be at least 1");

    std::vector<std::vector<std::string>> responses(static_cast<std::size_t>(config.batches));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(config.batches));

    auto fetch_batch = [&](int batch) {
        try {
            std::size_t accepted = 0;
            for (int attempt = 0; attempt <= config.reprompt_limit; ++attempt) {
                const std::string prompt = render_prompt(tmpl, batch);
                const std::string text = call_llm(prompt, config.llm, &log, batch, attempt);
                const ParseOutcome parsed = parse_table(text, spec);
                accepted = std::min<std::size_t>(accepted + parsed.rows.size(),
                                                 static_cast<std::size_t>(config.rows_per_batch));
                TranscriptRecord note;
                note.direction = "parse";
                note.batch = batch;
                note.attempt = attempt;
                note.outcome = "accepted " + std::to_string(parsed.rows.size()) + " rows, rejected " +
                               std::to_string(parsed.rejected.size()) + " lines";
                log.append(note);
                responses[static_cast<std::size_t>(batch)].push_back(text);
                if (accepted >= static_cast<std::size_t>(config.rows_per_batch)) break;
            }
        } catch (...) {
            failures[static_cast<std::size_t>(batch)] = std::current_exception();
        }
    };

    const int workers = std::max(1, std::min(config.parallel, config.batches));
    if (workers == 1) {
        for (int b = 0; b < config.batches; ++b) fetch_batch(b);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int b = next.fetch_add(1); b < config.batches; b = next.fetch_add(1)) {
                    fetch_batch(b);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }

    GenerationResult result;
    result.panel.model = spec;
    for (int b = 0; b < config.batches; ++b) {
        BatchOutcome outcome =
            accumulate_batch(b, responses[static_cast<std::size_t>(b)], spec, config.rows_per_batch);
        for (auto& row : outcome.rows) result.panel.rows.push_back(std::move(row));
        for (auto& w : outcome.warnings) result.warnings.push_back(std::move(w));
    }
    if (result.panel.rows.empty()) {
        throw DataError("no valid respondent rows parsed from any batch");
    }
    result.panel.provenance = {"llm", config.llm.model + " @ " + config.llm.base_url + ", " +
                                          std::to_string(config.batches) + " batches x " +
                                          std::to_string(config.rows_per_batch) + " rows"};
    return result;
}

Panel replay_transcripts(const std::filesystem::path& file, const ModelSpec& spec,
                         const GenerationConfig& config) {
    const auto records = TranscriptLog::read(file);
    std::vector<std::vector<std::string>> responses;
    for (const auto& record : records) {
        if (record.direction != "exchange" || record.outcome != "ok") continue;
        if (record.batch < 0) throw DataError("transcript record has negative batch index");
        if (static_cast<std::size_t>(record.batch) >= responses.size()) {
            responses.resize(static_cast<std::size_t>(record.batch) + 1);
        }
        responses[static_cast<std::size_t>(record.batch)].push_back(record.response);
    }
    Panel panel;
    panel.model = spec;
    for (std::size_t b = 0; b < responses.size(); ++b) {
        BatchOutcome outcome =
            accumulate_batch(static_cast<int>(b), responses[b], spec, config.rows_per_batch);
        for (auto& row : outcome.rows) panel.rows.push_back(std::move(row));
    }
    if (panel.rows.empty()) throw DataError("transcript log contains no usable responses");
    panel.provenance = {"llm-replay", file.string()};
    return panel;
}

}  // namespace forge
