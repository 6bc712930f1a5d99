#include "forge/model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "forge/errors.hpp"

namespace forge {

using nlohmann::json;

const Construct* ModelSpec::find_construct(std::string_view name) const {
    for (const auto& c : constructs)
        if (c.name == name) return &c;
    return nullptr;
}

int ModelSpec::construct_index(std::string_view name) const {
    for (std::size_t i = 0; i < constructs.size(); ++i)
        if (constructs[i].name == name) return static_cast<int>(i);
    return -1;
}

const DemographicField* ModelSpec::find_demographic(std::string_view name) const {
    for (const auto& d : demographics)
        if (d.name == name) return &d;
    return nullptr;
}

std::vector<std::string> ModelSpec::item_names() const {
    std::vector<std::string> names;
    for (const auto& c : constructs)
        for (const auto& it : c.items) names.push_back(it.name);
    return names;
}

int ModelSpec::item_count() const {
    int n = 0;
    for (const auto& c : constructs) n += static_cast<int>(c.items.size());
    return n;
}

bool ModelSpec::is_endogenous(std::string_view construct) const {
    return std::any_of(paths.begin(), paths.end(),
                       [&](const StructuralPath& p) { return p.to == construct; });
}

std::vector<std::string> ModelSpec::predecessors(std::string_view construct) const {
    std::vector<std::string> pred;
    for (const auto& p : paths)
        if (p.to == construct) pred.push_back(p.from);
    return pred;
}

ValidationReport validate_model(const ModelSpec& spec) {
    ValidationReport report;
    auto violation = [&](std::string rule, std::string detail) {
        report.violations.push_back({std::move(rule), std::move(detail)});
    };

    if (spec.scale.min >= spec.scale.max)
        violation("scale range", "scale.min must be < scale.max");

    if (spec.constructs.empty()) violation("constructs present", "model has no constructs");

    std::set<std::string> construct_names;
    std::set<std::string> global_items;
    for (const auto& c : spec.constructs) {
        if (!construct_names.insert(c.name).second)
            violation("construct uniqueness", "duplicate construct '" + c.name + "'");
        if (c.items.empty())
            violation("items present", "construct '" + c.name + "' has no items");
        std::set<std::string> local;
        for (const auto& it : c.items) {
            if (!local.insert(it.name).second)
                violation("item uniqueness", "duplicate item '" + it.name + "' in construct '" +
                                                 c.name + "'");
            else if (!global_items.insert(it.name).second)
                violation("global item uniqueness",
                          "item '" + it.name + "' appears in more than one construct");
        }
    }

    if (spec.paths.empty()) violation("paths present", "model has no structural paths");
    for (const auto& p : spec.paths) {
        if (p.from == p.to)
            violation("self-loop", "path '" + p.from + " -> " + p.to + "' is a self-loop");
        if (!spec.find_construct(p.from))
            violation("path endpoints", "path source '" + p.from + "' is not a construct");
        if (!spec.find_construct(p.to))
            violation("path endpoints", "path target '" + p.to + "' is not a construct");
    }

    // Cycle check: Kahn's algorithm over the construct graph.
    {
        std::map<std::string, int> indegree;
        std::map<std::string, std::vector<std::string>> out;
        for (const auto& c : spec.constructs) indegree[c.name] = 0;
        for (const auto& p : spec.paths) {
            if (p.from == p.to || !indegree.count(p.from) || !indegree.count(p.to)) continue;
            out[p.from].push_back(p.to);
            ++indegree[p.to];
        }
        std::vector<std::string> queue;
        for (const auto& [name, deg] : indegree)
            if (deg == 0) queue.push_back(name);
        std::size_t visited = 0;
        while (!queue.empty()) {
            const std::string node = queue.back();
            queue.pop_back();
            ++visited;
            for (const auto& next : out[node])
                if (--indegree[next] == 0) queue.push_back(next);
        }
        if (visited != indegree.size())
            violation("acyclic structural graph", "structural paths contain a cycle");
    }

    std::set<std::string> demo_names;
    for (const auto& d : spec.demographics) {
        if (!demo_names.insert(d.name).second)
            violation("demographic uniqueness", "duplicate demographic field '" + d.name + "'");
        if (d.kind == DemographicKind::integer && d.min && d.max && *d.min > *d.max)
            violation("demographic range", "field '" + d.name + "' has min > max");
    }

    for (const auto& c : spec.constructs)
        (spec.is_endogenous(c.name) ? report.endogenous : report.exogenous).push_back(c.name);
    return report;
}

namespace {

void require_object(const json& j, const char* what) {
    if (!j.is_object()) throw DataError(std::string("model document: ") + what + " must be an object");
}

ModelSpec model_from_json(const json& doc) {
    ModelSpec spec;
    require_object(doc, "document root");
    if (!doc.contains("scale") || !doc.contains("constructs") || !doc.contains("paths"))
        throw DataError("model document: required keys are \"scale\", \"constructs\", \"paths\"");

    const json& scale = doc.at("scale");
    require_object(scale, "\"scale\"");
    spec.scale.min = scale.at("min").get<int>();
    spec.scale.max = scale.at("max").get<int>();

    for (const json& jc : doc.at("constructs")) {
        require_object(jc, "construct entry");
        Construct c;
        c.name = jc.at("name").get<std::string>();
        for (const json& ji : jc.at("items")) {
            Item item;
            if (ji.is_string()) {
                item.name = ji.get<std::string>();
            } else {
                require_object(ji, "item entry");
                item.name = ji.at("name").get<std::string>();
                if (ji.contains("text")) item.text = ji.at("text").get<std::string>();
            }
            c.items.push_back(std::move(item));
        }
        spec.constructs.push_back(std::move(c));
    }

    for (const json& jp : doc.at("paths")) {
        require_object(jp, "path entry");
        spec.paths.push_back({jp.at("from").get<std::string>(), jp.at("to").get<std::string>()});
    }

    if (doc.contains("demographics")) {
        for (const json& jd : doc.at("demographics")) {
            require_object(jd, "demographic entry");
            DemographicField f;
            f.name = jd.at("name").get<std::string>();
            const std::string kind = jd.value("kind", "label");
            if (kind == "int" || kind == "integer")
                f.kind = DemographicKind::integer;
            else if (kind == "label")
                f.kind = DemographicKind::label;
            else
                throw DataError("model document: unknown demographic kind '" + kind + "'");
            if (jd.contains("min")) f.min = jd.at("min").get<int>();
            if (jd.contains("max")) f.max = jd.at("max").get<int>();
            spec.demographics.push_back(std::move(f));
        }
    }
    return spec;
}

}  // namespace

ModelSpec parse_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError("model document: syntax error at byte " + std::to_string(e.byte) + ": " +
                        e.what());
    }
    ModelSpec spec;
    try {
        spec = model_from_json(doc);
    } catch (const json::exception& e) {
        throw DataError(std::string("model document: ") + e.what());
    }
    const ValidationReport report = validate_model(spec);
    if (!report.ok()) {
        std::ostringstream msg;
        msg << "model document: validation failed:";
        for (const auto& v : report.violations) msg << "\n  [" << v.rule << "] " << v.detail;
        throw DataError(msg.str());
    }
    return spec;
}

std::string emit_model(const ModelSpec& spec) {
    json doc;
    doc["scale"] = {{"min", spec.scale.min}, {"max", spec.scale.max}};
    doc["constructs"] = json::array();
    for (const auto& c : spec.constructs) {
        json jc;
        jc["name"] = c.name;
        jc["items"] = json::array();
        for (const auto& it : c.items) {
            json ji;
            ji["name"] = it.name;
            if (!it.text.empty()) ji["text"] = it.text;
            jc["items"].push_back(std::move(ji));
        }
        doc["constructs"].push_back(std::move(jc));
    }
    doc["paths"] = json::array();
    for (const auto& p : spec.paths) doc["paths"].push_back({{"from", p.from}, {"to", p.to}});
    if (!spec.demographics.empty()) {
        doc["demographics"] = json::array();
        for (const auto& d : spec.demographics) {
            json jd;
            jd["name"] = d.name;
            jd["kind"] = d.kind == DemographicKind::integer ? "int" : "label";
            if (d.min) jd["min"] = *d.min;
            if (d.max) jd["max"] = *d.max;
            doc["demographics"].push_back(std::move(jd));
        }
    }
    return doc.dump(2) + "\n";
}

StudyPreset preset_from_string(std::string_view id) {
    if (id == "study1") return StudyPreset::study1;
    if (id == "study2") return StudyPreset::study2;
    throw ConfigError("unknown preset '" + std::string(id) + "' (expected study1 or study2)");
}

std::string preset_to_string(StudyPreset preset) {
    return preset == StudyPreset::study1 ? "study1" : "study2";
}

namespace {

ModelSpec study1_model() {
    ModelSpec spec;
    spec.scale = {1, 7};
    spec.constructs = {
        {"PU",
         {{"PU1", "Using ChatGPT in my study would enable me to accomplish tasks more quickly"},
          {"PU2", "Using ChatGPT would improve my study performance"},
          {"PU3", "Using ChatGPT in my study would increase my productivity"},
          {"PU4", "Using ChatGPT would enhance my effectiveness in my study"},
          {"PU5", "Using ChatGPT would make it easier to do my study"},
          {"PU6", "I would find ChatGPT useful in my study"}}},
        {"PEOU",
         {{"PEOU1", "Learning to operate ChatGPT would be easy for me"},
          {"PEOU2", "I would find it easy to get ChatGPT to do what I want it to do"},
          {"PEOU3", "My interaction with ChatGPT would be clear and understandable"},
          {"PEOU4", "I would find ChatGPT to be flexible to interact with"},
          {"PEOU5", "It would be easy for me to become skilful at using ChatGPT"},
          {"PEOU6", "I would find ChatGPT easy to use"}}},
        {"CPLAY",
         {{"CPLAY1", "When I use ChatGPT, I feel spontaneous"},
          {"CPLAY2", "When I use ChatGPT, I feel creative"},
          {"CPLAY3", "When I use ChatGPT, I feel playful"},
          {"CPLAY4", "When I use ChatGPT, I feel imaginative"}}},
        {"BI",
         {{"BI1", "I plan to use ChatGPT in the future"},
          {"BI2", "Assuming that I have access to ChatGPT, I intend to use it"}}},
    };
    spec.paths = {{"CPLAY", "BI"}, {"PEOU", "BI"}, {"PEOU", "PU"}, {"PU", "BI"}};
    spec.demographics = {
        {"age", DemographicKind::integer, 17, 30},
        {"gender", DemographicKind::label, std::nullopt, std::nullopt},
        {"major", DemographicKind::label, std::nullopt, std::nullopt},
        {"year", DemographicKind::integer, 1, 4},
        {"chatgpt_exp", DemographicKind::integer, 0, 4},
    };
    return spec;
}

ModelSpec study2_model(bool full_items) {
    // Item statements are not built in for study2; supply them through a model
    // document when rendering prompts.
    ModelSpec spec;
    spec.scale = {1, 7};
    spec.constructs = {
        {"IMGM", {{"IMGM1", ""}, {"IMGM2", ""}, {"IMGM3", ""}}},
        {"IMRN", {{"IMRN1", ""}, {"IMRN2", ""}, {"IMRN3", ""}}},
        {"INTR", {{"INTR1", ""}, {"INTR2", ""}, {"INTR3", ""}}},
        {"ITU", {{"ITU1", ""}, {"ITU2", ""}, {"ITU3", ""}}},
        {"PEU", {{"PEU1", ""}, {"PEU2", ""}, {"PEU3", ""}}},
        {"PU", {{"PU1", ""}, {"PU2", ""}}},
    };
    if (full_items) {
        // The negatively worded items dropped from the fitted model.
        spec.constructs[4].items.push_back({"PEOU4", ""});
        spec.constructs[5].items.push_back({"PU3", ""});
    }
    spec.paths = {{"IMGM", "PEU"}, {"IMGM", "PU"}, {"IMRN", "PEU"}, {"IMRN", "PU"},
                  {"INTR", "PEU"}, {"INTR", "PU"}, {"PEU", "ITU"},  {"PU", "ITU"}};
    spec.demographics = {
        {"age", DemographicKind::integer, 17, 30},
        {"gender", DemographicKind::label, std::nullopt, std::nullopt},
        {"major", DemographicKind::label, std::nullopt, std::nullopt},
        {"english_ability", DemographicKind::integer, 1, 4},
        {"vr_experience", DemographicKind::integer, 1, 4},
    };
    return spec;
}

}  // namespace

ModelSpec builtin_model(StudyPreset preset, bool full_items) {
    return preset == StudyPreset::study1 ? study1_model() : study2_model(full_items);
}

}  // namespace forge
