#pragma once
// Pipeline configuration: every numeric knob plus prompt templates and the
// model assignment, loaded from a JSON document and validated at load.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "causalrag/causal_layer.hpp"
#include "causalrag/causality_table.hpp"
#include "causalrag/cot_engine.hpp"
#include "causalrag/error.hpp"
#include "causalrag/llm_gateway.hpp"
#include "causalrag/path_enhancer.hpp"
#include "causalrag/path_retrieval.hpp"

namespace causalrag {

inline constexpr std::string_view kDefaultInferTemplate =
    "Answer the multiple-choice question below.\n"
    "\n"
    "Question: {question}\n"
    "Options:\n"
    "{options}\n"
    "\n"
    "{evidence}\n"
    "\n"
    "Give brief reasoning, then finish with a line of the form \"Answer: X\" where X is "
    "one option label.\n";

struct PromptTemplates {
    std::string cot{kDefaultCotTemplate};
    std::string enhance{kDefaultEnhanceTemplate};
    std::string infer{kDefaultInferTemplate};
    // Source files, echoed in reports; empty means built-in.
    std::map<std::string, std::string> sources;
};

struct LlmSettings {
    double cot_temperature = 0.7;
    double enhance_temperature = 0.0;
    double infer_temperature = 0.0;
    int max_tokens = 1024;
    int max_attempts = 3;
    int max_in_flight = 4;

    double temperature(Stage s) const {
        switch (s) {
            case Stage::cot: return cot_temperature;
            case Stage::enhance: return enhance_temperature;
            case Stage::infer: break;
        }
        return infer_temperature;
    }
};

struct PipelineConfig {
    CausalityTable causality = default_causality_table();
    double theta = kDefaultTheta;
    RetrievalConfig retrieval;
    EnhancerConfig enhancer;
    PromptTemplates prompts;
    ModelAssignment models;
    LlmSettings llm;
    int workers = 4;
    std::string alias_file;

    void validate() const {
        check_theta(theta);
        retrieval.validate();
        enhancer.validate();
        models.validate();
        if (workers < 1) throw ValidationError("workers must be >= 1");
        if (llm.max_tokens < 1) throw ValidationError("llm.max_tokens must be >= 1");
        if (llm.max_attempts < 1) throw ValidationError("llm.max_attempts must be >= 1");
        if (llm.max_in_flight < 1 || llm.max_in_flight > 64)
            throw ValidationError("llm.max_in_flight must be in [1,64]");
        for (Stage s : kAllStages)
            if (llm.temperature(s) < 0.0) throw ValidationError("temperatures must be >= 0");
    }

    nlohmann::json to_json() const {
        nlohmann::json weights = nlohmann::json::object();
        for (const auto& [label, w] : causality.weights()) weights[label] = w;
        nlohmann::json prompt_sources = nlohmann::json::object();
        for (const char* name : {"cot", "enhance", "infer"}) {
            auto it = prompts.sources.find(name);
            prompt_sources[name] = it == prompts.sources.end() ? "builtin" : it->second;
        }
        return {
            {"causality", {{"weights", weights}, {"default_weight", causality.default_weight()}}},
            {"theta", theta},
            {"retrieval",
             {{"max_hops", retrieval.max_hops},
              {"k", retrieval.k},
              {"distance_slack", retrieval.distance_slack}}},
            {"enhancer",
             {{"alpha", enhancer.alpha},
              {"beta", enhancer.beta},
              {"gamma", enhancer.gamma},
              {"keep_ratio", enhancer.keep_ratio}}},
            {"prompts", prompt_sources},
            {"models",
             {{"cot", models.cot_model},
              {"enhance", models.enhance_model},
              {"infer", models.infer_model}}},
            {"llm",
             {{"cot_temperature", llm.cot_temperature},
              {"enhance_temperature", llm.enhance_temperature},
              {"infer_temperature", llm.infer_temperature},
              {"max_tokens", llm.max_tokens},
              {"max_attempts", llm.max_attempts},
              {"max_in_flight", llm.max_in_flight}}},
            {"workers", workers},
            {"alias_file", alias_file},
        };
    }
};

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class T>
void read_field(const nlohmann::json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("config field '") + key + "' has the wrong type");
    }
}

}  // namespace detail

// Fields absent from `j` keep their current values, so callers can layer a
// file over the built-in defaults. Relative prompt/alias paths resolve
// against `base_dir`.
inline void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) throw ValidationError("config document must be a JSON object");
    if (j.contains("causality")) {
        const auto& c = j["causality"];
        auto weights = cfg.causality.weights();
        double def = cfg.causality.default_weight();
        if (c.contains("weights")) {
            weights.clear();
            for (const auto& [label, w] : c["weights"].items()) {
                if (!w.is_number()) throw ValidationError("causality weight must be a number");
                weights[label] = w.get<double>();
            }
        }
        detail::read_field(c, "default_weight", def);
        cfg.causality = CausalityTable(std::move(weights), def);
    }
    detail::read_field(j, "theta", cfg.theta);
    if (j.contains("retrieval")) {
        const auto& r = j["retrieval"];
        detail::read_field(r, "max_hops", cfg.retrieval.max_hops);
        detail::read_field(r, "k", cfg.retrieval.k);
        detail::read_field(r, "distance_slack", cfg.retrieval.distance_slack);
    }
    if (j.contains("enhancer")) {
        const auto& e = j["enhancer"];
        detail::read_field(e, "alpha", cfg.enhancer.alpha);
        detail::read_field(e, "beta", cfg.enhancer.beta);
        detail::read_field(e, "gamma", cfg.enhancer.gamma);
        detail::read_field(e, "keep_ratio", cfg.enhancer.keep_ratio);
    }
    if (j.contains("prompts")) {
        const auto& p = j["prompts"];
        for (auto [name, slot] : {std::pair{"cot", &cfg.prompts.cot},
                                  std::pair{"enhance", &cfg.prompts.enhance},
                                  std::pair{"infer", &cfg.prompts.infer}}) {
            if (!p.contains(name)) continue;
            std::filesystem::path path = p[name].get<std::string>();
            if (path.is_relative()) path = base_dir / path;
            *slot = detail::read_text_file(path);
            cfg.prompts.sources[name] = p[name].get<std::string>();
        }
    }
    if (j.contains("models")) {
        const auto& m = j["models"];
        detail::read_field(m, "cot", cfg.models.cot_model);
        detail::read_field(m, "enhance", cfg.models.enhance_model);
        detail::read_field(m, "infer", cfg.models.infer_model);
    }
    if (j.contains("llm")) {
        const auto& l = j["llm"];
        detail::read_field(l, "cot_temperature", cfg.llm.cot_temperature);
        detail::read_field(l, "enhance_temperature", cfg.llm.enhance_temperature);
        detail::read_field(l, "infer_temperature", cfg.llm.infer_temperature);
        detail::read_field(l, "max_tokens", cfg.llm.max_tokens);
        detail::read_field(l, "max_attempts", cfg.llm.max_attempts);
        detail::read_field(l, "max_in_flight", cfg.llm.max_in_flight);
    }
    detail::read_field(j, "workers", cfg.workers);
    if (j.contains("alias_file")) {
        std::filesystem::path path = j["alias_file"].get<std::string>();
        if (!path.empty() && path.is_relative()) path = base_dir / path;
        cfg.alias_file = path.string();
    }
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    PipelineConfig cfg;
    apply_config_json(cfg, j, path.parent_path());
    cfg.validate();
    return cfg;
}

}  // namespace causalrag
