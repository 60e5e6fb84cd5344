#pragma once
// Three-stage pipeline runner (CoT, enhancement, inference), ablation modes,
// multiple-choice metrics, and dataset evaluation reports.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalrag/causal_layer.hpp"
#include "causalrag/config.hpp"
#include "causalrag/cot_engine.hpp"
#include "causalrag/entity_linker.hpp"
#include "causalrag/error.hpp"
#include "causalrag/llm_gateway.hpp"
#include "causalrag/path_enhancer.hpp"
#include "causalrag/path_retrieval.hpp"
#include "causalrag/prompt.hpp"

namespace causalrag {

struct QAItem {
    std::string id;
    std::string question;
    OptionList options;
    std::string gold;
};

// One JSON object per line:
// {"id": "q1", "question": "...", "options": {"A": "...", ...}, "answer": "A"}
inline std::vector<QAItem> parse_dataset(std::istream& in) {
    std::vector<QAItem> items;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        QAItem item;
        try {
            auto j = nlohmann::json::parse(line);
            item.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
            item.question = j.at("question").get<std::string>();
            for (const auto& [label, value] : j.at("options").items())
                item.options.push_back({label, value.get<std::string>()});
            item.gold = j.at("answer").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(e.what(), line_no);
        }
        if (item.id.empty()) throw DatasetError("empty id", line_no);
        if (text::trim(item.question).empty()) throw DatasetError("empty question", line_no);
        try {
            validate_options(item.options);
        } catch (const ValidationError& e) {
            throw DatasetError(e.what(), line_no);
        }
        auto labels = option_labels(item.options);
        if (std::find(labels.begin(), labels.end(), item.gold) == labels.end())
            throw DatasetError("answer label is not one of the options", line_no);
        if (!ids.insert(item.id).second) throw DatasetError("duplicate id " + item.id, line_no);
        items.push_back(std::move(item));
    }
    return items;
}

enum class AblationMode { full, kg_only, no_llm_enhanced, no_enhancer };

inline constexpr std::array<AblationMode, 4> kAllModes{
    AblationMode::full, AblationMode::kg_only, AblationMode::no_llm_enhanced,
    AblationMode::no_enhancer};

inline std::string_view to_string(AblationMode m) {
    switch (m) {
        case AblationMode::full: return "full";
        case AblationMode::kg_only: return "kg-only";
        case AblationMode::no_llm_enhanced: return "no-llm-enhanced";
        case AblationMode::no_enhancer: return "no-enhancer";
    }
    return "?";
}

inline std::optional<AblationMode> parse_mode(std::string_view s) {
    for (auto m : kAllModes)
        if (to_string(m) == s) return m;
    return std::nullopt;
}

// Sends requests for "mock" models to the transcript client and everything
// else to the live client.
class ModelRouter : public LlmClient {
public:
    ModelRouter(LlmClient* mock, LlmClient* live) : mock_(mock), live_(live) {}

    LlmResponse complete(const LlmRequest& request) override {
        if (request.model == kMockModel) {
            if (!mock_) throw TranscriptError("mock model requested but no transcript is loaded");
            return mock_->complete(request);
        }
        if (!live_) throw TransportError("no live LLM endpoint configured for " + request.model);
        return live_->complete(request);
    }

private:
    LlmClient* mock_;
    LlmClient* live_;
};

struct PipelineContext {
    const CausalGraphView& view;
    const EntityRecognizer& linker;
    const PipelineConfig& config;
    LlmClient& client;
    bool record_prompts = true;
};

struct StageCall {
    Stage stage;
    std::string model;
    std::string prompt;
    std::string response;
};

struct PredictionRecord {
    std::string id;
    std::optional<std::string> predicted;  // nullopt = abstain
    std::string gold;
    bool unmapped = false;
    std::optional<std::string> error;
    std::vector<StageCall> calls;
    std::string enhanced_summary;
    nlohmann::json trace = nlohmann::json::object();

    std::size_t call_count(Stage s) const {
        return static_cast<std::size_t>(
            std::count_if(calls.begin(), calls.end(), [s](const StageCall& c) { return c.stage == s; }));
    }
};

// True when some linked query concept touches an edge of the causal view.
inline bool maps_into_causal_view(const QueryContext& query, const CausalGraphView& view) {
    auto member = view.member_nodes();
    const auto& g = view.base();
    return std::any_of(query.cuis.begin(), query.cuis.end(),
                       [&](const std::string& id) { return member[g.index_of(id)]; });
}

namespace detail {

inline nlohmann::json path_json(const Path& p, const CausalGraphView& view) {
    return {{"nodes", canonical_string(p, view.base())},
            {"rendered", render_path(p, view)},
            {"tier", std::string(to_string(p.tier))},
            {"segment", p.segment_index},
            {"reversed", p.reversed},
            {"path_score", p.score}};
}

inline nlohmann::json retrieval_json(const CotRetrieval& r, const CausalGraphView& view) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& [i, e] : r.entries) {
        nlohmann::json selected = nlohmann::json::array();
        for (const auto& p : e.selected) selected.push_back(path_json(p, view));
        segs.push_back({{"pair", i},
                        {"from", e.from_segment},
                        {"to", e.to_segment},
                        {"from_entities", e.from_entities},
                        {"to_entities", e.to_entities},
                        {"tier", e.tier ? nlohmann::json(std::string(to_string(*e.tier)))
                                        : nlohmann::json(nullptr)},
                        {"reason", e.reason},
                        {"candidates", e.candidate_count},
                        {"pruned_loops", e.pruned.loops},
                        {"pruned_distance", e.pruned.too_long},
                        {"selected", std::move(selected)}});
    }
    return segs;
}

inline std::string evidence_block(std::string_view cot, std::string_view summary,
                                  std::string_view paths) {
    std::string out;
    if (!cot.empty()) out += "Chain of thought:\n" + std::string(cot) + "\n\n";
    if (!summary.empty()) out += "Enhanced reasoning summary:\n" + std::string(summary) + "\n\n";
    out += "Knowledge graph paths:\n" + std::string(paths);
    return out;
}

class StageRunner {
public:
    StageRunner(const PipelineContext& ctx, PredictionRecord& record)
        : ctx_(ctx), record_(record) {}

    std::string call(Stage stage, const Prompt& prompt) {
        LlmRequest req;
        req.stage = stage;
        req.model = ctx_.config.models.for_stage(stage);
        req.messages = prompt.messages;
        req.temperature = ctx_.config.llm.temperature(stage);
        req.max_tokens = ctx_.config.llm.max_tokens;
        StageCall call{stage, req.model, ctx_.record_prompts ? prompt.flatten() : "", ""};
        auto response = ctx_.client.complete(req);
        call.response = response.text;
        record_.calls.push_back(std::move(call));
        return response.text;
    }

private:
    const PipelineContext& ctx_;
    PredictionRecord& record_;
};

}  // namespace detail

// Runs one item through the stages the mode calls for. LLM and parse
// failures become an abstain with an error note.
inline PredictionRecord run_pipeline(const QAItem& item, AblationMode mode,
                                     const PipelineContext& ctx) {
    PredictionRecord rec;
    rec.id = item.id;
    rec.gold = item.gold;
    const auto& cfg = ctx.config;
    const auto& view = ctx.view;
    const auto& g = view.base();
    auto& trace = rec.trace;
    trace["mode"] = std::string(to_string(mode));
    nlohmann::json notes = nlohmann::json::array();
    detail::StageRunner runner(ctx, rec);

    try {
        auto query = build_query_context(g, ctx.linker, item.question, item.options);
        trace["query"] = {{"cuis", query.cuis}, {"semantic_types", query.semantic_types}};
        rec.unmapped = !maps_into_causal_view(query, view);

        std::string cot_text;
        std::vector<Path> evidence;
        std::string summary;

        if (mode == AblationMode::kg_only) {
            std::set<std::string> from = ctx.linker.link(item.question);
            std::set<std::string> to;
            for (const auto& o : item.options) {
                auto ids = ctx.linker.link(o.text);
                to.insert(ids.begin(), ids.end());
            }
            auto search = find_paths_in_tier(view, Tier::fallback, from, to, cfg.retrieval);
            PruneStats pruned;
            auto candidates = search.paths.size();
            evidence = prune_and_select(std::move(search.paths), cfg.retrieval, view, &pruned);
            nlohmann::json selected = nlohmann::json::array();
            for (const auto& p : evidence) selected.push_back(detail::path_json(p, view));
            trace["retrieval"] = {{"from_entities", from},
                                  {"to_entities", to},
                                  {"reason", search.reason},
                                  {"candidates", candidates},
                                  {"pruned_loops", pruned.loops},
                                  {"pruned_distance", pruned.too_long},
                                  {"selected", std::move(selected)}};
        } else {
            auto cot_prompt = build_cot_prompt(item.question, item.options, cfg.prompts.cot);
            auto raw = runner.call(Stage::cot, cot_prompt);
            Diagnostics cot_diag;
            auto cot = parse_cot(raw, &cot_diag);
            cot_text = render_cot(cot);
            trace["cot"] = {{"segments", cot.segments},
                            {"confidence", cot.confidence ? nlohmann::json(*cot.confidence)
                                                          : nlohmann::json(nullptr)},
                            {"warnings", cot_diag.warnings}};

            auto retrieval = retrieve_for_cot(cot, ctx.linker, view, cfg.retrieval);
            trace["segments"] = detail::retrieval_json(retrieval, view);
            for (const auto& [i, e] : retrieval.entries)
                if (e.reason != "ok")
                    notes.push_back("pair " + std::to_string(i) + " contributed no query: " + e.reason);

            if (mode == AblationMode::no_enhancer) {
                evidence = retrieval.all_selected();
            } else {
                auto pool = retrieval.all_selected();
                auto fused = fuse_paths(pool, g);
                Diagnostics score_diag;
                auto scored = score_paths(fused, query, g, cfg.enhancer, &score_diag);
                auto final_paths = select_final(std::move(scored), cfg.enhancer.keep_ratio, g);
                nlohmann::json kept = nlohmann::json::array();
                for (const auto& s : final_paths) {
                    auto pj = detail::path_json(s.path, view);
                    pj["cui_overlap"] = s.cui_overlap;
                    pj["semantic_overlap"] = s.semantic_overlap;
                    pj["lh_score"] = s.lh_score;
                    pj["total_score"] = s.total_score;
                    pj["merge_count"] = s.merge_count;
                    kept.push_back(std::move(pj));
                }
                trace["fusion"] = {{"pool", pool.size()},
                                   {"merged", fused.size()},
                                   {"final", std::move(kept)},
                                   {"warnings", score_diag.warnings}};
                for (const auto& s : final_paths) evidence.push_back(s.path);

                if (mode == AblationMode::full) {
                    auto prompt = build_enhancement_prompt(final_paths, cot, item.question,
                                                           item.options, view, cfg.prompts.enhance);
                    summary = runner.call(Stage::enhance, prompt);
                    rec.enhanced_summary = summary;
                }
            }
        }

        std::string block = detail::evidence_block(
            mode == AblationMode::full ? "" : cot_text, summary, render_path_block(evidence, view));
        std::map<std::string, std::string> values{{"question", item.question},
                                                  {"options", render_options(item.options)},
                                                  {"evidence", block}};
        Prompt infer{{ChatMessage{"user", text::render_template(cfg.prompts.infer, values)}}};
        auto answer = runner.call(Stage::infer, infer);
        rec.predicted = extract_answer_label(answer, option_labels(item.options));
    } catch (const TransportError& e) {
        rec.error = std::string("transport: ") + e.what();
    } catch (const TranscriptError& e) {
        rec.error = std::string("transcript: ") + e.what();
    } catch (const ParseError& e) {
        rec.error = std::string("parse: ") + e.what();
    }
    if (rec.error) rec.predicted.reset();

    nlohmann::json calls = nlohmann::json::array();
    for (const auto& c : rec.calls) {
        nlohmann::json cj{{"stage", std::string(to_string(c.stage))},
                          {"model", c.model},
                          {"response", c.response}};
        if (ctx.record_prompts) cj["prompt"] = c.prompt;
        calls.push_back(std::move(cj));
    }
    trace["calls"] = std::move(calls);
    trace["notes"] = std::move(notes);
    return rec;
}

struct LabelMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;    // gold count
    std::size_t predicted = 0;  // predicted count
};

struct Metrics {
    std::map<std::string, LabelMetrics> per_label;  // labels present in gold
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t abstain = 0;
    std::size_t n = 0;
};

inline constexpr std::string_view kMetricDefinition =
    "macro-averaged precision, recall and F1 over option labels present in gold; "
    "abstain is a distinct predicted class that is never correct; per-label F1 is the "
    "harmonic mean of precision and recall (0 when both are 0)";

inline Metrics compute_metrics(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw ValidationError("cannot compute metrics over zero records");
    Metrics m;
    m.n = records.size();
    std::map<std::string, std::size_t> gold_count, pred_count, hits;
    std::size_t correct = 0;
    for (const auto& r : records) {
        ++gold_count[r.gold];
        if (!r.predicted) {
            ++m.abstain;
            continue;
        }
        ++pred_count[*r.predicted];
        if (*r.predicted == r.gold) {
            ++hits[r.gold];
            ++correct;
        }
    }
    for (const auto& [label, support] : gold_count) {
        LabelMetrics lm;
        lm.support = support;
        lm.predicted = pred_count[label];
        double tp = static_cast<double>(hits[label]);
        lm.precision = lm.predicted ? tp / static_cast<double>(lm.predicted) : 0.0;
        lm.recall = tp / static_cast<double>(support);
        double denom = lm.precision + lm.recall;
        lm.f1 = denom > 0.0 ? 2.0 * lm.precision * lm.recall / denom : 0.0;
        m.macro_precision += lm.precision;
        m.macro_recall += lm.recall;
        m.macro_f1 += lm.f1;
        m.per_label[label] = lm;
    }
    auto labels = static_cast<double>(gold_count.size());
    m.macro_precision /= labels;
    m.macro_recall /= labels;
    m.macro_f1 /= labels;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
    return m;
}

inline nlohmann::json to_json(const Metrics& m) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [label, lm] : m.per_label)
        per[label] = {{"precision", lm.precision},
                      {"recall", lm.recall},
                      {"f1", lm.f1},
                      {"support", lm.support},
                      {"predicted", lm.predicted}};
    return {{"per_label", std::move(per)},
            {"macro_precision", m.macro_precision},
            {"macro_recall", m.macro_recall},
            {"macro_f1", m.macro_f1},
            {"accuracy", m.accuracy},
            {"abstain", m.abstain},
            {"n", m.n}};
}

struct EvaluationReport {
    AblationMode mode = AblationMode::full;
    nlohmann::json config;
    std::vector<PredictionRecord> records;  // sorted by item id
    std::optional<Metrics> metrics;         // over mapped items only
    std::size_t unmapped = 0;
    std::size_t errors = 0;
    double elapsed_ms = 0.0;
    bool deterministic = true;  // mock runs omit timing from the document

    nlohmann::json to_json() const {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : records) {
            recs.push_back({{"id", r.id},
                            {"predicted", r.predicted ? nlohmann::json(*r.predicted)
                                                      : nlohmann::json("abstain")},
                            {"gold", r.gold},
                            {"unmapped", r.unmapped},
                            {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)},
                            {"trace", r.trace}});
        }
        nlohmann::json doc{
            {"metric_definition", std::string(kMetricDefinition)},
            {"mode", std::string(causalrag::to_string(mode))},
            {"config", config},
            {"counts",
             {{"items", records.size()},
              {"unmapped_excluded", unmapped},
              {"errors", errors}}},
            {"metrics", metrics ? causalrag::to_json(*metrics) : nlohmann::json(nullptr)},
            {"records", std::move(recs)},
        };
        if (!deterministic) doc["timing"] = {{"elapsed_ms", elapsed_ms}};
        return doc;
    }
};

struct EvaluationOptions {
    int workers = 1;
    bool deterministic = true;
};

// Unmapped items are recorded but skip every LLM call and are left out of
// the metrics. Items run in parallel only when `deterministic` is false.
inline EvaluationReport run_evaluation(const std::vector<QAItem>& items, AblationMode mode,
                                       const PipelineContext& ctx,
                                       const EvaluationOptions& options = {}) {
    auto started = std::chrono::steady_clock::now();
    EvaluationReport report;
    report.mode = mode;
    report.deterministic = options.deterministic;
    report.config = ctx.config.to_json();
    report.config["mode"] = std::string(to_string(mode));
    report.records.resize(items.size());

    auto run_one = [&](std::size_t i) {
        const auto& item = items[i];
        auto query = build_query_context(ctx.view.base(), ctx.linker, item.question, item.options);
        if (!maps_into_causal_view(query, ctx.view)) {
            PredictionRecord rec;
            rec.id = item.id;
            rec.gold = item.gold;
            rec.unmapped = true;
            rec.trace = {{"mode", std::string(to_string(mode))},
                         {"query", {{"cuis", query.cuis}, {"semantic_types", query.semantic_types}}},
                         {"notes", {"no linked entity maps into the causal subgraph; skipped"}}};
            report.records[i] = std::move(rec);
            return;
        }
        report.records[i] = run_pipeline(item, mode, ctx);
    };

    int workers = options.deterministic ? 1 : std::max(1, options.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < items.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < items.size(); i = next++) run_one(i);
            });
    }

    std::sort(report.records.begin(), report.records.end(),
              [](const PredictionRecord& a, const PredictionRecord& b) { return a.id < b.id; });
    std::vector<PredictionRecord> scored;
    for (const auto& r : report.records) {
        if (r.unmapped) {
            ++report.unmapped;
            continue;
        }
        if (r.error) ++report.errors;
        scored.push_back(r);
    }
    if (!scored.empty()) report.metrics = compute_metrics(scored);
    report.elapsed_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    return report;
}

inline std::string format_summary(const EvaluationReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "mode=" << to_string(r.mode) << " items=" << r.records.size()
       << " unmapped_excluded=" << r.unmapped << " errors=" << r.errors << '\n';
    if (!r.metrics) {
        os << "no mapped items; metrics unavailable\n";
        return os.str();
    }
    const auto& m = *r.metrics;
    os << "label  precision%  recall%     f1  support\n";
    for (const auto& [label, lm] : m.per_label)
        os << std::left << std::setw(7) << label << std::right << std::setw(10)
           << lm.precision * 100 << std::setw(9) << lm.recall * 100 << std::setw(7)
           << std::setprecision(3) << lm.f1 << std::setprecision(2) << std::setw(9) << lm.support
           << '\n';
    os << "macro  " << std::setw(10) << m.macro_precision * 100 << std::setw(9)
       << m.macro_recall * 100 << std::setw(7) << std::setprecision(3) << m.macro_f1 << '\n'
       << std::setprecision(2) << "accuracy%=" << m.accuracy * 100 << " abstain=" << m.abstain
       << " n=" << m.n << '\n';
    return os.str();
}

}  // namespace causalrag
