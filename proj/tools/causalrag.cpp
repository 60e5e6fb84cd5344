// causalrag: build graph artifacts, inspect the causal view, answer single
// questions and evaluate datasets.
//
// Exit codes: 0 ok, 1 data error, 2 usage/IO error, 3 transport error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalrag/causal_layer.hpp"
#include "causalrag/config.hpp"
#include "causalrag/entity_linker.hpp"
#include "causalrag/eval_harness.hpp"
#include "causalrag/graph_io.hpp"
#include "causalrag/graph_store.hpp"
#include "causalrag/llm_gateway.hpp"
#include "causalrag/llm_http.hpp"

namespace fs = std::filesystem;
using namespace causalrag;

namespace {

enum Exit { kOk = 0, kDataError = 1, kUsageError = 2, kTransportError = 3 };

// Raised for missing files and bad flag combinations.
struct UsageError : Error {
    using Error::Error;
};

struct Overrides {
    std::string config_path;
    std::optional<double> theta;
    std::optional<double> keep_ratio;
    std::optional<int> k;
    std::optional<int> max_hops;
    std::string cot_model, enhance_model, infer_model;
};

struct Common {
    Overrides flags;
    std::string graph_path;
    std::string updates_path;
};

std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw UsageError("cannot open " + path);
    return in;
}

PipelineConfig resolve_config(const Overrides& o) {
    PipelineConfig cfg;
    if (!o.config_path.empty()) {
        if (!fs::exists(o.config_path)) throw UsageError("config not found: " + o.config_path);
        cfg = load_config(o.config_path);
    }
    if (o.theta) cfg.theta = *o.theta;
    if (o.keep_ratio) cfg.enhancer.keep_ratio = *o.keep_ratio;
    if (o.k) cfg.retrieval.k = *o.k;
    if (o.max_hops) cfg.retrieval.max_hops = *o.max_hops;
    if (!o.cot_model.empty()) cfg.models.cot_model = o.cot_model;
    if (!o.enhance_model.empty()) cfg.models.enhance_model = o.enhance_model;
    if (!o.infer_model.empty()) cfg.models.infer_model = o.infer_model;
    cfg.validate();
    return cfg;
}

void add_config_flags(CLI::App* cmd, Overrides& o, bool models) {
    cmd->add_option("--config", o.config_path, "Pipeline config (JSON)");
    cmd->add_option("--theta", o.theta, "Causality threshold");
    cmd->add_option("--k", o.k, "Paths kept per segment pair");
    cmd->add_option("--max-hops", o.max_hops, "Maximum path length");
    cmd->add_option("--keep-ratio", o.keep_ratio, "Fraction of fused paths kept");
    if (!models) return;
    cmd->add_option("--cot-model", o.cot_model, "Model for the chain-of-thought stage");
    cmd->add_option("--enhance-model", o.enhance_model, "Model for the enhancement stage");
    cmd->add_option("--infer-model", o.infer_model, "Model for the inference stage");
}

std::shared_ptr<const KnowledgeGraph> load_graph(const std::string& path) {
    if (path.empty()) throw UsageError("--graph is required");
    auto in = open_input(path, std::ios::binary);
    return std::make_shared<const KnowledgeGraph>(read_graph(in));
}

CausalGraphView load_view(const Common& c, const PipelineConfig& cfg, bool quiet = false) {
    Diagnostics diag;
    auto view = build_causal_view(load_graph(c.graph_path), cfg.causality, cfg.theta, &diag);
    if (!c.updates_path.empty()) {
        auto in = open_input(c.updates_path);
        UpdateSummary s;
        view = apply_strength_updates(view, parse_strength_updates(in), &s);
        if (!quiet)
            std::cerr << "updates: added=" << s.added << " revised=" << s.revised
                      << " demoted=" << s.demoted << " unchanged_absent=" << s.unchanged_absent << '\n';
    }
    for (const auto& w : diag.warnings) std::cerr << "warning: " << w << '\n';
    return view;
}

LinkerIndex load_linker(const KnowledgeGraph& g, const PipelineConfig& cfg) {
    auto linker = build_index(g);
    if (!cfg.alias_file.empty()) {
        auto in = open_input(cfg.alias_file);
        Diagnostics diag;
        linker.merge_aliases(in, g, &diag);
        for (const auto& w : diag.warnings) std::cerr << "warning: " << w << '\n';
    }
    return linker;
}

// Owns whichever clients the model assignment needs.
struct Clients {
    std::unique_ptr<MockLlmClient> mock;
    std::unique_ptr<HttpLlmClient> live;
    std::unique_ptr<ModelRouter> router;

    Clients(const PipelineConfig& cfg, const std::string& transcript_path) {
        if (cfg.models.uses_mock()) {
            if (transcript_path.empty())
                throw UsageError("a stage uses the mock model; pass --mock-transcript");
            auto in = open_input(transcript_path);
            mock = std::make_unique<MockLlmClient>(MockTranscript::parse(in));
        }
        bool needs_live = false;
        for (Stage s : kAllStages) needs_live = needs_live || cfg.models.for_stage(s) != kMockModel;
        if (needs_live) {
            auto endpoint = EndpointConfig::from_environment();
            if (endpoint.url.empty())
                throw UsageError("a stage uses a live model; set LLM_ENDPOINT");
            endpoint.max_attempts = cfg.llm.max_attempts;
            endpoint.max_in_flight = cfg.llm.max_in_flight;
            live = std::make_unique<HttpLlmClient>(endpoint);
        }
        router = std::make_unique<ModelRouter>(mock.get(), live.get());
    }
};

void print_histogram(const std::map<std::string, std::size_t>& hist) {
    for (const auto& [pred, n] : hist) std::cout << "  " << pred << ' ' << n << '\n';
}

int cmd_build_graph(const std::string& triples, const std::string& output, const Overrides& o) {
    auto cfg = resolve_config(o);
    auto in = open_input(triples);
    IngestReport report;
    auto graph = ingest_triples(in, cfg.causality, &report);
    for (const auto& w : report.diagnostics.warnings) std::cerr << "warning: " << w << '\n';
    std::ofstream out(output, std::ios::binary);
    if (!out) throw UsageError("cannot write " + output);
    write_graph(out, graph);
    out.close();
    if (!out) throw UsageError("failed writing " + output);

    std::map<std::string, std::size_t> hist;
    for (const auto& e : graph.edges()) ++hist[e.predicate];
    std::cout << "nodes=" << graph.node_count() << " edges=" << graph.edge_count()
              << " malformed=" << report.malformed_rows << " duplicates=" << report.duplicate_rows
              << '\n';
    print_histogram(hist);
    return kOk;
}

int cmd_causal_stats(const Common& c, std::vector<double> sweep) {
    auto cfg = resolve_config(c.flags);
    auto view = load_view(c, cfg);
    const auto& g = view.base();
    if (sweep.empty()) sweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::cout << "graph nodes=" << g.node_count() << " edges=" << g.edge_count() << '\n';
    for (double t : sweep) {
        auto v = build_causal_view(view.base_ptr(), cfg.causality, t);
        auto nodes = v.member_nodes();
        std::printf("theta=%.2f causal_edges=%zu causal_nodes=%zu\n", t, v.size(),
                    static_cast<std::size_t>(std::count(nodes.begin(), nodes.end(), true)));
    }
    std::map<std::string, std::size_t> hist;
    for (EdgeIndex e : view.member_edges()) ++hist[g.edge(e).predicate];
    std::printf("view at theta=%.2f: %zu edges\n", view.theta(), view.size());
    print_histogram(hist);
    return kOk;
}

int cmd_update_strengths(const Common& c, const std::string& updates, const std::string& output) {
    auto cfg = resolve_config(c.flags);
    auto view = load_view(c, cfg, true);
    auto in = open_input(updates);
    UpdateSummary s;
    auto updated = apply_strength_updates(view, parse_strength_updates(in), &s);
    std::cout << "added=" << s.added << " revised=" << s.revised << " demoted=" << s.demoted
              << " unchanged_absent=" << s.unchanged_absent << '\n';
    std::cout << "causal_edges " << view.size() << " -> " << updated.size() << '\n';
    if (!output.empty()) {
        std::ofstream out(output);
        if (!out) throw UsageError("cannot write " + output);
        const auto& g = updated.base();
        out << "subject_cui\tpredicate\tobject_cui\tstrength\n";
        for (EdgeIndex e : updated.member_edges()) {
            const auto& edge = g.edge(e);
            out << g.id_of(edge.subject) << '\t' << edge.predicate << '\t' << g.id_of(edge.object)
                << '\t' << format_strength(updated.causal_strength(e)) << '\n';
        }
    }
    return kOk;
}

OptionList parse_option_flags(const std::vector<std::string>& raw) {
    OptionList options;
    for (const auto& r : raw) {
        auto eq = r.find('=');
        if (eq == std::string::npos) throw UsageError("--option expects LABEL=TEXT, got: " + r);
        options.push_back({r.substr(0, eq), r.substr(eq + 1)});
    }
    try {
        validate_options(options);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
    return options;
}

int transport_or(const std::optional<std::string>& error, int otherwise) {
    if (error && error->starts_with("transport")) return kTransportError;
    if (error) return kDataError;
    return otherwise;
}

int cmd_answer(const Common& c, AblationMode mode, const std::string& question,
               const std::vector<std::string>& raw_options, const std::string& transcript,
               bool trace) {
    auto cfg = resolve_config(c.flags);
    auto options = parse_option_flags(raw_options);
    auto view = load_view(c, cfg);
    auto linker = load_linker(view.base(), cfg);
    Clients clients(cfg, transcript);
    PipelineContext ctx{view, linker, cfg, *clients.router, trace};
    QAItem item{"cli", question, options, options.front().label};
    auto rec = run_pipeline(item, mode, ctx);

    std::cout << "answer: " << rec.predicted.value_or("abstain") << '\n';
    if (!rec.enhanced_summary.empty()) std::cout << "summary: " << rec.enhanced_summary << '\n';
    if (rec.error) std::cerr << "error: " << *rec.error << '\n';
    if (trace) {
        auto t = rec.trace;
        t["config"] = cfg.to_json();
        std::cout << t.dump(2) << '\n';
    }
    return transport_or(rec.error, kOk);
}

int cmd_evaluate(const Common& c, AblationMode mode, const std::string& dataset_path,
                 const std::string& transcript, const std::string& report_path, bool trace) {
    auto cfg = resolve_config(c.flags);
    auto view = load_view(c, cfg);
    auto linker = load_linker(view.base(), cfg);
    auto in = open_input(dataset_path);
    auto items = parse_dataset(in);
    Clients clients(cfg, transcript);
    PipelineContext ctx{view, linker, cfg, *clients.router, trace};
    // Transcript ordinals follow dataset order, so mock runs stay sequential.
    EvaluationOptions opts{cfg.workers, cfg.models.uses_mock()};
    auto report = run_evaluation(items, mode, ctx, opts);

    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw UsageError("cannot write " + report_path);
        out << report.to_json().dump(2) << '\n';
    }
    std::cout << format_summary(report);
    for (const auto& r : report.records)
        if (r.error && r.error->starts_with("transport")) return kTransportError;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal-first graph retrieval for multiple-choice medical QA"};
    app.require_subcommand(1);

    std::string triples, output;
    Overrides build_flags;
    auto* build = app.add_subcommand("build-graph", "Ingest a triples TSV into a graph artifact");
    build->add_option("triples", triples, "Triples TSV")->required();
    build->add_option("-o,--output", output, "Artifact path")->required();
    build->add_option("--config", build_flags.config_path, "Pipeline config (JSON)");

    auto add_common = [](CLI::App* cmd, Common& c, bool models) {
        cmd->add_option("--graph", c.graph_path, "Graph artifact")->required();
        cmd->add_option("--updates", c.updates_path, "Strength updates TSV applied to the view");
        add_config_flags(cmd, c.flags, models);
    };

    Common stats_c;
    std::vector<double> sweep;
    auto* stats = app.add_subcommand("causal-stats", "Causal view size over a threshold sweep");
    add_common(stats, stats_c, false);
    stats->add_option("--sweep", sweep, "Thresholds to report")->delimiter(',');

    Common update_c;
    std::string updates_file, updated_out;
    auto* update = app.add_subcommand("update-strengths", "Apply strength updates to the causal view");
    add_common(update, update_c, false);
    update->add_option("updates-tsv", updates_file, "TSV: subject_cui, predicate, object_cui, s_new")
        ->required();
    update->add_option("-o,--output", updated_out, "Write the resulting causal edges as TSV");

    std::vector<std::string> modes;
    for (auto m : kAllModes) modes.emplace_back(to_string(m));

    Common answer_c;
    std::string answer_mode = "full";
    std::string question, answer_transcript;
    std::vector<std::string> raw_options;
    bool answer_trace = false;
    auto* answer = app.add_subcommand("answer", "Answer one multiple-choice question");
    add_common(answer, answer_c, true);
    answer->add_option("--mode", answer_mode, "Pipeline mode")
        ->check(CLI::IsMember(modes));
    answer->add_option("-q,--question", question, "Question text")->required();
    answer->add_option("--option", raw_options, "Answer option LABEL=TEXT (repeat)")->required();
    answer->add_option("--mock-transcript", answer_transcript, "Transcript JSONL for mock models");
    answer->add_flag("--trace", answer_trace, "Print the full trace");

    Common eval_c;
    std::string eval_mode = "full";
    std::string dataset, eval_transcript, report;
    bool eval_trace = false;
    auto* evaluate = app.add_subcommand("evaluate", "Run a dataset and report metrics");
    add_common(evaluate, eval_c, true);
    evaluate->add_option("--mode", eval_mode, "Pipeline mode")
        ->check(CLI::IsMember(modes));
    evaluate->add_option("--dataset", dataset, "QA dataset JSONL")->required();
    evaluate->add_option("--mock-transcript", eval_transcript, "Transcript JSONL for mock models");
    evaluate->add_option("--report", report, "Write the JSON report here");
    evaluate->add_flag("--trace", eval_trace, "Include prompts in the report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (*build) return cmd_build_graph(triples, output, build_flags);
        if (*stats) return cmd_causal_stats(stats_c, sweep);
        if (*update) return cmd_update_strengths(update_c, updates_file, updated_out);
        if (*answer)
            return cmd_answer(answer_c, *parse_mode(answer_mode), question, raw_options, answer_transcript,
                              answer_trace);
        if (*evaluate)
            return cmd_evaluate(eval_c, *parse_mode(eval_mode), dataset, eval_transcript, report, eval_trace);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const ValidationError& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kUsageError;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << '\n';
        return kTransportError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsageError;
}
