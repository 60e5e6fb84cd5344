// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "causalrag/causal_layer.hpp"
#include "causalrag/config.hpp"
#include "causalrag/cot_engine.hpp"
#include "causalrag/entity_linker.hpp"
#include "causalrag/eval_harness.hpp"
#include "causalrag/graph_store.hpp"
#include "causalrag/llm_gateway.hpp"
#include "causalrag/path_enhancer.hpp"
#include "causalrag/path_retrieval.hpp"
#include "metrics_oracle.hpp"
#include "path_oracle.hpp"
#include "test_graphs.hpp"

using namespace causalrag;
namespace fs = std::filesystem;
namespace ct = causalrag::testing;

namespace {

struct Failure {
    std::string what;
};

void check(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

template <class E, class F>
void check_throws(F&& f, const std::string& what) {
    try {
        f();
    } catch (const E&) {
        return;
    }
    throw Failure{what + " did not throw"};
}

bool near(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

std::string ids(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
}

// ---------------------------------------------------------------------------

void causal_view_monotonicity() {
    std::mt19937 rng(50);
    GraphBuilder b;
    std::uniform_int_distribution<int> node(0, 19);
    std::uniform_int_distribution<std::size_t> pred(0, ct::random_predicates().size() - 1);
    auto table = default_causality_table();
    for (int added = 0; added < 50;) {
        auto s = "N" + std::to_string(node(rng));
        auto o = "N" + std::to_string(node(rng));
        const auto& p = ct::random_predicates()[pred(rng)];
        b.add_node(s, s);
        b.add_node(o, o);
        added += b.add_edge(s, p, o, table.weight(p), false) ? 1 : 0;
    }
    auto g = std::make_shared<const KnowledgeGraph>(std::move(b).build());
    check(g->edge_count() == 50, "graph has 50 edges");
    const std::vector<double> thetas{0.0, 0.3, 0.5, 0.7, 1.0};
    std::vector<std::set<EdgeIndex>> views;
    for (double t : thetas) {
        auto v = build_causal_view(g, table, t);
        auto edges = v.member_edges();
        std::set<EdgeIndex> members(edges.begin(), edges.end());
        for (EdgeIndex e = 0; e < g->edge_count(); ++e) {
            bool expected = table.weight(g->edge(e).predicate) >= t;
            check(v.contains(e) == expected, "membership is exactly f(r) >= theta");
        }
        views.push_back(std::move(members));
    }
    check(views.front().size() == g->edge_count(), "theta 0 keeps the whole graph");
    for (std::size_t i = 0; i + 1 < views.size(); ++i)
        check(std::includes(views[i].begin(), views[i].end(), views[i + 1].begin(), views[i + 1].end()),
              "G_C(theta_hi) is a subset of G_C(theta_lo)");
}

void path_search_oracle() {
    std::mt19937 rng(200);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + trial % 11;
        auto g = ct::random_graph(rng, n, 30);
        double theta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto view = build_causal_view(g, default_causality_table(), theta);
        RetrievalConfig cfg;
        cfg.max_hops = 1 + trial % 4;
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::set<std::string> from{g->id_of(pick(rng))}, to{g->id_of(pick(rng))};
        if (trial % 2) from.insert(g->id_of(pick(rng)));
        auto got = find_paths(view, from, to, cfg);
        auto want = ct::oracle_find_paths(view, from, to, cfg.max_hops);
        check(got.paths.size() == want.size(),
              "trial " + std::to_string(trial) + ": path count " + std::to_string(got.paths.size()) +
                  " vs oracle " + std::to_string(want.size()));
        for (const auto& p : got.paths) {
            auto it = want.find(ct::OraclePath{p.edges, p.reversed, p.tier, 0.0});
            check(it != want.end(), "trial " + std::to_string(trial) + ": path missing from oracle");
            check(near(p.score, it->score), "path_score matches oracle to 1e-12");
            check(near(p.score, path_score(p, view)), "stored score equals path_score");
        }
    }
}

void causal_first_guarantee() {
    // Causal chain plus a shorter correlational shortcut.
    auto both = ct::make_graph({{"A", "CAUSES", "B"},
                                {"B", "PREDISPOSES", "C"},
                                {"A", "ASSOCIATED_WITH", "C"}});
    auto v1 = build_causal_view(both, default_causality_table(), 0.5);
    auto r1 = find_paths(v1, {"A"}, {"C"}, RetrievalConfig{});
    check(r1.tier == Tier::causal && r1.paths.size() == 1, "causal path found when one exists");
    check(r1.paths[0].tier == Tier::causal, "no fallback path when a causal path exists");

    // Only correlational edges connect A and C.
    auto none = ct::make_graph({{"A", "CAUSES", "B"}, {"A", "ASSOCIATED_WITH", "C"}});
    auto v2 = build_causal_view(none, default_causality_table(), 0.5);
    auto r2 = find_paths(v2, {"A"}, {"C"}, RetrievalConfig{});
    check(r2.tier == Tier::fallback && r2.paths.size() == 1, "fallback tier used without causal path");

    // Random graphs: fallback paths appear only when the causal tier is empty,
    // and every causal-tier path scores at least theta.
    std::mt19937 rng(7);
    std::size_t fallback_seen = 0, causal_seen = 0;
    for (int trial = 0; trial < 300; ++trial) {
        int n = 3 + trial % 9;
        auto g = ct::random_graph(rng, n, 25);
        double theta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto view = build_causal_view(g, default_causality_table(), theta);
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::set<std::string> from{g->id_of(pick(rng))}, to{g->id_of(pick(rng))};
        RetrievalConfig cfg;
        auto got = find_paths(view, from, to, cfg);
        auto causal_only = find_paths_in_tier(view, Tier::causal, from, to, cfg);
        for (const auto& p : got.paths) {
            if (p.tier == Tier::fallback) {
                ++fallback_seen;
                check(causal_only.paths.empty(), "fallback path while causal paths exist");
            } else {
                ++causal_seen;
                check(p.score >= theta, "causal-tier path_score >= theta");
            }
        }
        if (!causal_only.paths.empty())
            check(got.tier == Tier::causal && got.paths.size() == causal_only.paths.size(),
                  "causal tier returned in full");
    }
    check(fallback_seen > 0 && causal_seen > 0, "random fixtures exercise both tiers");
}

void scoring_identities() {
    GraphBuilder b;
    b.add_node("C1", "C1", {"t1"});
    b.add_node("C2", "C2", {"t2"});
    b.add_node("C9", "C9", {"t9"});
    b.add_edge("C1", "CAUSES", "C2", 0.9, false);
    b.add_edge("C2", "CAUSES", "C9", 0.9, false);
    auto g = std::move(b).build();
    Path p;
    p.nodes = {0, 1, 2};
    p.edges = {0, 1};
    check(cui_overlap({"C1", "C2", "C3", "C4"}, p, g) == 0.5, "cui_overlap 2/4 = 0.5");
    check(semantic_overlap({"t1", "t5"}, p, g) == 0.5, "semantic_overlap 1/2 = 0.5");
    check(lh_score(1) == 0.5 && lh_score(3) == 0.25, "LhScore 1/(1+L)");
    EnhancerConfig cfg;
    check(near(total_score({0.5, 1.0, 0.25}, cfg), 0.575, 1e-15), "TotalScore 0.575");
    check(final_keep_count(10, 0.3) == 3 && final_keep_count(1, 0.1) == 1 &&
              final_keep_count(7, 0.4) == 3,
          "keep count max(1, ceil(ratio * n))");

    auto dir = fs::temp_directory_path() / "causalrag_acceptance";
    fs::create_directories(dir);
    auto path = dir / "bad_weights.json";
    std::ofstream(path) << R"({"enhancer": {"alpha": 0.4, "beta": 0.4, "gamma": 0.3}})";
    check_throws<ValidationError>([&] { load_config(path); }, "alpha+beta+gamma = 1.1 at config load");
    fs::remove_all(dir);
}

void fusion_correctness() {
    std::mt19937 rng(99);
    std::size_t merged_groups = 0;
    for (int trial = 0; trial < 200; ++trial) {
        int n = 4 + trial % 8;
        auto g = ct::random_graph(rng, n, 30);
        auto view = build_causal_view(g, default_causality_table(), 0.0);
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::vector<Path> pool;
        for (int seg = 0; seg < 3; ++seg) {
            RetrievalConfig cfg;
            cfg.max_hops = 3;
            auto r = find_paths(view, {g->id_of(pick(rng))}, {g->id_of(pick(rng))}, cfg,
                                static_cast<std::size_t>(seg));
            pool.insert(pool.end(), r.paths.begin(), r.paths.end());
        }
        if (!pool.empty()) pool.push_back(pool.front());  // exact duplicate

        auto fused = fuse_paths(pool, *g);
        using Key = std::tuple<NodeIndex, NodeIndex, std::multiset<NodeIndex>>;
        auto key_of = [](const Path& p) {
            std::multiset<NodeIndex> mid(p.nodes.begin() + 1, p.nodes.end() - 1);
            return Key{p.start(), p.end(), mid};
        };
        std::set<std::vector<EdgeIndex>> distinct_edges;
        std::map<Key, std::vector<Path>> groups;
        for (const auto& p : pool)
            if (distinct_edges.insert(p.edges).second) groups[key_of(p)].push_back(p);

        std::set<Key> keys;
        std::size_t total = 0;
        PathOrder order(*g);
        for (const auto& f : fused) {
            auto k = key_of(f.path);
            check(keys.insert(k).second, "merge keys are pairwise distinct");
            total += f.merge_count;
            const auto& members = groups.at(k);
            check(f.merge_count == members.size(), "merge_count equals group size");
            for (const auto& m : members)
                check(!order(m, f.path), "representative is the group maximum");
            merged_groups += f.merge_count > 1;
        }
        check(keys.size() == groups.size(), "one fused path per group");
        check(total == distinct_edges.size(), "sum of merge_count equals deduplicated input");
    }
    check(merged_groups > 0, "fixtures exercise merging");
}

std::string random_segment(std::mt19937& rng) {
    static const std::vector<std::string> words{"fever", "infection", "WBC", "(acute)", "low-grade",
                                                "x2",    "5mg",       "über", "risk", "a/b", "1st"};
    std::uniform_int_distribution<std::size_t> w(0, words.size() - 1);
    std::uniform_int_distribution<int> count(1, 4);
    std::string s;
    for (int i = count(rng); i > 0; --i) s += (s.empty() ? "" : " ") + words[w(rng)];
    return s;
}

void cot_round_trip() {
    std::mt19937 rng(8);
    std::uniform_int_distribution<int> segs(1, 8), conf(-1, 100);
    for (int trial = 0; trial < 2000; ++trial) {
        ChainOfThought cot;
        for (int n = segs(rng); n > 0; --n) cot.segments.push_back(random_segment(rng));
        if (int c = conf(rng); c >= 0) cot.confidence = c;
        for (auto style : {ArrowStyle::unicode, ArrowStyle::ascii}) {
            Diagnostics diag;
            auto back = parse_cot(render_cot(cot, style), &diag);
            check(back.segments == cot.segments,
                  "segments survive round trip: " + ids(cot.segments) + " vs " + ids(back.segments));
            check(back.confidence == cot.confidence, "confidence survives round trip");
            check(diag.empty() == cot.confidence.has_value(),
                  "only a missing confidence raises a warning");
        }
    }
}

struct Toy {
    std::shared_ptr<const KnowledgeGraph> graph;
    PipelineConfig config;
    std::vector<QAItem> items;
    MockTranscript transcript;
};

Toy load_toy() {
    fs::path dir = fs::path(CAUSALRAG_DATA_DIR) / "toy";
    Toy t;
    t.config = load_config(dir / "config.json");
    std::ifstream triples(dir / "triples.tsv");
    t.graph = std::make_shared<const KnowledgeGraph>(ingest_triples(triples, t.config.causality));
    std::ifstream dataset(dir / "dataset.jsonl");
    t.items = parse_dataset(dataset);
    std::ifstream transcript(dir / "transcript.jsonl");
    t.transcript = MockTranscript::parse(transcript);
    return t;
}

void mock_end_to_end() {
    auto toy = load_toy();
    check(toy.graph->node_count() >= 12 && toy.graph->node_count() <= 20, "toy graph is about 15 nodes");
    check(toy.items.size() == 10, "toy dataset has 10 items");
    auto view = build_causal_view(toy.graph, toy.config.causality, toy.config.theta);
    auto linker = build_index(*toy.graph);
    std::ifstream aliases(toy.config.alias_file);
    check(aliases.good(), "alias file readable");
    linker.merge_aliases(aliases, *toy.graph);

    const std::map<AblationMode, std::array<std::size_t, 3>> expected{
        {AblationMode::full, {1, 1, 1}},
        {AblationMode::kg_only, {0, 0, 1}},
        {AblationMode::no_llm_enhanced, {1, 0, 1}},
        {AblationMode::no_enhancer, {1, 0, 1}}};

    auto run = [&](AblationMode mode, const PipelineConfig& cfg) {
        MockLlmClient client(toy.transcript);
        PipelineContext ctx{view, linker, cfg, client};
        auto report = run_evaluation(toy.items, mode, ctx);
        return std::pair{report, report.to_json().dump(2)};
    };

    for (auto [mode, counts] : expected) {
        auto [report, doc] = run(mode, toy.config);
        auto [again, doc2] = run(mode, toy.config);
        std::string m(to_string(mode));
        check(doc == doc2, m + ": consecutive runs are byte-identical");
        check(report.unmapped == 0 && report.errors == 0, m + ": every item mapped without errors");
        for (const auto& r : report.records)
            for (std::size_t s = 0; s < 3; ++s)
                check(r.call_count(kAllStages[s]) == counts[s],
                      m + ": stage-call counts for " + r.id);
        if (mode == AblationMode::full) {
            check(report.metrics && report.metrics->accuracy == 1.0, "full mode answers all 10");
            for (const auto& r : report.records)
                check(!r.enhanced_summary.empty() &&
                          r.enhanced_summary.find("The graph confirms") == 0,
                      "enhancement saw the retrieved paths for " + r.id);
        }
    }

    // Counterfactual: the same transcript without graph evidence in the
    // inference prompt gets every item wrong.
    auto blind = toy.config;
    blind.prompts.infer = "Question: {question}\nOptions:\n{options}\nAnswer with one label.\n";
    auto [blind_report, ignored] = run(AblationMode::full, blind);
    check(blind_report.metrics && blind_report.metrics->accuracy == 0.0,
          "correct answers depend on the retrieved paths");
}

void metrics_oracle() {
    auto compare = [](const std::vector<std::string>& gold,
                      const std::vector<std::optional<std::string>>& pred) {
        std::vector<PredictionRecord> recs(gold.size());
        for (std::size_t i = 0; i < gold.size(); ++i) {
            recs[i].gold = gold[i];
            recs[i].predicted = pred[i];
        }
        auto m = compute_metrics(recs);
        auto o = ct::oracle_metrics(gold, pred);
        check(near(m.macro_precision, o.macro_p) && near(m.macro_recall, o.macro_r) &&
                  near(m.macro_f1, o.macro_f1) && near(m.accuracy, o.accuracy),
              "compute_metrics matches the confusion-matrix oracle");
        for (const auto& [label, lm] : m.per_label)
            check(near(lm.precision, o.precision[label]) && near(lm.recall, o.recall[label]) &&
                      near(lm.f1, o.f1[label]),
                  "per-label metrics match the oracle");
        return m;
    };

    auto worked = compare({"A", "A", "B", "B"}, {"A", "B", "B", "B"});
    check(near(worked.macro_precision, 5.0 / 6.0) && near(worked.macro_recall, 0.75) &&
              near(worked.macro_f1, 11.0 / 15.0),
          "worked example: P = 5/6, R = 0.75, F1 = 11/15");

    // Every (gold, predicted) vector of length <= 5 over 3 classes, predicted
    // also allowing abstain.
    const std::vector<std::string> gold_values{"A", "B", "C"};
    const std::vector<std::optional<std::string>> pred_values{"A", "B", "C", std::nullopt};
    std::size_t cases = 0;
    for (int len = 1; len <= 5; ++len) {
        std::size_t gold_space = 1, pred_space = 1;
        for (int i = 0; i < len; ++i) gold_space *= 3, pred_space *= 4;
        for (std::size_t gi = 0; gi < gold_space; ++gi)
            for (std::size_t pi = 0; pi < pred_space; ++pi) {
                std::vector<std::string> gold;
                std::vector<std::optional<std::string>> pred;
                for (std::size_t i = 0, gv = gi, pv = pi; i < static_cast<std::size_t>(len);
                     ++i, gv /= 3, pv /= 4) {
                    gold.push_back(gold_values[gv % 3]);
                    pred.push_back(pred_values[pv % 4]);
                }
                compare(gold, pred);
                ++cases;
            }
    }

    // Lengths 6 to 8: the metrics depend only on the confusion counts, so
    // enumerate every multiset of (gold, predicted) pairs once.
    std::vector<std::pair<std::string, std::optional<std::string>>> cells;
    for (const auto& g : gold_values)
        for (const auto& p : pred_values) cells.emplace_back(g, p);
    std::function<void(std::size_t, int, std::vector<int>&)> spread =
        [&](std::size_t cell, int left, std::vector<int>& counts) {
            if (cell + 1 == cells.size()) {
                counts[cell] = left;
                std::vector<std::string> gold;
                std::vector<std::optional<std::string>> pred;
                for (std::size_t c = 0; c < cells.size(); ++c)
                    for (int k = 0; k < counts[c]; ++k) {
                        gold.push_back(cells[c].first);
                        pred.push_back(cells[c].second);
                    }
                compare(gold, pred);
                ++cases;
                return;
            }
            for (int k = 0; k <= left; ++k) {
                counts[cell] = k;
                spread(cell + 1, left - k, counts);
            }
        };
    for (int len = 6; len <= 8; ++len) {
        std::vector<int> counts(cells.size());
        spread(0, len, counts);
    }
    check(cases > 300'000, "exhaustive enumeration ran");
}

void strength_update_semantics() {
    auto g = ct::make_graph({{"A", "CAUSES", "B"},
                             {"A", "ASSOCIATED_WITH", "C"},
                             {"B", "TREATS", "C"},
                             {"C", "COEXISTS_WITH", "D"}});
    auto view = build_causal_view(g, default_causality_table(), 0.5);
    check(view.contains(0) && !view.contains(1) && view.contains(2) && !view.contains(3),
          "initial membership");

    UpdateSummary s;
    auto added = apply_strength_updates(view, {{{"A", "ASSOCIATED_WITH", "C"}, 0.6}}, &s);
    check(added.contains(1) && near(added.causal_strength(1), 0.6) && s.added == 1,
          "s_new >= theta adds the edge with the new strength");

    s = {};
    auto revised = apply_strength_updates(view, {{{"A", "CAUSES", "B"}, 0.75}}, &s);
    check(revised.contains(0) && near(revised.causal_strength(0), 0.75) && s.revised == 1,
          "s_new >= theta on a member revises its strength");

    s = {};
    auto demoted = apply_strength_updates(view, {{{"B", "TREATS", "C"}, 0.2}}, &s);
    check(!demoted.contains(2) && s.demoted == 1, "s_new < theta removes a member");

    s = {};
    auto absent = apply_strength_updates(view, {{{"C", "COEXISTS_WITH", "D"}, 0.3}}, &s);
    check(absent == view && s.unchanged_absent == 1, "s_new < theta on a non-member is a no-op");

    check_throws<NotFoundError>(
        [&] { apply_strength_updates(view, {{{"A", "CAUSES", "Z"}, 0.9}}); }, "unknown triple");
    check_throws<ValidationError>(
        [&] { apply_strength_updates(view, {{{"A", "CAUSES", "B"}, 1.5}}); }, "s_new above 1");

    StrengthUpdates batch{{{"A", "CAUSES", "B"}, 0.3},
                          {{"A", "ASSOCIATED_WITH", "C"}, 0.95},
                          {{"B", "TREATS", "C"}, 0.55},
                          {{"C", "COEXISTS_WITH", "D"}, 0.1}};
    auto once = apply_strength_updates(view, batch);
    auto twice = apply_strength_updates(once, batch);
    check(once == twice, "re-applying the same updates is idempotent");
    check(g->edge(0).strength == 0.9, "base graph is untouched");
}

}  // namespace

int main() {
    const std::vector<std::tuple<const char*, void (*)(), double>> criteria{
        {"causal-view monotonicity", causal_view_monotonicity, 1000.0},
        {"path-search oracle equivalence", path_search_oracle, 30000.0},
        {"causal-first guarantee", causal_first_guarantee, 0.0},
        {"scoring identities", scoring_identities, 0.0},
        {"fusion correctness", fusion_correctness, 0.0},
        {"cot parse round-trip", cot_round_trip, 0.0},
        {"mock end-to-end", mock_end_to_end, 10000.0},
        {"metrics oracle", metrics_oracle, 0.0},
        {"strength update semantics", strength_update_semantics, 0.0},
    };
    int failed = 0;
    for (const auto& [name, fn, budget_ms] : criteria) {
        auto start = std::chrono::steady_clock::now();
        std::string error;
        try {
            fn();
        } catch (const Failure& f) {
            error = f.what;
        } catch (const std::exception& e) {
            error = std::string("exception: ") + e.what();
        }
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                        .count();
        if (error.empty() && budget_ms > 0 && ms > budget_ms)
            error = "took " + std::to_string(ms) + " ms, budget " + std::to_string(budget_ms) + " ms";
        if (error.empty()) {
            std::printf("PASS %s (%.1f ms)\n", name, ms);
        } else {
            std::printf("FAIL %s (%.1f ms): %s\n", name, ms, error.c_str());
            ++failed;
        }
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed == 0 ? 0 : 1;
}
