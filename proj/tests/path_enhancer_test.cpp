#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "causalrag/path_enhancer.hpp"
#include "test_graphs.hpp"

using namespace causalrag;

namespace {

struct Fixture {
    std::shared_ptr<const KnowledgeGraph> graph;
    CausalGraphView view;
};

Fixture typed_graph() {
    GraphBuilder b;
    b.add_node("C1", "Smoking", {"inbe"});
    b.add_node("C2", "Lung Damage", {"patf"});
    b.add_node("C3", "Lung Cancer", {"neop"});
    b.add_node("C4", "Cough", {"sosy"});
    b.add_node("C9", "Untyped");
    b.add_edge("C1", "CAUSES", "C2", 0.9, false);
    b.add_edge("C1", "PREDISPOSES", "C2", 0.8, false);
    b.add_edge("C2", "CAUSES", "C3", 0.9, false);
    b.add_edge("C1", "CAUSES", "C4", 0.9, false);
    b.add_edge("C4", "ASSOCIATED_WITH", "C3", 0.2, false);
    b.add_edge("C9", "CAUSES", "C3", 0.9, false);
    auto g = std::make_shared<const KnowledgeGraph>(std::move(b).build());
    auto view = build_causal_view(g, default_causality_table(), 0.5);
    return {g, view};
}

Path make_path(const KnowledgeGraph& g, std::vector<std::string> ids, std::vector<EdgeIndex> edges,
               double score, std::size_t segment = 0) {
    Path p;
    for (const auto& id : ids) p.nodes.push_back(g.index_of(id));
    p.edges = std::move(edges);
    p.tier = Tier::causal;
    p.segment_index = segment;
    p.score = score;
    return p;
}

}  // namespace

TEST(FusePaths, SameNodesDifferentPredicatesMerge) {
    auto f = typed_graph();
    auto via_causes = make_path(*f.graph, {"C1", "C2", "C3"}, {0, 2}, 0.9);
    auto via_predisposes = make_path(*f.graph, {"C1", "C2", "C3"}, {1, 2}, 0.85);
    auto fused = fuse_paths({via_predisposes, via_causes}, *f.graph);
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].merge_count, 2u);
    EXPECT_EQ(fused[0].path, via_causes);
}

TEST(FusePaths, DifferentIntermediatesStaySeparate) {
    auto f = typed_graph();
    auto p1 = make_path(*f.graph, {"C1", "C2", "C3"}, {0, 2}, 0.9);
    auto p2 = make_path(*f.graph, {"C1", "C4", "C3"}, {3, 4}, 0.55);
    EXPECT_EQ(fuse_paths({p1, p2}, *f.graph).size(), 2u);
    EXPECT_TRUE(fuse_paths({}, *f.graph).empty());
}

TEST(FusePaths, IdenticalPathsFromDifferentSegmentsCountOnce) {
    auto f = typed_graph();
    auto p = make_path(*f.graph, {"C1", "C2"}, {0}, 0.9, 0);
    auto q = make_path(*f.graph, {"C1", "C2"}, {0}, 0.9, 1);
    auto fused = fuse_paths({p, q}, *f.graph);
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].merge_count, 1u);
}

TEST(CuiOverlap, SetArithmetic) {
    auto f = typed_graph();
    auto p = make_path(*f.graph, {"C1", "C2", "C9"}, {}, 0.0);
    EXPECT_DOUBLE_EQ(cui_overlap({"C1", "C2", "C3", "C4"}, p, *f.graph), 0.5);
    EXPECT_DOUBLE_EQ(cui_overlap({"C3", "C4"}, p, *f.graph), 0.0);
    EXPECT_DOUBLE_EQ(cui_overlap({"C1", "C9"}, p, *f.graph), 1.0);
    EXPECT_THROW(cui_overlap({}, p, *f.graph), ValidationError);
}

TEST(SemanticOverlap, SetArithmetic) {
    auto f = typed_graph();
    auto p = make_path(*f.graph, {"C1", "C3"}, {}, 0.0);  // {inbe, neop}
    EXPECT_DOUBLE_EQ(semantic_overlap({"inbe", "phsu"}, p, *f.graph), 0.5);
    EXPECT_DOUBLE_EQ(semantic_overlap({"inbe", "neop"}, p, *f.graph), 1.0);
    auto untyped = make_path(*f.graph, {"C9"}, {}, 0.0);
    EXPECT_DOUBLE_EQ(semantic_overlap({"dsyn"}, untyped, *f.graph), 0.0);
    Diagnostics diag;
    EXPECT_DOUBLE_EQ(semantic_overlap({}, p, *f.graph, &diag), 0.0);
    EXPECT_EQ(diag.warnings.size(), 1u);
}

TEST(LhScore, LengthHeuristic) {
    EXPECT_DOUBLE_EQ(lh_score(1), 0.5);
    EXPECT_DOUBLE_EQ(lh_score(3), 0.25);
    EXPECT_DOUBLE_EQ(lh_score(0), 1.0);
}

TEST(TotalScore, LinearCombination) {
    EnhancerConfig cfg{0.4, 0.3, 0.3, 0.4};
    EXPECT_NEAR(total_score({0.5, 1.0, 0.25}, cfg), 0.575, 1e-15);
    EXPECT_DOUBLE_EQ(total_score({0, 0, 0}, cfg), 0.0);
    EnhancerConfig only_cui{1.0, 0.0, 0.0, 0.4};
    EXPECT_EQ(total_score({0.37, 0.9, 0.5}, only_cui), 0.37);
}

TEST(TotalScore, MonotoneAndSymmetric) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        double a = u(rng), b = u(rng) * (1 - a);
        EnhancerConfig cfg{a, b, 1.0 - a - b, 0.5};
        ScoreComponents c{u(rng), u(rng), u(rng)};
        double base = total_score(c, cfg);
        EXPECT_GE(base, 0.0);
        EXPECT_LE(base, 1.0 + 1e-12);
        auto bumped = c;
        bumped.semantic_overlap = std::min(1.0, c.semantic_overlap + 0.1);
        EXPECT_GE(total_score(bumped, cfg), base);
        EnhancerConfig rotated{cfg.beta, cfg.gamma, cfg.alpha, 0.5};
        ScoreComponents rc{c.semantic_overlap, c.lh_score, c.cui_overlap};
        EXPECT_NEAR(total_score(rc, rotated), base, 1e-12);
    }
}

TEST(EnhancerConfig, RejectsBadWeights) {
    EXPECT_THROW((EnhancerConfig{0.5, 0.3, 0.3, 0.4}).validate(), ValidationError);
    EXPECT_THROW((EnhancerConfig{1.2, -0.1, -0.1, 0.4}).validate(), ValidationError);
    EXPECT_THROW((EnhancerConfig{0.4, 0.3, 0.3, 0.0}).validate(), ValidationError);
    EXPECT_THROW((EnhancerConfig{0.4, 0.3, 0.3, 1.5}).validate(), ValidationError);
    EXPECT_NO_THROW(EnhancerConfig{}.validate());
}

TEST(SelectFinal, CeilingWithFloorOfOne) {
    EXPECT_EQ(final_keep_count(10, 0.3), 3u);
    EXPECT_EQ(final_keep_count(1, 0.1), 1u);
    EXPECT_EQ(final_keep_count(0, 0.5), 0u);
    EXPECT_EQ(final_keep_count(7, 0.4), 3u);
    EXPECT_EQ(final_keep_count(5, 1.0), 5u);
    EXPECT_THROW(final_keep_count(5, 0.0), ValidationError);
    EXPECT_THROW(final_keep_count(5, 1.01), ValidationError);
}

TEST(SelectFinal, TieBreakChain) {
    auto f = typed_graph();
    std::vector<ScoredPath> scored;
    auto add = [&](Path p, double total) {
        ScoredPath s;
        s.path = std::move(p);
        s.total_score = total;
        scored.push_back(s);
    };
    add(make_path(*f.graph, {"C1", "C4", "C3"}, {3, 4}, 0.9), 0.5);
    add(make_path(*f.graph, {"C1", "C2"}, {0}, 0.9), 0.5);
    add(make_path(*f.graph, {"C2", "C3"}, {2}, 0.95), 0.5);
    add(make_path(*f.graph, {"C1", "C4"}, {3}, 0.9), 0.5);
    add(make_path(*f.graph, {"C9", "C3"}, {5}, 0.9), 0.7);
    auto kept = select_final(scored, 1.0, *f.graph);
    std::vector<std::string> order;
    for (const auto& s : kept) order.push_back(canonical_string(s.path, *f.graph));
    EXPECT_EQ(order, (std::vector<std::string>{"C9>C3", "C2>C3", "C1>C2", "C1>C4", "C1>C4>C3"}));
    EXPECT_EQ(select_final(scored, 0.4, *f.graph).size(), 2u);
    EXPECT_TRUE(select_final({}, 0.4, *f.graph).empty());
}

TEST(ScorePaths, TotalScoreIdentity) {
    auto f = typed_graph();
    QueryContext q{{"C1", "C3"}, {"inbe", "neop", "phsu"}};
    auto fused = fuse_paths({make_path(*f.graph, {"C1", "C2", "C3"}, {0, 2}, 0.9),
                             make_path(*f.graph, {"C1", "C4"}, {3}, 0.9)},
                            *f.graph);
    EnhancerConfig cfg;
    auto scored = score_paths(fused, q, *f.graph, cfg);
    ASSERT_EQ(scored.size(), 2u);
    EXPECT_DOUBLE_EQ(scored[0].cui_overlap, 1.0);
    EXPECT_NEAR(scored[0].semantic_overlap, 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(scored[0].lh_score, 1.0 / 3.0);
    for (const auto& s : scored)
        EXPECT_NEAR(s.total_score,
                    cfg.alpha * s.cui_overlap + cfg.beta * s.semantic_overlap + cfg.gamma * s.lh_score,
                    1e-12);
}

TEST(EnhancementPrompt, RendersPathsInScoreOrder) {
    auto f = typed_graph();
    ChainOfThought cot{"", {"smoking", "lung damage", "lung cancer"}, 80};
    OptionList options{{"A", "Lung Cancer"}, {"B", "Cough"}};
    ScoredPath low, high;
    low.path = make_path(*f.graph, {"C1", "C4"}, {3}, 0.9);
    low.total_score = 0.3;
    high.path = make_path(*f.graph, {"C1", "C2", "C3"}, {0, 2}, 0.9);
    high.total_score = 0.6;
    auto prompt = build_enhancement_prompt({low, high}, cot, "What does smoking cause?", options, f.view);
    const auto& body = prompt.messages[0].content;
    auto first = body.find("- Smoking --[CAUSES (0.90)]--> Lung Damage --[CAUSES (0.90)]--> Lung Cancer");
    auto second = body.find("- Smoking --[CAUSES (0.90)]--> Cough");
    ASSERT_NE(first, std::string::npos);
    ASSERT_NE(second, std::string::npos);
    EXPECT_LT(first, second);
    EXPECT_NE(body.find("smoking \xE2\x86\x92 lung damage \xE2\x86\x92 lung cancer \xE2\x86\x92 80"),
              std::string::npos);
    EXPECT_NE(body.find("A. Lung Cancer"), std::string::npos);
    EXPECT_EQ(body.find(kNoEvidenceMarker), std::string::npos);
}

TEST(EnhancementPrompt, EmptyEvidenceMarkerAndOverrideFormatting) {
    auto f = typed_graph();
    ChainOfThought cot{"", {"a", "b"}, {}};
    OptionList options{{"A", "x"}, {"B", "y"}};
    auto prompt = build_enhancement_prompt({}, cot, "q", options, f.view);
    EXPECT_NE(prompt.messages[0].content.find(kNoEvidenceMarker), std::string::npos);

    auto updated = apply_strength_updates(f.view, {{{"C1", "CAUSES", "C4"}, 0.8}});
    EXPECT_EQ(render_path(make_path(*f.graph, {"C1", "C4"}, {3}, 0.8), updated),
              "Smoking --[CAUSES (0.80)]--> Cough");
}
