#pragma once
// First-stage enhancement: fuse segment paths into one pool, score them
// against the query (CUI overlap, semantic-type overlap, length heuristic),
// keep the top fraction, and render the second-stage prompt.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "causalrag/causal_layer.hpp"
#include "causalrag/cot_engine.hpp"
#include "causalrag/entity_linker.hpp"
#include "causalrag/error.hpp"
#include "causalrag/path_retrieval.hpp"
#include "causalrag/prompt.hpp"

namespace causalrag {

struct EnhancerConfig {
    double alpha = 0.4;
    double beta = 0.3;
    double gamma = 0.3;
    double keep_ratio = 0.4;

    void validate() const {
        if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
            throw ValidationError("alpha, beta and gamma must be non-negative");
        if (std::abs(alpha + beta + gamma - 1.0) > 1e-9)
            throw ValidationError("alpha + beta + gamma must equal 1");
        check_keep_ratio(keep_ratio);
    }

    static void check_keep_ratio(double r) {
        if (!(r > 0.0 && r <= 1.0)) throw ValidationError("keep_ratio must be in (0,1]");
    }
};

struct FusedPath {
    Path path;
    std::size_t merge_count = 1;
};

// Identical edge sequences collapse first; the remaining paths are grouped by
// (start, end, set of intermediate nodes) and each group keeps its best member
// under PathOrder. Groups appear in order of first occurrence.
inline std::vector<FusedPath> fuse_paths(const std::vector<Path>& pool, const KnowledgeGraph& graph) {
    PathOrder better(graph);
    std::vector<Path> unique;
    std::map<std::vector<EdgeIndex>, std::size_t> by_edges;
    for (const auto& p : pool) {
        auto [it, inserted] = by_edges.try_emplace(p.edges, unique.size());
        if (inserted) {
            unique.push_back(p);
        } else if (better(p, unique[it->second])) {
            unique[it->second] = p;
        }
    }
    using Key = std::tuple<NodeIndex, NodeIndex, std::vector<NodeIndex>>;
    std::map<Key, std::size_t> by_key;
    std::vector<FusedPath> fused;
    for (auto& p : unique) {
        std::vector<NodeIndex> middle;
        if (p.nodes.size() > 2) middle.assign(p.nodes.begin() + 1, p.nodes.end() - 1);
        std::sort(middle.begin(), middle.end());
        auto [it, inserted] = by_key.try_emplace(Key{p.start(), p.end(), std::move(middle)},
                                                 fused.size());
        if (inserted) {
            fused.push_back(FusedPath{std::move(p), 1});
            continue;
        }
        FusedPath& group = fused[it->second];
        ++group.merge_count;
        if (better(p, group.path)) group.path = std::move(p);
    }
    return fused;
}

struct QueryContext {
    std::set<std::string> cuis;
    std::set<std::string> semantic_types;
};

// Entities linked from the question plus every option text. The gold answer
// is not an input.
inline QueryContext build_query_context(const KnowledgeGraph& graph,
                                        const EntityRecognizer& linker, std::string_view question,
                                        const OptionList& options) {
    QueryContext q;
    q.cuis = linker.link(question);
    for (const auto& o : options) {
        auto ids = linker.link(o.text);
        q.cuis.insert(ids.begin(), ids.end());
    }
    for (const auto& id : q.cuis) {
        const auto& types = graph.node(graph.index_of(id)).semantic_types;
        q.semantic_types.insert(types.begin(), types.end());
    }
    return q;
}

inline double cui_overlap(const std::set<std::string>& query_cuis, const Path& path,
                          const KnowledgeGraph& graph) {
    if (query_cuis.empty()) throw ValidationError("cui_overlap needs a non-empty query CUI set");
    std::set<std::string> path_cuis;
    for (NodeIndex n : path.nodes) path_cuis.insert(graph.id_of(n));
    std::size_t hit = 0;
    for (const auto& c : query_cuis) hit += path_cuis.count(c);
    return static_cast<double>(hit) / static_cast<double>(query_cuis.size());
}

inline double semantic_overlap(const std::set<std::string>& query_types, const Path& path,
                               const KnowledgeGraph& graph, Diagnostics* diag = nullptr) {
    if (query_types.empty()) {
        warn(diag, "semantic_overlap with empty query semantic types; scoring 0");
        return 0.0;
    }
    std::set<std::string> path_types;
    for (NodeIndex n : path.nodes) {
        const auto& t = graph.node(n).semantic_types;
        path_types.insert(t.begin(), t.end());
    }
    std::size_t hit = 0;
    for (const auto& t : query_types) hit += path_types.count(t);
    return static_cast<double>(hit) / static_cast<double>(query_types.size());
}

inline double lh_score(std::size_t path_length) {
    return 1.0 / (1.0 + static_cast<double>(path_length));
}

struct ScoreComponents {
    double cui_overlap = 0.0;
    double semantic_overlap = 0.0;
    double lh_score = 0.0;
};

inline double total_score(const ScoreComponents& c, const EnhancerConfig& cfg) {
    return cfg.alpha * c.cui_overlap + cfg.beta * c.semantic_overlap + cfg.gamma * c.lh_score;
}

struct ScoredPath {
    Path path;
    double cui_overlap = 0.0;
    double semantic_overlap = 0.0;
    double lh_score = 0.0;
    double total_score = 0.0;
    std::size_t merge_count = 1;

    ScoreComponents components() const { return {cui_overlap, semantic_overlap, lh_score}; }
};

// An empty query CUI set scores every path's CUI overlap as 0 with a warning.
inline std::vector<ScoredPath> score_paths(const std::vector<FusedPath>& fused,
                                           const QueryContext& query, const KnowledgeGraph& graph,
                                           const EnhancerConfig& cfg,
                                           Diagnostics* diag = nullptr) {
    cfg.validate();
    if (query.cuis.empty() && !fused.empty())
        warn(diag, "query has no linked CUIs; cui_overlap is 0 for every path");
    std::vector<ScoredPath> out;
    out.reserve(fused.size());
    for (const auto& f : fused) {
        ScoredPath s;
        s.path = f.path;
        s.merge_count = f.merge_count;
        s.cui_overlap = query.cuis.empty() ? 0.0 : cui_overlap(query.cuis, f.path, graph);
        s.semantic_overlap = query.semantic_types.empty()
                                 ? 0.0
                                 : semantic_overlap(query.semantic_types, f.path, graph, diag);
        s.lh_score = lh_score(f.path.length());
        s.total_score = total_score(s.components(), cfg);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::size_t final_keep_count(std::size_t n, double keep_ratio) {
    EnhancerConfig::check_keep_ratio(keep_ratio);
    if (n == 0) return 0;
    auto kept = static_cast<std::size_t>(std::ceil(keep_ratio * static_cast<double>(n)));
    return std::clamp<std::size_t>(kept, 1, n);
}

// Sort by total score, then PathOrder; keep max(1, ceil(keep_ratio * n)).
inline std::vector<ScoredPath> select_final(std::vector<ScoredPath> scored, double keep_ratio,
                                            const KnowledgeGraph& graph) {
    auto keep = final_keep_count(scored.size(), keep_ratio);
    PathOrder order(graph);
    std::sort(scored.begin(), scored.end(), [&](const ScoredPath& a, const ScoredPath& b) {
        if (a.total_score != b.total_score) return a.total_score > b.total_score;
        return order(a.path, b.path);
    });
    scored.resize(keep);
    return scored;
}

inline std::string format_strength(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", s);
    return buf;
}

// "Smoking --[CAUSES (0.90)]--> Lung Cancer"
inline std::string render_path(const Path& path, const CausalGraphView& view) {
    const KnowledgeGraph& g = view.base();
    std::string out = g.node(path.nodes.front()).name;
    for (std::size_t i = 0; i < path.edges.size(); ++i) {
        EdgeIndex e = path.edges[i];
        out += " --[" + g.edge(e).predicate + " (" +
               format_strength(tier_strength(view, path.tier, e)) + ")]--> ";
        out += g.node(path.nodes[i + 1]).name;
    }
    return out;
}

inline constexpr std::string_view kNoEvidenceMarker = "[no graph evidence found]";

inline std::string render_path_block(const std::vector<Path>& paths, const CausalGraphView& view) {
    if (paths.empty()) return std::string(kNoEvidenceMarker);
    std::string out;
    for (const auto& p : paths) {
        if (!out.empty()) out += '\n';
        out += "- " + render_path(p, view);
    }
    return out;
}

inline constexpr std::string_view kDefaultEnhanceTemplate =
    "You are checking a chain of thought against evidence from a medical knowledge graph.\n"
    "\n"
    "Question: {question}\n"
    "Options:\n"
    "{options}\n"
    "\n"
    "Original chain of thought:\n"
    "{cot}\n"
    "\n"
    "Knowledge graph paths (strongest first):\n"
    "{paths}\n"
    "\n"
    "Cross-check each reasoning step against the paths. Drop steps that the paths "
    "contradict, keep the ones they support, and write a concise enhanced reasoning "
    "summary. Do not answer the question yet.\n";

inline Prompt build_enhancement_prompt(const std::vector<ScoredPath>& final_paths,
                                       const ChainOfThought& cot, std::string_view question,
                                       const OptionList& options, const CausalGraphView& view,
                                       std::string_view tmpl = kDefaultEnhanceTemplate) {
    if (cot.segments.empty()) throw ValidationError("enhancement prompt needs a chain of thought");
    std::vector<const ScoredPath*> ordered;
    for (const auto& s : final_paths) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(), [](const ScoredPath* a, const ScoredPath* b) {
        return a->total_score > b->total_score;
    });
    std::vector<Path> paths;
    for (const auto* s : ordered) paths.push_back(s->path);
    std::map<std::string, std::string> values{{"question", std::string(question)},
                                              {"options", render_options(options)},
                                              {"cot", render_cot(cot)},
                                              {"paths", render_path_block(paths, view)}};
    return Prompt{{ChatMessage{"user", text::render_template(tmpl, values)}}};
}

}  // namespace causalrag
