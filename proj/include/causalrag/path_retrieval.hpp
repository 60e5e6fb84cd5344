#pragma once
// Causal-first multi-hop path retrieval between entity sets, with full-graph
// fallback, PathScore, pruning and per-segment top-k selection.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "causalrag/causal_layer.hpp"
#include "causalrag/cot_engine.hpp"
#include "causalrag/entity_linker.hpp"
#include "causalrag/error.hpp"
#include "causalrag/graph_store.hpp"

namespace causalrag {

enum class Tier { causal, fallback };

inline std::string_view to_string(Tier t) { return t == Tier::causal ? "causal" : "fallback"; }

struct Path {
    std::vector<NodeIndex> nodes;  // n_0..n_L
    std::vector<EdgeIndex> edges;  // e_1..e_L
    Tier tier = Tier::causal;
    std::size_t segment_index = 0;
    bool reversed = false;
    double score = 0.0;

    std::size_t length() const { return edges.size(); }
    NodeIndex start() const { return nodes.front(); }
    NodeIndex end() const { return nodes.back(); }

    bool has_repeated_node() const {
        std::vector<NodeIndex> sorted = nodes;
        std::sort(sorted.begin(), sorted.end());
        return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    }

    friend bool operator==(const Path&, const Path&) = default;
};

struct RetrievalConfig {
    int max_hops = 3;
    int k = 5;
    int distance_slack = 1;

    void validate() const {
        if (max_hops < 1) throw ValidationError("max_hops must be >= 1");
        if (k < 1) throw ValidationError("k must be >= 1");
        if (distance_slack < 0) throw ValidationError("distance_slack must be >= 0");
    }
};

// Strength of `e` as seen by a path of the given tier.
inline double tier_strength(const CausalGraphView& view, Tier tier, EdgeIndex e) {
    return tier == Tier::causal ? view.causal_strength(e) : view.fallback_strength(e);
}

// Mean edge strength.
inline double path_score(std::span<const double> strengths) {
    if (strengths.empty()) throw ValidationError("path score of an empty path");
    return std::accumulate(strengths.begin(), strengths.end(), 0.0) /
           static_cast<double>(strengths.size());
}

inline double path_score(const Path& path, const CausalGraphView& view) {
    std::vector<double> strengths;
    strengths.reserve(path.edges.size());
    for (EdgeIndex e : path.edges) strengths.push_back(tier_strength(view, path.tier, e));
    return path_score(strengths);
}

// "C1>C2>C3"
inline std::string canonical_string(const Path& path, const KnowledgeGraph& graph) {
    std::string out;
    for (std::size_t i = 0; i < path.nodes.size(); ++i) {
        if (i) out += '>';
        out += graph.id_of(path.nodes[i]);
    }
    return out;
}

// Ranking used everywhere paths are ordered: score desc, length asc, forward
// before reversed, canonical node-id string asc, edge indices asc.
class PathOrder {
public:
    explicit PathOrder(const KnowledgeGraph& graph) : graph_(&graph) {}

    bool operator()(const Path& a, const Path& b) const {
        if (a.score != b.score) return a.score > b.score;
        if (a.length() != b.length()) return a.length() < b.length();
        if (a.reversed != b.reversed) return !a.reversed;
        auto ca = canonical_string(a, *graph_);
        auto cb = canonical_string(b, *graph_);
        if (ca != cb) return ca < cb;
        return a.edges < b.edges;
    }

private:
    const KnowledgeGraph* graph_;
};

// Calls visit(nodes, edges) for every loop-free directed path from -> to with
// 1..max_hops edges, exploring out-edges in index order.
template <class EdgeFilter, class Visitor>
void enumerate_simple_paths(const KnowledgeGraph& graph, EdgeFilter&& allow, NodeIndex from,
                            NodeIndex to, int max_hops, Visitor&& visit) {
    if (from == to) return;
    std::vector<NodeIndex> nodes{from};
    std::vector<EdgeIndex> edges;
    std::vector<bool> on_path(graph.node_count(), false);
    on_path[from] = true;
    auto dfs = [&](auto&& self, NodeIndex u) -> void {
        for (EdgeIndex e : graph.out_edges(u)) {
            if (!allow(e)) continue;
            NodeIndex v = graph.edge(e).object;
            if (on_path[v]) continue;
            nodes.push_back(v);
            edges.push_back(e);
            if (v == to) {
                visit(std::as_const(nodes), std::as_const(edges));
            } else if (static_cast<int>(edges.size()) < max_hops) {
                on_path[v] = true;
                self(self, v);
                on_path[v] = false;
            }
            nodes.pop_back();
            edges.pop_back();
        }
    };
    dfs(dfs, from);
}

struct PathSearch {
    std::vector<Path> paths;
    std::optional<Tier> tier;  // tier that produced the paths, if any
    std::string reason;        // "ok" | "no-entities" | "no-paths"
};

namespace detail {

inline std::vector<NodeIndex> resolve_ids(const KnowledgeGraph& graph,
                                          const std::set<std::string>& ids) {
    std::vector<NodeIndex> out;
    for (const auto& id : ids) out.push_back(graph.index_of(id));
    return out;
}

inline std::vector<Path> search_tier(const CausalGraphView& view, Tier tier,
                                     const std::vector<NodeIndex>& from,
                                     const std::vector<NodeIndex>& to, const RetrievalConfig& cfg,
                                     std::size_t segment_index) {
    const KnowledgeGraph& g = view.base();
    auto allow = [&](EdgeIndex e) { return tier == Tier::fallback || view.contains(e); };
    std::vector<Path> out;
    std::map<std::vector<EdgeIndex>, std::size_t> seen;
    // Returns the number of paths visited, including ones already collected.
    auto collect = [&](NodeIndex a, NodeIndex b, bool reversed) {
        std::size_t visited = 0;
        enumerate_simple_paths(
            g, allow, a, b, cfg.max_hops,
            [&](const std::vector<NodeIndex>& ns, const std::vector<EdgeIndex>& es) {
                ++visited;
                auto [it, inserted] = seen.try_emplace(es, out.size());
                if (!inserted) {
                    // A forward hit outranks the same path found by a reversed query.
                    if (!reversed) out[it->second].reversed = false;
                    return;
                }
                Path p{ns, es, tier, segment_index, reversed, 0.0};
                p.score = path_score(p, view);
                out.push_back(std::move(p));
            });
        return visited;
    };
    for (NodeIndex a : from) {
        for (NodeIndex b : to) {
            if (a == b) continue;
            if (collect(a, b, false) == 0) collect(b, a, true);
        }
    }
    return out;
}

}  // namespace detail

// All loop-free paths between the two entity sets, causal view first. The
// full graph is searched only when no ordered pair yields a causal path.
inline PathSearch find_paths(const CausalGraphView& view, const std::set<std::string>& from_set,
                             const std::set<std::string>& to_set, const RetrievalConfig& cfg,
                             std::size_t segment_index = 0) {
    cfg.validate();
    PathSearch result;
    if (from_set.empty() || to_set.empty()) {
        result.reason = "no-entities";
        return result;
    }
    auto from = detail::resolve_ids(view.base(), from_set);
    auto to = detail::resolve_ids(view.base(), to_set);
    for (Tier tier : {Tier::causal, Tier::fallback}) {
        result.paths = detail::search_tier(view, tier, from, to, cfg, segment_index);
        if (!result.paths.empty()) {
            result.tier = tier;
            result.reason = "ok";
            return result;
        }
    }
    result.reason = "no-paths";
    return result;
}

// Single-tier search without the causal-first fallback rule.
inline PathSearch find_paths_in_tier(const CausalGraphView& view, Tier tier,
                                     const std::set<std::string>& from_set,
                                     const std::set<std::string>& to_set,
                                     const RetrievalConfig& cfg, std::size_t segment_index = 0) {
    cfg.validate();
    PathSearch result;
    if (from_set.empty() || to_set.empty()) {
        result.reason = "no-entities";
        return result;
    }
    result.paths = detail::search_tier(view, tier, detail::resolve_ids(view.base(), from_set),
                                       detail::resolve_ids(view.base(), to_set), cfg,
                                       segment_index);
    if (result.paths.empty()) {
        result.reason = "no-paths";
    } else {
        result.tier = tier;
        result.reason = "ok";
    }
    return result;
}

struct PruneStats {
    std::size_t loops = 0;
    std::size_t too_long = 0;
};

// Drops looping paths and paths longer than the tier's shortest distance
// between their endpoints plus slack, then keeps the k best.
inline std::vector<Path> prune_and_select(std::vector<Path> candidates, const RetrievalConfig& cfg,
                                          const CausalGraphView& view,
                                          PruneStats* stats = nullptr) {
    cfg.validate();
    const KnowledgeGraph& g = view.base();
    PruneStats local;
    PruneStats& st = stats ? *stats : local;
    std::map<std::tuple<NodeIndex, NodeIndex, Tier>, std::optional<int>> shortest;
    std::vector<Path> kept;
    for (auto& p : candidates) {
        if (p.edges.empty()) throw ValidationError("candidate path has no edges");
        if (p.has_repeated_node()) {
            ++st.loops;
            continue;
        }
        auto key = std::make_tuple(p.start(), p.end(), p.tier);
        auto it = shortest.find(key);
        if (it == shortest.end()) {
            auto allow = [&](EdgeIndex e) { return p.tier == Tier::fallback || view.contains(e); };
            int bound = std::max<int>(static_cast<int>(p.length()), cfg.max_hops);
            it = shortest.emplace(key, shortest_path_length(g, allow, p.start(), p.end(), bound))
                     .first;
        }
        if (it->second && static_cast<int>(p.length()) > *it->second + cfg.distance_slack) {
            ++st.too_long;
            continue;
        }
        kept.push_back(std::move(p));
    }
    std::sort(kept.begin(), kept.end(), PathOrder(g));
    if (kept.size() > static_cast<std::size_t>(cfg.k)) kept.resize(static_cast<std::size_t>(cfg.k));
    return kept;
}

struct SegmentRetrieval {
    std::string from_segment;
    std::string to_segment;
    std::set<std::string> from_entities;
    std::set<std::string> to_entities;
    std::optional<Tier> tier;
    std::size_t candidate_count = 0;
    PruneStats pruned;
    std::vector<Path> selected;
    std::string reason;  // "ok" | "no-entities" | "no-paths"
};

struct CotRetrieval {
    std::vector<std::set<std::string>> segment_entities;
    std::map<std::size_t, SegmentRetrieval> entries;  // keyed by pair index i for (s_i, s_i+1)

    std::vector<Path> all_selected() const {
        std::vector<Path> out;
        for (const auto& [_, entry] : entries)
            out.insert(out.end(), entry.selected.begin(), entry.selected.end());
        return out;
    }
};

inline CotRetrieval retrieve_for_cot(const ChainOfThought& cot, const EntityRecognizer& linker,
                                     const CausalGraphView& view, const RetrievalConfig& cfg) {
    CotRetrieval result;
    for (const auto& segment : cot.segments) result.segment_entities.push_back(linker.link(segment));
    auto pairs = segment_pairs(cot);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        SegmentRetrieval entry;
        entry.from_segment = pairs[i].first;
        entry.to_segment = pairs[i].second;
        entry.from_entities = result.segment_entities[i];
        entry.to_entities = result.segment_entities[i + 1];
        auto search = find_paths(view, entry.from_entities, entry.to_entities, cfg, i);
        entry.tier = search.tier;
        entry.reason = search.reason;
        entry.candidate_count = search.paths.size();
        entry.selected = prune_and_select(std::move(search.paths), cfg, view, &entry.pruned);
        result.entries.emplace(i, std::move(entry));
    }
    return result;
}

}  // namespace causalrag
