#pragma once
// In-memory knowledge graph: concept nodes, predicated edges, and
// forward/reverse adjacency indexes. Built once, then read-only.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "causalrag/causality_table.hpp"
#include "causalrag/error.hpp"
#include "causalrag/text.hpp"

namespace causalrag {

using NodeIndex = std::uint32_t;
using EdgeIndex = std::uint32_t;

struct ConceptNode {
    std::string id;    // CUI
    std::string name;  // preferred surface form
    std::set<std::string> semantic_types;
    std::set<std::string> aliases;

    friend bool operator==(const ConceptNode&, const ConceptNode&) = default;
};

struct KgEdge {
    NodeIndex subject = 0;
    std::string predicate;
    NodeIndex object = 0;
    double strength = 0.0;
    // True when the strength came from the triple file instead of the causality table.
    bool explicit_strength = false;

    friend bool operator==(const KgEdge&, const KgEdge&) = default;
};

enum class Direction { out, in, both };

class GraphBuilder;

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    bool empty() const { return nodes_.empty(); }

    const ConceptNode& node(NodeIndex n) const { return nodes_.at(n); }
    const KgEdge& edge(EdgeIndex e) const { return edges_.at(e); }
    const std::vector<ConceptNode>& nodes() const { return nodes_; }
    const std::vector<KgEdge>& edges() const { return edges_; }

    std::optional<NodeIndex> find(std::string_view id) const {
        auto it = by_id_.find(std::string(id));
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    NodeIndex index_of(std::string_view id) const {
        if (auto n = find(id)) return *n;
        throw NotFoundError("unknown node id: " + std::string(id));
    }

    const std::string& id_of(NodeIndex n) const { return nodes_.at(n).id; }

    std::span<const EdgeIndex> out_edges(NodeIndex n) const { return forward_.at(n); }
    std::span<const EdgeIndex> in_edges(NodeIndex n) const { return reverse_.at(n); }

    // Edge indices touching `n` in ascending index order.
    std::vector<EdgeIndex> incident_edges(NodeIndex n, Direction dir) const {
        switch (dir) {
            case Direction::out: return {forward_.at(n).begin(), forward_.at(n).end()};
            case Direction::in: return {reverse_.at(n).begin(), reverse_.at(n).end()};
            case Direction::both: break;
        }
        std::vector<EdgeIndex> merged;
        std::set_union(forward_.at(n).begin(), forward_.at(n).end(), reverse_.at(n).begin(),
                       reverse_.at(n).end(), std::back_inserter(merged));
        return merged;
    }

    std::optional<EdgeIndex> find_edge(std::string_view subject, std::string_view predicate,
                                       std::string_view object) const {
        auto it = by_triple_.find(triple_key(subject, predicate, object));
        if (it == by_triple_.end()) return std::nullopt;
        return it->second;
    }

    friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
        return a.nodes_ == b.nodes_ && a.edges_ == b.edges_ && a.forward_ == b.forward_ &&
               a.reverse_ == b.reverse_;
    }

    static std::string triple_key(std::string_view s, std::string_view p, std::string_view o) {
        std::string key;
        key.reserve(s.size() + p.size() + o.size() + 2);
        key.append(s).append(1, '\t').append(p).append(1, '\t').append(o);
        return key;
    }

private:
    friend class GraphBuilder;

    std::vector<ConceptNode> nodes_;
    std::vector<KgEdge> edges_;
    std::vector<std::vector<EdgeIndex>> forward_;
    std::vector<std::vector<EdgeIndex>> reverse_;
    std::unordered_map<std::string, NodeIndex> by_id_;
    std::unordered_map<std::string, EdgeIndex> by_triple_;
};

// Edges of `node` in the requested direction, ordered by edge index.
inline std::vector<KgEdge> neighbors(const KnowledgeGraph& graph, std::string_view node,
                                     Direction dir) {
    std::vector<KgEdge> out;
    for (EdgeIndex e : graph.incident_edges(graph.index_of(node), dir)) out.push_back(graph.edge(e));
    return out;
}

// Incrementally assembles a graph. Nodes merge by id; a repeated
// (subject, predicate, object) keeps the larger strength.
class GraphBuilder {
public:
    NodeIndex add_node(std::string_view id, std::string_view name,
                       const std::set<std::string>& semantic_types = {},
                       const std::set<std::string>& aliases = {}) {
        if (id.empty()) throw ValidationError("node id must be non-empty");
        auto [it, inserted] =
            g_.by_id_.try_emplace(std::string(id), static_cast<NodeIndex>(g_.nodes_.size()));
        if (inserted) {
            ConceptNode node;
            node.id = std::string(id);
            node.name = name.empty() ? std::string(id) : std::string(name);
            g_.nodes_.push_back(std::move(node));
            g_.forward_.emplace_back();
            g_.reverse_.emplace_back();
        }
        ConceptNode& node = g_.nodes_[it->second];
        if (!name.empty() && name != node.name) {
            if (node.name == node.id) {
                node.name = std::string(name);
            } else {
                node.aliases.insert(std::string(name));
            }
        }
        node.semantic_types.insert(semantic_types.begin(), semantic_types.end());
        for (const auto& a : aliases)
            if (!a.empty() && a != node.name) node.aliases.insert(a);
        return it->second;
    }

    // Returns false when the triple already existed (strength merged by max).
    bool add_edge(std::string_view subject, std::string_view predicate, std::string_view object,
                  double strength, bool explicit_strength, Diagnostics* diag = nullptr) {
        if (predicate.empty()) throw ValidationError("edge predicate must be non-empty");
        if (!(strength >= 0.0 && strength <= 1.0))
            throw ValidationError("edge strength outside [0,1]");
        NodeIndex s = g_.index_of(subject);
        NodeIndex o = g_.index_of(object);
        auto key = KnowledgeGraph::triple_key(subject, predicate, object);
        auto found = g_.by_triple_.find(key);
        if (found != g_.by_triple_.end()) {
            KgEdge& existing = g_.edges_[found->second];
            if (existing.strength != strength) {
                warn(diag, "duplicate triple " + key + " with conflicting strength; keeping max");
                if (strength > existing.strength) {
                    existing.strength = strength;
                    existing.explicit_strength = explicit_strength;
                }
            } else {
                warn(diag, "duplicate triple " + key + " ignored");
            }
            return false;
        }
        auto e = static_cast<EdgeIndex>(g_.edges_.size());
        g_.edges_.push_back(KgEdge{s, std::string(predicate), o, strength, explicit_strength});
        g_.forward_[s].push_back(e);
        g_.reverse_[o].push_back(e);
        g_.by_triple_.emplace(std::move(key), e);
        return true;
    }

    std::size_t node_count() const { return g_.nodes_.size(); }
    std::size_t edge_count() const { return g_.edges_.size(); }

    KnowledgeGraph build() && { return std::move(g_); }

private:
    KnowledgeGraph g_;
};

struct IngestReport {
    std::size_t data_rows = 0;
    std::size_t malformed_rows = 0;
    std::size_t duplicate_rows = 0;
    Diagnostics diagnostics;
};

namespace detail {

inline std::set<std::string> parse_semtypes(std::string_view field) {
    std::set<std::string> out;
    for (auto part : text::split(field, ',')) {
        auto t = text::trim(part);
        if (!t.empty()) out.emplace(t);
    }
    return out;
}

}  // namespace detail

// Reads the triple TSV (header required, '#' comments skipped). Strength
// defaults to the causality weight of the predicate unless column 8 is set.
inline KnowledgeGraph ingest_triples(std::istream& in, const CausalityTable& table,
                                     IngestReport* report = nullptr) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    GraphBuilder builder;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto row = text::chomp(line);
        if (text::trim(row).empty() || row.front() == '#') continue;
        auto cols = text::split(row, '\t');
        if (!header_seen) {
            header_seen = true;
            if (text::to_lower(text::trim(cols.front())) != "subject_cui")
                throw IngestError("triple file is missing its header row", 0);
            continue;
        }
        ++rep.data_rows;
        auto malformed = [&](const std::string& why) {
            ++rep.malformed_rows;
            rep.diagnostics.warn("line " + std::to_string(line_no) + ": " + why);
        };
        if (cols.size() < 7 || cols.size() > 8) {
            malformed("expected 7 or 8 columns, got " + std::to_string(cols.size()));
            continue;
        }
        auto subject = text::trim(cols[0]);
        auto predicate = text::trim(cols[3]);
        auto object = text::trim(cols[4]);
        if (subject.empty() || predicate.empty() || object.empty()) {
            malformed("empty subject, predicate or object");
            continue;
        }
        double strength = table.weight(predicate);
        bool explicit_strength = false;
        if (cols.size() == 8 && !text::trim(cols[7]).empty()) {
            auto s = text::parse_double(cols[7]);
            if (!s || *s < 0.0 || *s > 1.0) {
                malformed("strength is not a number in [0,1]");
                continue;
            }
            strength = *s;
            explicit_strength = true;
        }
        builder.add_node(subject, text::trim(cols[1]), detail::parse_semtypes(cols[2]));
        builder.add_node(object, text::trim(cols[5]), detail::parse_semtypes(cols[6]));
        if (!builder.add_edge(subject, predicate, object, strength, explicit_strength,
                              &rep.diagnostics))
            ++rep.duplicate_rows;
    }
    if (rep.data_rows == 0) throw IngestError("triple input has no data rows", 0);
    if (rep.malformed_rows == rep.data_rows)
        throw IngestError("every triple row is malformed", rep.malformed_rows);
    return std::move(builder).build();
}

// Breadth-first hop count from `from` to `to` using only edges accepted by
// `allow`. Returns nullopt when `to` is not reachable within max_hops.
template <class EdgeFilter>
std::optional<int> shortest_path_length(const KnowledgeGraph& graph, EdgeFilter&& allow,
                                        NodeIndex from, NodeIndex to, int max_hops) {
    if (max_hops < 1) throw ValidationError("max_hops must be >= 1");
    if (from == to) return 0;
    std::vector<int> dist(graph.node_count(), -1);
    std::queue<NodeIndex> frontier;
    dist[from] = 0;
    frontier.push(from);
    while (!frontier.empty()) {
        NodeIndex u = frontier.front();
        frontier.pop();
        if (dist[u] >= max_hops) continue;
        for (EdgeIndex e : graph.out_edges(u)) {
            if (!allow(e)) continue;
            NodeIndex v = graph.edge(e).object;
            if (dist[v] != -1) continue;
            dist[v] = dist[u] + 1;
            if (v == to) return dist[v];
            frontier.push(v);
        }
    }
    return std::nullopt;
}

template <class EdgeFilter>
std::optional<int> shortest_path_length(const KnowledgeGraph& graph, EdgeFilter&& allow,
                                        std::string_view from, std::string_view to,
                                        int max_hops) {
    return shortest_path_length(graph, std::forward<EdgeFilter>(allow), graph.index_of(from),
                                graph.index_of(to), max_hops);
}

inline constexpr auto all_edges = [](EdgeIndex) { return true; };

}  // namespace causalrag
