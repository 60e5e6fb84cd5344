#pragma once
// Thresholded causal subview of a knowledge graph, plus strength updates
// supplied by an external causal estimator.

#include <istream>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "causalrag/causality_table.hpp"
#include "causalrag/error.hpp"
#include "causalrag/graph_store.hpp"
#include "causalrag/text.hpp"

namespace causalrag {

// Immutable value object. Copies share the underlying graph.
class CausalGraphView {
public:
    CausalGraphView(std::shared_ptr<const KnowledgeGraph> base, CausalityTable table,
                    double theta, std::vector<bool> members,
                    std::map<EdgeIndex, double> overrides = {})
        : base_(std::move(base)),
          table_(std::move(table)),
          theta_(theta),
          members_(std::move(members)),
          overrides_(std::move(overrides)) {
        for (bool m : members_) member_count_ += m ? 1 : 0;
    }

    const KnowledgeGraph& base() const { return *base_; }
    const std::shared_ptr<const KnowledgeGraph>& base_ptr() const { return base_; }
    const CausalityTable& table() const { return table_; }
    double theta() const { return theta_; }

    bool contains(EdgeIndex e) const { return e < members_.size() && members_[e]; }
    std::size_t size() const { return member_count_; }
    bool empty() const { return member_count_ == 0; }
    const std::map<EdgeIndex, double>& overrides() const { return overrides_; }

    std::vector<EdgeIndex> member_edges() const {
        std::vector<EdgeIndex> out;
        out.reserve(member_count_);
        for (EdgeIndex e = 0; e < members_.size(); ++e)
            if (members_[e]) out.push_back(e);
        return out;
    }

    // Strength of a member edge: its update override, otherwise the label weight.
    double causal_strength(EdgeIndex e) const {
        if (auto it = overrides_.find(e); it != overrides_.end()) return it->second;
        return table_.weight(base_->edge(e).predicate);
    }

    // Strength used when an edge is traversed outside the causal view.
    double fallback_strength(EdgeIndex e) const {
        const KgEdge& edge = base_->edge(e);
        return edge.explicit_strength ? edge.strength : table_.weight(edge.predicate);
    }

    // Nodes touched by at least one member edge.
    std::vector<bool> member_nodes() const {
        std::vector<bool> seen(base_->node_count(), false);
        for (EdgeIndex e = 0; e < members_.size(); ++e) {
            if (!members_[e]) continue;
            seen[base_->edge(e).subject] = true;
            seen[base_->edge(e).object] = true;
        }
        return seen;
    }

    auto filter() const {
        return [this](EdgeIndex e) { return contains(e); };
    }

    friend bool operator==(const CausalGraphView& a, const CausalGraphView& b) {
        return a.base_ == b.base_ && a.theta_ == b.theta_ && a.members_ == b.members_ &&
               a.overrides_ == b.overrides_ && a.table_ == b.table_;
    }

private:
    std::shared_ptr<const KnowledgeGraph> base_;
    CausalityTable table_;
    double theta_;
    std::vector<bool> members_;
    std::map<EdgeIndex, double> overrides_;
    std::size_t member_count_ = 0;
};

inline void check_theta(double theta) {
    if (!(theta >= 0.0 && theta <= 1.0))
        throw ValidationError("theta outside [0,1]: " + std::to_string(theta));
}

// Keeps every edge whose predicate weight is at least theta.
inline CausalGraphView build_causal_view(std::shared_ptr<const KnowledgeGraph> graph,
                                         const CausalityTable& table, double theta,
                                         Diagnostics* diag = nullptr) {
    check_theta(theta);
    if (!graph) throw ValidationError("causal view needs a graph");
    std::vector<bool> members(graph->edge_count(), false);
    for (EdgeIndex e = 0; e < graph->edge_count(); ++e)
        members[e] = table.weight(graph->edge(e).predicate) >= theta;
    CausalGraphView view(std::move(graph), table, theta, std::move(members));
    if (view.empty())
        warn(diag, "causal view is empty at theta=" + std::to_string(theta));
    return view;
}

struct TripleRef {
    std::string subject;
    std::string predicate;
    std::string object;

    friend auto operator<=>(const TripleRef&, const TripleRef&) = default;
};

using StrengthUpdates = std::map<TripleRef, double>;

struct UpdateSummary {
    std::size_t added = 0;
    std::size_t revised = 0;
    std::size_t demoted = 0;
    std::size_t unchanged_absent = 0;
};

// Triples with s_new >= theta join the view (or have their strength revised);
// triples with s_new < theta leave it. The base graph is never touched.
inline CausalGraphView apply_strength_updates(const CausalGraphView& view,
                                              const StrengthUpdates& updates,
                                              UpdateSummary* summary = nullptr) {
    const KnowledgeGraph& g = view.base();
    std::vector<bool> members(g.edge_count());
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) members[e] = view.contains(e);
    auto overrides = view.overrides();
    UpdateSummary local;
    UpdateSummary& sum = summary ? *summary : local;
    for (const auto& [triple, s_new] : updates) {
        auto e = g.find_edge(triple.subject, triple.predicate, triple.object);
        if (!e)
            throw NotFoundError("strength update for unknown triple (" + triple.subject + ", " +
                                triple.predicate + ", " + triple.object + ")");
        if (!(s_new >= 0.0 && s_new <= 1.0))
            throw ValidationError("updated strength outside [0,1] for " + triple.subject + " " +
                                  triple.predicate + " " + triple.object);
        if (s_new >= view.theta()) {
            (members[*e] ? sum.revised : sum.added) += 1;
            members[*e] = true;
            overrides[*e] = s_new;
        } else {
            (members[*e] ? sum.demoted : sum.unchanged_absent) += 1;
            members[*e] = false;
            overrides.erase(*e);
        }
    }
    return CausalGraphView(view.base_ptr(), view.table(), view.theta(), std::move(members),
                           std::move(overrides));
}

// Update TSV: subject_cui, predicate, object_cui, s_new. Optional header.
inline StrengthUpdates parse_strength_updates(std::istream& in) {
    StrengthUpdates updates;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto row = text::chomp(line);
        if (text::trim(row).empty() || row.front() == '#') continue;
        auto cols = text::split(row, '\t');
        if (updates.empty() && text::to_lower(text::trim(cols.front())) == "subject_cui") continue;
        if (cols.size() != 4) throw DatasetError("expected 4 tab-separated columns", line_no);
        auto s_new = text::parse_double(cols[3]);
        if (!s_new) throw DatasetError("s_new is not a number", line_no);
        TripleRef ref{std::string(text::trim(cols[0])), std::string(text::trim(cols[1])),
                      std::string(text::trim(cols[2]))};
        if (ref.subject.empty() || ref.predicate.empty() || ref.object.empty())
            throw DatasetError("empty triple field", line_no);
        updates[std::move(ref)] = *s_new;
    }
    return updates;
}

}  // namespace causalrag
