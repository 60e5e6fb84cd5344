#pragma once
// Dictionary entity linker over node names and aliases.

#include <algorithm>
#include <cctype>
#include <istream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "causalrag/error.hpp"
#include "causalrag/graph_store.hpp"
#include "causalrag/text.hpp"

namespace causalrag {

// Maps free text to a set of concept ids.
class EntityRecognizer {
public:
    virtual ~EntityRecognizer() = default;
    virtual std::set<std::string> link(std::string_view text) const = 0;
};

// Lowercases ASCII, turns ASCII punctuation into spaces, and collapses runs of
// whitespace. Non-ASCII bytes pass through unchanged.
inline std::string normalize_surface(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        bool separator = text::is_space(static_cast<char>(c)) || (c < 0x80 && std::ispunct(c));
        if (separator) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    }
    return out;
}

class LinkerIndex : public EntityRecognizer {
public:
    LinkerIndex() = default;

    void add(std::string_view surface, const std::string& node_id) {
        auto key = normalize_surface(surface);
        if (key.empty()) return;
        auto& ids = entries_[key];
        if (std::find(ids.begin(), ids.end(), node_id) == ids.end()) {
            ids.push_back(node_id);
            std::sort(ids.begin(), ids.end());
        }
        max_tokens_ = std::max(max_tokens_, token_count(key));
    }

    const std::vector<std::string>* lookup(std::string_view normalized) const {
        auto it = entries_.find(std::string(normalized));
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entries_.size(); }

    // Greedy longest match on token boundaries; a span consumed by a longer
    // surface form is not rescanned for shorter ones.
    std::set<std::string> link(std::string_view raw) const override {
        std::set<std::string> found;
        auto norm = normalize_surface(raw);
        if (norm.empty()) return found;
        std::vector<std::string_view> tokens;
        for (auto t : text::split(norm, ' ')) tokens.push_back(t);
        std::size_t i = 0;
        while (i < tokens.size()) {
            std::size_t matched = 0;
            std::size_t longest = std::min(max_tokens_, tokens.size() - i);
            for (std::size_t n = longest; n >= 1; --n) {
                auto first = tokens[i].data();
                auto last = tokens[i + n - 1].data() + tokens[i + n - 1].size();
                if (const auto* ids = lookup(std::string_view(first, last - first))) {
                    found.insert(ids->begin(), ids->end());
                    matched = n;
                    break;
                }
            }
            i += matched ? matched : 1;
        }
        return found;
    }

    // TSV rows "cui<TAB>alias"; unknown CUIs are skipped with a warning.
    void merge_aliases(std::istream& in, const KnowledgeGraph& graph, Diagnostics* diag = nullptr) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto row = text::chomp(line);
            if (text::trim(row).empty() || row.front() == '#') continue;
            auto cols = text::split(row, '\t');
            if (cols.size() != 2) {
                warn(diag, "alias line " + std::to_string(line_no) + ": expected 2 columns");
                continue;
            }
            auto cui = text::trim(cols[0]);
            if (!graph.find(cui)) {
                warn(diag, "alias line " + std::to_string(line_no) + ": unknown cui " +
                               std::string(cui));
                continue;
            }
            add(text::trim(cols[1]), std::string(cui));
        }
    }

private:
    static std::size_t token_count(std::string_view key) {
        return static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
    }

    std::unordered_map<std::string, std::vector<std::string>> entries_;
    std::size_t max_tokens_ = 0;
};

inline LinkerIndex build_index(const KnowledgeGraph& graph) {
    LinkerIndex index;
    for (const auto& node : graph.nodes()) {
        index.add(node.name, node.id);
        for (const auto& alias : node.aliases) index.add(alias, node.id);
    }
    return index;
}

}  // namespace causalrag
