#pragma once
// Chat prompt value types and multiple-choice option lists.

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "causalrag/error.hpp"

namespace causalrag {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct Prompt {
    std::vector<ChatMessage> messages;

    friend bool operator==(const Prompt&, const Prompt&) = default;

    // Concatenated message contents, used for transcript matching and traces.
    std::string flatten() const {
        std::string out;
        for (const auto& m : messages) {
            if (!out.empty()) out += "\n\n";
            out += m.content;
        }
        return out;
    }
};

struct AnswerOption {
    std::string label;
    std::string text;

    friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

using OptionList = std::vector<AnswerOption>;

inline void validate_options(const OptionList& options) {
    if (options.size() < 2) throw ValidationError("at least two answer options are required");
    std::set<std::string> seen;
    for (const auto& o : options) {
        if (o.label.empty()) throw ValidationError("answer option label is empty");
        if (!seen.insert(o.label).second)
            throw ValidationError("duplicate answer option label: " + o.label);
    }
}

// "A. text" per line, in the given order.
inline std::string render_options(const OptionList& options) {
    std::string out;
    for (const auto& o : options) {
        if (!out.empty()) out += '\n';
        out += o.label + ". " + o.text;
    }
    return out;
}

inline std::vector<std::string> option_labels(const OptionList& options) {
    std::vector<std::string> labels;
    for (const auto& o : options) labels.push_back(o.label);
    return labels;
}

}  // namespace causalrag
