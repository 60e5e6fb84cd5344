#pragma once
// Chain-of-thought prompt construction and parsing of arrow-separated output.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalrag/error.hpp"
#include "causalrag/prompt.hpp"
#include "causalrag/text.hpp"

namespace causalrag {

inline constexpr std::string_view kArrow = "\xE2\x86\x92";  // U+2192
inline constexpr std::string_view kAsciiArrow = "->";

struct ChainOfThought {
    std::string raw;
    std::vector<std::string> segments;
    std::optional<int> confidence;

    friend bool operator==(const ChainOfThought&, const ChainOfThought&) = default;
};

inline constexpr std::string_view kDefaultCotTemplate =
    "You are a careful medical reasoning assistant.\n"
    "Think through the multiple-choice question below as a chain of thought.\n"
    "Rules:\n"
    "- Write short steps; each step states exactly one clinical state or fact.\n"
    "- Separate consecutive steps with the arrow symbol \xE2\x86\x92.\n"
    "- After the last step write \xE2\x86\x92 followed by your confidence as an integer "
    "from 0 to 100.\n"
    "- Output the chain on a single line and nothing else.\n"
    "\n"
    "Question: {question}\n"
    "Options:\n"
    "{options}\n";

inline Prompt build_cot_prompt(std::string_view question, const OptionList& options,
                               std::string_view tmpl = kDefaultCotTemplate) {
    if (text::trim(question).empty()) throw ValidationError("question must be non-empty");
    validate_options(options);
    std::map<std::string, std::string> values{{"question", std::string(text::trim(question))},
                                              {"options", render_options(options)}};
    return Prompt{{ChatMessage{"user", text::render_template(tmpl, values)}}};
}

namespace detail {

// Splits on the first-occurring of U+2192 or "->" at each step.
inline std::vector<std::string_view> split_arrows(std::string_view raw) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        auto u = raw.find(kArrow, start);
        auto a = raw.find(kAsciiArrow, start);
        auto pos = std::min(u, a);
        if (pos == std::string_view::npos) {
            parts.push_back(raw.substr(start));
            return parts;
        }
        parts.push_back(raw.substr(start, pos - start));
        start = pos + (pos == u ? kArrow.size() : kAsciiArrow.size());
    }
}

// Integer with an optional trailing percent sign.
inline std::optional<long long> parse_confidence_token(std::string_view s) {
    s = text::trim(s);
    if (!s.empty() && s.back() == '%') s.remove_suffix(1);
    return text::parse_int(s);
}

}  // namespace detail

inline ChainOfThought parse_cot(std::string_view raw, Diagnostics* diag = nullptr) {
    if (text::trim(raw).empty()) throw ParseError("chain of thought is empty");
    ChainOfThought cot;
    cot.raw = std::string(raw);
    for (auto part : detail::split_arrows(raw)) {
        auto t = text::trim(part);
        if (!t.empty()) cot.segments.emplace_back(t);
    }
    if (!cot.segments.empty()) {
        if (auto value = detail::parse_confidence_token(cot.segments.back())) {
            cot.segments.pop_back();
            if (*value >= 0 && *value <= 100) {
                cot.confidence = static_cast<int>(*value);
            } else {
                warn(diag, "confidence " + std::to_string(*value) + " outside [0,100]; dropped");
            }
        } else {
            warn(diag, "chain of thought has no trailing confidence");
        }
    }
    if (cot.segments.empty()) throw ParseError("chain of thought has no non-empty segments");
    return cot;
}

enum class ArrowStyle { unicode, ascii };

inline std::string render_cot(const ChainOfThought& cot, ArrowStyle style = ArrowStyle::unicode) {
    std::string sep = " ";
    sep += style == ArrowStyle::unicode ? kArrow : kAsciiArrow;
    sep += ' ';
    std::string out = text::join(cot.segments, sep);
    if (cot.confidence) out += sep + std::to_string(*cot.confidence);
    return out;
}

inline std::vector<std::pair<std::string, std::string>> segment_pairs(const ChainOfThought& cot) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 1; i < cot.segments.size(); ++i)
        pairs.emplace_back(cot.segments[i - 1], cot.segments[i]);
    return pairs;
}

}  // namespace causalrag
