#pragma once
// Chat-completion client interface, deterministic transcript replay, and
// answer-label extraction.

#include <array>
#include <cctype>
#include <chrono>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalrag/error.hpp"
#include "causalrag/prompt.hpp"
#include "causalrag/text.hpp"

namespace causalrag {

enum class Stage { cot, enhance, infer };

inline constexpr std::array<Stage, 3> kAllStages{Stage::cot, Stage::enhance, Stage::infer};

inline std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::cot: return "cot";
        case Stage::enhance: return "enhance";
        case Stage::infer: return "infer";
    }
    return "?";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
    for (Stage st : kAllStages)
        if (to_string(st) == s) return st;
    return std::nullopt;
}

inline constexpr std::string_view kMockModel = "mock";

struct ModelAssignment {
    std::string cot_model = std::string(kMockModel);
    std::string enhance_model = std::string(kMockModel);
    std::string infer_model = std::string(kMockModel);

    const std::string& for_stage(Stage s) const {
        switch (s) {
            case Stage::cot: return cot_model;
            case Stage::enhance: return enhance_model;
            case Stage::infer: break;
        }
        return infer_model;
    }

    void validate() const {
        if (cot_model.empty() || enhance_model.empty() || infer_model.empty())
            throw ValidationError("every pipeline stage needs a model id");
    }

    bool uses_mock() const {
        return cot_model == kMockModel || enhance_model == kMockModel || infer_model == kMockModel;
    }

    friend bool operator==(const ModelAssignment&, const ModelAssignment&) = default;
};

struct LlmRequest {
    Stage stage = Stage::infer;
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;

    void validate() const {
        if (messages.empty()) throw ValidationError("LLM request has no messages");
        if (temperature < 0.0) throw ValidationError("temperature must be >= 0");
        if (model.empty()) throw ValidationError("LLM request has no model id");
    }
};

struct LlmResponse {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double latency_ms = 0.0;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmResponse complete(const LlmRequest& request) = 0;
};

struct TranscriptEntry {
    std::string text;
    // Substrings that must all appear in the flattened prompt for `text` to be
    // returned; otherwise `otherwise` is returned.
    std::vector<std::string> requires_text;
    std::string otherwise = "I cannot determine the answer from the available information.";
};

// Canned responses keyed by (stage, per-stage ordinal).
class MockTranscript {
public:
    void add(Stage stage, std::size_t ordinal, TranscriptEntry entry) {
        entries_[{stage, ordinal}] = std::move(entry);
    }

    const TranscriptEntry* find(Stage stage, std::size_t ordinal) const {
        auto it = entries_.find({stage, ordinal});
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entries_.size(); }

    // One JSON object per line:
    // {"stage":"cot","ordinal":0,"text":"...","requires":["..."],"otherwise":"..."}
    static MockTranscript parse(std::istream& in) {
        MockTranscript t;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw DatasetError(std::string("transcript: ") + e.what(), line_no);
            }
            auto stage = parse_stage(j.value("stage", ""));
            if (!stage) throw DatasetError("transcript: unknown stage", line_no);
            if (!j.contains("ordinal") || !j["ordinal"].is_number_unsigned())
                throw DatasetError("transcript: ordinal must be a non-negative integer", line_no);
            if (!j.contains("text") || !j["text"].is_string())
                throw DatasetError("transcript: text must be a string", line_no);
            TranscriptEntry entry;
            entry.text = j["text"].get<std::string>();
            if (j.contains("requires"))
                entry.requires_text = j["requires"].get<std::vector<std::string>>();
            if (j.contains("otherwise")) entry.otherwise = j["otherwise"].get<std::string>();
            auto ordinal = j["ordinal"].get<std::size_t>();
            if (t.find(*stage, ordinal))
                throw DatasetError("transcript: duplicate (stage, ordinal)", line_no);
            t.add(*stage, ordinal, std::move(entry));
        }
        return t;
    }

private:
    std::map<std::pair<Stage, std::size_t>, TranscriptEntry> entries_;
};

// Replays a transcript. Each stage keeps its own ordinal counter.
class MockLlmClient : public LlmClient {
public:
    explicit MockLlmClient(MockTranscript transcript) : transcript_(std::move(transcript)) {}

    LlmResponse complete(const LlmRequest& request) override {
        request.validate();
        std::lock_guard lock(mutex_);
        std::size_t ordinal = next_[request.stage]++;
        const TranscriptEntry* entry = transcript_.find(request.stage, ordinal);
        if (!entry)
            throw TranscriptError("mock transcript has no " + std::string(to_string(request.stage)) +
                                  " response at ordinal " + std::to_string(ordinal));
        std::string prompt = Prompt{request.messages}.flatten();
        bool satisfied = true;
        for (const auto& needle : entry->requires_text)
            satisfied = satisfied && prompt.find(needle) != std::string::npos;
        LlmResponse response;
        response.text = satisfied ? entry->text : entry->otherwise;
        response.prompt_tokens = static_cast<long>(prompt.size());
        response.completion_tokens = static_cast<long>(response.text.size());
        return response;
    }

    std::size_t calls(Stage s) const {
        std::lock_guard lock(mutex_);
        auto it = next_.find(s);
        return it == next_.end() ? 0 : it->second;
    }

private:
    MockTranscript transcript_;
    mutable std::mutex mutex_;
    std::map<Stage, std::size_t> next_;
};

namespace detail {

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

inline bool contains_label(const std::vector<std::string>& labels, std::string_view s) {
    for (const auto& l : labels)
        if (l == s) return true;
    return false;
}

inline std::string_view strip_markup(std::string_view s) {
    s = text::trim(s);
    while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '>'))
        s = text::trim(s.substr(1));
    while (!s.empty() && s.back() == '*') s = text::trim(s.substr(0, s.size() - 1));
    return s;
}

}  // namespace detail

// Rule chain, first hit wins:
//   1. a line "Answer: X"
//   2. the earliest "(X)" or "option X" in the text
//   3. a line holding only X
// Returns nullopt (abstain) when nothing matches a valid label.
inline std::optional<std::string> extract_answer_label(std::string_view response,
                                                       const std::vector<std::string>& labels) {
    if (labels.empty()) throw ValidationError("extract_answer_label needs at least one label");
    auto lines = text::split(response, '\n');

    for (auto raw : lines) {
        auto line = detail::strip_markup(raw);
        if (line.size() < 6 || text::to_lower(line.substr(0, 6)) != "answer") continue;
        auto rest = detail::strip_markup(line.substr(6));
        if (rest.empty() || rest.front() != ':') continue;
        rest = detail::strip_markup(rest.substr(1));
        if (!rest.empty() && rest.front() == '(') rest = text::trim(rest.substr(1));
        std::size_t n = 0;
        while (n < rest.size() && detail::is_word_char(rest[n])) ++n;
        if (detail::contains_label(labels, rest.substr(0, n))) return std::string(rest.substr(0, n));
    }

    std::optional<std::pair<std::size_t, std::string>> best;
    auto consider = [&](std::size_t pos, const std::string& label) {
        if (!best || pos < best->first) best = {pos, label};
    };
    std::string lowered = text::to_lower(response);
    for (const auto& label : labels) {
        std::string paren = "(" + label + ")";
        if (auto pos = response.find(paren); pos != std::string_view::npos) consider(pos, label);
        for (std::size_t pos = lowered.find("option "); pos != std::string::npos;
             pos = lowered.find("option ", pos + 1)) {
            if (pos > 0 && detail::is_word_char(lowered[pos - 1])) continue;
            std::size_t at = pos + 7;
            if (response.substr(at, label.size()) != label) continue;
            std::size_t after = at + label.size();
            if (after < response.size() && detail::is_word_char(response[after])) continue;
            consider(pos, label);
            break;
        }
    }
    if (best) return best->second;

    for (auto raw : lines) {
        auto line = detail::strip_markup(raw);
        if (!line.empty() && line.front() == '(') line = text::trim(line.substr(1));
        while (!line.empty() && (line.back() == '.' || line.back() == ')'))
            line = text::trim(line.substr(0, line.size() - 1));
        if (detail::contains_label(labels, line)) return std::string(line);
    }
    return std::nullopt;
}

}  // namespace causalrag
