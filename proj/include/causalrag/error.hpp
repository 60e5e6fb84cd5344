#pragma once
// Exception types shared by every causalrag module.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace causalrag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A value violated a documented range or shape rule.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A node id, triple, or other keyed lookup missed.
class NotFoundError : public Error {
public:
    using Error::Error;
};

// Triple ingestion produced no usable edges.
class IngestError : public Error {
public:
    IngestError(const std::string& what, std::size_t malformed)
        : Error(what), malformed_rows(malformed) {}
    std::size_t malformed_rows = 0;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// Line-oriented input failed to parse; line is 1-based.
class DatasetError : public Error {
public:
    DatasetError(const std::string& what, std::size_t line_no)
        : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
    std::size_t line = 0;
};

class TransportError : public Error {
public:
    using Error::Error;
};

// Mock transcript had no entry for the requested (stage, ordinal).
class TranscriptError : public Error {
public:
    using Error::Error;
};

class ArtifactError : public Error {
public:
    using Error::Error;
};

// Collects non-fatal warnings. Operations accept an optional sink.
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
    bool empty() const { return warnings.empty(); }
};

inline void warn(Diagnostics* sink, std::string message) {
    if (sink) sink->warn(std::move(message));
}

}  // namespace causalrag
