#pragma once
// Versioned binary graph artifact. Layout (little-endian):
//   magic "CRAGKG\0\1" | u32 version | u64 nodes | node* | u64 edges | edge*
//   node = str id, str name, u32 n, str* semtypes, u32 n, str* aliases
//   edge = u32 subject, str predicate, u32 object, f64 strength, u8 explicit
//   str  = u32 byte length, bytes

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>
#include <string>

#include "causalrag/error.hpp"
#include "causalrag/graph_store.hpp"

namespace causalrag {

inline constexpr std::array<char, 8> kGraphMagic{'C', 'R', 'A', 'G', 'K', 'G', '\0', '\1'};
inline constexpr std::uint32_t kGraphFormatVersion = 1;

namespace detail {

class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) { little(v, 4); }
    void u64(std::uint64_t v) { little(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    void little(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::ostream& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::istream& in) : in_(in) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(little(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(little(4)); }
    std::uint64_t u64() { return little(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        auto n = u32();
        std::string s(n, '\0');
        if (n && !in_.read(s.data(), n)) throw ArtifactError("graph artifact is truncated");
        return s;
    }

private:
    std::uint64_t little(int bytes) {
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            int c = in_.get();
            if (c == std::char_traits<char>::eof()) throw ArtifactError("graph artifact is truncated");
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
        }
        return v;
    }
    std::istream& in_;
};

}  // namespace detail

inline void write_graph(std::ostream& out, const KnowledgeGraph& g) {
    out.write(kGraphMagic.data(), kGraphMagic.size());
    detail::ByteWriter w(out);
    w.u32(kGraphFormatVersion);
    w.u64(g.node_count());
    for (const auto& n : g.nodes()) {
        w.str(n.id);
        w.str(n.name);
        w.u32(static_cast<std::uint32_t>(n.semantic_types.size()));
        for (const auto& t : n.semantic_types) w.str(t);
        w.u32(static_cast<std::uint32_t>(n.aliases.size()));
        for (const auto& a : n.aliases) w.str(a);
    }
    w.u64(g.edge_count());
    for (const auto& e : g.edges()) {
        w.u32(e.subject);
        w.str(e.predicate);
        w.u32(e.object);
        w.f64(e.strength);
        w.u8(e.explicit_strength ? 1 : 0);
    }
    if (!out) throw ArtifactError("failed writing graph artifact");
}

inline KnowledgeGraph read_graph(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kGraphMagic)
        throw ArtifactError("not a graph artifact (bad magic header)");
    detail::ByteReader r(in);
    auto version = r.u32();
    if (version != kGraphFormatVersion)
        throw ArtifactError("graph artifact version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kGraphFormatVersion) +
                            ")");
    GraphBuilder b;
    auto nodes = r.u64();
    std::vector<std::string> ids;
    ids.reserve(nodes);
    for (std::uint64_t i = 0; i < nodes; ++i) {
        auto id = r.str();
        auto name = r.str();
        std::set<std::string> types, aliases;
        for (auto n = r.u32(); n > 0; --n) types.insert(r.str());
        for (auto n = r.u32(); n > 0; --n) aliases.insert(r.str());
        if (b.add_node(id, name, types, aliases) != i)
            throw ArtifactError("graph artifact repeats node id " + id);
        ids.push_back(std::move(id));
    }
    auto edges = r.u64();
    for (std::uint64_t i = 0; i < edges; ++i) {
        auto s = r.u32();
        auto p = r.str();
        auto o = r.u32();
        auto strength = r.f64();
        bool explicit_strength = r.u8() != 0;
        if (s >= ids.size() || o >= ids.size())
            throw ArtifactError("graph artifact edge references a missing node");
        if (!b.add_edge(ids[s], p, ids[o], strength, explicit_strength))
            throw ArtifactError("graph artifact repeats a triple");
    }
    return std::move(b).build();
}

}  // namespace causalrag
