#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sea.hpp"

namespace sspread {

/// Raised on malformed or unreadable inputs (snapshots, traces, reports).
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u32(std::ostream& out, uint32_t v) {
    const std::array<unsigned char, 4> b = {static_cast<unsigned char>(v),
                                            static_cast<unsigned char>(v >> 8),
                                            static_cast<unsigned char>(v >> 16),
                                            static_cast<unsigned char>(v >> 24)};
    put_bytes(out, b.data(), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline bool get_bytes(std::istream& in, void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    return static_cast<size_t>(in.gcount()) == n;
}

inline uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!get_bytes(in, b, 4)) throw InputError(std::string("truncated input reading ") + what);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline uint64_t get_u64(std::istream& in, const char* what) {
    const uint64_t lo = get_u32(in, what);
    return lo | static_cast<uint64_t>(get_u32(in, what)) << 32;
}

inline double get_f64(std::istream& in, const char* what) {
    const uint64_t bits = get_u64(in, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

template <RecorderWord W>
void put_words(std::ostream& out, std::span<const W> words) {
    // explicit little-endian packing, bulk-buffered; word-at-a-time stream
    // writes are far too slow for multi-hundred-megabyte sketches
    std::vector<unsigned char> buf(words.size() * sizeof(W));
    for (size_t i = 0; i < words.size(); ++i) {
        const uint32_t v = static_cast<uint32_t>(words[i]);
        for (size_t b = 0; b < sizeof(W); ++b)
            buf[i * sizeof(W) + b] = static_cast<unsigned char>(v >> (8 * b));
    }
    put_bytes(out, buf.data(), buf.size());
}

template <RecorderWord W>
void get_words(std::istream& in, std::span<W> words, const char* what) {
    std::vector<unsigned char> buf(words.size() * sizeof(W));
    if (!get_bytes(in, buf.data(), buf.size()))
        throw InputError(std::string("truncated input reading ") + what);
    for (size_t i = 0; i < words.size(); ++i) {
        uint32_t v = 0;
        for (size_t b = 0; b < sizeof(W); ++b)
            v |= static_cast<uint32_t>(buf[i * sizeof(W) + b]) << (8 * b);
        words[i] = static_cast<W>(v);
    }
}

}  // namespace detail

inline constexpr char kSnapshotMagic[4] = {'S', 'S', 'E', 'A'};
inline constexpr uint32_t kSnapshotVersion = 1;

struct SnapshotHeader {
    uint32_t version = kSnapshotVersion;
    uint32_t word_bytes = 1;
    SeaConfig config;
};

/// Full sketch state: dimensions, seed, every recorder, the indicator bits
/// and the candidate list, in an explicit little-endian layout.
template <RecorderWord W>
void save_snapshot(const EstimatorArray<W>& sea, const CandidateList& csip,
                   const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open snapshot for writing: " + path);
    using namespace detail;
    const SeaConfig& c = sea.config();
    put_bytes(out, kSnapshotMagic, 4);
    put_u32(out, kSnapshotVersion);
    put_u32(out, sizeof(W));
    put_u32(out, c.rows);
    put_u32(out, c.cols);
    put_u32(out, c.rough_slots);
    put_u32(out, c.linear_slots);
    put_u32(out, c.recorder_bits);
    put_u32(out, c.window);
    put_u32(out, c.theta);
    put_f64(out, c.fill_ratio);
    put_u64(out, c.seed);
    for (uint32_t i = 0; i < c.rows; ++i) {
        put_words<uint16_t>(out, sea.indicator_row(i));
        put_words<W>(out, sea.rough_row(i));
        put_words<W>(out, sea.linear_row(i));
    }
    put_u64(out, csip.size());
    for (uint32_t host : csip.hosts()) put_u32(out, host);
    if (!out) throw InputError("write failure on snapshot: " + path);
}

inline SnapshotHeader read_snapshot_header(std::istream& in) {
    using namespace detail;
    char magic[4];
    if (!get_bytes(in, magic, 4) || std::memcmp(magic, kSnapshotMagic, 4) != 0)
        throw InputError("not a sketch snapshot (bad magic)");
    SnapshotHeader h;
    h.version = get_u32(in, "version");
    if (h.version != kSnapshotVersion)
        throw InputError("unsupported snapshot version " + std::to_string(h.version));
    h.word_bytes = get_u32(in, "word width");
    h.config.rows = get_u32(in, "rows");
    h.config.cols = get_u32(in, "cols");
    h.config.rough_slots = get_u32(in, "rough slots");
    h.config.linear_slots = get_u32(in, "linear slots");
    h.config.recorder_bits = get_u32(in, "recorder bits");
    h.config.window = get_u32(in, "window");
    h.config.theta = get_u32(in, "theta");
    h.config.fill_ratio = get_f64(in, "fill ratio");
    h.config.seed = get_u64(in, "seed");
    return h;
}

inline SnapshotHeader read_snapshot_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open snapshot: " + path);
    return read_snapshot_header(in);
}

/// Bit-exact restore. The storage word W must match the saved word width.
template <RecorderWord W>
std::pair<EstimatorArray<W>, CandidateList> load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open snapshot: " + path);
    const SnapshotHeader h = read_snapshot_header(in);
    if (h.word_bytes != sizeof(W))
        throw InputError("snapshot stores " + std::to_string(h.word_bytes) +
                         "-byte recorders, loader instantiated for " + std::to_string(sizeof(W)));
    using namespace detail;
    EstimatorArray<W> sea(h.config);
    for (uint32_t i = 0; i < h.config.rows; ++i) {
        get_words<uint16_t>(in, sea.indicator_row(i), "indicators");
        get_words<W>(in, sea.rough_row(i), "rough recorders");
        get_words<W>(in, sea.linear_row(i), "linear recorders");
    }
    const uint64_t n = get_u64(in, "candidate count");
    CandidateList csip;
    for (uint64_t i = 0; i < n; ++i) csip.insert(get_u32(in, "candidate"));
    char extra;
    if (in.read(&extra, 1), in.gcount() != 0)
        throw InputError("trailing bytes after snapshot payload");
    return {std::move(sea), std::move(csip)};
}

}  // namespace sspread
