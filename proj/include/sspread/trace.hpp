#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snapshot.hpp"  // byte helpers + InputError

namespace sspread {

/// One observed packet reduced to (timestamp, source, destination).
/// Addresses are IPv4 in host byte order; timestamps are epoch seconds.
struct TraceRecord {
    uint32_t ts = 0;
    uint32_t src = 0;
    uint32_t dst = 0;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

inline std::optional<uint32_t> parse_ipv4(std::string_view s) {
    uint32_t ip = 0;
    int octets = 0;
    size_t pos = 0;
    while (octets < 4) {
        const size_t dot = (octets < 3) ? s.find('.', pos) : s.size();
        if (dot == std::string_view::npos) return std::nullopt;
        unsigned value = 0;
        const auto [end, ec] = std::from_chars(s.data() + pos, s.data() + dot, value);
        if (ec != std::errc{} || end != s.data() + dot || value > 255) return std::nullopt;
        ip = ip << 8 | value;
        pos = dot + 1;
        ++octets;
    }
    return ip;
}

inline std::string format_ipv4(uint32_t ip) {
    return std::to_string(ip >> 24) + '.' + std::to_string((ip >> 16) & 0xFF) + '.' +
           std::to_string((ip >> 8) & 0xFF) + '.' + std::to_string(ip & 0xFF);
}

/// IPv4 prefix, e.g. 10.0.0.0/8. Declares which side of the tap is the
/// monitored network.
struct CidrPrefix {
    uint32_t addr = 0;
    uint32_t bits = 0;

    static CidrPrefix parse(std::string_view s) {
        const size_t slash = s.find('/');
        if (slash == std::string_view::npos) throw InputError("CIDR prefix missing '/': " + std::string(s));
        const auto ip = parse_ipv4(s.substr(0, slash));
        unsigned bits = 0;
        const auto tail = s.substr(slash + 1);
        const auto [end, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), bits);
        if (!ip || ec != std::errc{} || end != tail.data() + tail.size() || bits > 32)
            throw InputError("malformed CIDR prefix: " + std::string(s));
        return {*ip & mask_of(bits), bits};
    }

    static uint32_t mask_of(uint32_t bits) noexcept {
        return bits == 0 ? 0 : 0xFFFFFFFFu << (32 - bits);
    }

    bool contains(uint32_t ip) const noexcept { return (ip & mask_of(bits)) == addr; }

    std::string str() const { return format_ipv4(addr) + '/' + std::to_string(bits); }
};

/// Window shape: slice duration, window length in slices, recorder width.
struct WindowConfig {
    uint32_t slice_seconds = 300;
    uint32_t window = 1;
    uint32_t recorder_bits = 1;

    void validate() const {
        if (slice_seconds < 1) throw std::invalid_argument("slice duration must be >= 1 second");
        RecorderModel::with_bits(recorder_bits).validate_window(window);
    }
};

enum class TraceFormat { csv, binary };

inline constexpr char kTraceMagic[4] = {'S', 'R', 'L', 'T'};
inline constexpr unsigned char kTraceVersion = 1;

/// Infers the on-disk format from the file's leading bytes.
inline TraceFormat sniff_trace_format(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open trace: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    return (in.gcount() == 4 && std::memcmp(magic, kTraceMagic, 4) == 0) ? TraceFormat::binary
                                                                         : TraceFormat::csv;
}

/// Streams records to `fn` in file order, enforcing non-decreasing
/// timestamps. CSV lines are `epoch_seconds,src,dst` with dotted-quad
/// addresses; the binary layout is the magic, a version byte, then packed
/// little-endian (u32 ts, u32 src, u32 dst) records. Malformed content
/// raises InputError with the offending line or record position.
inline void for_each_record(const std::string& path, TraceFormat format,
                            const std::function<void(const TraceRecord&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open trace: " + path);
    uint64_t last_ts = 0;
    bool first = true;
    auto check_order = [&](uint32_t ts, const std::string& where) {
        if (!first && ts < last_ts)
            throw InputError("timestamp regression at " + where + " of " + path + " (" +
                             std::to_string(ts) + " after " + std::to_string(last_ts) + ")");
        last_ts = ts;
        first = false;
    };

    if (format == TraceFormat::csv) {
        std::string line;
        uint64_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string where = "line " + std::to_string(lineno);
            const size_t c1 = line.find(',');
            const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
            if (c2 == std::string::npos) throw InputError("malformed record at " + where + " of " + path);
            uint32_t ts = 0;
            const auto [end, ec] = std::from_chars(line.data(), line.data() + c1, ts);
            const auto src = parse_ipv4(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
            const auto dst = parse_ipv4(std::string_view(line).substr(c2 + 1));
            if (ec != std::errc{} || end != line.data() + c1 || !src || !dst)
                throw InputError("malformed record at " + where + " of " + path);
            check_order(ts, where);
            fn(TraceRecord{ts, *src, *dst});
        }
        return;
    }

    char magic[4];
    unsigned char version = 0;
    if (!detail::get_bytes(in, magic, 4) || std::memcmp(magic, kTraceMagic, 4) != 0)
        throw InputError("not a binary trace (bad magic): " + path);
    if (!detail::get_bytes(in, &version, 1) || version != kTraceVersion)
        throw InputError("unsupported trace version in " + path);
    std::array<unsigned char, 12> rec;
    uint64_t index = 0;
    while (true) {
        in.read(reinterpret_cast<char*>(rec.data()), 12);
        const auto got = in.gcount();
        if (got == 0) break;
        if (got != 12)
            throw InputError("truncated record " + std::to_string(index) + " in " + path);
        auto u32at = [&](size_t off) {
            return static_cast<uint32_t>(rec[off]) | static_cast<uint32_t>(rec[off + 1]) << 8 |
                   static_cast<uint32_t>(rec[off + 2]) << 16 |
                   static_cast<uint32_t>(rec[off + 3]) << 24;
        };
        const TraceRecord r{u32at(0), u32at(4), u32at(8)};
        check_order(r.ts, "record " + std::to_string(index));
        fn(r);
        ++index;
    }
}

inline void for_each_record(const std::string& path,
                            const std::function<void(const TraceRecord&)>& fn) {
    for_each_record(path, sniff_trace_format(path), fn);
}

inline std::vector<TraceRecord> read_trace(const std::string& path) {
    std::vector<TraceRecord> records;
    for_each_record(path, [&](const TraceRecord& r) { records.push_back(r); });
    return records;
}

inline void write_trace(const std::string& path, std::span<const TraceRecord> records,
                        TraceFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open trace for writing: " + path);
    if (format == TraceFormat::csv) {
        std::string line;
        for (const auto& r : records) {
            line.clear();
            line += std::to_string(r.ts);
            line += ',';
            line += format_ipv4(r.src);
            line += ',';
            line += format_ipv4(r.dst);
            line += '\n';
            out.write(line.data(), static_cast<std::streamsize>(line.size()));
        }
    } else {
        detail::put_bytes(out, kTraceMagic, 4);
        detail::put_bytes(out, &kTraceVersion, 1);
        for (const auto& r : records) {
            detail::put_u32(out, r.ts);
            detail::put_u32(out, r.src);
            detail::put_u32(out, r.dst);
        }
    }
    if (!out) throw InputError("write failure on trace: " + path);
}

/// Outcome counters for direction normalization against the monitored
/// network prefix.
struct OrientStats {
    uint64_t kept = 0;
    uint64_t flipped = 0;
    uint64_t dropped_both = 0;
    uint64_t dropped_neither = 0;

    uint64_t dropped() const noexcept { return dropped_both + dropped_neither; }
};

/// Ensures src lies in the monitored network. Records from the far side are
/// flipped; records matching both sides or neither are dropped and counted.
inline std::optional<TraceRecord> orient_record(const TraceRecord& r, const CidrPrefix& a_network,
                                                OrientStats& stats) {
    const bool src_in = a_network.contains(r.src);
    const bool dst_in = a_network.contains(r.dst);
    if (src_in && !dst_in) {
        ++stats.kept;
        return r;
    }
    if (!src_in && dst_in) {
        ++stats.flipped;
        return TraceRecord{r.ts, r.dst, r.src};
    }
    if (src_in) ++stats.dropped_both;
    else ++stats.dropped_neither;
    return std::nullopt;
}

/// Groups an ordered record stream into fixed-duration slices. The origin
/// is the first record's timestamp; empty slices between records are
/// emitted too, since every boundary must trigger a slide.
class SlicePartitioner {
  public:
    explicit SlicePartitioner(uint32_t slice_seconds) : seconds_(slice_seconds) {
        if (slice_seconds < 1) throw std::invalid_argument("slice duration must be >= 1 second");
    }

    using Sink = std::function<void(uint64_t /*slice id*/, std::vector<TraceRecord>&&)>;

    void push(const TraceRecord& r, const Sink& sink) {
        if (!started_) {
            started_ = true;
            origin_ = r.ts;
        }
        const uint64_t id = (r.ts - origin_) / seconds_;
        while (current_ < id) {
            sink(current_++, std::move(batch_));
            batch_ = {};
        }
        batch_.push_back(r);
    }

    /// Flush the final slice (if any records were seen).
    void finish(const Sink& sink) {
        if (!started_) return;
        sink(current_, std::move(batch_));
        batch_ = {};
        started_ = false;
        current_ = 0;
    }

    uint64_t origin() const noexcept { return origin_; }

  private:
    uint32_t seconds_;
    uint64_t origin_ = 0;
    uint64_t current_ = 0;
    std::vector<TraceRecord> batch_;
    bool started_ = false;
};

}  // namespace sspread
