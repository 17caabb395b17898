#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "oracle.hpp"
#include "sea.hpp"
#include "trace.hpp"

namespace sspread {

/// Raised on invalid run configuration (CLI exit code 2; inputs raise
/// InputError, exit code 3).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when an internal invariant breaks (CLI exit code 4).
class InternalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Everything a detection run needs. The sketch dimensions live in `sea`;
/// the rest shapes the trace handling.
struct RunConfig {
    SeaConfig sea;
    uint32_t slice_seconds = 300;
    CidrPrefix a_network{0x0A000000, 8};  // 10.0.0.0/8
    uint32_t workers = 1;

    void validate() const {
        try {
            sea.validate();
            if (slice_seconds < 1) throw std::invalid_argument("slice duration must be >= 1 second");
            if (workers < 1 || workers > 256) throw std::invalid_argument("workers must be in [1, 256]");
            if ((sea.cols & (sea.cols - 1)) != 0)
                throw std::invalid_argument("cols must be a power of two");
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

/// Splits [0, total) into near-equal ranges and runs them on `workers`
/// threads (the caller's thread included). fn(lo, hi) must be safe to run
/// concurrently on disjoint ranges.
inline void parallel_ranges(uint64_t total, uint32_t workers,
                            const std::function<void(uint64_t, uint64_t)>& fn) {
    if (total == 0) return;
    const uint32_t n = static_cast<uint32_t>(std::min<uint64_t>(workers, total));
    if (n <= 1) {
        fn(0, total);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(n - 1);
    for (uint32_t w = 1; w < n; ++w)
        threads.emplace_back([&, w] { fn(total * w / n, total * (w + 1) / n); });
    fn(0, total / n);
    for (auto& t : threads) t.join();
}

/// ChunkRunner bound to a worker count, for the sketch's bulk passes.
inline ChunkRunner chunked(uint32_t workers) {
    return [workers](uint64_t total, const std::function<void(uint64_t, uint64_t)>& fn) {
        parallel_ranges(total, workers, fn);
    };
}

/// Drives an estimator array over a trace: orient records, partition into
/// slices, scan each slice (in parallel), report every complete window,
/// slide. Reports arrive in window order through the sink, before the
/// slide that closes their last slice.
template <RecorderWord W>
class DetectPipeline {
  public:
    using ReportSink = std::function<void(const WindowReport&)>;

    explicit DetectPipeline(const RunConfig& cfg) : cfg_(cfg), sea_(cfg.sea) { cfg_.validate(); }

    EstimatorArray<W>& sketch() noexcept { return sea_; }
    const OrientStats& orient_stats() const noexcept { return stats_; }
    uint64_t pairs_scanned() const noexcept { return pairs_; }
    uint64_t slices_seen() const noexcept { return slices_; }
    double total_scan_ms() const noexcept { return total_scan_ms_; }
    double total_estimate_ms() const noexcept { return total_estimate_ms_; }

    /// Process a whole trace file. The sink may be empty (bench mode).
    void run(const std::string& trace_path, const ReportSink& sink) {
        SlicePartitioner partitioner(cfg_.slice_seconds);
        const auto on_slice = [&](uint64_t id, std::vector<TraceRecord>&& records) {
            process_slice(id, records, sink);
        };
        for_each_record(trace_path, [&](const TraceRecord& r) {
            const auto oriented = orient_record(r, cfg_.a_network, stats_);
            if (oriented) partitioner.push(*oriented, on_slice);
        });
        partitioner.finish(on_slice);
    }

    /// Scan one slice's records and run the boundary maintenance. Exposed
    /// so tests and snapshot-resumed runs can feed slices directly.
    void process_slice(uint64_t slice_id, std::span<const TraceRecord> records,
                       const ReportSink& sink) {
        const auto t0 = std::chrono::steady_clock::now();
        scan_records(records);
        const double scan_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        total_scan_ms_ += scan_ms;
        pairs_ += records.size();
        ++slices_;

        const uint32_t k = cfg_.sea.window;
        if (slice_id + 1 >= k && sink) {
            WindowReport report = sea_.report_window(csip_, slice_id + 1 - k, chunked(cfg_.workers));
            report.scan_ms = scan_ms;
            total_estimate_ms_ += report.estimate_ms;
            sink(report);
        }
        csip_ = sea_.slide(csip_, chunked(cfg_.workers));
    }

    const CandidateList& candidates() const noexcept { return csip_; }

  private:
    void scan_records(std::span<const TraceRecord> records) {
        if (cfg_.workers <= 1 || records.size() < 2048) {
            std::vector<uint32_t> sink;
            for (const auto& r : records) sea_.scan_ip_pair(r.src, r.dst, sink);
            for (uint32_t h : sink) csip_.insert(h);
            return;
        }
        const uint32_t n = cfg_.workers;
        std::vector<std::vector<uint32_t>> sinks(n);
        std::vector<std::thread> threads;
        threads.reserve(n - 1);
        const auto chunk = [&](uint32_t w) {
            const uint64_t lo = records.size() * w / n;
            const uint64_t hi = records.size() * (w + 1) / n;
            for (uint64_t i = lo; i < hi; ++i)
                sea_.scan_ip_pair(records[i].src, records[i].dst, sinks[w]);
        };
        for (uint32_t w = 1; w < n; ++w) threads.emplace_back(chunk, w);
        chunk(0);
        for (auto& t : threads) t.join();
        // merged in chunk order; duplicates from racing indicator updates
        // collapse here
        for (const auto& sink : sinks)
            for (uint32_t h : sink) csip_.insert(h);
    }

    RunConfig cfg_;
    EstimatorArray<W> sea_;
    CandidateList csip_;
    OrientStats stats_;
    uint64_t pairs_ = 0;
    uint64_t slices_ = 0;
    double total_scan_ms_ = 0;
    double total_estimate_ms_ = 0;
};

/// Calls `fn(word)` where `word` is a zero value of the recorder storage
/// type matching `recorder_bits`; lets callers instantiate the right
/// EstimatorArray from a runtime width.
template <typename Fn>
decltype(auto) with_recorder_word(uint32_t recorder_bits, Fn&& fn) {
    switch (recorder_word_bytes(recorder_bits)) {
        case 1: return fn(uint8_t{0});
        case 2: return fn(uint16_t{0});
        default: return fn(uint32_t{0});
    }
}

/// Ground-truth record for one window.
struct TruthEntry {
    uint64_t window_start = 0;
    uint32_t host = 0;
    uint64_t cardinality = 0;
};

enum class OracleEngine { ring, pair_recorders, both };

inline constexpr uint64_t kOraclePairGuard = 100'000'000;

/// Exact sliding-window cardinalities over a trace. Emits, per complete
/// window, every host whose cardinality reaches `min_cardinality` (sorted
/// by address). With OracleEngine::both the two implementations cross-check
/// each other and disagreement raises InternalError. The exact stores keep
/// per-pair state, so runs beyond `max_pairs` records are refused outright
/// rather than allowed to exhaust memory.
inline void run_oracle(const RunConfig& cfg, const std::string& trace_path, OracleEngine engine,
                       uint64_t min_cardinality,
                       const std::function<void(const TruthEntry&)>& sink,
                       uint64_t max_pairs = kOraclePairGuard) {
    cfg.validate();
    const uint32_t k = cfg.sea.window;
    uint64_t observed = 0;
    std::optional<SliceRingStore> ring;
    std::optional<PairRecorderStore> pairs;
    if (engine != OracleEngine::pair_recorders) ring.emplace(k);
    if (engine != OracleEngine::ring) pairs.emplace(cfg.sea.recorder_bits, k);
    OrientStats stats;

    const auto on_slice = [&](uint64_t id, std::vector<TraceRecord>&& records) {
        for (const auto& r : records) {
            if (ring) ring->observe(r.src, r.dst);
            if (pairs) pairs->observe(r.src, r.dst);
        }
        if (id + 1 >= k) {
            const uint64_t t = id + 1 - k;
            auto cards = ring ? ring->cardinalities(t, k) : pairs->cardinalities(t, k);
            if (ring && pairs) {
                auto other = pairs->cardinalities(t, k);
                std::sort(other.begin(), other.end());
                auto mine = cards;
                std::sort(mine.begin(), mine.end());
                if (mine != other)
                    throw InternalError("oracle backends disagree on window " + std::to_string(t));
            }
            std::sort(cards.begin(), cards.end());
            for (const auto& [host, n] : cards)
                if (n >= min_cardinality) sink(TruthEntry{t, host, n});
        }
        if (ring) ring->end_slice();
        if (pairs) pairs->end_slice();
    };

    SlicePartitioner partitioner(cfg.slice_seconds);
    for_each_record(trace_path, [&](const TraceRecord& r) {
        const auto oriented = orient_record(r, cfg.a_network, stats);
        if (!oriented) return;
        if (++observed > max_pairs)
            throw InputError("trace exceeds the oracle pair guard (" + std::to_string(max_pairs) +
                             " records); raise --max-pairs for a machine that can hold it");
        partitioner.push(*oriented, on_slice);
    });
    partitioner.finish(on_slice);
}

}  // namespace sspread
