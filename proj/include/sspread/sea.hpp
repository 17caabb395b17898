#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "estimators.hpp"
#include "hash.hpp"
#include "recorders.hpp"

namespace sspread {

inline constexpr uint32_t kIndicatorBits = 16;

/// Runs `fn(lo, hi)` over subranges covering [0, total). The default runs
/// the single full range inline; the pipeline substitutes a threaded
/// implementation. Range splits must not change results — all uses are
/// either element-wise writes or integer partial sums.
using ChunkRunner = std::function<void(uint64_t, const std::function<void(uint64_t, uint64_t)>&)>;

inline void serial_chunks(uint64_t total, const std::function<void(uint64_t, uint64_t)>& fn) {
    fn(0, total);
}

struct SeaConfig {
    uint32_t rows = 4;            // estimator rows, one row hash each
    uint32_t cols = 65536;        // estimators per row
    uint32_t rough_slots = 8;     // recorders per rough estimator
    uint32_t linear_slots = 1024; // recorders per linear estimator
    uint32_t recorder_bits = 1;
    uint32_t window = 1;          // window length in slices
    uint32_t theta = 1024;        // super-point cardinality threshold
    double fill_ratio = kSuperTestRatio;
    uint64_t seed = 0x00C0FFEEull;

    void validate() const {
        if (rows < 1) throw std::invalid_argument("rows must be >= 1");
        if (cols < 1) throw std::invalid_argument("cols must be >= 1");
        if (rough_slots < 1) throw std::invalid_argument("rough_slots must be >= 1");
        if (linear_slots < 2) throw std::invalid_argument("linear_slots must be >= 2");
        if (theta < 1) throw std::invalid_argument("theta must be >= 1");
        RecorderModel::with_bits(recorder_bits).validate_window(window);
    }
};

/// Hosts flagged as candidate super points. Deduplicated; preserves first
/// insertion order.
class CandidateList {
  public:
    bool insert(uint32_t host) {
        if (!seen_.insert(host).second) return false;
        hosts_.push_back(host);
        return true;
    }

    bool contains(uint32_t host) const { return seen_.count(host) != 0; }
    size_t size() const noexcept { return hosts_.size(); }
    bool empty() const noexcept { return hosts_.empty(); }
    const std::vector<uint32_t>& hosts() const noexcept { return hosts_; }
    void clear() {
        hosts_.clear();
        seen_.clear();
    }

  private:
    std::vector<uint32_t> hosts_;
    std::unordered_set<uint32_t> seen_;
};

/// Union of the estimators one host maps to: indicator bits AND-ed, rough
/// and linear recorders joined index-wise (max). The linear part is filled
/// only on request — the scan path never needs it.
template <RecorderWord W>
struct UnionView {
    uint16_t indicator = 0;
    std::vector<W> rough;
    std::vector<W> linear;
};

struct WindowEntry {
    uint32_t host = 0;
    uint32_t union_weight = 0;             // active union linear recorders
    std::optional<double> estimate;        // collision-corrected; empty = saturated
    bool is_super = false;
};

struct WindowReport {
    uint64_t window_start = 0;  // first slice id of the window
    uint32_t window = 1;        // length in slices
    std::vector<WindowEntry> entries;  // sorted by host address
    double scan_ms = 0.0;       // filled by the driver
    double estimate_ms = 0.0;
};

/// Fixed grid of sliding estimators detecting super points across a whole
/// network. Each cell holds a 16-bit candidate indicator, a rough
/// estimator and a linear estimator; a host updates one cell per row,
/// chosen by that row's hash of the host address.
///
/// Concurrency contract: during a scan phase any number of threads may call
/// scan_ip_pair — all sketch writes are idempotent single-word stores (or a
/// bit OR), duplicate candidate insertions are tolerated and deduplicated at
/// the slice barrier. Everything else (slide, reports, snapshots, queries)
/// requires exclusive access.
template <RecorderWord W>
class EstimatorArray {
  public:
    explicit EstimatorArray(const SeaConfig& cfg)
        : cfg_(cfg),
          model_(RecorderModel::with_bits(cfg.recorder_bits)),
          hashes_(cfg.seed),
          params_(DetectionParams::make(cfg.theta, cfg.rough_slots, cfg.window, cfg.fill_ratio)),
          threshold_(super_weight_threshold(cfg.fill_ratio, cfg.rough_slots)) {
        cfg_.validate();
        if (!model_.fits<W>())
            throw std::invalid_argument("recorder width exceeds the array's storage word");
        if (cfg_.rows > kMaxRows)
            throw std::invalid_argument("at most " + std::to_string(kMaxRows) + " rows supported");
        indicator_rows_.resize(cfg_.rows);
        rough_rows_.resize(cfg_.rows);
        linear_rows_.resize(cfg_.rows);
        for (uint32_t i = 0; i < cfg_.rows; ++i) {
            indicator_rows_[i].assign(cfg_.cols, 0);
            rough_rows_[i].assign(size_t(cfg_.cols) * cfg_.rough_slots, recorder_expired<W>(model_));
            linear_rows_[i].assign(size_t(cfg_.cols) * cfg_.linear_slots, recorder_expired<W>(model_));
        }
    }

    const SeaConfig& config() const noexcept { return cfg_; }
    const RecorderModel& model() const noexcept { return model_; }
    const HashFamily& hashes() const noexcept { return hashes_; }
    const DetectionParams& params() const noexcept { return params_; }
    uint32_t weight_threshold() const noexcept { return threshold_; }

    uint32_t column_of(uint32_t row, uint32_t aip) const {
        return hashes_.reduce(kRowHashBase + row, aip, cfg_.cols);
    }

    /// Scan one (host, opposite host) pair. Thread-safe under the scan
    /// contract; hosts that newly cross the super-point test are appended to
    /// `candidate_sink` (duplicates possible across threads).
    void scan_ip_pair(uint32_t aip, uint32_t bip, std::vector<uint32_t>& candidate_sink) {
        uint32_t cols[kMaxRows];
        const uint32_t rows = cfg_.rows;
        for (uint32_t i = 0; i < rows; ++i) cols[i] = column_of(i, aip);

        // linear estimators update for every pair
        const uint32_t sample = hashes_.u32(kSampleHash, bip);
        const uint32_t lslot = sample % cfg_.linear_slots;
        for (uint32_t i = 0; i < rows; ++i) {
            W& cell = linear_rows_[i][size_t(cols[i]) * cfg_.linear_slots + lslot];
            std::atomic_ref<W>(cell).store(0, std::memory_order_relaxed);
        }

        // the rough estimators see only sampled opposite hosts
        if (lowest_set_bit(sample) < params_.tau) return;
        const uint32_t rslot = hashes_.reduce(kRoughSlotHash, bip, cfg_.rough_slots);
        for (uint32_t i = 0; i < rows; ++i) {
            W& cell = rough_rows_[i][size_t(cols[i]) * cfg_.rough_slots + rslot];
            std::atomic_ref<W>(cell).store(0, std::memory_order_relaxed);
        }

        // super-point test on the union of this host's rough estimators
        uint32_t weight = 0;
        for (uint32_t j = 0; j < cfg_.rough_slots; ++j) {
            W joined = 0;
            for (uint32_t i = 0; i < rows; ++i) {
                W& cell = rough_rows_[i][size_t(cols[i]) * cfg_.rough_slots + j];
                joined = recorder_join(joined,
                                       std::atomic_ref<W>(cell).load(std::memory_order_relaxed));
            }
            weight += recorder_active(joined, cfg_.window);
        }
        if (weight < threshold_) return;

        const uint16_t bit = static_cast<uint16_t>(1u << hashes_.reduce(kIndicatorHash, aip, kIndicatorBits));
        uint16_t joined_si = 0xFFFF;
        for (uint32_t i = 0; i < rows; ++i) {
            uint16_t& cell = indicator_rows_[i][cols[i]];
            joined_si &= std::atomic_ref<uint16_t>(cell).load(std::memory_order_relaxed);
        }
        if (joined_si & bit) return;  // already listed this slice

        candidate_sink.push_back(aip);
        for (uint32_t i = 0; i < rows; ++i)
            std::atomic_ref<uint16_t>(indicator_rows_[i][cols[i]])
                .fetch_or(bit, std::memory_order_relaxed);
    }

    /// Union of the host's cells. Maintenance phase only.
    UnionView<W> union_view(uint32_t aip, bool include_linear) const {
        UnionView<W> u;
        u.indicator = 0xFFFF;
        u.rough.assign(cfg_.rough_slots, 0);
        if (include_linear) u.linear.assign(cfg_.linear_slots, 0);
        for (uint32_t i = 0; i < cfg_.rows; ++i) {
            const uint32_t c = column_of(i, aip);
            u.indicator &= indicator_rows_[i][c];
            const W* rough = &rough_rows_[i][size_t(c) * cfg_.rough_slots];
            for (uint32_t j = 0; j < cfg_.rough_slots; ++j)
                u.rough[j] = recorder_join(u.rough[j], rough[j]);
            if (include_linear) {
                const W* lin = &linear_rows_[i][size_t(c) * cfg_.linear_slots];
                for (uint32_t j = 0; j < cfg_.linear_slots; ++j)
                    u.linear[j] = recorder_join(u.linear[j], lin[j]);
            }
        }
        return u;
    }

    uint32_t union_rough_weight(uint32_t aip) const {
        uint32_t weight = 0;
        for (uint32_t j = 0; j < cfg_.rough_slots; ++j) {
            W joined = 0;
            for (uint32_t i = 0; i < cfg_.rows; ++i) {
                const W* cell = &rough_rows_[i][size_t(column_of(i, aip)) * cfg_.rough_slots];
                joined = recorder_join(joined, cell[j]);
            }
            weight += recorder_active(joined, cfg_.window);
        }
        return weight;
    }

    uint32_t union_linear_weight(uint32_t aip) const {
        uint32_t weight = 0;
        std::array<const W*, kMaxRows> cells;
        for (uint32_t i = 0; i < cfg_.rows; ++i)
            cells[i] = &linear_rows_[i][size_t(column_of(i, aip)) * cfg_.linear_slots];
        for (uint32_t j = 0; j < cfg_.linear_slots; ++j) {
            W joined = 0;
            for (uint32_t i = 0; i < cfg_.rows; ++i) joined = recorder_join(joined, cells[i][j]);
            weight += recorder_active(joined, cfg_.window);
        }
        return weight;
    }

    /// Fraction of one row's linear recorders active within the window —
    /// the probability that an arbitrary linear recorder of that row was
    /// marked by some host.
    double row_fill_fraction(uint32_t row, const ChunkRunner& chunks = serial_chunks) const {
        if (row >= cfg_.rows) throw std::invalid_argument("row index out of range");
        const auto& data = linear_rows_[row];
        std::atomic<uint64_t> active{0};
        chunks(data.size(), [&](uint64_t lo, uint64_t hi) {
            const std::span<const W> part(data.data() + lo, hi - lo);
            active.fetch_add(count_active(part, cfg_.window), std::memory_order_relaxed);
        });
        return static_cast<double>(active.load()) / static_cast<double>(data.size());
    }

    /// Probability that a union linear recorder was marked by other hosts in
    /// every row: the product of the row fill fractions.
    double union_fill_product(const ChunkRunner& chunks = serial_chunks) const {
        double p = 1.0;
        for (uint32_t i = 0; i < cfg_.rows; ++i) p *= row_fill_fraction(i, chunks);
        return p;
    }

    /// Collision-corrected cardinality estimate from a union linear weight
    /// `weight` under contamination probability `fill_product`. Empty
    /// optional = saturated (beyond estimator range).
    std::optional<double> corrected_estimate_from(uint32_t weight, double fill_product) const {
        const double slots = cfg_.linear_slots;
        if (fill_product >= 1.0 - 1e-12) return linear_estimate(weight, cfg_.linear_slots);
        const double contaminated = slots * fill_product;
        const double numerator = static_cast<double>(weight) - contaminated;
        if (numerator < 0) return 0.0;
        const double x = numerator / (slots * (1.0 - fill_product));
        if (x >= 1.0) return std::nullopt;
        return -slots * std::log1p(-x);
    }

    std::optional<double> corrected_estimate(uint32_t aip,
                                             const ChunkRunner& chunks = serial_chunks) const {
        return corrected_estimate_from(union_linear_weight(aip), union_fill_product(chunks));
    }

    /// Estimate every candidate, sorted by address. Call at slice end,
    /// before slide. `window_start` is the id of the window's first slice.
    WindowReport report_window(const CandidateList& csip, uint64_t window_start,
                               const ChunkRunner& chunks = serial_chunks) const {
        const auto t0 = std::chrono::steady_clock::now();
        WindowReport report;
        report.window_start = window_start;
        report.window = cfg_.window;
        std::vector<uint32_t> hosts = csip.hosts();
        std::sort(hosts.begin(), hosts.end());
        const double fill_product = union_fill_product(chunks);
        report.entries.reserve(hosts.size());
        for (uint32_t host : hosts) {
            WindowEntry e;
            e.host = host;
            e.union_weight = union_linear_weight(host);
            e.estimate = corrected_estimate_from(e.union_weight, fill_product);
            e.is_super = !e.estimate.has_value() || *e.estimate >= static_cast<double>(cfg_.theta);
            report.entries.push_back(e);
        }
        report.estimate_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return report;
    }

    /// Slice-boundary maintenance: clear all indicators, age every recorder
    /// by one slice, then re-validate the candidate list against the aged
    /// sketch. Retained hosts get their indicator bits re-set so the next
    /// slice does not re-insert them. Returns the retained list, which
    /// seeds the next slice's candidates.
    CandidateList slide(const CandidateList& csip, const ChunkRunner& chunks = serial_chunks) {
        for (auto& row : indicator_rows_) std::fill(row.begin(), row.end(), 0);
        for (uint32_t i = 0; i < cfg_.rows; ++i) {
            auto& rough = rough_rows_[i];
            chunks(rough.size(), [&](uint64_t lo, uint64_t hi) {
                slide_recorders(std::span<W>(rough.data() + lo, hi - lo), model_);
            });
            auto& lin = linear_rows_[i];
            chunks(lin.size(), [&](uint64_t lo, uint64_t hi) {
                slide_recorders(std::span<W>(lin.data() + lo, hi - lo), model_);
            });
        }
        CandidateList retained;
        for (uint32_t host : csip.hosts()) {
            if (union_rough_weight(host) < threshold_) continue;
            retained.insert(host);
            const uint16_t bit =
                static_cast<uint16_t>(1u << hashes_.reduce(kIndicatorHash, host, kIndicatorBits));
            for (uint32_t i = 0; i < cfg_.rows; ++i)
                indicator_rows_[i][column_of(i, host)] |= bit;
        }
        return retained;
    }

    // Raw row access for snapshots and tests.
    std::span<const uint16_t> indicator_row(uint32_t i) const { return indicator_rows_.at(i); }
    std::span<uint16_t> indicator_row(uint32_t i) { return {indicator_rows_.at(i)}; }
    std::span<const W> rough_row(uint32_t i) const { return rough_rows_.at(i); }
    std::span<W> rough_row(uint32_t i) { return {rough_rows_.at(i)}; }
    std::span<const W> linear_row(uint32_t i) const { return linear_rows_.at(i); }
    std::span<W> linear_row(uint32_t i) { return {linear_rows_.at(i)}; }

  private:
    static constexpr uint32_t kMaxRows = 64;

    SeaConfig cfg_;
    RecorderModel model_;
    HashFamily hashes_;
    DetectionParams params_;
    uint32_t threshold_;
    std::vector<std::vector<uint16_t>> indicator_rows_;
    std::vector<std::vector<W>> rough_rows_;
    std::vector<std::vector<W>> linear_rows_;
};

}  // namespace sspread
