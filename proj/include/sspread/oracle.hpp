#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recorders.hpp"

namespace sspread {

/// Detection quality per the false-rate definitions: of N true super
/// points the detector reported N' hosts, N+ of them wrong, and missed N-.
struct AccuracyMetrics {
    uint64_t truth_size = 0;       // N
    uint64_t detected_size = 0;    // N'
    uint64_t false_positives = 0;  // N+
    uint64_t false_negatives = 0;  // N-
    double fpr = 0;
    double fnr = 0;
    double tfr = 0;
};

/// Compares a detected host set against ground truth. Empty truth leaves
/// the ratios undefined, signalled by an empty optional.
inline std::optional<AccuracyMetrics> score(const std::set<uint32_t>& detected,
                                            const std::set<uint32_t>& truth) {
    if (truth.empty()) return std::nullopt;
    AccuracyMetrics m;
    m.truth_size = truth.size();
    m.detected_size = detected.size();
    for (uint32_t h : detected) m.false_positives += truth.count(h) == 0;
    for (uint32_t h : truth) m.false_negatives += detected.count(h) == 0;
    m.fpr = static_cast<double>(m.false_positives) / static_cast<double>(m.truth_size);
    m.fnr = static_cast<double>(m.false_negatives) / static_cast<double>(m.truth_size);
    m.tfr = m.fpr + m.fnr;
    return m;
}

/// Exact per-pair sliding cardinalities: one distance recorder per live
/// (host, opposite host) pair, aged and purged at slice boundaries. This is
/// the "precise method" baseline — memory grows with the number of distinct
/// pairs in range.
class PairRecorderStore {
  public:
    explicit PairRecorderStore(uint32_t recorder_bits, uint32_t max_window)
        : model_(RecorderModel::with_bits(recorder_bits)) {
        model_.validate_window(max_window);
        max_window_ = max_window;
    }

    void observe(uint32_t aip, uint32_t bip) { pairs_[aip][bip] = 0; }

    /// Close the current slice: age every recorder, dropping the expired.
    void end_slice() {
        for (auto it = pairs_.begin(); it != pairs_.end();) {
            auto& opposite = it->second;
            for (auto jt = opposite.begin(); jt != opposite.end();) {
                uint32_t v = jt->second;
                recorder_slide(v, model_);
                if (v >= max_window_) {
                    jt = opposite.erase(jt);  // out of every queryable window
                } else {
                    jt->second = v;
                    ++jt;
                }
            }
            if (opposite.empty()) it = pairs_.erase(it);
            else ++it;
        }
        ++current_slice_;
    }

    uint64_t current_slice() const noexcept { return current_slice_; }
    uint64_t pair_count() const noexcept {
        uint64_t n = 0;
        for (const auto& [aip, opposite] : pairs_) n += opposite.size();
        return n;
    }

    /// Distinct opposite hosts of `aip` over window [t, t+k). Valid only at
    /// the end of slice t+k-1, before end_slice().
    uint64_t cardinality(uint32_t aip, uint64_t t, uint32_t k) const {
        check_window(t, k);
        const auto it = pairs_.find(aip);
        if (it == pairs_.end()) return 0;
        uint64_t n = 0;
        for (const auto& [bip, v] : it->second) n += recorder_active(v, k);
        return n;
    }

    std::set<uint32_t> super_points(uint64_t t, uint32_t k, uint32_t theta) const {
        check_window(t, k);
        std::set<uint32_t> out;
        for (const auto& [aip, opposite] : pairs_) {
            uint64_t n = 0;
            for (const auto& [bip, v] : opposite) n += recorder_active(v, k);
            if (n >= theta) out.insert(aip);
        }
        return out;
    }

    /// All hosts with nonzero cardinality in the window, with their counts.
    std::vector<std::pair<uint32_t, uint64_t>> cardinalities(uint64_t t, uint32_t k) const {
        check_window(t, k);
        std::vector<std::pair<uint32_t, uint64_t>> out;
        for (const auto& [aip, opposite] : pairs_) {
            uint64_t n = 0;
            for (const auto& [bip, v] : opposite) n += recorder_active(v, k);
            if (n > 0) out.emplace_back(aip, n);
        }
        return out;
    }

  private:
    void check_window(uint64_t t, uint32_t k) const {
        if (k < 1 || k > max_window_ || t + k != current_slice_ + 1)
            throw std::out_of_range("window [" + std::to_string(t) + ", +" + std::to_string(k) +
                                    ") is not observable at slice " +
                                    std::to_string(current_slice_));
    }

    RecorderModel model_;
    uint32_t max_window_ = 1;
    uint64_t current_slice_ = 0;
    std::unordered_map<uint32_t, std::unordered_map<uint32_t, uint32_t>> pairs_;
};

/// Independent exact implementation: a ring of the most recent slices, each
/// a per-host set of opposite hosts. Cross-checked against
/// PairRecorderStore; they must agree exactly on every query.
class SliceRingStore {
  public:
    explicit SliceRingStore(uint32_t max_window) : max_window_(max_window) {
        if (max_window < 1) throw std::invalid_argument("window must be >= 1");
        ring_.emplace_back();
    }

    void observe(uint32_t aip, uint32_t bip) { ring_.back()[aip].insert(bip); }

    void end_slice() {
        ring_.emplace_back();
        if (ring_.size() > max_window_) ring_.pop_front();
        ++current_slice_;
    }

    uint64_t current_slice() const noexcept { return current_slice_; }

    uint64_t cardinality(uint32_t aip, uint64_t t, uint32_t k) const {
        check_window(t, k);
        std::unordered_set<uint32_t> seen;
        for_window(k, [&](const SliceMap& m) {
            const auto it = m.find(aip);
            if (it == m.end()) return;
            seen.insert(it->second.begin(), it->second.end());
        });
        return seen.size();
    }

    std::set<uint32_t> super_points(uint64_t t, uint32_t k, uint32_t theta) const {
        std::set<uint32_t> out;
        for (const auto& [aip, n] : cardinalities(t, k))
            if (n >= theta) out.insert(aip);
        return out;
    }

    std::vector<std::pair<uint32_t, uint64_t>> cardinalities(uint64_t t, uint32_t k) const {
        check_window(t, k);
        std::unordered_map<uint32_t, std::unordered_set<uint32_t>> merged;
        for_window(k, [&](const SliceMap& m) {
            for (const auto& [aip, opposite] : m)
                merged[aip].insert(opposite.begin(), opposite.end());
        });
        std::vector<std::pair<uint32_t, uint64_t>> out;
        out.reserve(merged.size());
        for (const auto& [aip, opposite] : merged) out.emplace_back(aip, opposite.size());
        return out;
    }

  private:
    using SliceMap = std::unordered_map<uint32_t, std::unordered_set<uint32_t>>;

    void check_window(uint64_t t, uint32_t k) const {
        if (k < 1 || k > max_window_ || t + k != current_slice_ + 1 || k > ring_.size())
            throw std::out_of_range("window [" + std::to_string(t) + ", +" + std::to_string(k) +
                                    ") is not observable at slice " +
                                    std::to_string(current_slice_));
    }

    template <typename Fn>
    void for_window(uint32_t k, Fn&& fn) const {
        // the ring's back is the current slice; take the last k entries
        for (size_t i = ring_.size() - k; i < ring_.size(); ++i) fn(ring_[i]);
    }

    uint32_t max_window_;
    uint64_t current_slice_ = 0;
    std::deque<SliceMap> ring_;
};

}  // namespace sspread
