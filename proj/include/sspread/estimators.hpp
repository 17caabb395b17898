#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hash.hpp"
#include "recorders.hpp"

namespace sspread {

/// Fraction of active rough-estimator slots at which a host is judged a
/// super point: 0.99 * (1 - e^{-1/3}), from the optimal distinct-element
/// bound the rough estimator is calibrated against.
inline const double kSuperTestRatio = 0.99 * (1.0 - std::exp(-1.0 / 3.0));

/// ceil(log2(theta / slots)), clamped at 0. Integer arithmetic; `slots` is
/// the rough-estimator size. An opposite host updates the rough estimator
/// with probability 2^-result.
inline uint32_t sampling_exponent(uint64_t theta, uint64_t slots) {
    if (theta < 1 || slots < 1) throw std::invalid_argument("sampling_exponent: arguments must be >= 1");
    // smallest tau with 2^tau >= theta/slots, i.e. 2^tau >= ceil(theta/slots)
    const uint64_t ratio = (theta + slots - 1) / slots;
    return ratio <= 1 ? 0 : static_cast<uint32_t>(std::bit_width(ratio - 1));
}

/// Smallest integer weight satisfying `weight >= ratio * slots`, with a
/// 1e-9 guard against representation error in the product.
inline uint32_t super_weight_threshold(double ratio, uint32_t slots) {
    return static_cast<uint32_t>(std::ceil(ratio * slots - 1e-9));
}

/// Super-point test configuration. All quantities are fixed when a sketch
/// is built; per-call parameters would invalidate the sampling calibration.
struct DetectionParams {
    uint32_t theta = 1024;        // cardinality threshold
    uint32_t tau = 7;             // sampling exponent, derived from theta
    double fill_ratio = kSuperTestRatio;
    uint32_t window = 1;          // window length in slices

    static DetectionParams make(uint32_t theta, uint32_t rough_slots, uint32_t window,
                                double fill_ratio = kSuperTestRatio) {
        DetectionParams p;
        p.theta = theta;
        p.tau = sampling_exponent(theta, rough_slots);
        p.fill_ratio = fill_ratio;
        p.window = window;
        return p;
    }
};

/// Sliding rough estimator: a handful of distance recorders fed by a
/// sampled subset of opposite hosts. Cheap enough to consult on every
/// update; only answers "is this host's cardinality above theta".
template <RecorderWord W>
class SlidingRoughEstimator {
  public:
    SlidingRoughEstimator(uint32_t slots, RecorderModel model)
        : model_(model), recorders_(slots, recorder_expired<W>(model)) {
        if (slots < 1) throw std::invalid_argument("rough estimator needs at least one recorder");
        if (!model.fits<W>()) throw std::invalid_argument("recorder width exceeds storage word");
    }

    /// Offer one opposite host. Returns whether it passed the sampling test
    /// and was recorded. Re-offering a recorded host is a no-op.
    bool offer(uint32_t bip, const DetectionParams& params, const HashFamily& hashes) {
        if (lowest_set_bit(hashes.u32(kSampleHash, bip)) < params.tau) return false;
        recorder_mark(recorders_[hashes.reduce(kRoughSlotHash, bip, size())]);
        return true;
    }

    /// Number of recorders active within a window of `window` slices.
    uint32_t weight(uint32_t window) const {
        return static_cast<uint32_t>(count_active<W>(recorders_, window));
    }

    bool is_super(const DetectionParams& params) const {
        return weight(params.window) >= super_weight_threshold(params.fill_ratio, size());
    }

    void slide() { slide_recorders<W>(recorders_, model_); }
    void reset() { fill_expired<W>(recorders_, model_); }

    uint32_t size() const noexcept { return static_cast<uint32_t>(recorders_.size()); }
    std::span<const W> recorders() const noexcept { return recorders_; }
    std::span<W> recorders() noexcept { return {recorders_}; }
    const RecorderModel& model() const noexcept { return model_; }

  private:
    RecorderModel model_;
    std::vector<W> recorders_;
};

/// Linear-slot choice: the sampling hash's 32-bit output reduced modulo the
/// slot count, so rough sampling and linear placement share one hash of the
/// opposite host.
inline uint32_t linear_slot(const HashFamily& hashes, uint32_t bip, uint32_t slots) {
    return hashes.u32(kSampleHash, bip) % slots;
}

/// Sliding linear estimator: linear counting with distance recorders in
/// place of bits. Every opposite host marks one slot (no sampling — the
/// estimate inversion assumes unsampled occupancy).
template <RecorderWord W>
class SlidingLinearEstimator {
  public:
    SlidingLinearEstimator(uint32_t slots, RecorderModel model)
        : model_(model), recorders_(slots, recorder_expired<W>(model)) {
        if (slots < 2) throw std::invalid_argument("linear estimator needs at least two recorders");
        if (!model.fits<W>()) throw std::invalid_argument("recorder width exceeds storage word");
    }

    void offer(uint32_t bip, const HashFamily& hashes) {
        recorder_mark(recorders_[linear_slot(hashes, bip, size())]);
    }

    uint32_t weight(uint32_t window) const {
        return static_cast<uint32_t>(count_active<W>(recorders_, window));
    }

    void slide() { slide_recorders<W>(recorders_, model_); }
    void reset() { fill_expired<W>(recorders_, model_); }

    uint32_t size() const noexcept { return static_cast<uint32_t>(recorders_.size()); }
    std::span<const W> recorders() const noexcept { return recorders_; }
    std::span<W> recorders() noexcept { return {recorders_}; }
    const RecorderModel& model() const noexcept { return model_; }

  private:
    RecorderModel model_;
    std::vector<W> recorders_;
};

/// Linear-counting inversion: -slots * ln((slots - weight) / slots).
/// A full estimator carries no information about how far past its range the
/// true count lies, so weight == slots yields an empty optional.
inline std::optional<double> linear_estimate(uint32_t weight, uint32_t slots) {
    if (weight > slots) throw std::invalid_argument("weight exceeds slot count");
    if (weight == slots) return std::nullopt;
    return -static_cast<double>(slots) *
           std::log1p(-static_cast<double>(weight) / static_cast<double>(slots));
}

}  // namespace sspread
