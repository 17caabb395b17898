#pragma once

#include <bit>
#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace sspread {

/// Index of the lowest set bit of `x`, counting from 0. Returns 32 for
/// x == 0 so an all-zero hash always passes a `>= threshold` sampling test.
constexpr uint32_t lowest_set_bit(uint32_t x) noexcept {
    return static_cast<uint32_t>(std::countr_zero(x));
}

/// Storage word for a distance recorder. Recorders wider than 32 bits are
/// out of scope.
template <typename W>
concept RecorderWord = std::unsigned_integral<W> && sizeof(W) <= 4 && !std::same_as<W, bool>;

/// Width configuration shared by every recorder of one sketch.
///
/// A distance recorder is a saturating counter of time slices since the
/// host (or IP pair) it tracks last appeared. `expired` (all bits set) is
/// both the initialization value and the "not seen within range" sentinel;
/// 0 means "seen in the current slice". All recorders of a structure share
/// the same bit width; mixing widths is a configuration error.
struct RecorderModel {
    uint32_t bits = 1;        // counter width in bits
    uint32_t expired = 1;     // sentinel value, 2^bits - 1

    static RecorderModel with_bits(uint32_t bits) {
        if (bits < 1 || bits > 32)
            throw std::invalid_argument("recorder width must be in [1, 32] bits, got " +
                                        std::to_string(bits));
        RecorderModel m;
        m.bits = bits;
        m.expired = bits == 32 ? 0xFFFFFFFFu : (1u << bits) - 1u;
        return m;
    }

    /// Largest admissible window length: window lengths are validated once,
    /// at configuration time, against [1, 2^bits - 1].
    uint32_t max_window() const noexcept { return expired; }

    void validate_window(uint32_t window) const {
        if (window < 1 || window > max_window())
            throw std::invalid_argument("window of " + std::to_string(window) +
                                        " slices does not fit a " + std::to_string(bits) +
                                        "-bit recorder (valid range [1, " +
                                        std::to_string(max_window()) + "])");
    }

    /// True when values of width `bits` fit the storage word W.
    template <RecorderWord W>
    bool fits() const noexcept {
        return bits <= 8 * sizeof(W);
    }
};

/// Smallest storage width (in bytes: 1, 2 or 4) that holds `bits`-wide values.
constexpr uint32_t recorder_word_bytes(uint32_t bits) noexcept {
    return bits <= 8 ? 1 : bits <= 16 ? 2 : 4;
}

// Scalar operations. During a concurrent scan phase only recorder_mark may
// run (idempotent store of 0); slides and re-initialization belong to an
// exclusive maintenance phase. Enforcement lives with the array structures.

template <RecorderWord W>
constexpr W recorder_expired(const RecorderModel& m) noexcept {
    return static_cast<W>(m.expired);
}

/// Record an appearance in the current slice.
template <RecorderWord W>
constexpr void recorder_mark(W& r) noexcept {
    r = 0;
}

/// Advance the recorder by one slice, saturating at the expired sentinel.
template <RecorderWord W>
constexpr void recorder_slide(W& r, const RecorderModel& m) noexcept {
    if (r < static_cast<W>(m.expired)) ++r;
}

/// Merge two recorders tracking the same entity: the larger distance wins.
template <RecorderWord W>
constexpr W recorder_join(W a, W b) noexcept {
    return a > b ? a : b;
}

/// Whether the recorded appearance falls inside a window of `window` slices
/// ending at the current slice.
template <RecorderWord W>
constexpr bool recorder_active(W r, uint32_t window) noexcept {
    return static_cast<uint32_t>(r) < window;
}

// Span operations over contiguous recorder arrays.

template <RecorderWord W>
void fill_expired(std::span<W> recorders, const RecorderModel& m) noexcept {
    const W e = recorder_expired<W>(m);
    for (W& r : recorders) r = e;
}

/// Branchless saturating increment over a whole array; the inner form
/// vectorizes, which matters for multi-hundred-megabyte slide passes.
template <RecorderWord W>
void slide_recorders(std::span<W> recorders, const RecorderModel& m) noexcept {
    const W e = recorder_expired<W>(m);
    for (W& r : recorders) r = static_cast<W>(r + (r != e));
}

/// Number of recorders whose value lies inside the window ("weight").
template <RecorderWord W>
uint64_t count_active(std::span<const W> recorders, uint32_t window) noexcept {
    uint64_t n = 0;
    for (W r : recorders) n += static_cast<uint32_t>(r) < window;
    return n;
}

template <RecorderWord W>
uint64_t count_active(std::span<W> recorders, uint32_t window) noexcept {
    return count_active(std::span<const W>(recorders), window);
}

}  // namespace sspread
