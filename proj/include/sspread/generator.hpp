#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hash.hpp"
#include "trace.hpp"

namespace sspread {

/// A host planted with an exact distinct-destination count. Destinations
/// rotate through the window in disjoint chunks so that every window fully
/// inside the active span sees exactly `cardinality` distinct hosts.
struct PlantedHost {
    uint32_t host = 0;
    uint32_t cardinality = 1;
    uint32_t first_slice = 0;
    uint32_t last_slice = 0xFFFFFFFFu;  // inclusive; clamped to the trace length

    bool active_in(uint64_t slice) const noexcept {
        return slice >= first_slice && slice <= last_slice;
    }
};

struct BackgroundSpec {
    uint32_t a_hosts = 1000;        // distinct sources drawn uniformly
    uint32_t b_hosts = 4096;        // destination pool (shared with plants)
    uint32_t pairs_per_slice = 500;
    double skew = 1.0;              // Zipf exponent over destinations; 0 = uniform
};

struct PlantSpec {
    uint64_t seed = 1;
    uint32_t start_ts = 1700000000;
    uint32_t slice_seconds = 1;
    uint32_t slices = 60;
    uint32_t window = 1;            // rotation period = the detection window
    uint32_t a_base = 0x0A100000;   // 10.16.0.0: background source pool
    uint32_t b_base = 0x64400000;   // 100.64.0.0: destination pool
    BackgroundSpec background;
    std::vector<PlantedHost> plants;

    void validate() const {
        if (slices < 1) throw std::invalid_argument("trace needs at least one slice");
        if (window < 1) throw std::invalid_argument("window must be >= 1");
        if (slice_seconds < 1) throw std::invalid_argument("slice duration must be >= 1");
        if (background.b_hosts < 1) throw std::invalid_argument("destination pool is empty");
        for (const auto& p : plants) {
            if (p.cardinality < 1)
                throw std::invalid_argument("planted cardinality must be >= 1 for " +
                                            format_ipv4(p.host));
            if (p.cardinality > background.b_hosts)
                throw std::invalid_argument("planted cardinality " + std::to_string(p.cardinality) +
                                            " exceeds the destination pool (" +
                                            std::to_string(background.b_hosts) + " hosts)");
            if (p.host >= a_base && p.host < a_base + background.a_hosts)
                throw std::invalid_argument("planted host " + format_ipv4(p.host) +
                                            " collides with the background source pool");
            if (p.first_slice > p.last_slice)
                throw std::invalid_argument("empty active span for " + format_ipv4(p.host));
        }
    }
};

namespace detail {

/// Inverse-CDF Zipf sampler over ranks [0, n). skew 0 degenerates to
/// uniform.
class ZipfSampler {
  public:
    ZipfSampler(uint32_t n, double skew) : n_(n), skew_(skew) {
        if (skew_ <= 0.0) return;
        cdf_.resize(n);
        double acc = 0;
        for (uint32_t r = 0; r < n; ++r) {
            acc += 1.0 / std::pow(static_cast<double>(r + 1), skew_);
            cdf_[r] = acc;
        }
        for (double& c : cdf_) c /= acc;
    }

    uint32_t draw(SplitMix64& rng) const {
        if (skew_ <= 0.0) return static_cast<uint32_t>(rng.next_below(n_));
        const double u = rng.next_double();
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<uint32_t>(it == cdf_.end() ? n_ - 1 : it - cdf_.begin());
    }

  private:
    uint32_t n_;
    double skew_;
    std::vector<double> cdf_;
};

// Plant destinations stride through the shared pool from a per-plant offset.
inline uint32_t plant_pool_offset(size_t plant_index, uint32_t pool) {
    return static_cast<uint32_t>((plant_index * 2654435761ull) % pool);
}

// Chunk r of the rotation partitions [0, c) into `window` near-equal runs.
inline std::pair<uint32_t, uint32_t> rotation_chunk(uint32_t cardinality, uint32_t window,
                                                    uint32_t r) {
    const uint64_t lo = static_cast<uint64_t>(cardinality) * r / window;
    const uint64_t hi = static_cast<uint64_t>(cardinality) * (r + 1) / window;
    return {static_cast<uint32_t>(lo), static_cast<uint32_t>(hi)};
}

}  // namespace detail

/// Deterministic synthetic trace: same spec and seed, byte-identical
/// records. Planted hosts hit their target cardinality exactly in every
/// window whose slices all lie inside their active span; background pairs
/// draw uniform sources and Zipf-skewed destinations.
inline std::vector<TraceRecord> generate_trace(const PlantSpec& spec) {
    spec.validate();
    SplitMix64 rng(spec.seed);
    const detail::ZipfSampler zipf(spec.background.b_hosts, spec.background.skew);
    std::vector<TraceRecord> records;
    bool anchored = false;  // the first record must sit exactly on its slice
                            // boundary so downstream slicing uses the same grid

    for (uint64_t s = 0; s < spec.slices; ++s) {
        const size_t slice_start = records.size();
        const uint32_t ts_base = spec.start_ts + static_cast<uint32_t>(s) * spec.slice_seconds;
        auto ts_in_slice = [&] {
            return ts_base + static_cast<uint32_t>(rng.next_below(spec.slice_seconds));
        };

        for (size_t pi = 0; pi < spec.plants.size(); ++pi) {
            const auto& p = spec.plants[pi];
            if (!p.active_in(s)) continue;
            const uint32_t r =
                static_cast<uint32_t>((s - p.first_slice) % spec.window);
            const auto [lo, hi] = detail::rotation_chunk(p.cardinality, spec.window, r);
            const uint32_t offset = detail::plant_pool_offset(pi, spec.background.b_hosts);
            for (uint32_t j = lo; j < hi; ++j) {
                const uint32_t dst =
                    spec.b_base + (offset + j) % spec.background.b_hosts;
                records.push_back({ts_in_slice(), p.host, dst});
            }
        }

        for (uint32_t i = 0; i < spec.background.pairs_per_slice; ++i) {
            const uint32_t src =
                spec.a_base + static_cast<uint32_t>(rng.next_below(spec.background.a_hosts));
            const uint32_t dst = spec.b_base + zipf.draw(rng);
            records.push_back({ts_in_slice(), src, dst});
        }

        std::stable_sort(records.begin() + static_cast<ptrdiff_t>(slice_start), records.end(),
                         [](const TraceRecord& a, const TraceRecord& b) { return a.ts < b.ts; });
        if (!anchored && records.size() > slice_start) {
            records[slice_start].ts = ts_base;
            anchored = true;
        }
    }
    return records;
}

/// Distinct destinations the rotation construction puts in window
/// [t, t+k). Equals the planted cardinality whenever the window covers k
/// active slices; the ground-truth tests check the oracle against this.
inline uint32_t planted_cardinality_in_window(const PlantSpec& spec, size_t plant_index,
                                              uint64_t t, uint32_t k) {
    const auto& p = spec.plants[plant_index];
    std::vector<bool> chunk_seen(spec.window, false);
    uint64_t total = 0;
    for (uint64_t s = t; s < t + k && s < spec.slices; ++s) {
        if (!p.active_in(s)) continue;
        const uint32_t r = static_cast<uint32_t>((s - p.first_slice) % spec.window);
        if (chunk_seen[r]) continue;
        chunk_seen[r] = true;
        const auto [lo, hi] = detail::rotation_chunk(p.cardinality, spec.window, r);
        total += hi - lo;
    }
    return static_cast<uint32_t>(total);
}

}  // namespace sspread
