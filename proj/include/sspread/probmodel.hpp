#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

namespace sspread {

using BigInt = boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::cpp_bin_float_50;

/// Exact binomial coefficient.
inline BigInt big_binomial(uint64_t n, uint64_t k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    BigInt r = 1;
    for (uint64_t i = 1; i <= k; ++i) {
        r *= (n - k + i);
        r /= i;
    }
    return r;
}

/// Memoized exact counts of surjections: the number of ways to throw
/// `balls` labeled balls into `boxes` labeled boxes so that no box is
/// empty. Built eagerly; immutable afterwards, so concurrent reads are
/// safe. Queries beyond the table bounds fall back to the closed
/// inclusion-exclusion form (exact, uncached).
class SurjectionTable {
  public:
    explicit SurjectionTable(uint32_t max_balls = 512, uint32_t max_boxes = 16)
        : max_balls_(max_balls), max_boxes_(max_boxes), rows_(max_balls + 1) {
        for (uint32_t a = 0; a <= max_balls; ++a) {
            auto& row = rows_[a];
            row.resize(max_boxes + 1);
            row[0] = (a == 0) ? 1 : 0;  // empty assignment fills zero boxes
            for (uint32_t g = 1; g <= max_boxes; ++g) {
                if (a < g) {
                    row[g] = 0;
                    continue;
                }
                if (g == 1) {
                    row[g] = 1;
                    continue;
                }
                // g^a minus all assignments that land in a strict subset
                BigInt v = boost::multiprecision::pow(BigInt(g), a);
                for (uint32_t i = 1; i < g; ++i) v -= big_binomial(g, i) * row[i];
                row[g] = v;
            }
        }
    }

    uint32_t max_balls() const noexcept { return max_balls_; }
    uint32_t max_boxes() const noexcept { return max_boxes_; }

    /// FN(balls, boxes); exact for any arguments with boxes <= max_boxes.
    BigInt count(uint64_t balls, uint32_t boxes) const {
        if (boxes > max_boxes_)
            throw std::invalid_argument("surjection table sized for <= " +
                                        std::to_string(max_boxes_) + " boxes");
        if (balls < boxes) return 0;
        if (boxes == 0) return balls == 0 ? 1 : 0;
        if (balls <= max_balls_) return rows_[static_cast<uint32_t>(balls)][boxes];
        // inclusion-exclusion, off the memoized range
        BigInt v = 0;
        for (uint32_t i = 0; i <= boxes; ++i) {
            BigInt term = big_binomial(boxes, i) *
                          boost::multiprecision::pow(BigInt(boxes - i), static_cast<unsigned>(balls));
            v += (i % 2 == 0) ? term : -term;
        }
        return v;
    }

  private:
    uint32_t max_balls_;
    uint32_t max_boxes_;
    std::vector<std::vector<BigInt>> rows_;
};

inline BigInt fn_surjections(const SurjectionTable& table, uint64_t balls, uint32_t boxes) {
    return table.count(balls, boxes);
}

/// Number of assignments of `balls` into `boxes` boxes that leave exactly
/// `occupied` boxes non-empty: C(boxes, occupied) * FN(balls, occupied).
inline BigInt fn_nonempty(const SurjectionTable& table, uint64_t balls, uint32_t boxes,
                          uint32_t occupied) {
    if (occupied > boxes) return 0;
    return big_binomial(boxes, occupied) * table.count(balls, occupied);
}

/// P[exactly `occupied` boxes non-empty after `balls` uniform throws into
/// `boxes` boxes]. Evaluated as an exact integer ratio converted through
/// extended-precision floats, so huge boxes^balls denominators cannot
/// overflow.
inline double pr_occupied(const SurjectionTable& table, uint64_t balls, uint32_t boxes,
                          uint32_t occupied) {
    if (boxes < 1) throw std::invalid_argument("pr_occupied: need at least one box");
    if (occupied > boxes || occupied > balls) return 0.0;
    if (balls == 0) return occupied == 0 ? 1.0 : 0.0;
    if (occupied == 0) return 0.0;
    const BigInt num = fn_nonempty(table, balls, boxes, occupied);
    const BigInt den = boost::multiprecision::pow(BigInt(boxes), static_cast<unsigned>(balls));
    return static_cast<double>(BigFloat(num) / BigFloat(den));
}

/// Binomial probability that exactly `picked` of `population` hosts pass a
/// 2^-tau sampling test. Log-space for large populations.
inline double pr_sampled_count(uint64_t population, uint32_t tau, uint64_t picked) {
    if (picked > population) return 0.0;
    if (tau == 0) return picked == population ? 1.0 : 0.0;
    if (tau >= 64) throw std::invalid_argument("pr_sampled_count: tau out of range");
    const double log_p = -static_cast<double>(tau) * std::log(2.0);
    const double log_q = std::log1p(-std::exp2(-static_cast<double>(tau)));
    const double n = static_cast<double>(population);
    const double k = static_cast<double>(picked);
    const double log_choose = std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
    return std::exp(log_choose + k * log_p + (n - k) * log_q);
}

/// Distribution of the rough-estimator weight after scanning `population`
/// distinct opposite hosts: entry [w] is P[weight == w], w in [0, slots].
/// Convolves the sampling binomial with the occupancy distribution; the
/// binomial sum is truncated once the included mass reaches 1 - 1e-12.
inline std::vector<double> weight_distribution(const SurjectionTable& table, uint64_t population,
                                               uint32_t slots, uint32_t tau) {
    std::vector<double> dist(slots + 1, 0.0);
    double included = 0.0;
    for (uint64_t picked = 0; picked <= population; ++picked) {
        const double pb = pr_sampled_count(population, tau, picked);
        if (pb < 1e-18) {
            if (included > 0.5) break;  // past the mode, tail negligible
            continue;
        }
        included += pb;
        const uint32_t top = static_cast<uint32_t>(std::min<uint64_t>(picked, slots));
        for (uint32_t w = 0; w <= top; ++w)
            dist[w] += pb * pr_occupied(table, picked, slots, w);
        if (1.0 - included < 1e-12) break;
    }
    return dist;
}

/// P[rough-estimator weight == w] after scanning `population` hosts.
inline double pr_weight(const SurjectionTable& table, uint64_t population, uint32_t slots,
                        uint32_t tau, uint32_t w) {
    if (w > slots) return 0.0;
    return weight_distribution(table, population, slots, tau)[w];
}

/// P[rough-estimator weight >= w]: the detection probability when w is the
/// super-point weight threshold.
inline double pr_weight_at_least(const SurjectionTable& table, uint64_t population,
                                 uint32_t slots, uint32_t tau, uint32_t w) {
    if (w == 0) return 1.0;
    if (w > slots) return 0.0;
    const auto dist = weight_distribution(table, population, slots, tau);
    double p = 0.0;
    for (uint32_t g1 = w; g1 <= slots; ++g1) p += dist[g1];
    return p;
}

}  // namespace sspread
