#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "sspread/estimators.hpp"

using namespace sspread;

TEST_CASE("sampling exponent", "[estimators]") {
    CHECK(sampling_exponent(1024, 8) == 7);
    CHECK(sampling_exponent(8, 8) == 0);
    CHECK(sampling_exponent(1000, 8) == 7);  // ceil(log2(125))
    CHECK(sampling_exponent(1, 8) == 0);     // theta <= slots clamps to 0
    CHECK(sampling_exponent(9, 8) == 1);
    CHECK(sampling_exponent(17, 8) == 2);
    CHECK(sampling_exponent(1024, 1024) == 0);
    CHECK(sampling_exponent(1ull << 63, 1) == 63);  // no overflow at the extremes
    CHECK_THROWS_AS(sampling_exponent(0, 8), std::invalid_argument);
}

TEST_CASE("super weight threshold", "[estimators]") {
    // 0.99 * (1 - e^{-1/3}) * 8 = 2.24507...
    CHECK(super_weight_threshold(kSuperTestRatio, 8) == 3);
    CHECK(super_weight_threshold(kSuperTestRatio, 1) == 1);
    CHECK(super_weight_threshold(0.5, 4) == 2);   // exact product stays exact
    CHECK(super_weight_threshold(0.25, 8) == 2);
}

namespace {

const RecorderModel kM16 = RecorderModel::with_bits(16);

}  // namespace

TEST_CASE("rough estimator offers", "[estimators]") {
    SECTION("tau = 0 records every host") {
        auto params = DetectionParams::make(8, 8, 300);
        REQUIRE(params.tau == 0);
        SlidingRoughEstimator<uint16_t> sre(8, kM16);
        HashFamily h(1);
        for (uint32_t bip = 0; bip < 64; ++bip) CHECK(sre.offer(bip, params, h));
    }

    SECTION("second offer of the same host changes nothing") {
        auto params = DetectionParams::make(1024, 8, 300);
        SlidingRoughEstimator<uint16_t> sre(8, kM16);
        HashFamily h(1);
        uint32_t bip = 0;
        while (!sre.offer(bip, params, h)) ++bip;  // find a sampled host
        std::vector<uint16_t> before(sre.recorders().begin(), sre.recorders().end());
        sre.offer(bip, params, h);
        std::vector<uint16_t> after(sre.recorders().begin(), sre.recorders().end());
        CHECK(before == after);
    }

    SECTION("tau = 7 records a 2^-7 fraction (Monte Carlo)") {
        auto params = DetectionParams::make(1024, 8, 300);
        REQUIRE(params.tau == 7);
        SlidingRoughEstimator<uint16_t> sre(8, kM16);
        HashFamily h(0xABCD);
        SplitMix64 rng(99);
        const size_t n = 1'000'000;
        size_t recorded = 0;
        for (size_t i = 0; i < n; ++i)
            recorded += sre.offer(static_cast<uint32_t>(rng.next()), params, h);
        const double p = 1.0 / 128.0;
        const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
        CHECK(std::abs(static_cast<double>(recorded) / n - p) < 3 * sigma);
    }
}

TEST_CASE("rough estimator weight and super test", "[estimators]") {
    SlidingRoughEstimator<uint16_t> sre(8, kM16);

    SECTION("fresh estimator has weight 0 for any window") {
        CHECK(sre.weight(1) == 0);
        CHECK(sre.weight(300) == 0);
        CHECK(sre.weight(65535) == 0);
    }

    SECTION("explicit recorder states") {
        auto r = sre.recorders();
        const uint16_t vals[8] = {0, 5, 299, 300, 65535, 65535, 65535, 65535};
        std::copy(std::begin(vals), std::end(vals), r.begin());
        CHECK(sre.weight(300) == 3);
        CHECK(sre.weight(1) == 1);
        CHECK(sre.weight(301) == 4);
    }

    SECTION("all recorders marked this slice") {
        for (auto& r : sre.recorders()) r = 0;
        CHECK(sre.weight(1) == 8);
    }

    SECTION("decision boundary at weight 3 of 8") {
        auto params = DetectionParams::make(1024, 8, 300);
        auto r = sre.recorders();
        std::fill(r.begin(), r.end(), static_cast<uint16_t>(65535));
        r[0] = r[1] = 0;
        CHECK_FALSE(sre.is_super(params));  // weight 2 < 2.245...
        r[2] = 0;
        CHECK(sre.is_super(params));        // weight 3 >= 2.245...
        std::fill(r.begin(), r.end(), static_cast<uint16_t>(0));
        CHECK(sre.is_super(params));        // weight == slots
    }
}

TEST_CASE("linear estimator offers and weight", "[estimators]") {
    HashFamily h(0x77);

    SECTION("single host yields weight 1") {
        SlidingLinearEstimator<uint16_t> sle(1024, kM16);
        sle.offer(0x0A000001, h);
        CHECK(sle.weight(1) == 1);
    }

    SECTION("colliding hosts still yield one active recorder") {
        SlidingLinearEstimator<uint16_t> sle(16, kM16);
        // find two hosts that collide under the slot hash
        const uint32_t a = 0;
        uint32_t b = 1;
        while (linear_slot(h, b, 16) != linear_slot(h, a, 16)) ++b;
        sle.offer(a, h);
        sle.offer(b, h);
        CHECK(sle.weight(1) == 1);
    }

    SECTION("explicit recorder states") {
        SlidingLinearEstimator<uint16_t> sle(1024, kM16);
        CHECK(sle.weight(1) == 0);       // fresh
        CHECK(sle.weight(65535) == 0);
        auto r = sle.recorders();
        for (int i = 0; i < 10; ++i) r[i] = 0;
        for (int i = 10; i < 15; ++i) r[i] = 299;
        for (int i = 15; i < 20; ++i) r[i] = 300;
        CHECK(sle.weight(300) == 15);
        CHECK(sle.weight(1) == 10);
        std::fill(r.begin(), r.end(), uint16_t{0});
        CHECK(sle.weight(1) == 1024);    // everything marked this slice
    }

    SECTION("occupancy matches the exact model over seeded trials") {
        // E[weight] for n distinct hosts into s slots = s(1-(1-1/s)^n);
        // exact variance from the classical occupancy formulas.
        const uint32_t slots = 1024;
        const size_t n = 500;
        const int trials = 100;
        const double mean_expect = 395.741326784001;
        const double sd_expect = 7.3790061951727495;
        double sum = 0;
        for (int t = 0; t < trials; ++t) {
            SlidingLinearEstimator<uint16_t> sle(slots, kM16);
            HashFamily ht(0x1000 + t);
            for (size_t i = 0; i < n; ++i) sle.offer(static_cast<uint32_t>(i), ht);
            sum += sle.weight(1);
        }
        const double mean = sum / trials;
        CHECK(std::abs(mean - mean_expect) < 3 * sd_expect / std::sqrt(trials));
    }
}

TEST_CASE("linear estimate inversion", "[estimators]") {
    CHECK(linear_estimate(0, 1024).value() == 0.0);
    CHECK_FALSE(linear_estimate(1024, 1024).has_value());  // saturated
    CHECK_THROWS_AS(linear_estimate(1025, 1024), std::invalid_argument);

    // high-precision evaluation of -1024*ln(924/1024)
    CHECK(linear_estimate(100, 1024).value() == Catch::Approx(105.22596757275539).epsilon(1e-12));
    // single active slot estimates one host within 0.1% for slots >= 1024
    CHECK(linear_estimate(1, 1024).value() == Catch::Approx(1.0).epsilon(1e-3));
    CHECK(linear_estimate(1, 4096).value() == Catch::Approx(1.0).epsilon(1e-3));

    SECTION("strictly increasing in weight") {
        double prev = -1;
        for (uint32_t w = 0; w < 1024; ++w) {
            const double e = linear_estimate(w, 1024).value();
            REQUIRE(e > prev);
            prev = e;
        }
    }
}

TEST_CASE("weights never decrease as hosts are offered", "[estimators][property]") {
    auto params = DetectionParams::make(64, 8, 16);
    const auto m8 = RecorderModel::with_bits(8);
    SlidingRoughEstimator<uint8_t> sre(8, m8);
    SlidingLinearEstimator<uint8_t> sle(64, m8);
    HashFamily h(5);
    uint32_t rw = 0, lw = 0;
    SplitMix64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        const auto bip = static_cast<uint32_t>(rng.next());
        sre.offer(bip, params, h);
        sle.offer(bip, h);
        const uint32_t nrw = sre.weight(16), nlw = sle.weight(16);
        REQUIRE(nrw >= rw);
        REQUIRE(nlw >= lw);
        rw = nrw;
        lw = nlw;
    }
}

TEST_CASE("slide coherence: weight(k) after slide equals weight(k-1) before", "[estimators][property]") {
    std::mt19937_64 rng(0xC0DE);
    const auto m = RecorderModel::with_bits(8);
    for (int trial = 0; trial < 200; ++trial) {
        SlidingLinearEstimator<uint8_t> sle(32, m);
        auto r = sle.recorders();
        for (auto& v : r) {
            v = static_cast<uint8_t>(rng() % (m.expired + 1));
            if (rng() % 4 == 0) v = static_cast<uint8_t>(m.expired);
        }
        std::vector<uint32_t> before;
        for (uint32_t k = 2; k <= m.max_window(); ++k) before.push_back(sle.weight(k - 1));
        sle.slide();
        size_t idx = 0;
        for (uint32_t k = 2; k <= m.max_window(); ++k) REQUIRE(sle.weight(k) == before[idx++]);
    }
}

namespace {

// Plain-bitmap references for the discrete-window degeneration check.
struct BitmapRough {
    std::vector<bool> bits;
    explicit BitmapRough(uint32_t slots) : bits(slots, false) {}
    void offer(uint32_t bip, const DetectionParams& p, const HashFamily& h) {
        if (lowest_set_bit(h.u32(kSampleHash, bip)) < p.tau) return;
        bits[h.reduce(kRoughSlotHash, bip, static_cast<uint32_t>(bits.size()))] = true;
    }
    uint32_t weight() const {
        uint32_t w = 0;
        for (bool b : bits) w += b;
        return w;
    }
};

struct BitmapLinear {
    std::vector<bool> bits;
    explicit BitmapLinear(uint32_t slots) : bits(slots, false) {}
    void offer(uint32_t bip, const HashFamily& h) {
        bits[linear_slot(h, bip, static_cast<uint32_t>(bits.size()))] = true;
    }
    uint32_t weight() const {
        uint32_t w = 0;
        for (bool b : bits) w += b;
        return w;
    }
};

}  // namespace

TEST_CASE("z=1, k=1 degenerates to plain bitmap estimators", "[estimators][property]") {
    const auto m1 = RecorderModel::with_bits(1);
    auto params = DetectionParams::make(64, 8, 1);
    SlidingRoughEstimator<uint8_t> sre(8, m1);
    SlidingLinearEstimator<uint8_t> sle(64, m1);
    HashFamily h(0xBEE);
    SplitMix64 rng(3);
    for (int window = 0; window < 20; ++window) {
        BitmapRough bre(8);
        BitmapLinear ble(64);
        const int pairs = 1 + static_cast<int>(rng.next_below(200));
        for (int i = 0; i < pairs; ++i) {
            const auto bip = static_cast<uint32_t>(rng.next_below(500));
            sre.offer(bip, params, h);
            bre.offer(bip, params, h);
            sle.offer(bip, h);
            ble.offer(bip, h);
        }
        REQUIRE(sre.weight(1) == bre.weight());
        REQUIRE(sle.weight(1) == ble.weight());
        sre.slide();  // expires everything at z=1
        sle.slide();
    }
}
