#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "sspread/generator.hpp"
#include "sspread/pipeline.hpp"
#include "sspread/report_io.hpp"

using namespace sspread;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sspread-pipe-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

RunConfig small_run() {
    RunConfig rc;
    rc.sea.rows = 2;
    rc.sea.cols = 256;
    rc.sea.rough_slots = 8;
    rc.sea.linear_slots = 64;
    rc.sea.recorder_bits = 8;
    rc.sea.window = 3;
    rc.sea.theta = 32;
    rc.sea.seed = 0xBEEF;
    rc.slice_seconds = 1;
    rc.workers = 1;
    return rc;
}

PlantSpec small_spec(uint64_t seed) {
    PlantSpec spec;
    spec.seed = seed;
    spec.slices = 9;
    spec.window = 3;
    spec.slice_seconds = 1;
    spec.background = {50, 512, 250, 1.0};
    spec.plants.push_back({0x0AC80001, 80, 0, 0xFFFFFFFFu});
    spec.plants.push_back({0x0AC80002, 100, 0, 0xFFFFFFFFu});
    return spec;
}

std::string render_reports(const std::vector<WindowReport>& reports) {
    std::ostringstream out;
    for (const auto& r : reports) write_report_line(out, r);
    return out.str();
}

}  // namespace

TEST_CASE("detect pipeline reports every complete window", "[pipeline]") {
    TempDir dir;
    const auto trace = dir.file("t.bin");
    write_trace(trace, generate_trace(small_spec(1)), TraceFormat::binary);

    RunConfig rc = small_run();
    DetectPipeline<uint8_t> pipeline(rc);
    std::vector<WindowReport> reports;
    pipeline.run(trace, [&](const WindowReport& r) { reports.push_back(r); });

    REQUIRE(reports.size() == 7);  // 9 slices, window 3
    for (size_t i = 0; i < reports.size(); ++i) {
        CHECK(reports[i].window_start == i);
        CHECK(reports[i].window == 3);
    }
    CHECK(pipeline.slices_seen() == 9);

    // both plants run well past theta and must be flagged in every window
    for (const auto& r : reports) {
        std::set<uint32_t> flagged;
        for (const auto& e : r.entries)
            if (e.is_super) flagged.insert(e.host);
        CHECK(flagged.count(0x0AC80001) == 1);
        CHECK(flagged.count(0x0AC80002) == 1);
    }
}

TEST_CASE("pipeline matches a scripted replay of the sketch API", "[pipeline]") {
    TempDir dir;
    const auto trace = dir.file("t.bin");
    const auto records = generate_trace(small_spec(2));
    write_trace(trace, records, TraceFormat::binary);

    RunConfig rc = small_run();
    DetectPipeline<uint8_t> pipeline(rc);
    std::vector<WindowReport> reports;
    pipeline.run(trace, [&](const WindowReport& r) { reports.push_back(r); });

    // replay: same structure driven by hand
    EstimatorArray<uint8_t> sea(rc.sea);
    CandidateList csip;
    std::vector<WindowReport> expected;
    OrientStats stats;
    SlicePartitioner part(rc.slice_seconds);
    const SlicePartitioner::Sink sink = [&](uint64_t id, std::vector<TraceRecord>&& slice) {
        std::vector<uint32_t> found;
        for (const auto& r : slice) sea.scan_ip_pair(r.src, r.dst, found);
        for (uint32_t h : found) csip.insert(h);
        if (id + 1 >= rc.sea.window) expected.push_back(sea.report_window(csip, id + 1 - rc.sea.window));
        csip = sea.slide(csip);
    };
    for (const auto& r : records) {
        const auto oriented = orient_record(r, rc.a_network, stats);
        if (oriented) part.push(*oriented, sink);
    }
    part.finish(sink);

    REQUIRE(reports.size() == expected.size());
    for (size_t i = 0; i < reports.size(); ++i) {
        REQUIRE(reports[i].entries.size() == expected[i].entries.size());
        for (size_t j = 0; j < reports[i].entries.size(); ++j) {
            const auto& a = reports[i].entries[j];
            const auto& b = expected[i].entries[j];
            REQUIRE(a.host == b.host);
            REQUIRE(a.union_weight == b.union_weight);
            REQUIRE(a.estimate == b.estimate);
            REQUIRE(a.is_super == b.is_super);
        }
    }
}

TEST_CASE("worker count does not change report bytes", "[pipeline]") {
    TempDir dir;
    const auto trace = dir.file("t.bin");
    auto spec = small_spec(3);
    spec.background.pairs_per_slice = 3000;  // enough records to engage the pool
    write_trace(trace, generate_trace(spec), TraceFormat::binary);

    std::string rendered[3];
    int idx = 0;
    for (uint32_t workers : {1u, 3u, 8u}) {
        RunConfig rc = small_run();
        rc.workers = workers;
        DetectPipeline<uint8_t> pipeline(rc);
        std::vector<WindowReport> reports;
        pipeline.run(trace, [&](const WindowReport& r) { reports.push_back(r); });
        rendered[idx++] = render_reports(reports);
    }
    CHECK(rendered[0] == rendered[1]);
    CHECK(rendered[0] == rendered[2]);
}

TEST_CASE("pipeline orientation and empty traces", "[pipeline]") {
    TempDir dir;
    RunConfig rc = small_run();

    SECTION("empty trace produces no reports and no slices") {
        const auto trace = dir.file("empty.csv");
        std::ofstream{trace};
        DetectPipeline<uint8_t> pipeline(rc);
        int reports = 0;
        pipeline.run(trace, [&](const WindowReport&) { ++reports; });
        CHECK(reports == 0);
        CHECK(pipeline.slices_seen() == 0);
    }

    SECTION("far-side records are flipped, ambiguous ones dropped") {
        const auto trace = dir.file("mixed.csv");
        {
            std::ofstream out(trace);
            out << "100,10.0.0.1,8.8.8.8\n"      // kept
                << "101,9.9.9.9,10.0.0.1\n"      // flipped
                << "102,10.0.0.1,10.0.0.2\n"     // both in A: dropped
                << "103,8.8.8.8,9.9.9.9\n";      // neither: dropped
        }
        DetectPipeline<uint8_t> pipeline(rc);
        pipeline.run(trace, [](const WindowReport&) {});
        CHECK(pipeline.orient_stats().kept == 1);
        CHECK(pipeline.orient_stats().flipped == 1);
        CHECK(pipeline.orient_stats().dropped_both == 1);
        CHECK(pipeline.orient_stats().dropped_neither == 1);
        CHECK(pipeline.pairs_scanned() == 2);
    }

    SECTION("configuration validation") {
        RunConfig bad = rc;
        bad.sea.window = 2;
        bad.sea.recorder_bits = 1;  // window exceeds 2^1 - 1
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = rc;
        bad.sea.cols = 200;  // not a power of two
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = rc;
        bad.workers = 0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("oracle runner cross-checks engines and matches the generator", "[pipeline][oracle]") {
    TempDir dir;
    const auto trace = dir.file("t.bin");
    const auto spec = small_spec(4);
    write_trace(trace, generate_trace(spec), TraceFormat::binary);

    RunConfig rc = small_run();
    std::vector<TruthEntry> truth;
    run_oracle(rc, trace, OracleEngine::both, 1, [&](const TruthEntry& t) { truth.push_back(t); });
    REQUIRE_FALSE(truth.empty());

    // planted hosts carry their constructed per-window cardinality
    for (const auto& t : truth) {
        for (size_t p = 0; p < spec.plants.size(); ++p) {
            if (t.host != spec.plants[p].host) continue;
            REQUIRE(t.cardinality ==
                    planted_cardinality_in_window(spec, p, t.window_start, rc.sea.window));
        }
    }

    // min-cardinality filter keeps truth sorted and thresholded
    std::vector<TruthEntry> supers;
    run_oracle(rc, trace, OracleEngine::ring, rc.sea.theta,
               [&](const TruthEntry& t) { supers.push_back(t); });
    for (const auto& t : supers) CHECK(t.cardinality >= rc.sea.theta);
    const std::set<uint32_t> plant_hosts{0x0AC80001, 0x0AC80002};
    for (const auto& t : supers) CHECK(plant_hosts.count(t.host) == 1);

    SECTION("the pair guard refuses oversized traces") {
        CHECK_THROWS_AS(
            run_oracle(rc, trace, OracleEngine::ring, 1, [](const TruthEntry&) {}, 100),
            InputError);
    }

    SECTION("a background-only trace below theta yields an empty truth set") {
        auto bg_spec = small_spec(5);
        bg_spec.plants.clear();
        const auto bg_trace = dir.file("bg.bin");
        write_trace(bg_trace, generate_trace(bg_spec), TraceFormat::binary);
        std::vector<TruthEntry> bg_truth;
        run_oracle(rc, bg_trace, OracleEngine::ring, rc.sea.theta,
                   [&](const TruthEntry& t) { bg_truth.push_back(t); });
        CHECK(bg_truth.empty());
    }
}

TEST_CASE("window evaluation against truth", "[pipeline][evaluate]") {
    // hand-built fixture over three windows
    std::vector<WindowReport> reports(3);
    std::vector<TruthEntry> truth;
    const auto entry = [](uint32_t host, bool super) {
        WindowEntry e;
        e.host = host;
        e.union_weight = 10;
        e.estimate = 100.0;
        e.is_super = super;
        return e;
    };
    for (uint64_t w = 0; w < 3; ++w) {
        reports[w].window_start = w;
        reports[w].window = 1;
    }
    // window 0: perfect {1,2}; window 1: miss 2 of 10 + 1 extra; window 2: no truth
    reports[0].entries = {entry(1, true), entry(2, true), entry(3, false)};
    truth.push_back({0, 1, 50});
    truth.push_back({0, 2, 60});
    for (uint32_t h = 1; h <= 8; ++h) reports[1].entries.push_back(entry(h, true));
    reports[1].entries.push_back(entry(99, true));
    for (uint32_t h = 1; h <= 10; ++h) truth.push_back({1, h, 40});
    reports[2].entries = {entry(5, false)};

    const auto ev = evaluate_windows(reports, truth);
    REQUIRE(ev.windows.size() == 3);
    REQUIRE(ev.windows[0].metrics);
    CHECK(ev.windows[0].metrics->tfr == 0.0);
    REQUIRE(ev.windows[1].metrics);
    CHECK(ev.windows[1].metrics->fpr == Catch::Approx(0.1));
    CHECK(ev.windows[1].metrics->fnr == Catch::Approx(0.2));
    CHECK(ev.windows[1].metrics->tfr == Catch::Approx(0.3));
    CHECK_FALSE(ev.windows[2].metrics);  // empty truth: undefined
    CHECK(ev.defined_windows == 2);
    CHECK(ev.mean_tfr == Catch::Approx(0.15));

    SECTION("a truth window missing from the report is an error") {
        truth.push_back({7, 1, 50});
        CHECK_THROWS_AS(evaluate_windows(reports, truth), InputError);
    }
}

TEST_CASE("report serialization round trip", "[pipeline][report]") {
    WindowReport r;
    r.window_start = 42;
    r.window = 30;
    WindowEntry a;
    a.host = 0x0A010203;
    a.union_weight = 812;
    a.estimate = 1234.5678901234;
    a.is_super = true;
    WindowEntry b;
    b.host = 0x0AFFFFFE;
    b.union_weight = 1024;
    b.estimate = std::nullopt;  // saturated
    b.is_super = true;
    r.entries = {a, b};

    std::ostringstream out;
    write_report_line(out, r);
    const auto parsed = parse_report_line(out.str());
    CHECK(parsed.window_start == 42);
    CHECK(parsed.window == 30);
    REQUIRE(parsed.entries.size() == 2);
    CHECK(parsed.entries[0].host == a.host);
    CHECK(parsed.entries[0].union_weight == 812);
    CHECK(parsed.entries[0].estimate == a.estimate);  // exact double round trip
    CHECK_FALSE(parsed.entries[1].estimate.has_value());
    CHECK(parsed.entries[1].is_super);

    CHECK_THROWS_AS(parse_report_line("{\"schema\":\"other\"}"), InputError);
    CHECK_THROWS_AS(parse_report_line("not json"), InputError);
    CHECK_THROWS_AS(parse_report_line("{\"schema\":\"sspread.report.v1\"}"), InputError);
}
