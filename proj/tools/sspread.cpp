// Command-line front end: trace generation, super-point detection, exact
// ground truth, report evaluation, detection-probability tables and a
// throughput bench over the same pipeline the library exposes.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sspread/generator.hpp"
#include "sspread/pipeline.hpp"
#include "sspread/probmodel.hpp"
#include "sspread/report_io.hpp"
#include "sspread/snapshot.hpp"

namespace {

using namespace sspread;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitInternal = 4;

struct DetectOptions {
    RunConfig run;
    std::string config_path;
    std::string a_network = "10.0.0.0/8";
    std::string trace_path;
    std::string out_path = "-";
    bool timings = false;
};

// Shared sketch/window flags. Values given on the command line override the
// config file; SSPREAD_WORKERS overrides both.
void add_run_options(CLI::App* cmd, DetectOptions& opt) {
    cmd->add_option("--config", opt.config_path, "JSON config file (flags override it)");
    cmd->add_option("--theta", opt.run.sea.theta, "super-point cardinality threshold");
    cmd->add_option("--rows", opt.run.sea.rows, "estimator array rows");
    cmd->add_option("--cols", opt.run.sea.cols, "estimator array columns (power of two)");
    cmd->add_option("--rough", opt.run.sea.rough_slots, "recorders per rough estimator");
    cmd->add_option("--linear", opt.run.sea.linear_slots, "recorders per linear estimator");
    cmd->add_option("--bits", opt.run.sea.recorder_bits, "recorder width in bits");
    cmd->add_option("--window", opt.run.sea.window, "window length in slices");
    cmd->add_option("--seed", opt.run.sea.seed, "hash seed");
    cmd->add_option("--slice-seconds", opt.run.slice_seconds, "slice duration in seconds");
    cmd->add_option("--a-network", opt.a_network, "monitored network CIDR");
    cmd->add_option("--workers", opt.run.workers, "scan worker threads");
}

void apply_config_file(const CLI::App* cmd, DetectOptions& opt) {
    if (opt.config_path.empty()) return;
    std::ifstream in(opt.config_path);
    if (!in) throw InputError("cannot open config file: " + opt.config_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config file " + opt.config_path + ": " + e.what());
    }
    const auto take = [&](const char* flag, const char* key, auto& slot) {
        if (cmd->count(flag) == 0 && j.contains(key)) {
            try {
                j.at(key).get_to(slot);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config key '") + key + "': " + e.what());
            }
        }
    };
    take("--theta", "theta", opt.run.sea.theta);
    take("--rows", "rows", opt.run.sea.rows);
    take("--cols", "cols", opt.run.sea.cols);
    take("--rough", "rough", opt.run.sea.rough_slots);
    take("--linear", "linear", opt.run.sea.linear_slots);
    take("--bits", "bits", opt.run.sea.recorder_bits);
    take("--window", "window", opt.run.sea.window);
    take("--seed", "seed", opt.run.sea.seed);
    take("--slice-seconds", "slice_seconds", opt.run.slice_seconds);
    take("--a-network", "a_network", opt.a_network);
    take("--workers", "workers", opt.run.workers);
}

void finalize_run_config(const CLI::App* cmd, DetectOptions& opt) {
    apply_config_file(cmd, opt);
    if (const char* env = std::getenv("SSPREAD_WORKERS")) {
        try {
            opt.run.workers = static_cast<uint32_t>(std::stoul(env));
        } catch (const std::exception&) {
            throw ConfigError("SSPREAD_WORKERS is not a number: " + std::string(env));
        }
    }
    try {
        opt.run.a_network = CidrPrefix::parse(opt.a_network);
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    opt.run.validate();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot open output file: " + path);
    return out;
}

void warn_drops(const OrientStats& stats) {
    if (stats.dropped() == 0) return;
    std::cerr << "warning: dropped " << stats.dropped() << " ambiguous records ("
              << stats.dropped_both << " with both sides in the monitored network, "
              << stats.dropped_neither << " with neither); flipped " << stats.flipped << "\n";
}

PlantSpec parse_plant_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open generator spec: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed generator spec " + path + ": " + e.what());
    }
    PlantSpec spec;
    try {
        spec.seed = j.value("seed", spec.seed);
        spec.start_ts = j.value("start_ts", spec.start_ts);
        spec.slice_seconds = j.value("slice_seconds", spec.slice_seconds);
        spec.slices = j.value("slices", spec.slices);
        spec.window = j.value("window", spec.window);
        if (j.contains("a_base")) spec.a_base = parse_ipv4(j.at("a_base").get<std::string>()).value();
        if (j.contains("b_base")) spec.b_base = parse_ipv4(j.at("b_base").get<std::string>()).value();
        if (j.contains("background")) {
            const auto& b = j.at("background");
            spec.background.a_hosts = b.value("a_hosts", spec.background.a_hosts);
            spec.background.b_hosts = b.value("b_hosts", spec.background.b_hosts);
            spec.background.pairs_per_slice = b.value("pairs_per_slice", spec.background.pairs_per_slice);
            spec.background.skew = b.value("skew", spec.background.skew);
        }
        for (const auto& pj : j.value("plants", nlohmann::json::array())) {
            PlantedHost p;
            const auto host = parse_ipv4(pj.at("host").get<std::string>());
            if (!host) throw InputError("malformed plant host address");
            p.host = *host;
            p.cardinality = pj.at("cardinality").get<uint32_t>();
            if (pj.contains("slices") && pj.at("slices").is_array()) {
                p.first_slice = pj.at("slices").at(0).get<uint32_t>();
                p.last_slice = pj.at("slices").at(1).get<uint32_t>();
            }
            spec.plants.push_back(p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed generator spec " + path + ": " + e.what());
    } catch (const std::bad_optional_access&) {
        throw InputError("malformed address in generator spec " + path);
    }
    return spec;
}

int cmd_generate(const std::string& spec_path, const std::string& out_path,
                 const std::string& format_flag) {
    PlantSpec spec = parse_plant_spec(spec_path);
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto records = generate_trace(spec);
    TraceFormat format = TraceFormat::binary;
    if (format_flag == "csv") format = TraceFormat::csv;
    else if (format_flag == "binary") format = TraceFormat::binary;
    else if (out_path.size() >= 4 && out_path.substr(out_path.size() - 4) == ".csv")
        format = TraceFormat::csv;
    write_trace(out_path, records, format);
    std::cerr << "wrote " << records.size() << " records over " << spec.slices << " slices to "
              << out_path << "\n";
    return kExitOk;
}

int cmd_detect(const CLI::App* cmd, DetectOptions& opt) {
    finalize_run_config(cmd, opt);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (opt.out_path != "-") {
        file = open_out(opt.out_path);
        out = &file;
    }
    return with_recorder_word(opt.run.sea.recorder_bits, [&](auto word) {
        using Word = decltype(word);
        DetectPipeline<Word> pipeline(opt.run);
        pipeline.run(opt.trace_path, [&](const WindowReport& report) {
            write_report_line(*out, report, opt.timings);
        });
        warn_drops(pipeline.orient_stats());
        std::cerr << "scanned " << pipeline.pairs_scanned() << " pairs over "
                  << pipeline.slices_seen() << " slices\n";
        return kExitOk;
    });
}

int cmd_oracle(const CLI::App* cmd, DetectOptions& opt, const std::string& engine_flag,
               std::optional<uint64_t> min_cardinality, uint64_t max_pairs) {
    finalize_run_config(cmd, opt);
    OracleEngine engine = OracleEngine::ring;
    if (engine_flag == "drmap") engine = OracleEngine::pair_recorders;
    else if (engine_flag == "both") engine = OracleEngine::both;
    else if (engine_flag != "ring") throw ConfigError("unknown oracle engine: " + engine_flag);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (opt.out_path != "-") {
        file = open_out(opt.out_path);
        out = &file;
    }
    const uint64_t min_card = min_cardinality.value_or(opt.run.sea.theta);
    run_oracle(opt.run, opt.trace_path, engine, min_card,
               [&](const TruthEntry& t) { write_truth_line(*out, t); }, max_pairs);
    return kExitOk;
}

int cmd_evaluate(const std::string& report_path, const std::string& truth_path,
                 const std::string& csv_path) {
    const auto reports = read_report(report_path);
    const auto truth = read_truth(truth_path);
    const Evaluation ev = evaluate_windows(reports, truth);

    std::ofstream csv;
    if (!csv_path.empty()) {
        csv = open_out(csv_path);
        csv << "window,truth,detected,false_positives,false_negatives,fpr,fnr,tfr\n";
    }
    std::cout << std::left << std::setw(10) << "window" << std::right << std::setw(8) << "truth"
              << std::setw(10) << "detected" << std::setw(10) << "fpr" << std::setw(10) << "fnr"
              << std::setw(10) << "tfr" << "\n";
    for (const auto& ws : ev.windows) {
        std::cout << std::left << std::setw(10) << ws.window_start << std::right;
        if (ws.metrics) {
            const auto& m = *ws.metrics;
            std::cout << std::setw(8) << m.truth_size << std::setw(10) << m.detected_size
                      << std::setw(10) << std::fixed << std::setprecision(4) << m.fpr
                      << std::setw(10) << m.fnr << std::setw(10) << m.tfr << "\n";
            if (csv.is_open())
                csv << ws.window_start << ',' << m.truth_size << ',' << m.detected_size << ','
                    << m.false_positives << ',' << m.false_negatives << ',' << m.fpr << ',' << m.fnr
                    << ',' << m.tfr << "\n";
        } else {
            std::cout << std::setw(8) << 0 << std::setw(10) << "-" << std::setw(10) << "-"
                      << std::setw(10) << "-" << std::setw(10) << "-"
                      << "  (no true super points; rates undefined)\n";
            if (csv.is_open()) csv << ws.window_start << ",0,,,,,,\n";
        }
    }
    if (ev.defined_windows > 0) {
        std::cout << std::left << std::setw(10) << "mean" << std::right << std::setw(8) << ""
                  << std::setw(10) << "" << std::setw(10) << std::fixed << std::setprecision(4)
                  << ev.mean_fpr << std::setw(10) << ev.mean_fnr << std::setw(10) << ev.mean_tfr
                  << "\n";
        if (csv.is_open())
            csv << "mean,,,,," << ev.mean_fpr << ',' << ev.mean_fnr << ',' << ev.mean_tfr << "\n";
    }
    return kExitOk;
}

int cmd_prob(uint32_t theta, uint32_t rough_slots, std::optional<uint32_t> tau_override,
             std::optional<uint32_t> weight_override, uint64_t n_min, uint64_t n_max,
             uint64_t n_step, const std::string& out_path) {
    if (rough_slots < 1 || n_step < 1 || n_min > n_max) throw ConfigError("bad sweep parameters");
    const uint32_t tau = tau_override.value_or(sampling_exponent(theta, rough_slots));
    const uint32_t w = weight_override.value_or(super_weight_threshold(kSuperTestRatio, rough_slots));
    SurjectionTable table(512, std::max(16u, rough_slots));
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (out_path != "-") {
        file = open_out(out_path);
        out = &file;
    }
    *out << "n,detection_probability\n";
    for (uint64_t n = n_min; n <= n_max; n += n_step)
        *out << n << ',' << std::setprecision(10) << pr_weight_at_least(table, n, rough_slots, tau, w)
             << '\n';
    return kExitOk;
}

int cmd_bench(const CLI::App* cmd, DetectOptions& opt) {
    finalize_run_config(cmd, opt);
    return with_recorder_word(opt.run.sea.recorder_bits, [&](auto word) {
        using Word = decltype(word);
        DetectPipeline<Word> pipeline(opt.run);
        double max_scan = 0, max_estimate = 0;
        uint64_t windows = 0;
        const auto t0 = std::chrono::steady_clock::now();
        pipeline.run(opt.trace_path, [&](const WindowReport& report) {
            max_scan = std::max(max_scan, report.scan_ms);
            max_estimate = std::max(max_estimate, report.estimate_ms);
            ++windows;
        });
        const double total_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        warn_drops(pipeline.orient_stats());

        const double pairs = static_cast<double>(pipeline.pairs_scanned());
        const double slices = static_cast<double>(std::max<uint64_t>(1, pipeline.slices_seen()));
        std::cout << "pairs:            " << pipeline.pairs_scanned() << "\n"
                  << "slices:           " << pipeline.slices_seen() << "\n"
                  << "windows:          " << windows << "\n"
                  << "wall time:        " << std::fixed << std::setprecision(3) << total_s << " s\n"
                  << "throughput:       " << std::setprecision(0) << (total_s > 0 ? pairs / total_s : 0)
                  << " pairs/s\n"
                  << "scan time/slice:  mean " << std::setprecision(3)
                  << pipeline.total_scan_ms() / slices << " ms, max " << max_scan << " ms\n"
                  << "estimate/window:  mean "
                  << (windows ? pipeline.total_estimate_ms() / static_cast<double>(windows) : 0.0)
                  << " ms, max " << max_estimate << " ms\n"
                  << "slice budget:     " << opt.run.slice_seconds * 1000.0 << " ms\n";
        return kExitOk;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sliding-window super-point detection and cardinality estimation"};
    app.require_subcommand(1);

    // generate
    std::string gen_spec, gen_out, gen_format = "auto";
    auto* generate = app.add_subcommand("generate", "build a synthetic trace from a spec file");
    generate->add_option("--spec", gen_spec, "generator spec (JSON)")->required();
    generate->add_option("--out", gen_out, "output trace path")->required();
    generate->add_option("--format", gen_format, "csv | binary | auto (by extension)");

    // detect
    DetectOptions det;
    auto* detect = app.add_subcommand("detect", "scan a trace and report super points per window");
    add_run_options(detect, det);
    detect->add_option("--trace", det.trace_path, "input trace")->required();
    detect->add_option("--out", det.out_path, "report output (JSON lines; - for stdout)");
    detect->add_flag("--timings", det.timings,
                     "include per-window timings (breaks byte-for-byte report comparability)");

    // oracle
    DetectOptions orc;
    std::string engine = "ring";
    std::optional<uint64_t> min_card;
    uint64_t max_pairs = kOraclePairGuard;
    auto* oracle = app.add_subcommand("oracle", "exact ground-truth cardinalities per window");
    add_run_options(oracle, orc);
    oracle->add_option("--trace", orc.trace_path, "input trace")->required();
    oracle->add_option("--out", orc.out_path, "truth output (CSV lines; - for stdout)");
    oracle->add_option("--engine", engine, "ring | drmap | both (cross-check)");
    oracle->add_option("--min-cardinality", min_card, "emit hosts at or above this (default: theta)");
    oracle->add_option("--max-pairs", max_pairs, "refuse traces larger than this (memory guard)");

    // evaluate
    std::string eval_report, eval_truth, eval_csv;
    auto* evaluate = app.add_subcommand("evaluate", "compare a report against ground truth");
    evaluate->add_option("--report", eval_report, "detection report (JSON lines)")->required();
    evaluate->add_option("--truth", eval_truth, "oracle truth file")->required();
    evaluate->add_option("--csv", eval_csv, "also write per-window metrics CSV here");

    // prob
    uint32_t prob_theta = 1024, prob_rough = 8;
    std::optional<uint32_t> prob_tau, prob_weight;
    uint64_t prob_nmin = 64, prob_nmax = 4096, prob_nstep = 64;
    std::string prob_out = "-";
    auto* prob = app.add_subcommand("prob", "detection-probability calibration table");
    prob->add_option("--theta", prob_theta, "cardinality threshold");
    prob->add_option("--rough", prob_rough, "rough estimator slots");
    prob->add_option("--tau", prob_tau, "override the sampling exponent");
    prob->add_option("--weight", prob_weight, "override the weight threshold");
    prob->add_option("--n-min", prob_nmin, "sweep start");
    prob->add_option("--n-max", prob_nmax, "sweep end (inclusive)");
    prob->add_option("--n-step", prob_nstep, "sweep step");
    prob->add_option("--out", prob_out, "CSV output (- for stdout)");

    // bench
    DetectOptions ben;
    auto* bench = app.add_subcommand("bench", "throughput and per-phase timing report");
    add_run_options(bench, ben);
    bench->add_option("--trace", ben.trace_path, "input trace")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen_spec, gen_out, gen_format);
        if (detect->parsed()) return cmd_detect(detect, det);
        if (oracle->parsed()) return cmd_oracle(oracle, orc, engine, min_card, max_pairs);
        if (evaluate->parsed()) return cmd_evaluate(eval_report, eval_truth, eval_csv);
        if (prob->parsed()) return cmd_prob(prob_theta, prob_rough, prob_tau, prob_weight,
                                            prob_nmin, prob_nmax, prob_nstep, prob_out);
        if (bench->parsed()) return cmd_bench(bench, ben);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitConfig;
}
