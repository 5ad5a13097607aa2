#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "confluence/bench.hpp"
#include "confluence/detection_io.hpp"
#include "confluence/evaluation.hpp"
#include "confluence/log.hpp"
#include "confluence/pipeline.hpp"
#include "confluence/report.hpp"
#include "confluence/suppression.hpp"

namespace confluence::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kConfigError = 2, kEmptyGroundTruth = 3 };

/// Raw flag values shared by the subcommands; turned into a validated
/// SuppressionConfig before any file is touched.
struct ConfigFlags {
    std::string algorithm = "confluence";
    double ct = 0.7;
    double iou_threshold = 0.5;
    std::string decay;  // empty: hard, or gaussian for soft_nms
    double sigma = 0.5;
    double score_floor = 0.01;
    bool class_agnostic = false;

    SuppressionConfig resolve() const {
        SuppressionConfig c;
        const auto algo = parse_algorithm(algorithm);
        if (!algo) throw ConfigError("unknown algorithm '" + algorithm + "'");
        c.algorithm = *algo;
        c.confluence_threshold = ct;
        c.iou_threshold = iou_threshold;
        if (decay.empty()) {
            c.decay = c.algorithm == Algorithm::soft_nms ? Decay::gaussian : Decay::hard;
        } else {
            const auto d = parse_decay(decay);
            if (!d) throw ConfigError("unknown decay '" + decay + "'");
            c.decay = *d;
        }
        c.sigma = sigma;
        c.score_floor = score_floor;
        c.class_agnostic = class_agnostic;
        c.validate();
        return c;
    }
};

inline void add_config_flags(CLI::App& cmd, ConfigFlags& f, bool allow_none = false) {
    cmd.add_option("--algorithm", f.algorithm,
                   allow_none ? "confluence|confluence_nms|greedy_nms|soft_nms|none" : "confluence|confluence_nms|greedy_nms|soft_nms")
        ->capture_default_str();
    cmd.add_option("--ct", f.ct, "Confluence threshold C_t in (0, 2]")->capture_default_str();
    cmd.add_option("--iou-threshold", f.iou_threshold, "IoU threshold for greedy/soft NMS")->capture_default_str();
    cmd.add_option("--decay", f.decay, "hard|linear|gaussian (default hard; gaussian for soft_nms)");
    cmd.add_option("--sigma", f.sigma, "Gaussian decay width")->capture_default_str();
    cmd.add_option("--score-floor", f.score_floor, "Drop detections scoring below this")->capture_default_str();
    cmd.add_flag("--class-agnostic", f.class_agnostic, "Suppress across classes");
}

/// Parses "algorithm[,key=value...]" where keys mirror the flag names
/// (ct, iou-threshold, decay, sigma, score-floor, class-agnostic).
inline SuppressionConfig parse_config_spec(const std::string& spec) {
    ConfigFlags f;
    std::stringstream ss(spec);
    std::string part;
    bool first = true;
    while (std::getline(ss, part, ',')) {
        if (first) {
            f.algorithm = part;
            first = false;
            continue;
        }
        const auto eq = part.find('=');
        const std::string key = part.substr(0, eq);
        const std::string value = eq == std::string::npos ? "" : part.substr(eq + 1);
        auto number = [&]() {
            double v = 0.0;
            if (!detail::parse_number(value, v)) throw ConfigError("config '" + spec + "': bad number for " + key);
            return v;
        };
        if (key == "ct") f.ct = number();
        else if (key == "iou-threshold") f.iou_threshold = number();
        else if (key == "decay") f.decay = value;
        else if (key == "sigma") f.sigma = number();
        else if (key == "score-floor") f.score_floor = number();
        else if (key == "class-agnostic") f.class_agnostic = value.empty() || value == "true" || value == "1";
        else throw ConfigError("config '" + spec + "': unknown key '" + key + "'");
    }
    return f.resolve();
}

inline std::pair<double, double> parse_pair(const std::string& text, const char* what) {
    const auto colon = text.find(':');
    double a = 0.0, b = 0.0;
    if (colon == std::string::npos || !detail::parse_number(text.substr(0, colon), a) ||
        !detail::parse_number(text.substr(colon + 1), b)) {
        throw ConfigError(std::string(what) + " must look like lo:hi, got '" + text + "'");
    }
    return {a, b};
}

/// "start:stop:step", inclusive.
inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        double v = 0.0;
        if (!detail::parse_number(item, v)) throw ConfigError("grid must look like start:stop:step, got '" + text + "'");
        parts.push_back(v);
    }
    if (parts.size() != 3) throw ConfigError("grid must look like start:stop:step, got '" + text + "'");
    return make_grid(parts[0], parts[1], parts[2]);
}

inline report::Format parse_format(const std::string& name) {
    if (name == "text") return report::Format::text;
    if (name == "json") return report::Format::json;
    if (name == "csv") return report::Format::csv;
    throw ConfigError("unknown report format '" + name + "'");
}

inline DetectionFormat parse_det_format(const std::string& name) {
    if (name == "json") return DetectionFormat::json;
    if (name == "csv") return DetectionFormat::csv;
    throw ConfigError("unknown detection file format '" + name + "'");
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bounding-box suppression with Confluence, Confluence-NMS, Greedy-NMS and Soft-NMS"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ConfigFlags flags;
    std::string input, output, gt_path;
    std::string format = "text";
    std::string det_format = "json";
    std::size_t jobs = default_jobs();
    bool strict_io = false;
    std::uint64_t seed = 42;
    std::string grid, band;
    std::vector<std::size_t> sizes{500, 1000, 2000};
    std::size_t repetitions = 5;
    double min_sample_ms = 40.0;
    std::vector<std::string> algorithms;
    std::vector<std::string> configs;

    auto add_io = [&](CLI::App* cmd, bool needs_gt) {
        cmd->add_option("-i,--input", input, "Detection file")->required();
        if (needs_gt) cmd->add_option("-g,--gt", gt_path, "COCO annotation file")->required();
        cmd->add_option("--det-format", det_format, "Detection file format: json|csv")->capture_default_str();
        cmd->add_flag("--strict-io", strict_io, "Reject invalid records instead of dropping them");
        cmd->add_option("--jobs", jobs, "Worker threads for per-image processing")->check(CLI::PositiveNumber);
    };

    auto* run_cmd = app.add_subcommand("run", "Suppress detections and write the filtered file");
    add_io(run_cmd, false);
    add_config_flags(*run_cmd, flags);
    run_cmd->add_option("-o,--output", output, "Output detection file (default: stdout)");

    auto* eval_cmd = app.add_subcommand("eval", "Optionally suppress, then report COCO-style AP/AR");
    add_io(eval_cmd, true);
    add_config_flags(*eval_cmd, flags, true);
    eval_cmd->add_option("--format", format, "text|json|csv")->capture_default_str();
    eval_cmd->add_option("-o,--output", output, "Report file (default: stdout)");

    auto* sweep_cmd = app.add_subcommand("sweep", "AP as a function of the suppression threshold");
    add_io(sweep_cmd, true);
    add_config_flags(*sweep_cmd, flags);
    sweep_cmd->add_option("--grid", grid, "start:stop:step (default 0.1:1.5:0.1 for C_t, 0.1:0.9:0.1 for IoU)");
    sweep_cmd->add_option("--band", band, "lo:hi range for the AP stability figure (default: whole grid)");
    sweep_cmd->add_option("--format", format, "csv|json|text");
    sweep_cmd->add_option("-o,--output", output, "Report file (default: stdout)");

    auto* bench_cmd = app.add_subcommand("bench", "Time algorithms on seeded synthetic scenes");
    bench_cmd->add_option("--sizes", sizes, "Detection counts")->delimiter(',');
    bench_cmd->add_option("--repetitions", repetitions, "Timed repetitions per size")->capture_default_str();
    bench_cmd->add_option("--algorithm", algorithms, "Algorithms to time (default: all)")->delimiter(',');
    bench_cmd->add_option("--ct", flags.ct)->capture_default_str();
    bench_cmd->add_option("--iou-threshold", flags.iou_threshold)->capture_default_str();
    bench_cmd->add_option("--decay", flags.decay);
    bench_cmd->add_option("--sigma", flags.sigma)->capture_default_str();
    bench_cmd->add_option("--seed", seed, "Scene generator seed")->capture_default_str();
    bench_cmd->add_option("--min-sample-ms", min_sample_ms, "Minimum wall time per repetition")->capture_default_str();
    bench_cmd->add_option("--format", format, "text|json|csv")->capture_default_str();

    auto* compare_cmd = app.add_subcommand("compare", "Evaluate several configurations side by side");
    add_io(compare_cmd, true);
    compare_cmd->add_option("--config", configs, "algorithm[,key=value...]; repeat for each row")->required();
    compare_cmd->add_option("--format", format, "text|json|csv")->capture_default_str();
    compare_cmd->add_option("-o,--output", output, "Report file (default: stdout)");

    std::vector<std::string> argv_storage{"confluence"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    auto write_report = [&](auto&& emit) {
        if (output.empty()) {
            emit(out);
            return;
        }
        std::ofstream file(output, std::ios::binary);
        if (!file) throw IoError("cannot open '" + output + "' for writing");
        emit(file);
        if (!file) throw IoError("failed writing '" + output + "'");
    };

    try {
        // Everything below validates flags before touching the filesystem.
        if (*run_cmd) {
            const auto config = flags.resolve();
            const LoadOptions load{strict_io, config.score_floor, parse_det_format(det_format)};
            const auto loaded = load_detections(std::filesystem::path(input), load);
            log::info("loaded ", loaded.records, " records over ", loaded.by_image.size(), " images");
            const auto results = suppress_all(loaded.by_image, config, jobs);
            std::size_t kept = 0;
            for (const auto& [_, r] : results) kept += r.kept.size();
            const std::size_t removed = loaded.records - kept;
            std::ostream& counts = output.empty() ? err : out;
            if (output.empty()) {
                write_detections(results, out, load.format);
            } else {
                write_detections(results, std::filesystem::path(output), load.format);
            }
            counts << "records=" << loaded.records << " kept=" << kept << " removed=" << removed
                   << " dropped_low_score=" << loaded.dropped_low_score
                   << " dropped_invalid=" << loaded.dropped_invalid << '\n';
            return kOk;
        }

        if (*eval_cmd) {
            const auto fmt = parse_format(format);
            std::optional<SuppressionConfig> config;
            if (flags.algorithm != "none") config = flags.resolve();
            const double floor = config ? config->score_floor : flags.score_floor;
            const LoadOptions load{strict_io, floor, parse_det_format(det_format)};
            const auto loaded = load_detections(std::filesystem::path(input), load);
            const auto gts = load_ground_truth(std::filesystem::path(gt_path), strict_io);
            DetectionsByImage dets = loaded.by_image;
            std::string threshold;
            if (config) {
                dets = kept_detections(suppress_all(loaded.by_image, *config, jobs));
                threshold = detail::format_number(uses_proximity(config->algorithm) ? config->confluence_threshold
                                                                                    : config->iou_threshold);
            }
            const auto summary = coco_summary(dets, gts.by_image);
            write_report([&](std::ostream& o) { report::summary(o, fmt, summary, threshold); });
            return kOk;
        }

        if (*sweep_cmd) {
            const auto fmt = parse_format(sweep_cmd->count("--format") ? format : "csv");
            const auto config = flags.resolve();
            const auto thresholds = grid.empty() ? default_grid(config.algorithm) : parse_grid(grid);
            std::optional<std::pair<double, double>> band_range;
            if (!band.empty()) band_range = parse_pair(band, "band");
            for (double t : thresholds) with_threshold(config, t).validate();
            const LoadOptions load{strict_io, config.score_floor, parse_det_format(det_format)};
            const auto loaded = load_detections(std::filesystem::path(input), load);
            const auto gts = load_ground_truth(std::filesystem::path(gt_path), strict_io);
            const auto sweep = threshold_sweep(loaded.by_image, gts.by_image, config, thresholds, band_range, jobs);
            write_report([&](std::ostream& o) { report::sweep(o, fmt, sweep, config.algorithm); });
            return kOk;
        }

        if (*bench_cmd) {
            const auto fmt = parse_format(format);
            if (sizes.empty()) throw ConfigError("--sizes needs at least one value");
            for (const auto n : sizes) {
                if (n < 1) throw ConfigError("--sizes values must be >= 1");
            }
            if (algorithms.empty() || (algorithms.size() == 1 && algorithms[0] == "all")) {
                algorithms = {"confluence", "confluence_nms", "greedy_nms", "soft_nms"};
            }
            std::vector<SuppressionConfig> to_run;
            for (const auto& name : algorithms) {
                ConfigFlags f = flags;
                f.algorithm = name;
                if (name == "soft_nms" && flags.decay == "hard") f.decay.clear();
                if (name == "greedy_nms" && !flags.decay.empty()) f.decay = "hard";
                to_run.push_back(f.resolve());
            }
            std::vector<BenchReport> reports;
            for (const auto& c : to_run) {
                log::info("benchmarking ", to_string(c.algorithm));
                reports.push_back(run_benchmark(sizes, repetitions, c, seed,
                                                std::chrono::duration<double, std::milli>(min_sample_ms)));
            }
            report::bench(out, fmt, reports);
            return kOk;
        }

        if (*compare_cmd) {
            const auto fmt = parse_format(format);
            if (configs.size() < 2) throw ConfigError("compare needs at least two --config entries");
            std::vector<SuppressionConfig> parsed;
            for (const auto& spec : configs) parsed.push_back(parse_config_spec(spec));
            const LoadOptions load{strict_io, 0.0, parse_det_format(det_format)};
            const auto loaded = load_detections(std::filesystem::path(input), load);
            const auto gts = load_ground_truth(std::filesystem::path(gt_path), strict_io);
            std::vector<report::CompareRow> rows;
            for (std::size_t i = 0; i < parsed.size(); ++i) {
                const auto dets = kept_detections(suppress_all(loaded.by_image, parsed[i], jobs));
                rows.push_back({configs[i], coco_summary(dets, gts.by_image)});
            }
            write_report([&](std::ostream& o) { report::compare(o, fmt, rows); });
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const EmptyGroundTruth& e) {
        err << "error: " << e.what() << '\n';
        return kEmptyGroundTruth;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << '\n';
        return kIoError;
    }
    return kConfigError;
}

}  // namespace confluence::cli
