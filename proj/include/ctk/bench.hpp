#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctk/engine.hpp"
#include "ctk/oracle.hpp"
#include "ctk/stream_io.hpp"
#include "ctk/threshold.hpp"

namespace ctk {

/// Parsed form of --theta-strategy: zero | fraction:F | global:V |
/// optimal:PATH.
struct ThetaSpec {
    ThetaKind kind = ThetaKind::kZero;
    double value = 0.0;
    std::string constants_path;

    static ThetaSpec parse(const std::string& text);
    std::string to_string() const;
};

struct RunConfig {
    std::string input_path;
    Mode mode = Mode::kRrts;
    EhVariant variant = EhVariant::kItemPart;
    ThetaSpec theta;
    ScoreConfig score;
    std::optional<std::uint32_t> k_override;
    std::optional<std::uint64_t> query_limit;  // keep only the first N queries
    int repeats = 3;
    bool warmup = true;
    std::string report_path;
    std::string deltas_path;  // optional JSONL sink, written on the last run
    bool collect_cost_stats = false;
};

struct RunReport {
    std::map<std::string, std::string> config_echo;
    double parse_seconds = 0.0;
    double query_seconds = 0.0;
    double match_seconds = 0.0;  // items + events, averaged over repeats
    std::uint64_t n_queries = 0;
    std::uint64_t n_items = 0;
    std::uint64_t n_events = 0;
    double throughput_per_min = 0.0;  // (items + events) / match time
    Metrics metrics;
    /// Percentiles over per-item refresh counts (p50, p90, max).
    std::uint32_t refresh_p50 = 0;
    std::uint32_t refresh_p90 = 0;
    std::uint32_t refresh_max = 0;

    std::string to_text() const;
};

/// Executes warm-up plus `repeats` measured runs over the stream,
/// averages the timings (counts are identical across runs) and writes
/// the report when a path is configured.
RunReport run(const RunConfig& config);

/// Same, over pre-parsed records (no file IO).
RunReport run_records(const RunConfig& config, const std::vector<StreamRecord>& records);

struct SweepAxis {
    enum Kind { kThetaFraction, kThetaGlobal, kGamma, kK, kNQueries, kDecayHorizon } kind;
    static SweepAxis parse(const std::string& name);
    const char* name() const;
};

/// One report per axis value, concatenated into a single series file.
std::vector<RunReport> sweep(const RunConfig& base, SweepAxis axis,
                             const std::vector<double>& values,
                             const std::string& series_path);

struct CheckOutcome {
    bool ok = true;
    std::string failure;  // first mismatch, config and record index included
    std::uint64_t configs_checked = 0;
};

/// Runs the engine and the reference side by side over the stream for
/// every requested (mode, variant) combination, comparing all result
/// lists after every record.
CheckOutcome check(const RunConfig& config, std::uint64_t record_cap, bool force);

struct CalibrateConfig {
    std::string input_path;
    ScoreConfig score;
    EhVariant variant = EhVariant::kItemPart;
    std::string out_path;
    /// Per-item thresholds cycled during the probe run; when empty a
    /// log-spaced grid around the stream's mean final score is used.
    std::vector<double> probe_thetas;
};

/// Instrumented probe run -> fitted CostConstants (written to out_path)
/// and the resulting optimal threshold.
std::pair<CostConstants, double> calibrate_stream(const CalibrateConfig& config);

/// Per-item final aggregated event scores; required by fraction
/// strategies.
std::unordered_map<std::string, double> prescan_theta_max(
    const std::vector<StreamRecord>& records);

}  // namespace ctk
