#include "ctk/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ctk {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const char* mode_name(Mode m) { return m == Mode::kNaive ? "naive" : "rrts"; }

std::vector<StreamRecord> apply_query_limit(const std::vector<StreamRecord>& records,
                                            std::uint64_t limit) {
    std::vector<StreamRecord> out;
    out.reserve(records.size());
    std::uint64_t seen = 0;
    for (const auto& rec : records) {
        if (std::holds_alternative<QueryRec>(rec)) {
            if (seen >= limit) continue;
            ++seen;
        }
        out.push_back(rec);
    }
    return out;
}

std::uint32_t percentile(std::vector<std::uint32_t> v, double p) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    std::size_t idx = static_cast<std::size_t>(p * static_cast<double>(v.size() - 1));
    return v[idx];
}

}  // namespace

ThetaSpec ThetaSpec::parse(const std::string& text) {
    ThetaSpec spec;
    if (text == "zero") {
        spec.kind = ThetaKind::kZero;
        return spec;
    }
    auto colon = text.find(':');
    std::string head = text.substr(0, colon);
    std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (head == "fraction") {
        spec.kind = ThetaKind::kExactFraction;
        spec.value = std::stod(tail);
        return spec;
    }
    if (head == "global") {
        spec.kind = ThetaKind::kGlobal;
        spec.value = std::stod(tail);
        return spec;
    }
    if (head == "optimal") {
        if (tail.empty()) throw std::invalid_argument("optimal strategy needs a constants path");
        spec.kind = ThetaKind::kOptimal;
        spec.constants_path = tail;
        return spec;
    }
    throw std::invalid_argument("unknown theta strategy: " + text);
}

std::string ThetaSpec::to_string() const {
    switch (kind) {
        case ThetaKind::kZero: return "zero";
        case ThetaKind::kExactFraction: return "fraction:" + std::to_string(value);
        case ThetaKind::kGlobal: return "global:" + std::to_string(value);
        case ThetaKind::kOptimal: return "optimal:" + constants_path;
        case ThetaKind::kProbeCycle: return "probe-cycle";
    }
    return "?";
}

std::unordered_map<std::string, double> prescan_theta_max(
    const std::vector<StreamRecord>& records) {
    std::unordered_map<std::string, double> max_dyn;
    for (const auto& rec : records) {
        if (const auto* i = std::get_if<ItemRec>(&rec)) {
            max_dyn.emplace(i->id, 0.0);
        } else if (const auto* e = std::get_if<EventRec>(&rec)) {
            max_dyn[e->target] += e->score;
        }
    }
    return max_dyn;
}

std::string RunReport::to_text() const {
    std::ostringstream out;
    out.precision(12);
    for (const auto& [key, value] : config_echo) {
        out << "config." << key << '=' << value << '\n';
    }
    out << "records.queries=" << n_queries << '\n'
        << "records.items=" << n_items << '\n'
        << "records.events=" << n_events << '\n'
        << "time.parse_s=" << parse_seconds << '\n'
        << "time.queries_s=" << query_seconds << '\n'
        << "time.matching_s=" << match_seconds << '\n'
        << "throughput.records_per_min=" << throughput_per_min << '\n'
        << "counts.ih_matches=" << metrics.ih_matches << '\n'
        << "counts.ih_refreshes=" << metrics.ih_refreshes << '\n'
        << "counts.ih_invocations=" << metrics.ih_matches << '\n'
        << "counts.eh_probes=" << metrics.eh_probes << '\n'
        << "counts.eh_match_calls=" << metrics.eh_match_calls << '\n'
        << "counts.result_updates=" << metrics.result_updates << '\n'
        << "counts.evictions=" << metrics.evictions << '\n'
        << "counts.zero_score_events=" << metrics.zero_score_events << '\n'
        << "frac.visited_mean=" << metrics.visited_fraction_mean() << '\n'
        << "frac.visited_total=" << metrics.visited_fraction_total() << '\n'
        << "per_item.refresh_p50=" << refresh_p50 << '\n'
        << "per_item.refresh_p90=" << refresh_p90 << '\n'
        << "per_item.refresh_max=" << refresh_max << '\n';
    return out.str();
}

namespace {

EngineConfig build_engine_config(const RunConfig& config,
                                 const std::unordered_map<std::string, double>* prescan) {
    EngineConfig ec;
    ec.score = config.score;
    ec.mode = config.mode;
    ec.variant = config.variant;
    ec.k_override = config.k_override;
    ec.collect_cost_stats = config.collect_cost_stats;
    switch (config.theta.kind) {
        case ThetaKind::kZero:
            ec.theta = ThetaStrategy::zero();
            break;
        case ThetaKind::kExactFraction:
            if (prescan == nullptr) {
                throw std::runtime_error("fraction strategy requires a pre-scan");
            }
            ec.theta = ThetaStrategy::exact_fraction(config.theta.value, prescan);
            break;
        case ThetaKind::kGlobal:
            ec.theta = ThetaStrategy::global(config.theta.value);
            break;
        case ThetaKind::kOptimal:
            ec.theta = ThetaStrategy::optimal(load_constants(config.theta.constants_path));
            break;
        case ThetaKind::kProbeCycle:
            throw std::runtime_error("probe-cycle is internal to calibrate");
    }
    return ec;
}

struct TimedRun {
    double query_seconds = 0.0;
    double match_seconds = 0.0;
};

TimedRun run_once(Engine& engine, const std::vector<StreamRecord>& records) {
    TimedRun t;
    auto t0 = Clock::now();
    double query_acc = 0.0;
    // Query insertion time is reported separately from matching time.
    for (const auto& rec : records) {
        if (std::holds_alternative<QueryRec>(rec)) {
            auto q0 = Clock::now();
            engine.process(rec);
            query_acc += seconds_since(q0);
        } else {
            engine.process(rec);
        }
    }
    t.query_seconds = query_acc;
    t.match_seconds = seconds_since(t0) - query_acc;
    return t;
}

}  // namespace

RunReport run_records(const RunConfig& config, const std::vector<StreamRecord>& all_records) {
    const std::vector<StreamRecord>* records = &all_records;
    std::vector<StreamRecord> limited;
    if (config.query_limit) {
        limited = apply_query_limit(all_records, *config.query_limit);
        records = &limited;
    }
    std::unordered_map<std::string, double> prescan;
    if (config.theta.kind == ThetaKind::kExactFraction) {
        prescan = prescan_theta_max(*records);
    }
    EngineConfig ec = build_engine_config(config, &prescan);

    RunReport report;
    report.config_echo["input"] = config.input_path.empty() ? "(records)" : config.input_path;
    report.config_echo["mode"] = mode_name(config.mode);
    report.config_echo["eh_index"] = variant_name(config.variant);
    report.config_echo["theta_strategy"] = config.theta.to_string();
    {
        std::ostringstream weights;
        weights << ec.score.alpha << '/' << ec.score.beta << '/' << ec.score.gamma;
        report.config_echo["alpha_beta_gamma"] = weights.str();
    }
    report.config_echo["decay_horizon"] = std::isinf(ec.score.decay_horizon)
                                              ? "inf"
                                              : std::to_string(ec.score.decay_horizon);
    report.config_echo["repeats"] = std::to_string(config.repeats);
    if (config.k_override) {
        report.config_echo["k_override"] = std::to_string(*config.k_override);
    }

    int measured = std::max(1, config.repeats);
    int total_runs = measured + (config.warmup ? 1 : 0);
    double query_acc = 0.0;
    double match_acc = 0.0;
    for (int r = 0; r < total_runs; ++r) {
        bool is_warmup = config.warmup && r == 0;
        bool last = r == total_runs - 1;
        Engine engine(ec);
        std::ofstream delta_file;
        if (last && !config.deltas_path.empty()) {
            delta_file.open(config.deltas_path, std::ios::trunc);
            if (!delta_file) {
                throw std::runtime_error("cannot open deltas file: " + config.deltas_path);
            }
            engine.set_delta_sink([&delta_file, &engine](const ResultDelta& d) {
                nlohmann::json j{
                    {"ts", d.ts},
                    {"query", engine.catalog().query(d.query).id},
                    {"added", engine.catalog().item(d.added).id}};
                if (d.evicted != kNoItem) {
                    j["evicted"] = engine.catalog().item(d.evicted).id;
                }
                delta_file << j.dump() << '\n';
            });
        }
        TimedRun t = run_once(engine, *records);
        if (!is_warmup) {
            query_acc += t.query_seconds;
            match_acc += t.match_seconds;
        }
        if (last) {
            report.metrics = engine.metrics();
            report.n_queries = engine.metrics().queries;
            report.n_items = engine.metrics().items;
            report.n_events = engine.metrics().events;
            report.refresh_p50 = percentile(engine.per_item_refreshes(), 0.50);
            report.refresh_p90 = percentile(engine.per_item_refreshes(), 0.90);
            report.refresh_max = percentile(engine.per_item_refreshes(), 1.0);
        }
    }
    report.query_seconds = query_acc / measured;
    report.match_seconds = match_acc / measured;
    std::uint64_t matched_records = report.n_items + report.n_events;
    if (report.match_seconds > 0) {
        report.throughput_per_min =
            static_cast<double>(matched_records) / report.match_seconds * 60.0;
    }
    if (!config.report_path.empty()) {
        std::ofstream out(config.report_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open report file: " + config.report_path);
        out << report.to_text();
    }
    return report;
}

RunReport run(const RunConfig& config) {
    auto t0 = Clock::now();
    auto records = read_stream(config.input_path);
    double parse_s = seconds_since(t0);
    RunConfig inner = config;
    inner.report_path.clear();
    RunReport report = run_records(inner, records);
    report.parse_seconds = parse_s;
    if (!config.report_path.empty()) {
        std::ofstream out(config.report_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open report file: " + config.report_path);
        out << report.to_text();
    }
    return report;
}

SweepAxis SweepAxis::parse(const std::string& name) {
    if (name == "theta_fraction") return {kThetaFraction};
    if (name == "theta_global") return {kThetaGlobal};
    if (name == "gamma") return {kGamma};
    if (name == "k") return {kK};
    if (name == "n_queries") return {kNQueries};
    if (name == "decay_horizon") return {kDecayHorizon};
    throw std::invalid_argument("unknown sweep axis: " + name);
}

const char* SweepAxis::name() const {
    switch (kind) {
        case kThetaFraction: return "theta_fraction";
        case kThetaGlobal: return "theta_global";
        case kGamma: return "gamma";
        case kK: return "k";
        case kNQueries: return "n_queries";
        case kDecayHorizon: return "decay_horizon";
    }
    return "?";
}

std::vector<RunReport> sweep(const RunConfig& base, SweepAxis axis,
                             const std::vector<double>& values,
                             const std::string& series_path) {
    auto records = read_stream(base.input_path);
    std::vector<RunReport> reports;
    std::ostringstream series;
    for (double v : values) {
        RunConfig point = base;
        point.report_path.clear();
        switch (axis.kind) {
            case SweepAxis::kThetaFraction:
                point.theta.kind = ThetaKind::kExactFraction;
                point.theta.value = v;
                break;
            case SweepAxis::kThetaGlobal:
                point.theta.kind = ThetaKind::kGlobal;
                point.theta.value = v;
                break;
            case SweepAxis::kGamma:
                point.score.gamma = v;
                point.score.alpha = (1.0 - v) / 2.0;
                point.score.beta = (1.0 - v) / 2.0;
                break;
            case SweepAxis::kK:
                point.k_override = static_cast<std::uint32_t>(v);
                break;
            case SweepAxis::kNQueries:
                point.query_limit = static_cast<std::uint64_t>(v);
                break;
            case SweepAxis::kDecayHorizon:
                point.score.decay_horizon = v;
                break;
        }
        RunReport report = run_records(point, records);
        series << "--- " << axis.name() << '=' << v << '\n' << report.to_text();
        reports.push_back(std::move(report));
    }
    if (!series_path.empty()) {
        std::ofstream out(series_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open series file: " + series_path);
        out << series.str();
    }
    return reports;
}

CheckOutcome check(const RunConfig& config, std::uint64_t record_cap, bool force) {
    auto records = read_stream(config.input_path);
    if (!force && records.size() > record_cap) {
        throw std::runtime_error(
            "stream exceeds the reference-check record cap (" + std::to_string(record_cap) +
            "); re-run with force");
    }
    std::unordered_map<std::string, double> prescan = prescan_theta_max(records);

    struct Combo {
        Mode mode;
        EhVariant variant;
    };
    std::vector<Combo> combos{{Mode::kNaive, EhVariant::kSimple},
                              {Mode::kRrts, EhVariant::kSimple},
                              {Mode::kRrts, EhVariant::kStatic},
                              {Mode::kRrts, EhVariant::kLazy},
                              {Mode::kRrts, EhVariant::kExhaustive},
                              {Mode::kRrts, EhVariant::kItemPart}};

    CheckOutcome outcome;
    for (const Combo& combo : combos) {
        RunConfig point = config;
        point.mode = combo.mode;
        point.variant = combo.variant;
        EngineConfig ec = build_engine_config(point, &prescan);
        Engine engine(ec);
        Oracle oracle(ec.score, ec.k_override);
        std::uint64_t record_no = 0;
        for (const auto& rec : records) {
            ++record_no;
            engine.process(rec);
            oracle.step(rec);
            for (std::size_t qi = 0; qi < oracle.query_count(); ++qi) {
                auto mismatch = diff_results(engine.catalog(),
                                             engine.catalog().query(static_cast<QueryId>(qi)),
                                             oracle.catalog(),
                                             oracle.query(static_cast<QueryId>(qi)));
                if (mismatch) {
                    outcome.ok = false;
                    std::ostringstream msg;
                    msg << "mode=" << mode_name(combo.mode)
                        << " eh=" << variant_name(combo.variant) << " record " << record_no
                        << ": " << mismatch->to_string();
                    outcome.failure = msg.str();
                    return outcome;
                }
            }
        }
        ++outcome.configs_checked;
    }
    return outcome;
}

std::pair<CostConstants, double> calibrate_stream(const CalibrateConfig& config) {
    auto records = read_stream(config.input_path);
    std::vector<double> thetas = config.probe_thetas;
    if (thetas.empty()) {
        double total = 0.0;
        std::uint64_t items = 0;
        for (const auto& rec : records) {
            if (std::holds_alternative<ItemRec>(rec)) ++items;
            if (const auto* e = std::get_if<EventRec>(&rec)) total += e->score;
        }
        double mean_dyn = items ? total / static_cast<double>(items) : 1.0;
        if (mean_dyn <= 0) mean_dyn = 1.0;
        thetas = {mean_dyn / 16.0, mean_dyn / 8.0, mean_dyn / 4.0, mean_dyn / 2.0, mean_dyn};
    }
    EngineConfig ec;
    ec.score = config.score;
    ec.mode = Mode::kRrts;
    ec.variant = config.variant;
    ec.theta.kind = ThetaKind::kProbeCycle;
    ec.theta.cycle_values = thetas;
    ec.collect_cost_stats = true;
    Engine engine(ec);
    for (const auto& rec : records) engine.process(rec);
    CostConstants constants = calibrate(engine.take_probe_stats());
    if (!config.out_path.empty()) {
        save_constants(config.out_path, constants);
    }
    double opt = optimal_theta(constants);
    return {constants, opt};
}

}  // namespace ctk
