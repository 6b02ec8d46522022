// Command-line harness for the continuous top-k engine: run streams
// under any (mode, index, threshold) configuration, generate and filter
// synthetic workloads, calibrate the cost model, and cross-check against
// the brute-force reference.

#include <cmath>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctk/bench.hpp"
#include "ctk/stream_io.hpp"

namespace {

ctk::Mode parse_mode(const std::string& s) {
    if (s == "naive") return ctk::Mode::kNaive;
    if (s == "rrts") return ctk::Mode::kRrts;
    throw CLI::ValidationError("--mode", "must be naive or rrts");
}

ctk::EhVariant parse_variant(const std::string& s) {
    if (s == "simple") return ctk::EhVariant::kSimple;
    if (s == "static") return ctk::EhVariant::kStatic;
    if (s == "lazy") return ctk::EhVariant::kLazy;
    if (s == "exhaustive") return ctk::EhVariant::kExhaustive;
    if (s == "itempart") return ctk::EhVariant::kItemPart;
    throw CLI::ValidationError("--eh-index", "unknown index variant");
}

double parse_horizon(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

struct CommonFlags {
    std::string input;
    std::string mode = "rrts";
    std::string eh_index = "itempart";
    std::string theta_strategy = "fraction:0.5";
    double alpha = 0.3;
    double beta = 0.3;
    double gamma = 0.4;
    std::string decay_horizon = "inf";
    int k = 0;  // 0: take k from the stream
    int repeats = 3;
    std::string warmup = "on";
    std::string report;
    std::string deltas;

    void add_to(CLI::App* cmd, bool with_engine_flags = true) {
        cmd->add_option("--input", input, "stream file")->required();
        if (!with_engine_flags) return;
        cmd->add_option("--mode", mode, "naive|rrts");
        cmd->add_option("--eh-index", eh_index,
                        "simple|static|lazy|exhaustive|itempart");
        cmd->add_option("--theta-strategy", theta_strategy,
                        "zero | fraction:F | global:V | optimal:CONSTS_PATH");
        cmd->add_option("--alpha", alpha, "text score weight");
        cmd->add_option("--beta", beta, "static quality weight");
        cmd->add_option("--gamma", gamma, "feedback score weight");
        cmd->add_option("--decay-horizon", decay_horizon, "seconds or 'inf'");
        cmd->add_option("--k", k, "override every query's k");
        cmd->add_option("--repeats", repeats, "measured repetitions");
        cmd->add_option("--warmup", warmup, "on|off");
        cmd->add_option("--report", report, "report output path");
        cmd->add_option("--deltas", deltas, "result-delta JSONL sink");
    }

    ctk::RunConfig to_run_config() const {
        ctk::RunConfig rc;
        rc.input_path = input;
        rc.mode = parse_mode(mode);
        rc.variant = parse_variant(eh_index);
        rc.theta = ctk::ThetaSpec::parse(theta_strategy);
        rc.score.alpha = alpha;
        rc.score.beta = beta;
        rc.score.gamma = gamma;
        rc.score.decay_horizon = parse_horizon(decay_horizon);
        if (k > 0) rc.k_override = static_cast<std::uint32_t>(k);
        rc.repeats = repeats;
        rc.warmup = warmup != "off";
        rc.report_path = report;
        rc.deltas_path = deltas;
        return rc;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous top-k pub/sub engine harness"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "process a stream and report metrics");
    CommonFlags run_flags;
    run_flags.add_to(run_cmd);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "repeat a run across one axis");
    CommonFlags sweep_flags;
    sweep_flags.add_to(sweep_cmd);
    std::string axis_name;
    std::string values_csv;
    std::string series_path;
    sweep_cmd->add_option("--axis", axis_name,
                          "theta_fraction|theta_global|gamma|k|n_queries|decay_horizon")
        ->required();
    sweep_cmd->add_option("--values", values_csv, "comma-separated axis values")->required();
    sweep_cmd->add_option("--series", series_path, "combined series output file");

    // check
    auto* check_cmd = app.add_subcommand(
        "check", "lockstep comparison against the brute-force reference");
    CommonFlags check_flags;
    check_flags.add_to(check_cmd);
    std::uint64_t oracle_cap = 50000;
    bool force = false;
    check_cmd->add_option("--oracle-cap", oracle_cap, "max records for the reference");
    check_cmd->add_flag("--force", force, "ignore the record cap");

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "write a synthetic workload");
    std::string gen_out;
    ctk::WorkloadParams wp;
    bool interleave = false;
    gen_cmd->add_option("--out", gen_out, "output stream path")->required();
    gen_cmd->add_option("--n-queries", wp.n_queries);
    gen_cmd->add_option("--n-items", wp.n_items);
    gen_cmd->add_option("--events-per-item", wp.events_per_item_mean);
    gen_cmd->add_option("--event-sigma", wp.event_count_sigma,
                        "tail heaviness of per-item event counts");
    gen_cmd->add_option("--vocab", wp.vocab_size);
    gen_cmd->add_option("--zipf-s", wp.term_zipf_s);
    gen_cmd->add_option("--k", wp.k);
    gen_cmd->add_option("--seed", wp.seed);
    gen_cmd->add_flag("--interleave-queries", interleave,
                      "spread queries across the timeline instead of front-loading");

    // filter
    auto* filter_cmd =
        app.add_subcommand("filter", "keep items with at least N events");
    std::string filter_in, filter_out;
    std::uint64_t min_events = 1;
    filter_cmd->add_option("--input", filter_in)->required();
    filter_cmd->add_option("--min-events", min_events)->required();
    filter_cmd->add_option("--out", filter_out)->required();

    // calibrate
    auto* cal_cmd = app.add_subcommand("calibrate", "fit cost-model constants");
    std::string cal_in, cal_out, cal_thetas;
    CommonFlags cal_flags;
    cal_cmd->add_option("--input", cal_in, "probe stream")->required();
    cal_cmd->add_option("--out", cal_out, "constants output path")->required();
    cal_cmd->add_option("--probe-thetas", cal_thetas,
                        "comma-separated per-item thresholds to cycle");
    cal_cmd->add_option("--alpha", cal_flags.alpha);
    cal_cmd->add_option("--beta", cal_flags.beta);
    cal_cmd->add_option("--gamma", cal_flags.gamma);
    cal_cmd->add_option("--decay-horizon", cal_flags.decay_horizon);
    cal_cmd->add_option("--eh-index", cal_flags.eh_index);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            ctk::RunReport report = ctk::run(run_flags.to_run_config());
            std::cout << report.to_text();
            return 0;
        }
        if (*sweep_cmd) {
            auto axis = ctk::SweepAxis::parse(axis_name);
            auto values = parse_values(values_csv);
            if (values.empty()) throw std::runtime_error("--values is empty");
            auto reports = ctk::sweep(sweep_flags.to_run_config(), axis, values, series_path);
            for (std::size_t i = 0; i < reports.size(); ++i) {
                std::cout << "--- " << axis.name() << '=' << values[i] << '\n'
                          << reports[i].to_text();
            }
            return 0;
        }
        if (*check_cmd) {
            auto outcome = ctk::check(check_flags.to_run_config(), oracle_cap, force);
            if (outcome.ok) {
                std::cout << "check ok: " << outcome.configs_checked
                          << " configurations match the reference\n";
                return 0;
            }
            std::cerr << "check FAILED: " << outcome.failure << '\n';
            return 1;
        }
        if (*gen_cmd) {
            wp.interleave_queries = interleave;
            ctk::generate_workload_file(wp, gen_out);
            std::cout << "wrote " << gen_out << " (+.stats)\n";
            return 0;
        }
        if (*filter_cmd) {
            ctk::filter_min_events_file(filter_in, min_events, filter_out);
            std::cout << "wrote " << filter_out << " (+.stats)\n";
            return 0;
        }
        if (*cal_cmd) {
            ctk::CalibrateConfig cc;
            cc.input_path = cal_in;
            cc.out_path = cal_out;
            cc.score.alpha = cal_flags.alpha;
            cc.score.beta = cal_flags.beta;
            cc.score.gamma = cal_flags.gamma;
            cc.score.decay_horizon = parse_horizon(cal_flags.decay_horizon);
            cc.variant = parse_variant(cal_flags.eh_index);
            if (!cal_thetas.empty()) cc.probe_thetas = parse_values(cal_thetas);
            auto [constants, opt] = ctk::calibrate_stream(cc);
            std::cout << ctk::constants_to_text(constants) << "theta_opt=" << opt << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
