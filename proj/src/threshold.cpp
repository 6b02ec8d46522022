#include "ctk/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctk {

double optimal_theta(const CostConstants& c) {
    if (!(c.a > 0) || !(c.events_per_item > 0) || !(c.cost_t > 0)) {
        throw std::invalid_argument("optimal_theta requires a, E and cost_T > 0");
    }
    return std::sqrt((1.0 / c.a) * (c.theta_max / c.events_per_item) *
                     (c.cost_m / c.cost_t));
}

double predicted_cost(double theta, const CostConstants& c) {
    if (!(theta > 0)) {
        throw std::invalid_argument("predicted_cost requires theta > 0");
    }
    return (c.theta_max / theta) * (c.cost_m + c.b * theta) +
           theta * c.events_per_item * c.a * c.cost_t;
}

double theta_for_item(const Item& item, const ThetaStrategy& strategy,
                      std::uint64_t item_ordinal) {
    switch (strategy.kind) {
        case ThetaKind::kZero:
            return 0.0;
        case ThetaKind::kExactFraction: {
            if (strategy.per_item_max == nullptr) {
                throw std::runtime_error(
                    "exact-fraction strategy needs per-item maxima from a pre-scan");
            }
            auto it = strategy.per_item_max->find(item.id);
            if (it == strategy.per_item_max->end()) {
                throw std::runtime_error("no pre-scanned maximum for item " + item.id);
            }
            return strategy.fraction * it->second;
        }
        case ThetaKind::kGlobal:
            return strategy.global_value;
        case ThetaKind::kOptimal:
            return optimal_theta(strategy.constants);
        case ThetaKind::kProbeCycle:
            if (strategy.cycle_values.empty()) {
                throw std::runtime_error("probe cycle has no values");
            }
            return strategy.cycle_values[item_ordinal % strategy.cycle_values.size()];
    }
    return 0.0;
}

namespace {

double slope_through_origin(const std::vector<std::pair<double, double>>& xy) {
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : xy) {
        sxx += x * x;
        sxy += x * y;
    }
    if (!(sxx > 0)) return 0.0;
    return sxy / sxx;
}

std::size_t distinct_thetas(const std::vector<std::pair<double, double>>& xy) {
    std::vector<double> xs;
    for (const auto& [x, y] : xy) xs.push_back(x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs.size();
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

CostConstants calibrate(const ProbeStats& stats) {
    if (distinct_thetas(stats.refresh_sizes) < 2) {
        throw std::runtime_error("calibration needs at least 2 distinct theta samples");
    }
    CostConstants c;
    c.a = slope_through_origin(stats.refresh_sizes);
    c.b = slope_through_origin(stats.refresh_build_ns);
    c.cost_m = stats.match_count ? stats.match_ns_total / static_cast<double>(stats.match_count)
                                 : 0.0;
    c.cost_t = stats.probe_count ? stats.probe_ns_total / static_cast<double>(stats.probe_count)
                                 : 0.0;
    c.theta_max = mean(stats.item_final_dyn);
    c.events_per_item = mean(stats.item_event_counts);
    return c;
}

std::string constants_to_text(const CostConstants& c) {
    std::ostringstream out;
    out.precision(17);
    out << "a=" << c.a << '\n'
        << "b=" << c.b << '\n'
        << "cost_m=" << c.cost_m << '\n'
        << "cost_t=" << c.cost_t << '\n'
        << "theta_max=" << c.theta_max << '\n'
        << "events_per_item=" << c.events_per_item << '\n';
    return out.str();
}

CostConstants constants_from_text(const std::string& text) {
    CostConstants c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        double value = std::stod(line.substr(eq + 1));
        if (key == "a") c.a = value;
        else if (key == "b") c.b = value;
        else if (key == "cost_m") c.cost_m = value;
        else if (key == "cost_t") c.cost_t = value;
        else if (key == "theta_max") c.theta_max = value;
        else if (key == "events_per_item") c.events_per_item = value;
    }
    return c;
}

CostConstants load_constants(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open constants file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return constants_from_text(buf.str());
}

void save_constants(const std::string& path, const CostConstants& c) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write constants file: " + path);
    out << constants_to_text(c);
}

}  // namespace ctk
