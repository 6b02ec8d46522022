#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctk/core.hpp"

namespace ctk {

/// Calibrated inputs to the closed-form optimal threshold.
///
/// The cost model assumes candidate list size and construction cost grow
/// linearly with the threshold: |cands| = a * theta, cost_C = b * theta.
struct CostConstants {
    double a = 0.0;          // candidates per unit threshold
    double b = 0.0;          // construction time (ns) per unit threshold
    double cost_m = 0.0;     // mean item matching cost (ns)
    double cost_t = 0.0;     // mean per-candidate probe cost (ns)
    double theta_max = 0.0;  // mean final aggregated event score per item
    double events_per_item = 0.0;
};

/// sqrt((1/a) * (theta_max / E) * (cost_M / cost_T)). Throws when a, E
/// or cost_T is zero.
double optimal_theta(const CostConstants& c);

/// Predicted total matching cost for one item at a fixed threshold:
///   (theta_max / theta) * (cost_M + b * theta) + theta * E * a * cost_T
/// i.e. c1/theta + c2*theta + c3. Throws for theta <= 0.
double predicted_cost(double theta, const CostConstants& c);

enum class ThetaKind {
    kZero,           // degenerate: every event refreshes (naive behavior)
    kExactFraction,  // f * (item's final aggregated score), needs a pre-scan
    kGlobal,         // one constant for all items
    kOptimal,        // optimal_theta(constants)
    kProbeCycle,     // calibration runs: cycle a fixed value list per item
};

struct ThetaStrategy {
    ThetaKind kind = ThetaKind::kZero;
    double fraction = 0.5;
    double global_value = 0.0;
    CostConstants constants;
    std::vector<double> cycle_values;
    /// external item id -> final aggregated event score; required by
    /// kExactFraction.
    const std::unordered_map<std::string, double>* per_item_max = nullptr;

    static ThetaStrategy zero() { return {}; }
    static ThetaStrategy exact_fraction(double f,
                                        const std::unordered_map<std::string, double>* m) {
        ThetaStrategy s;
        s.kind = ThetaKind::kExactFraction;
        s.fraction = f;
        s.per_item_max = m;
        return s;
    }
    static ThetaStrategy global(double v) {
        ThetaStrategy s;
        s.kind = ThetaKind::kGlobal;
        s.global_value = v;
        return s;
    }
    static ThetaStrategy optimal(const CostConstants& c) {
        ThetaStrategy s;
        s.kind = ThetaKind::kOptimal;
        s.constants = c;
        return s;
    }
};

/// Threshold for a newly arrived item under the configured strategy.
/// item_ordinal counts items seen so far (drives kProbeCycle).
double theta_for_item(const Item& item, const ThetaStrategy& strategy,
                      std::uint64_t item_ordinal);

/// Raw measurements from an instrumented run, consumed by calibrate().
struct ProbeStats {
    std::vector<std::pair<double, double>> refresh_sizes;     // (theta, list size)
    std::vector<std::pair<double, double>> refresh_build_ns;  // (theta, ns)
    double probe_ns_total = 0.0;
    std::uint64_t probe_count = 0;
    double match_ns_total = 0.0;
    std::uint64_t match_count = 0;
    std::vector<double> item_final_dyn;
    std::vector<double> item_event_counts;
};

/// Least-squares-through-origin slopes for a and b, arithmetic means for
/// the rest. Throws when fewer than two distinct theta values were
/// sampled (no slope can be fit).
CostConstants calibrate(const ProbeStats& stats);

/// Flat key=value block, one constant per line.
std::string constants_to_text(const CostConstants& c);
CostConstants constants_from_text(const std::string& text);
CostConstants load_constants(const std::string& path);
void save_constants(const std::string& path, const CostConstants& c);

}  // namespace ctk
