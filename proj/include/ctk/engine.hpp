#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ctk/candidate_index.hpp"
#include "ctk/core.hpp"
#include "ctk/query_index.hpp"
#include "ctk/stream_io.hpp"
#include "ctk/threshold.hpp"

namespace ctk {

enum class Mode { kNaive, kRrts };

/// A membership change in some query's result.
struct ResultDelta {
    Timestamp ts = 0.0;
    QueryId query = 0;
    ItemId added = kNoItem;
    ItemId evicted = kNoItem;  // kNoItem when nothing fell out
};

using DeltaSink = std::function<void(const ResultDelta&)>;

struct EngineConfig {
    ScoreConfig score;
    Mode mode = Mode::kRrts;
    EhVariant variant = EhVariant::kItemPart;
    ThetaStrategy theta;
    /// Apply the printed cumulative refresh-counter rule
    /// (refresh += floor(dyn/theta) + 1) instead of the minimal absolute
    /// form (refresh = floor(dyn/theta) + 1). Kept for comparison runs.
    bool cumulative_refresh = false;
    /// Opt-in: drop a probed candidate once its qmin can no longer be
    /// reached within the item's current threshold window.
    bool prune_outgrown_candidates = false;
    /// Collect timing samples for cost-model calibration.
    bool collect_cost_stats = false;
    /// Force every query's k, regardless of the stream (sweep support).
    std::optional<std::uint32_t> k_override;
};

struct Metrics {
    std::uint64_t queries = 0;
    std::uint64_t items = 0;
    std::uint64_t events = 0;
    std::uint64_t zero_score_events = 0;
    /// match_item calls: item arrivals, naive event re-matching, and
    /// candidate refreshes.
    std::uint64_t ih_matches = 0;
    std::uint64_t ih_refreshes = 0;
    std::uint64_t eh_probes = 0;
    std::uint64_t eh_match_calls = 0;  // match_event on a non-empty list
    double visited_fraction_sum = 0.0;
    std::uint64_t visited_entries = 0;  // == eh_probes, kept for clarity
    std::uint64_t visited_sizes = 0;    // total list size at probe time
    std::uint64_t result_updates = 0;
    std::uint64_t evictions = 0;

    double visited_fraction_mean() const {
        return eh_match_calls ? visited_fraction_sum / static_cast<double>(eh_match_calls)
                              : 0.0;
    }
    double visited_fraction_total() const {
        return visited_sizes ? static_cast<double>(visited_entries) /
                                   static_cast<double>(visited_sizes)
                             : 0.0;
    }
};

/// Single-writer state machine: one record at a time, to completion, in
/// stream order.
class Engine {
  public:
    explicit Engine(EngineConfig config);

    void process(const StreamRecord& rec);

    void process_query(const QueryRec& rec);
    void process_item(const ItemRec& rec);
    void process_event(const EventRec& rec);

    const Catalog& catalog() const { return catalog_; }
    const Metrics& metrics() const { return metrics_; }
    const EngineConfig& config() const { return config_; }

    const std::vector<ResultEntry>& result_of(QueryId q) const {
        return catalog_.query(q).result;
    }

    void set_delta_sink(DeltaSink sink) { delta_sink_ = std::move(sink); }

    /// Queries whose result list changed (content or order) during the
    /// last process() call.
    const std::vector<QueryId>& dirty_queries() const { return dirty_; }

    /// Refresh invocations per item handle, for the threshold laws.
    const std::vector<std::uint32_t>& per_item_refreshes() const {
        return per_item_refreshes_;
    }

    ProbeStats take_probe_stats();

    /// Test support: membership checks for the structural invariants.
    bool is_candidate(QueryId q, ItemId item) const;
    /// The validated view of the reverse index: items whose list holds q.
    std::vector<ItemId> candidate_items_of(QueryId q) const;
    const CandidateList* candidate_list_of(ItemId item) const;

  private:
    void enforce_ts(Timestamp ts);
    void refresh_candidates(Item& item);
    void add_result(Query& q, const Item& item, double text, double score);
    /// Re-scores `item` inside the results of its active queries after a
    /// feedback change and propagates any qmin movement.
    void refresh_active_results(Item& item);
    /// qmin snapshot + candidate-store maintenance after q's result
    /// changed.
    void propagate_result_change(Query& q, double old_qmin, ItemId old_kth);
    void mark_dirty(QueryId q) {
        if (q >= dirty_flag_.size()) dirty_flag_.resize(q + 1, 0);
        if (!dirty_flag_[q]) {
            dirty_flag_[q] = 1;
            dirty_.push_back(q);
        }
    }
    ProbeOutcome probe_candidate(const CandidateEntry& entry, const Item& item);
    double landmark_base(double text, const Item& item) const {
        return landmark_total(text, item.static_quality, 0.0, item.ts, config_.score);
    }
    /// Required feedback mass, measured from dyn = 0 (gamma*dyn units).
    double required_mass(const Query& q, double text, const Item& item) const {
        return q.qmin - landmark_base(text, item);
    }
    CandidateEntry make_entry(const Query& q, double text, const Item& owner) const;
    void insert_candidate(const Query& q, Item& item, double text);
    void remove_candidate(QueryId q, ItemId item);

    /// Visits every candidate list that really holds q, dropping stale
    /// and duplicate reverse entries along the way.
    template <typename Fn>
    void walk_candidate_lists(QueryId q, Fn&& fn) {
        auto& items = reverse_candidates_[q];
        if (items.empty()) return;
        if (seen_stamp_.size() < catalog_.item_count()) {
            seen_stamp_.resize(catalog_.item_count(), 0);
        }
        if (++walk_epoch_ == 0) {
            std::fill(seen_stamp_.begin(), seen_stamp_.end(), 0);
            walk_epoch_ = 1;
        }
        std::size_t keep = 0;
        for (ItemId item_id : items) {
            if (seen_stamp_[item_id] == walk_epoch_) continue;
            seen_stamp_[item_id] = walk_epoch_;
            auto lit = candidates_.find(item_id);
            if (lit == candidates_.end() || !lit->second.contains(q)) continue;
            items[keep++] = item_id;
            fn(item_id, lit->second);
        }
        items.resize(keep);
    }

    EngineConfig config_;
    Catalog catalog_;
    QueryIndex query_index_;
    ItemIndex item_index_;
    std::unordered_map<ItemId, CandidateList> candidates_;
    /// query handle -> items that may hold it as a candidate. Appends are
    /// cheap; stale and duplicate ids are tolerated and compacted away
    /// whenever the vector is walked, so the validated view always equals
    /// the true list membership.
    std::vector<std::vector<ItemId>> reverse_candidates_;
    std::vector<std::uint32_t> seen_stamp_;  // per-item dedup during walks
    std::uint32_t walk_epoch_ = 0;
    Metrics metrics_;
    std::vector<std::uint32_t> per_item_refreshes_;
    std::vector<std::uint32_t> per_item_events_;
    std::vector<QueryId> dirty_;
    std::vector<char> dirty_flag_;
    DeltaSink delta_sink_;
    Timestamp now_ = 0.0;
    std::uint64_t item_ordinal_ = 0;
    ProbeStats probe_stats_;
};

}  // namespace ctk
