#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>

#include "ctk/flat_map.hpp"
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ctk {

/// Seconds since the stream origin. Records are processed in
/// non-decreasing timestamp order; ties are allowed.
using Timestamp = double;

/// Dense handles assigned in first-seen order by the Catalog.
using QueryId = std::uint32_t;
using ItemId = std::uint32_t;
using TermId = std::uint32_t;

inline constexpr ItemId kNoItem = std::numeric_limits<ItemId>::max();

/// Scoring weights and decay setup.
///
/// The total score of an item w.r.t. a query is
///   alpha * text + beta * static_quality + gamma * dyn
/// where dyn is the item's aggregated feedback score. decay_horizon is
/// the time it takes a score of 1.0 to decay to 0; infinity disables
/// decay entirely.
struct ScoreConfig {
    double alpha = 0.3;
    double beta = 0.3;
    double gamma = 0.4;
    double decay_horizon = std::numeric_limits<double>::infinity();

    void validate() const {
        if (alpha < 0 || beta < 0 || gamma < 0) {
            throw std::invalid_argument("score weights must be non-negative");
        }
        if (std::abs(alpha + beta + gamma - 1.0) > 1e-9) {
            throw std::invalid_argument("score weights must sum to 1");
        }
        if (!(decay_horizon > 0)) {
            throw std::invalid_argument("decay horizon must be positive or inf");
        }
    }
};

/// Sparse term-weight vector with its Euclidean norm cached.
/// Entries are sorted by term id; all weights are strictly positive.
struct TermProfile {
    std::vector<std::pair<TermId, double>> entries;
    double norm = 0.0;
};

/// Builds a profile from (term, weight) pairs. Throws on duplicate terms
/// or non-positive weights.
TermProfile make_profile(std::vector<std::pair<TermId, double>> entries);

/// Cosine similarity over the shared terms; 0 when none are shared or
/// either profile is empty. Symmetric, range [0, 1].
double text_score(const TermProfile& a, const TermProfile& b);

/// alpha * text + beta * static_quality + gamma * dyn. The evaluation
/// order is fixed so that every caller (engine, indexes, oracle)
/// produces bit-identical scores.
inline double total_score(double text, double static_quality, double dyn,
                          const ScoreConfig& cfg) {
    return cfg.alpha * text + cfg.beta * static_quality + cfg.gamma * dyn;
}

/// Rebases a raw score onto the fixed reference instant: raw + ts / horizon.
/// Comparing two rebased scores is equivalent to comparing the
/// forward-decayed scores raw - (now - ts) / horizon at any common "now".
inline double to_landmark(double raw, Timestamp item_ts, const ScoreConfig& cfg) {
    if (std::isinf(cfg.decay_horizon)) {
        return raw;
    }
    return raw + item_ts / cfg.decay_horizon;
}

/// The one scoring path used everywhere a query/item pair is ranked.
inline double landmark_total(double text, double static_quality, double dyn,
                             Timestamp item_ts, const ScoreConfig& cfg) {
    return to_landmark(total_score(text, static_quality, dyn, cfg), item_ts, cfg);
}

/// One slot of a query result: the item, its text score against the
/// query (immutable), and its landmark total score as of the last time
/// the item's feedback changed.
struct ResultEntry {
    ItemId item = kNoItem;
    double text = 0.0;
    double score = 0.0;
    bool operator==(const ResultEntry&) const = default;
};

/// Total order on result entries: higher landmark score first, then
/// newer item, then lexicographically smaller external id. Shared by the
/// engine and the reference implementation; result lists are always
/// sorted under it and admission into a full result uses it as well.
inline bool result_precedes(double score_a, Timestamp ts_a, std::string_view id_a,
                            double score_b, Timestamp ts_b, std::string_view id_b) {
    if (score_a != score_b) return score_a > score_b;
    if (ts_a != ts_b) return ts_a > ts_b;
    return id_a < id_b;
}

/// Set of ids with contiguous iteration and O(1) insert/erase
/// (swap-removal through a position map).
class IdSet {
  public:
    bool insert(std::uint32_t id) {
        if (!pos_.emplace(id, static_cast<std::uint32_t>(list_.size()))) return false;
        list_.push_back(id);
        return true;
    }
    bool erase(std::uint32_t id) {
        const std::uint32_t* p = pos_.find(id);
        if (p == nullptr) return false;
        std::uint32_t idx = *p;
        pos_.erase(id);
        list_[idx] = list_.back();
        list_.pop_back();
        if (idx < list_.size()) *pos_.find(list_[idx]) = idx;
        return true;
    }
    bool contains(std::uint32_t id) const { return pos_.contains(id); }
    std::size_t count(std::uint32_t id) const { return pos_.contains(id) ? 1 : 0; }
    std::size_t size() const { return list_.size(); }
    bool empty() const { return list_.empty(); }
    const std::vector<std::uint32_t>& values() const { return list_; }

  private:
    std::vector<std::uint32_t> list_;
    FlatMap<std::uint32_t> pos_;
};

struct Query {
    std::string id;
    QueryId handle = 0;
    TermProfile terms;
    std::uint32_t k = 1;
    Timestamp ts = 0.0;
    /// Sorted under result_precedes; size <= k.
    std::vector<ResultEntry> result;
    /// Landmark score of the k-th entry when full, 0 otherwise.
    /// Monotonically non-decreasing over the query's lifetime.
    double qmin = 0.0;

    bool full() const { return result.size() >= k; }
    ItemId kth_item() const { return full() ? result.back().item : kNoItem; }
};

struct Item {
    std::string id;
    ItemId handle = 0;
    TermProfile terms;
    double static_quality = 0.0;
    Timestamp ts = 0.0;
    /// Aggregated feedback score; non-decreasing (event scores are >= 0).
    double dyn = 0.0;
    /// Per-item threshold state: the candidate list stays valid while
    /// dyn <= refresh * theta.
    double theta = 0.0;
    std::uint64_t refresh = 0;
    /// Queries currently publishing this item.
    IdSet active_queries;

    double window_top() const { return static_cast<double>(refresh) * theta; }
};

struct Event {
    std::string id;
    ItemId target = 0;
    double score = 0.0;
    Timestamp ts = 0.0;
};

/// Adds a feedback event's score to its target item. Zero-score events
/// are legal no-ops.
inline void aggregate_event(Item& item, const Event& event) {
    item.dyn += event.score;
}

/// Interning table: external string ids/terms to dense handles in
/// first-seen order. Two tables fed the same sequence assign the same
/// handles, which keeps independently built components comparable.
class InternTable {
  public:
    std::uint32_t intern(std::string_view s) {
        auto it = index_.find(s);
        if (it != index_.end()) return it->second;
        std::uint32_t id = static_cast<std::uint32_t>(names_.size());
        names_.emplace_back(s);
        index_.emplace(names_.back(), id);
        return id;
    }

    /// Returns the handle or nullopt-like sentinel (max) when unknown.
    std::uint32_t find(std::string_view s) const {
        auto it = index_.find(s);
        return it == index_.end() ? std::numeric_limits<std::uint32_t>::max() : it->second;
    }

    const std::string& name(std::uint32_t id) const { return names_[id]; }
    std::size_t size() const { return names_.size(); }

  private:
    // index_ keys view into names_, which never relocates its strings.
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const {
            return std::hash<std::string_view>{}(s);
        }
    };
    struct Eq {
        using is_transparent = void;
        bool operator()(std::string_view a, std::string_view b) const { return a == b; }
    };
    std::deque<std::string> names_;
    std::unordered_map<std::string_view, std::uint32_t, Hash, Eq> index_;
};

/// Owns all registered queries and ingested items plus the id/term
/// interning tables. Single writer; readers may take const references
/// between records.
class Catalog {
  public:
    TermId intern_term(std::string_view t) { return terms_.intern(t); }

    Query& add_query(std::string_view external_id, TermProfile profile,
                     std::uint32_t k, Timestamp ts);
    Item& add_item(std::string_view external_id, TermProfile profile,
                   double static_quality, Timestamp ts);

    bool has_query(std::string_view external_id) const {
        return query_ids_.find(external_id) != std::numeric_limits<std::uint32_t>::max();
    }
    ItemId find_item(std::string_view external_id) const {
        return item_ids_.find(external_id);
    }

    Query& query(QueryId q) { return queries_[q]; }
    const Query& query(QueryId q) const { return queries_[q]; }
    Item& item(ItemId i) { return items_[i]; }
    const Item& item(ItemId i) const { return items_[i]; }

    std::size_t query_count() const { return queries_.size(); }
    std::size_t item_count() const { return items_.size(); }

  private:
    InternTable terms_;
    InternTable query_ids_;
    InternTable item_ids_;
    std::vector<Query> queries_;
    std::vector<Item> items_;
};

}  // namespace ctk
