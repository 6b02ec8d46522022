#pragma once

#include <cstdint>
#include <vector>

#include "ctk/core.hpp"

namespace ctk {

/// A query matched by an item, with the cosine computed during the
/// gather so callers never re-derive it.
struct MatchedQuery {
    QueryId query;
    double text;
};

/// A scored item gathered for a query.
struct ScoredItem {
    ItemId item;
    double text;
    double score;  // landmark total at the item's current dyn
};

/// Inverted index over registered queries: answers "which queries does
/// this item, at a given feedback score, beat". Posting entries carry a
/// snapshot of the query's qmin which is kept fresh by update_qmin and
/// backs an optional upper-bound skip during matching; correctness never
/// depends on the skip.
class QueryIndex {
  public:
    /// Registers a query under each of its terms. The caller (engine)
    /// guarantees id freshness via the catalog.
    void add_query(const Query& q);

    /// Refreshes the qmin snapshots for q. qmin never decreases; a
    /// decreasing update signals a bookkeeping bug and throws.
    void update_qmin(const Query& q, double new_qmin);

    /// Exact gather-and-score: returns every query q with text > 0 whose
    /// result must admit the item when its feedback score is dyn_override
    /// (score strictly above qmin, or tied and preceding the current k-th
    /// entry under the result order).
    std::vector<MatchedQuery> match_item(const Item& item, double dyn_override,
                                         const Catalog& catalog,
                                         const ScoreConfig& cfg) const;

    std::size_t posting_count() const { return postings_.size(); }

  private:
    struct Posting {
        QueryId query;
        double weight;
    };
    // term -> postings, grown on demand.
    std::vector<std::vector<Posting>> postings_;
    // The qmin snapshot every posting entry of a query shares; one write
    // keeps all of them fresh.
    std::vector<double> qmin_snapshot_;
    // Scratch for the gather phase: per-query partial dot products with
    // epoch stamps instead of per-call allocation.
    mutable std::vector<double> dot_;
    mutable std::vector<std::uint32_t> stamp_;
    mutable std::vector<QueryId> touched_;
    mutable std::uint32_t epoch_ = 0;
};

/// Inverted index over ingested items: answers "what is this query's
/// initial top-k".
class ItemIndex {
  public:
    void add_item(const Item& item);
    /// The index stores item ids; feedback lives on the item record, so
    /// this only asserts presence. Kept explicit to mirror the engine's
    /// event path.
    void update_item(const Item& item);

    /// Gathers every item sharing a term with q and scores it at its
    /// live feedback score; sorted under the result order.
    std::vector<ScoredItem> gather_all(const Query& q, const Catalog& catalog,
                                       const ScoreConfig& cfg) const;

    /// The top k gathered items with score above the empty-result entry
    /// barrier (0).
    std::vector<ScoredItem> match_query(const Query& q, const Catalog& catalog,
                                        const ScoreConfig& cfg) const;

  private:
    struct Posting {
        ItemId item;
        double weight;
    };
    std::vector<std::vector<Posting>> postings_;
    std::vector<bool> present_;
    mutable std::vector<double> dot_;
    mutable std::vector<std::uint32_t> stamp_;
    mutable std::vector<ItemId> touched_;
    mutable std::uint32_t epoch_ = 0;
};

}  // namespace ctk
