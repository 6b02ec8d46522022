#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctk/core.hpp"
#include "ctk/stream_io.hpp"

namespace ctk {

/// First divergence between an engine result and the reference result.
struct Mismatch {
    std::string query_id;
    std::size_t position = 0;
    std::string expected;  // "item@score" or "(none)"
    std::string actual;

    std::string to_string() const;
};

/// Brute-force reference: after every record each query's top-k is
/// recomputed by scanning all items from first principles. No indexes,
/// no candidate state, no thresholds. Desk-scale only.
class Oracle {
  public:
    explicit Oracle(ScoreConfig cfg, std::optional<std::uint32_t> k_override = {});

    void step(const StreamRecord& rec);

    std::size_t query_count() const { return catalog_.query_count(); }
    const Query& query(QueryId q) const { return catalog_.query(q); }
    const std::vector<ResultEntry>& result_of(QueryId q) const {
        return catalog_.query(q).result;
    }
    const Catalog& catalog() const { return catalog_; }

    /// Queries whose recomputed result differs from the previous record's.
    const std::vector<QueryId>& dirty_queries() const { return dirty_; }

  private:
    void recompute(Query& q);

    ScoreConfig cfg_;
    std::optional<std::uint32_t> k_override_;
    Catalog catalog_;
    std::vector<QueryId> dirty_;
};

/// Compares one query's ordered result lists entry by entry (item ids
/// and landmark scores must match exactly).
std::optional<Mismatch> diff_results(const Catalog& engine_catalog,
                                     const Query& engine_query,
                                     const Catalog& oracle_catalog,
                                     const Query& oracle_query);

}  // namespace ctk
