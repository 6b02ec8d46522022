#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctk/core.hpp"
#include "ctk/flat_map.hpp"

namespace ctk {

/// Candidate list organizations, in increasing order of the strength of
/// their ordering guarantee.
enum class EhVariant {
    kSimple,      // unordered dynamic array, no stopping condition
    kStatic,      // sorted once at creation, later inserts go to the front
    kLazy,        // sorted, false positives re-sorted on discovery
    kExhaustive,  // sorted and kept exact on every qmin change
    kItemPart,    // grouped by the query's k-th item, sorted within groups
};

const char* variant_name(EhVariant v);

/// One candidate: a query not currently publishing the item but close
/// enough that feedback within the item's threshold window could promote
/// it.
///
/// sort_key holds the feedback mass (in gamma * dyn units, measured from
/// dyn = 0) the item needs before the query is beaten, as of the last
/// time the key was written. For kItemPart the key is additionally
/// rebased by -gamma * dyn(kth_item) at write time, which makes it
/// time-invariant while the query's k-th item is unchanged, so group
/// order stays exact without maintenance. Keys order and prune the scan;
/// the probe callback always decides updates exactly.
struct CandidateEntry {
    QueryId query = 0;
    double sort_key = 0.0;
    double text = 0.0;       // cosine against the owning item, immutable
    ItemId kth_item = kNoItem;
};

/// Probe verdict for one candidate. live_diff is the query's current
/// required feedback mass (gamma * dyn units from zero); it re-sorts
/// lazy false positives and bounds scan continuation in ordered
/// variants.
struct ProbeOutcome {
    bool update = false;
    double live_diff = 0.0;
};

struct MatchResult {
    std::vector<CandidateEntry> updates;
    std::size_t probes = 0;
};

/// Slack applied when a stale-able sort key is compared against the
/// current feedback mass: widens the probed region so rounding noise can
/// only cost extra probes, never a missed update.
inline constexpr double kScanSlack = 1e-9;

/// Per-item candidate store. Mutated only by the engine loop.
///
/// Ordered storage is a two-region sequence: a contiguous core sorted at
/// build time (erasures become tombstones, compacted when they pile up)
/// plus a small sorted insert buffer that is merged into the core once it
/// grows. Scans walk both regions as an ascending two-pointer merge, so
/// mutations stay cheap without weakening any ordering guarantee. For
/// kStatic the buffer doubles as the always-probed front block and is
/// never merged.
class CandidateList {
  public:
    explicit CandidateList(EhVariant variant) : variant_(variant) {}

    EhVariant variant() const { return variant_; }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    bool contains(QueryId q) const {
        ensure_members();
        return members_.contains(q);
    }

    /// Replaces the whole list (threshold-window refresh). Entries need
    /// not be pre-sorted.
    void build(std::vector<CandidateEntry> entries);

    /// Single insertion; throws if the query is already present.
    void insert(const CandidateEntry& entry);

    /// No-op when absent.
    void remove(QueryId q);

    /// Walks the list for one event on the owning item, probing entries
    /// until the variant's stopping condition fires. gamma_dyn_now is the
    /// item's current feedback mass in score units.
    ///
    ///   Simple     probe everything.
    ///   Static     probe the front block unconditionally, then the
    ///              creation-sorted core while sort_key <= gamma_dyn_now.
    ///   Lazy       ascending scan while sort_key <= gamma_dyn_now; false
    ///              positives are re-sorted under their live key.
    ///   Exhaustive keys are exact, so stop at the first probe whose
    ///              live requirement strictly exceeds gamma_dyn_now.
    ///   ItemPart   per group, same stop as Exhaustive; the group of
    ///              queries with under-filled results is always fully
    ///              probed.
    MatchResult match_event(double gamma_dyn_now,
                            const std::function<ProbeOutcome(const CandidateEntry&)>& probe);

    /// Exhaustive maintenance: rewrite the query's key and restore its
    /// sorted position. new_key receives the stored entry.
    void reposition(QueryId q, const std::function<double(const CandidateEntry&)>& new_key);

    /// ItemPart maintenance: move the query to the group of its new k-th
    /// item under a freshly rebased key.
    void move_group(QueryId q, ItemId new_kth,
                    const std::function<double(const CandidateEntry&)>& new_key);

    void for_each(const std::function<void(const CandidateEntry&)>& fn) const;

    std::uint64_t visited_counter() const { return visited_; }
    std::uint64_t size_counter() const { return size_probed_; }

  private:

    static bool key_less(double key_a, QueryId query_a, double key_b, QueryId query_b) {
        if (key_a != key_b) return key_a < key_b;
        return query_a < query_b;
    }
    static bool entry_less(const CandidateEntry& a, const CandidateEntry& b) {
        return key_less(a.sort_key, a.query, b.sort_key, b.query);
    }

    struct Region {
        std::vector<CandidateEntry> core;  // ascending (key, query), exact order
        std::vector<char> gone;            // parallel to core: erased slots
        std::vector<CandidateEntry> buf;   // ascending, small (kStatic: unordered front)
        std::uint32_t dead = 0;

        bool empty() const { return core.size() == dead && buf.empty(); }
    };

    /// Where a member lives: its stored key, its group (kItemPart) and
    /// its slot (kSimple).
    struct MemberInfo {
        double key = 0.0;
        ItemId group = kNoItem;
        std::uint32_t index = 0;
    };

    Region& region_of(ItemId group);
    void insert_region(Region& region, const CandidateEntry& entry, bool front);
    bool erase_region(Region& region, double key, QueryId q, CandidateEntry* out);
    void compact(Region& region);
    void merge_buf(Region& region);
    template <typename Visit>
    void walk_merged(const Region& region, Visit&& visit) const;
    /// Most lists are built, probed and rebuilt without ever being
    /// touched individually; the membership map is materialized only when
    /// a per-query operation first needs it.
    void ensure_members() const;

    EhVariant variant_;
    std::vector<CandidateEntry> flat_;  // kSimple storage
    Region ordered_;                    // kStatic / kLazy / kExhaustive
    std::unordered_map<ItemId, Region> groups_;  // kItemPart
    mutable FlatMap<MemberInfo> members_;
    mutable bool members_built_ = true;
    std::size_t size_ = 0;
    std::uint64_t visited_ = 0;
    std::uint64_t size_probed_ = 0;
};

}  // namespace ctk
