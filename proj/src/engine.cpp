#include "ctk/engine.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>

namespace ctk {

namespace {

std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

}  // namespace

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
    config_.score.validate();
}

void Engine::process(const StreamRecord& rec) {
    for (QueryId q : dirty_) dirty_flag_[q] = 0;
    dirty_.clear();
    if (const auto* q = std::get_if<QueryRec>(&rec)) {
        process_query(*q);
    } else if (const auto* i = std::get_if<ItemRec>(&rec)) {
        process_item(*i);
    } else {
        process_event(std::get<EventRec>(rec));
    }
}

void Engine::enforce_ts(Timestamp ts) { now_ = ts; }

void Engine::process_query(const QueryRec& rec) {
    enforce_ts(rec.ts);
    std::vector<std::pair<TermId, double>> entries;
    entries.reserve(rec.terms.size());
    for (const auto& tw : rec.terms) {
        entries.emplace_back(catalog_.intern_term(tw.term), tw.weight);
    }
    std::uint32_t k = config_.k_override.value_or(rec.k);
    Query& q = catalog_.add_query(rec.id, make_profile(std::move(entries)), k, rec.ts);
    query_index_.add_query(q);
    if (q.handle >= reverse_candidates_.size()) {
        reverse_candidates_.resize(q.handle + 1);
    }
    ++metrics_.queries;
    mark_dirty(q.handle);

    auto scored = item_index_.gather_all(q, catalog_, config_.score);
    std::size_t consumed = 0;
    while (consumed < scored.size() && q.result.size() < q.k &&
           scored[consumed].score > 0) {
        const ScoredItem& si = scored[consumed];
        add_result(q, catalog_.item(si.item), si.text, si.score);
        ++consumed;
    }
    if (config_.mode == Mode::kRrts) {
        // Items already inside a live threshold window will not re-run
        // the item matcher until the window is exceeded, so the new query
        // has to be patched into their candidate lists now.
        for (std::size_t i = consumed; i < scored.size(); ++i) {
            const ScoredItem& si = scored[i];
            Item& item = catalog_.item(si.item);
            auto lit = candidates_.find(item.handle);
            if (lit == candidates_.end()) continue;  // first event will match
            double at_window = landmark_total(si.text, item.static_quality,
                                              item.window_top(), item.ts, config_.score);
            if (q.qmin <= at_window && !item.active_queries.count(q.handle)) {
                insert_candidate(q, item, si.text);
            }
        }
    }
}

void Engine::process_item(const ItemRec& rec) {
    enforce_ts(rec.ts);
    std::vector<std::pair<TermId, double>> entries;
    entries.reserve(rec.terms.size());
    for (const auto& tw : rec.terms) {
        entries.emplace_back(catalog_.intern_term(tw.term), tw.weight);
    }
    Item& item = catalog_.add_item(rec.id, make_profile(std::move(entries)),
                                   rec.static_quality, rec.ts);
    item_index_.add_item(item);
    if (item.handle >= per_item_refreshes_.size()) {
        per_item_refreshes_.resize(item.handle + 1, 0);
    }
    ++metrics_.items;
    if (config_.mode == Mode::kRrts) {
        item.theta = theta_for_item(item, config_.theta, item_ordinal_++);
        if (item.theta < 0) throw std::runtime_error("negative theta for " + item.id);
        item.refresh = 0;
        // The candidate list itself is built lazily at the first event.
    }

    std::uint64_t t0 = config_.collect_cost_stats ? now_ns() : 0;
    auto matched = query_index_.match_item(item, 0.0, catalog_, config_.score);
    ++metrics_.ih_matches;
    if (config_.collect_cost_stats) {
        probe_stats_.match_ns_total += static_cast<double>(now_ns() - t0);
        ++probe_stats_.match_count;
    }
    for (const auto& m : matched) {
        Query& q = catalog_.query(m.query);
        double score =
            landmark_total(m.text, item.static_quality, item.dyn, item.ts, config_.score);
        add_result(q, item, m.text, score);
    }
}

void Engine::process_event(const EventRec& rec) {
    enforce_ts(rec.ts);
    ItemId handle = catalog_.find_item(rec.target);
    if (handle == std::numeric_limits<std::uint32_t>::max()) {
        throw std::runtime_error("event targets unknown item: " + rec.target);
    }
    if (rec.score < 0) throw std::runtime_error("negative event score");
    ++metrics_.events;
    if (rec.score == 0.0) {
        ++metrics_.zero_score_events;
        return;
    }
    Item& item = catalog_.item(handle);
    Event ev{rec.id, handle, rec.score, rec.ts};
    aggregate_event(item, ev);
    item_index_.update_item(item);
    if (handle >= per_item_events_.size()) per_item_events_.resize(handle + 1, 0);
    ++per_item_events_[handle];

    refresh_active_results(item);

    if (config_.mode == Mode::kNaive) {
        std::uint64_t t0 = config_.collect_cost_stats ? now_ns() : 0;
        auto matched = query_index_.match_item(item, item.dyn, catalog_, config_.score);
        ++metrics_.ih_matches;
        if (config_.collect_cost_stats) {
            probe_stats_.match_ns_total += static_cast<double>(now_ns() - t0);
            ++probe_stats_.match_count;
        }
        for (const auto& m : matched) {
            if (item.active_queries.count(m.query)) continue;  // already published
            Query& q = catalog_.query(m.query);
            double score = landmark_total(m.text, item.static_quality, item.dyn, item.ts,
                                          config_.score);
            add_result(q, item, m.text, score);
        }
        return;
    }

    if (item.dyn > item.window_top()) {
        refresh_candidates(item);
    }
    auto lit = candidates_.find(handle);
    if (lit == candidates_.end()) return;
    CandidateList& list = lit->second;
    std::size_t size_before = list.size();
    if (size_before == 0) return;

    std::vector<CandidateEntry> outgrown;
    double window_top = item.window_top();
    std::uint64_t t0 = config_.collect_cost_stats ? now_ns() : 0;
    MatchResult match = list.match_event(
        config_.score.gamma * item.dyn, [&](const CandidateEntry& e) {
            ProbeOutcome out = probe_candidate(e, item);
            if (config_.prune_outgrown_candidates && !out.update) {
                const Query& q = catalog_.query(e.query);
                double at_window = landmark_total(e.text, item.static_quality, window_top,
                                                  item.ts, config_.score);
                if (q.qmin > at_window) outgrown.push_back(e);
            }
            return out;
        });
    if (config_.collect_cost_stats && match.probes > 0) {
        probe_stats_.probe_ns_total += static_cast<double>(now_ns() - t0);
        probe_stats_.probe_count += match.probes;
    }
    ++metrics_.eh_match_calls;
    metrics_.eh_probes += match.probes;
    metrics_.visited_entries += match.probes;
    metrics_.visited_sizes += size_before;
    metrics_.visited_fraction_sum +=
        static_cast<double>(match.probes) / static_cast<double>(size_before);

    for (const auto& e : match.updates) {
        Query& q = catalog_.query(e.query);
        double score =
            landmark_total(e.text, item.static_quality, item.dyn, item.ts, config_.score);
        add_result(q, item, e.text, score);
    }
    for (const auto& e : outgrown) {
        // Safe removal: the query's barrier now exceeds anything the
        // current window can produce.
        remove_candidate(e.query, handle);
    }
}

void Engine::refresh_candidates(Item& item) {
    ++metrics_.ih_refreshes;
    ++per_item_refreshes_[item.handle];
    if (item.theta > 0) {
        std::uint64_t step =
            static_cast<std::uint64_t>(std::floor(item.dyn / item.theta)) + 1;
        item.refresh = config_.cumulative_refresh ? item.refresh + step : step;
    }
    double placeholder_dyn = item.theta > 0 ? item.window_top() : item.dyn;

    std::uint64_t t0 = config_.collect_cost_stats ? now_ns() : 0;
    auto matched = query_index_.match_item(item, placeholder_dyn, catalog_, config_.score);
    ++metrics_.ih_matches;
    std::uint64_t t1 = config_.collect_cost_stats ? now_ns() : 0;
    if (config_.collect_cost_stats) {
        probe_stats_.match_ns_total += static_cast<double>(t1 - t0);
        ++probe_stats_.match_count;
    }

    std::vector<CandidateEntry> entries;
    entries.reserve(matched.size());
    for (const auto& m : matched) {
        if (item.active_queries.count(m.query)) continue;
        entries.push_back(make_entry(catalog_.query(m.query), m.text, item));
    }
    auto [lit, inserted] = candidates_.try_emplace(item.handle, config_.variant);
    std::size_t list_size = entries.size();
    for (const auto& e : entries) {
        reverse_candidates_[e.query].push_back(item.handle);
    }
    lit->second.build(std::move(entries));
    if (config_.collect_cost_stats) {
        probe_stats_.refresh_sizes.emplace_back(item.theta, static_cast<double>(list_size));
        probe_stats_.refresh_build_ns.emplace_back(item.theta,
                                                   static_cast<double>(now_ns() - t1));
    }
}

CandidateEntry Engine::make_entry(const Query& q, double text, const Item& owner) const {
    CandidateEntry e;
    e.query = q.handle;
    e.text = text;
    e.kth_item = q.kth_item();
    e.sort_key = required_mass(q, text, owner);
    if (config_.variant == EhVariant::kItemPart && e.kth_item != kNoItem) {
        // Rebase by the k-th item's current feedback so the key is
        // constant while the k-th item is unchanged; group members then
        // keep their relative order without maintenance.
        e.sort_key -= config_.score.gamma * catalog_.item(e.kth_item).dyn;
    }
    return e;
}

ProbeOutcome Engine::probe_candidate(const CandidateEntry& entry, const Item& item) {
    const Query& q = catalog_.query(entry.query);
    double score =
        landmark_total(entry.text, item.static_quality, item.dyn, item.ts, config_.score);
    bool update;
    if (!q.full()) {
        update = score > 0;
    } else {
        const ResultEntry& kth = q.result.back();
        const Item& kth_item = catalog_.item(kth.item);
        update = result_precedes(score, item.ts, item.id, kth.score, kth_item.ts,
                                 kth_item.id);
    }
    return {update, required_mass(q, entry.text, item)};
}

void Engine::insert_candidate(const Query& q, Item& item, double text) {
    auto [lit, inserted] = candidates_.try_emplace(item.handle, config_.variant);
    lit->second.insert(make_entry(q, text, item));
    reverse_candidates_[q.handle].push_back(item.handle);
}

void Engine::remove_candidate(QueryId q, ItemId item) {
    auto lit = candidates_.find(item);
    if (lit == candidates_.end()) return;
    lit->second.remove(q);
    // The reverse entry goes stale and is compacted on the next walk.
}

void Engine::add_result(Query& q, const Item& item, double text, double score) {
    double old_qmin = q.qmin;
    ItemId old_kth = q.kth_item();

    if (config_.mode == Mode::kRrts) {
        remove_candidate(q.handle, item.handle);
    }

    ResultEntry entry{item.handle, text, score};
    auto pos = std::find_if(q.result.begin(), q.result.end(), [&](const ResultEntry& r) {
        const Item& other = catalog_.item(r.item);
        return result_precedes(score, item.ts, item.id, r.score, other.ts, other.id);
    });
    q.result.insert(pos, entry);
    catalog_.item(item.handle).active_queries.insert(q.handle);

    ItemId evicted = kNoItem;
    if (q.result.size() > q.k) {
        ResultEntry out = q.result.back();
        q.result.pop_back();
        evicted = out.item;
        Item& ev_item = catalog_.item(out.item);
        ev_item.active_queries.erase(q.handle);
        ++metrics_.evictions;
        q.qmin = q.result.back().score;
        if (config_.mode == Mode::kRrts) {
            // Window test: the evicted item stays reachable for q only if
            // feedback within its current threshold window could still
            // lift it past the barrier.
            double at_window = landmark_total(out.text, ev_item.static_quality,
                                              ev_item.window_top(), ev_item.ts,
                                              config_.score);
            if (q.qmin <= at_window) {
                insert_candidate(q, ev_item, out.text);
            }
        }
    } else {
        q.qmin = q.full() ? q.result.back().score : 0.0;
    }

    propagate_result_change(q, old_qmin, old_kth);
    ++metrics_.result_updates;
    mark_dirty(q.handle);
    if (delta_sink_) {
        delta_sink_({now_, q.handle, item.handle, evicted});
    }
}

void Engine::refresh_active_results(Item& item) {
    for (QueryId qid : item.active_queries.values()) {
        Query& q = catalog_.query(qid);
        auto it = q.result.begin();
        if (q.result.size() > 1) {
            it = std::find_if(q.result.begin(), q.result.end(),
                              [&](const ResultEntry& r) { return r.item == item.handle; });
        }
        assert(it != q.result.end() && it->item == item.handle);
        double new_score = landmark_total(it->text, item.static_quality, item.dyn,
                                          item.ts, config_.score);
        if (new_score == it->score) continue;  // gamma == 0
        double old_qmin = q.qmin;
        ItemId old_kth = q.kth_item();
        it->score = new_score;
        // Only this entry's score rose; bubble it toward the front.
        auto idx = static_cast<std::size_t>(it - q.result.begin());
        while (idx > 0) {
            const ResultEntry& ahead = q.result[idx - 1];
            const Item& ahead_item = catalog_.item(ahead.item);
            if (!result_precedes(new_score, item.ts, item.id, ahead.score, ahead_item.ts,
                                 ahead_item.id)) {
                break;
            }
            std::swap(q.result[idx - 1], q.result[idx]);
            --idx;
        }
        q.qmin = q.full() ? q.result.back().score : 0.0;
        propagate_result_change(q, old_qmin, old_kth);
        mark_dirty(qid);
    }
}

void Engine::propagate_result_change(Query& q, double old_qmin, ItemId old_kth) {
    ItemId new_kth = q.kth_item();
    if (q.qmin < old_qmin) {
        throw std::runtime_error("qmin decreased for query " + q.id);
    }
    if (q.qmin != old_qmin) {
        query_index_.update_qmin(q, q.qmin);
    }
    if (config_.mode != Mode::kRrts) return;
    if (config_.variant == EhVariant::kExhaustive && q.qmin != old_qmin) {
        walk_candidate_lists(q.handle, [&](ItemId item_id, CandidateList& list) {
            const Item& owner = catalog_.item(item_id);
            list.reposition(q.handle, [&](const CandidateEntry& e) {
                return required_mass(q, e.text, owner);
            });
        });
    } else if (config_.variant == EhVariant::kItemPart && new_kth != old_kth) {
        double shift =
            new_kth != kNoItem ? config_.score.gamma * catalog_.item(new_kth).dyn : 0.0;
        walk_candidate_lists(q.handle, [&](ItemId item_id, CandidateList& list) {
            const Item& owner = catalog_.item(item_id);
            list.move_group(q.handle, new_kth, [&](const CandidateEntry& e) {
                return required_mass(q, e.text, owner) - shift;
            });
        });
    }
}

ProbeStats Engine::take_probe_stats() {
    ProbeStats stats = std::move(probe_stats_);
    probe_stats_ = ProbeStats{};
    stats.item_final_dyn.reserve(catalog_.item_count());
    for (std::size_t i = 0; i < catalog_.item_count(); ++i) {
        stats.item_final_dyn.push_back(catalog_.item(static_cast<ItemId>(i)).dyn);
        std::uint64_t ev =
            i < per_item_events_.size() ? per_item_events_[i] : 0;
        stats.item_event_counts.push_back(static_cast<double>(ev));
    }
    return stats;
}

bool Engine::is_candidate(QueryId q, ItemId item) const {
    auto lit = candidates_.find(item);
    return lit != candidates_.end() && lit->second.contains(q);
}

std::vector<ItemId> Engine::candidate_items_of(QueryId q) const {
    std::vector<ItemId> out;
    if (q >= reverse_candidates_.size()) return out;
    std::unordered_set<ItemId> seen;
    for (ItemId item_id : reverse_candidates_[q]) {
        auto lit = candidates_.find(item_id);
        if (lit != candidates_.end() && lit->second.contains(q) && seen.insert(item_id).second) {
            out.push_back(item_id);
        }
    }
    return out;
}

const CandidateList* Engine::candidate_list_of(ItemId item) const {
    auto lit = candidates_.find(item);
    return lit == candidates_.end() ? nullptr : &lit->second;
}

}  // namespace ctk
