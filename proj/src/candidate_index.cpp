#include "ctk/candidate_index.hpp"

#include <algorithm>

namespace ctk {

const char* variant_name(EhVariant v) {
    switch (v) {
        case EhVariant::kSimple: return "simple";
        case EhVariant::kStatic: return "static";
        case EhVariant::kLazy: return "lazy";
        case EhVariant::kExhaustive: return "exhaustive";
        case EhVariant::kItemPart: return "itempart";
    }
    return "?";
}

CandidateList::Region& CandidateList::region_of(ItemId group) {
    if (variant_ != EhVariant::kItemPart) return ordered_;
    return groups_[group];
}

void CandidateList::insert_region(Region& region, const CandidateEntry& entry, bool front) {
    if (front) {
        region.buf.push_back(entry);
        return;
    }
    auto pos = std::upper_bound(region.buf.begin(), region.buf.end(), entry, entry_less);
    region.buf.insert(pos, entry);
    if (region.buf.size() >= 32 && region.buf.size() * 8 >= region.core.size()) {
        merge_buf(region);
    }
}

void CandidateList::merge_buf(Region& region) {
    std::vector<CandidateEntry> merged;
    merged.reserve(region.core.size() - region.dead + region.buf.size());
    std::size_t ci = 0;
    auto bi = region.buf.begin();
    while (ci < region.core.size() || bi != region.buf.end()) {
        if (ci < region.core.size() && region.gone[ci]) {
            ++ci;
            continue;
        }
        if (bi == region.buf.end() ||
            (ci < region.core.size() && entry_less(region.core[ci], *bi))) {
            merged.push_back(region.core[ci++]);
        } else {
            merged.push_back(*bi++);
        }
    }
    region.core = std::move(merged);
    region.gone.assign(region.core.size(), 0);
    region.buf.clear();
    region.dead = 0;
}

void CandidateList::compact(Region& region) {
    std::size_t keep = 0;
    for (std::size_t i = 0; i < region.core.size(); ++i) {
        if (!region.gone[i]) region.core[keep++] = region.core[i];
    }
    region.core.resize(keep);
    region.gone.assign(keep, 0);
    region.dead = 0;
}

bool CandidateList::erase_region(Region& region, double key, QueryId q,
                                 CandidateEntry* out) {
    // Erased slots keep their entry (order intact) and are flagged in
    // region.gone, so the exact (key, query) position stays findable.
    CandidateEntry probe;
    probe.sort_key = key;
    probe.query = q;
    auto it = std::lower_bound(region.core.begin(), region.core.end(), probe, entry_less);
    if (it != region.core.end() && it->query == q && it->sort_key == key) {
        std::size_t idx = static_cast<std::size_t>(it - region.core.begin());
        if (!region.gone[idx]) {
            if (out != nullptr) *out = *it;
            region.gone[idx] = 1;
            ++region.dead;
            if (region.dead * 2 > region.core.size()) compact(region);
            return true;
        }
    }
    for (auto bit = region.buf.begin(); bit != region.buf.end(); ++bit) {
        if (bit->query == q) {
            if (out != nullptr) *out = *bit;
            region.buf.erase(bit);
            return true;
        }
    }
    return false;
}

void CandidateList::build(std::vector<CandidateEntry> entries) {
    flat_.clear();
    ordered_ = Region{};
    groups_.clear();
    members_.clear();
    members_built_ = false;
    size_ = entries.size();
    std::sort(entries.begin(), entries.end(), entry_less);
    switch (variant_) {
        case EhVariant::kSimple:
            flat_ = std::move(entries);
            break;
        case EhVariant::kStatic:
        case EhVariant::kLazy:
        case EhVariant::kExhaustive:
            ordered_.core = std::move(entries);
            ordered_.gone.assign(ordered_.core.size(), 0);
            break;
        case EhVariant::kItemPart: {
            // Entries are globally sorted, so each group's slice arrives
            // in order and appends stay sorted.
            for (const auto& e : entries) {
                groups_[e.kth_item].core.push_back(e);
            }
            for (auto& [kth, group] : groups_) {
                group.gone.assign(group.core.size(), 0);
            }
            break;
        }
    }
}

void CandidateList::ensure_members() const {
    if (members_built_) return;
    members_built_ = true;
    members_.clear();
    std::uint32_t index = 0;
    auto add = [&](const CandidateEntry& e) {
        MemberInfo info{e.sort_key, e.kth_item, index++};
        if (!members_.emplace(e.query, info)) {
            throw std::runtime_error("duplicate query among candidates");
        }
    };
    switch (variant_) {
        case EhVariant::kSimple:
            for (const auto& e : flat_) add(e);
            break;
        case EhVariant::kStatic:
        case EhVariant::kLazy:
        case EhVariant::kExhaustive:
            for (std::size_t i = 0; i < ordered_.core.size(); ++i) {
                if (!ordered_.gone[i]) add(ordered_.core[i]);
            }
            for (const auto& e : ordered_.buf) add(e);
            break;
        case EhVariant::kItemPart:
            for (const auto& [kth, group] : groups_) {
                for (std::size_t i = 0; i < group.core.size(); ++i) {
                    if (!group.gone[i]) add(group.core[i]);
                }
                for (const auto& e : group.buf) add(e);
            }
            break;
    }
}

void CandidateList::insert(const CandidateEntry& entry) {
    ensure_members();
    bool front = variant_ == EhVariant::kStatic;
    CandidateEntry stored = entry;
    if (front) {
        // Front insertion regardless of the entry's gap; key 0 keeps it
        // in the always-probed region.
        stored.sort_key = 0.0;
    }
    MemberInfo info{stored.sort_key, stored.kth_item, 0};
    if (variant_ == EhVariant::kSimple) {
        info.index = static_cast<std::uint32_t>(flat_.size());
    }
    if (!members_.emplace(stored.query, info)) {
        throw std::runtime_error("candidate already present");
    }
    ++size_;
    switch (variant_) {
        case EhVariant::kSimple:
            flat_.push_back(stored);
            break;
        case EhVariant::kStatic:
        case EhVariant::kLazy:
        case EhVariant::kExhaustive:
            insert_region(ordered_, stored, front);
            break;
        case EhVariant::kItemPart:
            insert_region(region_of(stored.kth_item), stored, false);
            break;
    }
}

void CandidateList::remove(QueryId q) {
    ensure_members();
    const MemberInfo* info = members_.find(q);
    if (info == nullptr) return;
    MemberInfo copy = *info;
    members_.erase(q);
    --size_;
    switch (variant_) {
        case EhVariant::kSimple: {
            std::uint32_t idx = copy.index;
            flat_[idx] = flat_.back();
            flat_.pop_back();
            if (idx < flat_.size()) {
                members_.find(flat_[idx].query)->index = idx;
            }
            break;
        }
        case EhVariant::kStatic:
        case EhVariant::kLazy:
        case EhVariant::kExhaustive:
            erase_region(ordered_, copy.key, q, nullptr);
            break;
        case EhVariant::kItemPart: {
            auto git = groups_.find(copy.group);
            if (git == groups_.end()) break;
            erase_region(git->second, copy.key, q, nullptr);
            if (git->second.empty()) groups_.erase(git);
            break;
        }
    }
}

MatchResult CandidateList::match_event(
    double gamma_dyn_now, const std::function<ProbeOutcome(const CandidateEntry&)>& probe) {
    MatchResult result;
    auto run_probe = [&](const CandidateEntry& e) {
        ++result.probes;
        ProbeOutcome out = probe(e);
        if (out.update) result.updates.push_back(e);
        return out;
    };
    switch (variant_) {
        case EhVariant::kSimple:
            for (const auto& e : flat_) run_probe(e);
            break;
        case EhVariant::kStatic:
            for (const auto& e : ordered_.buf) run_probe(e);
            for (std::size_t i = 0; i < ordered_.core.size(); ++i) {
                if (ordered_.gone[i]) continue;
                const CandidateEntry& e = ordered_.core[i];
                if (e.sort_key > gamma_dyn_now + kScanSlack) break;
                run_probe(e);
            }
            break;
        case EhVariant::kLazy: {
            // Probed false positives, re-sorted afterwards under their
            // live keys.
            std::vector<std::pair<CandidateEntry, double>> stale;
            walk_merged(ordered_, [&](const CandidateEntry& e) {
                if (e.sort_key > gamma_dyn_now + kScanSlack) return false;
                ProbeOutcome out = run_probe(e);
                if (!out.update && out.live_diff > e.sort_key) {
                    stale.emplace_back(e, out.live_diff);
                }
                return true;
            });
            for (auto& [entry, live] : stale) {
                erase_region(ordered_, entry.sort_key, entry.query, nullptr);
                entry.sort_key = live;
                insert_region(ordered_, entry, false);
                if (members_built_) members_.find(entry.query)->key = live;
            }
            break;
        }
        case EhVariant::kExhaustive:
            walk_merged(ordered_, [&](const CandidateEntry& e) {
                ProbeOutcome out = run_probe(e);
                // Keys are exact, so the first entry strictly beyond the
                // current mass ends the scan; ties may still update via
                // the result-order tie-break and are walked through.
                return out.update || out.live_diff <= gamma_dyn_now + kScanSlack;
            });
            break;
        case EhVariant::kItemPart:
            for (const auto& [kth, group] : groups_) {
                bool probe_all = kth == kNoItem;  // under-filled: probe all
                walk_merged(group, [&](const CandidateEntry& e) {
                    ProbeOutcome out = run_probe(e);
                    return probe_all || out.update ||
                           out.live_diff <= gamma_dyn_now + kScanSlack;
                });
            }
            break;
    }
    visited_ += result.probes;
    size_probed_ += size();
    return result;
}

template <typename Visit>
void CandidateList::walk_merged(const Region& region, Visit&& visit) const {
    std::size_t ci = 0;
    auto bi = region.buf.begin();
    while (true) {
        while (ci < region.core.size() && region.gone[ci]) ++ci;
        const CandidateEntry* next = nullptr;
        bool from_core = false;
        if (ci < region.core.size() &&
            (bi == region.buf.end() || entry_less(region.core[ci], *bi))) {
            next = &region.core[ci];
            from_core = true;
        } else if (bi != region.buf.end()) {
            next = &*bi;
        } else {
            return;
        }
        if (!visit(*next)) return;
        if (from_core) {
            ++ci;
        } else {
            ++bi;
        }
    }
}

void CandidateList::reposition(QueryId q,
                               const std::function<double(const CandidateEntry&)>& new_key) {
    ensure_members();
    const MemberInfo* info = members_.find(q);
    if (info == nullptr) return;
    MemberInfo copy = *info;
    CandidateEntry entry;
    Region& region = region_of(copy.group);
    if (!erase_region(region, copy.key, q, &entry)) {
        throw std::runtime_error("candidate storage out of sync");
    }
    entry.sort_key = new_key(entry);
    members_.find(q)->key = entry.sort_key;
    insert_region(region, entry, false);
}

void CandidateList::move_group(QueryId q, ItemId new_kth,
                               const std::function<double(const CandidateEntry&)>& new_key) {
    ensure_members();
    const MemberInfo* info = members_.find(q);
    if (info == nullptr) return;
    MemberInfo copy = *info;
    members_.erase(q);
    CandidateEntry entry;
    {
        auto git = groups_.find(copy.group);
        if (git == groups_.end() || !erase_region(git->second, copy.key, q, &entry)) {
            throw std::runtime_error("candidate storage out of sync");
        }
        if (git->second.empty()) groups_.erase(git);
    }
    entry.kth_item = new_kth;
    entry.sort_key = new_key(entry);
    members_.emplace(q, MemberInfo{entry.sort_key, new_kth, 0});
    insert_region(groups_[new_kth], entry, false);
}

void CandidateList::for_each(const std::function<void(const CandidateEntry&)>& fn) const {
    auto emit_region = [&](const Region& region) {
        walk_merged(region, [&](const CandidateEntry& e) {
            fn(e);
            return true;
        });
    };
    switch (variant_) {
        case EhVariant::kSimple:
            for (const auto& e : flat_) fn(e);
            break;
        case EhVariant::kStatic:
        case EhVariant::kLazy:
        case EhVariant::kExhaustive:
            emit_region(ordered_);
            break;
        case EhVariant::kItemPart:
            for (const auto& [kth, group] : groups_) emit_region(group);
            break;
    }
}

}  // namespace ctk
