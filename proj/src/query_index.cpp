#include "ctk/query_index.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctk {

void QueryIndex::add_query(const Query& q) {
    if (q.handle >= qmin_snapshot_.size()) {
        qmin_snapshot_.resize(q.handle + 1, 0.0);
    }
    qmin_snapshot_[q.handle] = q.qmin;
    for (const auto& [term, weight] : q.terms.entries) {
        if (term >= postings_.size()) {
            postings_.resize(term + 1);
        }
        postings_[term].push_back({q.handle, weight});
    }
}

void QueryIndex::update_qmin(const Query& q, double new_qmin) {
    if (q.handle >= qmin_snapshot_.size()) {
        throw std::runtime_error("update_qmin on unregistered query");
    }
    if (new_qmin < qmin_snapshot_[q.handle]) {
        throw std::runtime_error("qmin must not decrease");
    }
    qmin_snapshot_[q.handle] = new_qmin;
}

std::vector<MatchedQuery> QueryIndex::match_item(const Item& item, double dyn_override,
                                                 const Catalog& catalog,
                                                 const ScoreConfig& cfg) const {
    // Best possible score of this item against any query: cosine <= 1.
    const double upper_bound = landmark_total(1.0, item.static_quality, dyn_override,
                                              item.ts, cfg);
    // Accumulate partial dot products in ascending term order so the
    // final cosine is bit-identical to text_score().
    if (dot_.size() < catalog.query_count()) {
        dot_.resize(catalog.query_count(), 0.0);
        stamp_.resize(catalog.query_count(), 0);
    }
    if (++epoch_ == 0) {  // stamp wrap: invalidate everything
        std::fill(stamp_.begin(), stamp_.end(), 0);
        epoch_ = 1;
    }
    touched_.clear();
    for (const auto& [term, item_weight] : item.terms.entries) {
        if (term >= postings_.size()) continue;
        for (const auto& posting : postings_[term]) {
            // A barrier strictly above the bound can never be beaten;
            // ties are kept since admission can still happen on the
            // result-order tie-break.
            if (qmin_snapshot_[posting.query] > upper_bound) continue;
            if (stamp_[posting.query] != epoch_) {
                stamp_[posting.query] = epoch_;
                dot_[posting.query] = 0.0;
                touched_.push_back(posting.query);
            }
            dot_[posting.query] += posting.weight * item_weight;
        }
    }
    std::vector<MatchedQuery> out;
    for (QueryId qid : touched_) {
        const Query& q = catalog.query(qid);
        double text = dot_[qid] / (q.terms.norm * item.terms.norm);
        if (!(text > 0)) continue;
        double score = landmark_total(text, item.static_quality, dyn_override, item.ts, cfg);
        bool beats;
        if (!q.full()) {
            beats = score > 0;
        } else {
            const ResultEntry& kth = q.result.back();
            const Item& kth_item = catalog.item(kth.item);
            beats = result_precedes(score, item.ts, item.id,
                                    kth.score, kth_item.ts, kth_item.id);
        }
        if (beats) out.push_back({qid, text});
    }
    // touched_ follows posting order; normalize for deterministic output.
    std::sort(out.begin(), out.end(),
              [](const MatchedQuery& a, const MatchedQuery& b) { return a.query < b.query; });
    return out;
}

void ItemIndex::add_item(const Item& item) {
    if (item.handle >= present_.size()) {
        present_.resize(item.handle + 1, false);
    }
    present_[item.handle] = true;
    for (const auto& [term, weight] : item.terms.entries) {
        if (term >= postings_.size()) {
            postings_.resize(term + 1);
        }
        postings_[term].push_back({item.handle, weight});
    }
}

void ItemIndex::update_item(const Item& item) {
    if (item.handle >= present_.size() || !present_[item.handle]) {
        throw std::runtime_error("update of unknown item: " + item.id);
    }
}

std::vector<ScoredItem> ItemIndex::gather_all(const Query& q, const Catalog& catalog,
                                              const ScoreConfig& cfg) const {
    if (dot_.size() < catalog.item_count()) {
        dot_.resize(catalog.item_count(), 0.0);
        stamp_.resize(catalog.item_count(), 0);
    }
    if (++epoch_ == 0) {  // stamp wrap: invalidate everything
        std::fill(stamp_.begin(), stamp_.end(), 0);
        epoch_ = 1;
    }
    touched_.clear();
    for (const auto& [term, query_weight] : q.terms.entries) {
        if (term >= postings_.size()) continue;
        for (const auto& posting : postings_[term]) {
            if (stamp_[posting.item] != epoch_) {
                stamp_[posting.item] = epoch_;
                dot_[posting.item] = 0.0;
                touched_.push_back(posting.item);
            }
            dot_[posting.item] += query_weight * posting.weight;
        }
    }
    std::vector<ScoredItem> out;
    out.reserve(touched_.size());
    for (ItemId iid : touched_) {
        const Item& item = catalog.item(iid);
        double text = dot_[iid] / (q.terms.norm * item.terms.norm);
        if (!(text > 0)) continue;
        double score = landmark_total(text, item.static_quality, item.dyn, item.ts, cfg);
        out.push_back({iid, text, score});
    }
    std::sort(out.begin(), out.end(), [&](const ScoredItem& a, const ScoredItem& b) {
        const Item& ia = catalog.item(a.item);
        const Item& ib = catalog.item(b.item);
        return result_precedes(a.score, ia.ts, ia.id, b.score, ib.ts, ib.id);
    });
    return out;
}

std::vector<ScoredItem> ItemIndex::match_query(const Query& q, const Catalog& catalog,
                                               const ScoreConfig& cfg) const {
    auto all = gather_all(q, catalog, cfg);
    std::vector<ScoredItem> out;
    for (const auto& si : all) {
        if (out.size() >= q.k) break;
        if (!(si.score > 0)) break;  // sorted: nothing below passes either
        out.push_back(si);
    }
    return out;
}

}  // namespace ctk
