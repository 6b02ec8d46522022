#include "ctk/oracle.hpp"

#include <algorithm>
#include <sstream>

namespace ctk {

std::string Mismatch::to_string() const {
    std::ostringstream out;
    out << "query " << query_id << " position " << position << ": expected " << expected
        << ", got " << actual;
    return out.str();
}

Oracle::Oracle(ScoreConfig cfg, std::optional<std::uint32_t> k_override)
    : cfg_(cfg), k_override_(k_override) {
    cfg_.validate();
}

void Oracle::step(const StreamRecord& rec) {
    dirty_.clear();
    if (const auto* qr = std::get_if<QueryRec>(&rec)) {
        std::vector<std::pair<TermId, double>> entries;
        for (const auto& tw : qr->terms) {
            entries.emplace_back(catalog_.intern_term(tw.term), tw.weight);
        }
        std::uint32_t k = k_override_.value_or(qr->k);
        Query& q = catalog_.add_query(qr->id, make_profile(std::move(entries)), k, qr->ts);
        recompute(q);
        dirty_.push_back(q.handle);
        return;
    }
    if (const auto* ir = std::get_if<ItemRec>(&rec)) {
        std::vector<std::pair<TermId, double>> entries;
        for (const auto& tw : ir->terms) {
            entries.emplace_back(catalog_.intern_term(tw.term), tw.weight);
        }
        catalog_.add_item(ir->id, make_profile(std::move(entries)), ir->static_quality,
                          ir->ts);
    } else {
        const auto& er = std::get<EventRec>(rec);
        ItemId handle = catalog_.find_item(er.target);
        if (handle == std::numeric_limits<std::uint32_t>::max()) {
            throw std::runtime_error("event targets unknown item: " + er.target);
        }
        if (er.score < 0) throw std::runtime_error("negative event score");
        if (er.score == 0.0) return;
        Event ev{er.id, handle, er.score, er.ts};
        aggregate_event(catalog_.item(handle), ev);
    }
    // Full rescoring of every query after every item/event.
    for (std::size_t qi = 0; qi < catalog_.query_count(); ++qi) {
        Query& q = catalog_.query(static_cast<QueryId>(qi));
        std::vector<ResultEntry> before = q.result;
        recompute(q);
        if (before != q.result) dirty_.push_back(q.handle);
    }
}

void Oracle::recompute(Query& q) {
    std::vector<ResultEntry> scored;
    for (std::size_t ii = 0; ii < catalog_.item_count(); ++ii) {
        const Item& item = catalog_.item(static_cast<ItemId>(ii));
        double text = text_score(q.terms, item.terms);
        if (!(text > 0)) continue;  // relevance gate
        double score = landmark_total(text, item.static_quality, item.dyn, item.ts, cfg_);
        if (!(score > 0)) continue;  // empty-result entry barrier
        scored.push_back({item.handle, text, score});
    }
    std::sort(scored.begin(), scored.end(), [&](const ResultEntry& a, const ResultEntry& b) {
        const Item& ia = catalog_.item(a.item);
        const Item& ib = catalog_.item(b.item);
        return result_precedes(a.score, ia.ts, ia.id, b.score, ib.ts, ib.id);
    });
    if (scored.size() > q.k) scored.resize(q.k);
    q.result = std::move(scored);
    q.qmin = q.full() ? q.result.back().score : 0.0;
}

namespace {

std::string entry_str(const Catalog& catalog, const std::vector<ResultEntry>& result,
                      std::size_t pos) {
    if (pos >= result.size()) return "(none)";
    std::ostringstream out;
    out.precision(17);
    out << catalog.item(result[pos].item).id << "@" << result[pos].score;
    return out.str();
}

}  // namespace

std::optional<Mismatch> diff_results(const Catalog& engine_catalog,
                                     const Query& engine_query,
                                     const Catalog& oracle_catalog,
                                     const Query& oracle_query) {
    const auto& got = engine_query.result;
    const auto& want = oracle_query.result;
    std::size_t n = std::max(got.size(), want.size());
    for (std::size_t pos = 0; pos < n; ++pos) {
        bool same = pos < got.size() && pos < want.size() &&
                    engine_catalog.item(got[pos].item).id ==
                        oracle_catalog.item(want[pos].item).id &&
                    got[pos].score == want[pos].score;
        if (!same) {
            Mismatch m;
            m.query_id = oracle_query.id;
            m.position = pos;
            m.expected = entry_str(oracle_catalog, want, pos);
            m.actual = entry_str(engine_catalog, got, pos);
            return m;
        }
    }
    return std::nullopt;
}

}  // namespace ctk
