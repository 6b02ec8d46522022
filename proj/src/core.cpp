#include "ctk/core.hpp"

#include <algorithm>

namespace ctk {

TermProfile make_profile(std::vector<std::pair<TermId, double>> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double sq = 0.0;
    TermId prev = std::numeric_limits<TermId>::max();
    for (const auto& [term, weight] : entries) {
        if (!(weight > 0)) {
            throw std::invalid_argument("term weight must be strictly positive");
        }
        if (term == prev) {
            throw std::invalid_argument("duplicate term in profile");
        }
        prev = term;
        sq += weight * weight;
    }
    TermProfile p;
    p.entries = std::move(entries);
    p.norm = std::sqrt(sq);
    return p;
}

double text_score(const TermProfile& a, const TermProfile& b) {
    if (a.entries.empty() || b.entries.empty()) return 0.0;
    // Ascending-term merge; the accumulation order is part of the scoring
    // contract (all components must agree bit-for-bit).
    double dot = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            dot += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    if (dot == 0.0) return 0.0;
    return dot / (a.norm * b.norm);
}

Query& Catalog::add_query(std::string_view external_id, TermProfile profile,
                          std::uint32_t k, Timestamp ts) {
    if (has_query(external_id)) {
        throw std::runtime_error("duplicate query id: " + std::string(external_id));
    }
    if (k == 0) {
        throw std::invalid_argument("query k must be positive");
    }
    Query q;
    q.id = std::string(external_id);
    q.handle = query_ids_.intern(external_id);
    q.terms = std::move(profile);
    q.k = k;
    q.ts = ts;
    queries_.push_back(std::move(q));
    return queries_.back();
}

Item& Catalog::add_item(std::string_view external_id, TermProfile profile,
                        double static_quality, Timestamp ts) {
    if (item_ids_.find(external_id) != std::numeric_limits<std::uint32_t>::max()) {
        throw std::runtime_error("duplicate item id: " + std::string(external_id));
    }
    if (static_quality < 0.0 || static_quality > 1.0) {
        throw std::invalid_argument("static quality must be in [0, 1]");
    }
    Item it;
    it.id = std::string(external_id);
    it.handle = item_ids_.intern(external_id);
    it.terms = std::move(profile);
    it.static_quality = static_quality;
    it.ts = ts;
    items_.push_back(std::move(it));
    return items_.back();
}

}  // namespace ctk
