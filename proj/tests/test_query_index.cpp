#include <algorithm>
#include <random>
#include <unordered_set>

#include "ctk/query_index.hpp"
#include "doctest.h"

using namespace ctk;

namespace {

ScoreConfig default_cfg() {
    ScoreConfig cfg;
    cfg.validate();
    return cfg;
}

struct Fixture {
    Catalog catalog;
    QueryIndex qi;
    ItemIndex ii;
    ScoreConfig cfg = default_cfg();

    Query& add_query(const std::string& id, std::vector<std::pair<std::string, double>> terms,
                     std::uint32_t k = 1, Timestamp ts = 0.0) {
        std::vector<std::pair<TermId, double>> entries;
        for (auto& [t, w] : terms) entries.emplace_back(catalog.intern_term(t), w);
        Query& q = catalog.add_query(id, make_profile(std::move(entries)), k, ts);
        qi.add_query(q);
        return q;
    }

    Item& add_item(const std::string& id, std::vector<std::pair<std::string, double>> terms,
                   double stat = 0.5, Timestamp ts = 1.0) {
        std::vector<std::pair<TermId, double>> entries;
        for (auto& [t, w] : terms) entries.emplace_back(catalog.intern_term(t), w);
        Item& item = catalog.add_item(id, make_profile(std::move(entries)), stat, ts);
        ii.add_item(item);
        return item;
    }

    /// Brute force over every registered query; mirrors the documented
    /// match_item contract.
    std::vector<QueryId> brute_match_item(const Item& item, double dyn_override) const {
        std::vector<QueryId> out;
        for (std::size_t i = 0; i < catalog.query_count(); ++i) {
            const Query& q = catalog.query(static_cast<QueryId>(i));
            double text = text_score(q.terms, item.terms);
            if (!(text > 0)) continue;
            double score =
                landmark_total(text, item.static_quality, dyn_override, item.ts, cfg);
            bool beats;
            if (!q.full()) {
                beats = score > 0;
            } else {
                const ResultEntry& kth = q.result.back();
                const Item& kth_item = catalog.item(kth.item);
                beats = result_precedes(score, item.ts, item.id, kth.score, kth_item.ts,
                                        kth_item.id);
            }
            if (beats) out.push_back(static_cast<QueryId>(i));
        }
        return out;
    }
};

std::vector<QueryId> ids_of(const std::vector<MatchedQuery>& ms) {
    std::vector<QueryId> out;
    for (const auto& m : ms) out.push_back(m.query);
    return out;
}

}  // namespace

TEST_CASE("add_query places the query in one posting per term") {
    Fixture f;
    f.add_query("q1", {{"news", 1.0}});
    CHECK(f.qi.posting_count() >= 1);
    Item& item = f.add_item("i1", {{"news", 1.0}});
    auto matched = f.qi.match_item(item, 0.0, f.catalog, f.cfg);
    REQUIRE(matched.size() == 1);
    CHECK(matched[0].query == 0);
    CHECK(matched[0].text == doctest::Approx(1.0));
}

TEST_CASE("a three-term query is reachable through each term") {
    for (const char* t : {"a", "b", "c"}) {
        Fixture probe;
        probe.add_query("q1", {{"a", 1.0}, {"b", 1.0}, {"c", 1.0}});
        Item& item = probe.add_item("i1", {{t, 1.0}});
        CHECK(probe.qi.match_item(item, 0.0, probe.catalog, probe.cfg).size() == 1);
    }
}

TEST_CASE("two queries sharing a term are both retrievable") {
    Fixture f;
    f.add_query("q1", {{"shared", 1.0}});
    f.add_query("q2", {{"shared", 1.0}, {"other", 1.0}});
    Item& item = f.add_item("i1", {{"shared", 1.0}});
    CHECK(f.qi.match_item(item, 0.0, f.catalog, f.cfg).size() == 2);
}

TEST_CASE("match_item returns nothing when no term is shared") {
    Fixture f;
    f.add_query("q1", {{"sports", 1.0}});
    Item& item = f.add_item("i1", {{"finance", 1.0}});
    CHECK(f.qi.match_item(item, 0.0, f.catalog, f.cfg).empty());
}

TEST_CASE("an empty-barrier query matches any relevant item") {
    Fixture f;
    f.add_query("q1", {{"news", 1.0}, {"breaking", 1.0}});
    Item& item = f.add_item("i1", {{"news", 1.0}});  // cosine 1/sqrt(2)
    auto matched = f.qi.match_item(item, 0.0, f.catalog, f.cfg);
    REQUIRE(matched.size() == 1);
    CHECK(matched[0].text == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("match_item equals brute force under random barriers") {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 40; ++round) {
        Fixture f;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> term(0, 7);
        // 10 queries with random qmin barriers realized through a fake
        // full result (k=1, one synthetic entry).
        for (int qn = 0; qn < 10; ++qn) {
            Query& q = f.add_query("q" + std::to_string(qn),
                                   {{"t" + std::to_string(term(rng)), unit(rng) + 0.2},
                                    {"u" + std::to_string(term(rng)), unit(rng) + 0.2}});
            if (unit(rng) < 0.7) {
                Item& blocker =
                    f.add_item("blk" + std::to_string(qn),
                               {{"t" + std::to_string(term(rng)), unit(rng) + 0.2}},
                               unit(rng), unit(rng));
                q.result.push_back({blocker.handle, 0.5, unit(rng) * 0.8});
                q.qmin = q.result.back().score;
                f.qi.update_qmin(q, q.qmin);
            }
        }
        Item& target = f.add_item(
            "target", {{"t" + std::to_string(term(rng)), unit(rng) + 0.2},
                       {"u" + std::to_string(term(rng)), unit(rng) + 0.2}},
            unit(rng), 2.0);
        double dyn_override = 0.8;
        auto got = ids_of(f.qi.match_item(target, dyn_override, f.catalog, f.cfg));
        auto want = f.brute_match_item(target, dyn_override);
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        CHECK(got == want);
    }
}

TEST_CASE("qmin snapshots prune without changing results") {
    Fixture f;
    Query& q = f.add_query("q1", {{"x", 1.0}});
    Item& blocker = f.add_item("blk", {{"x", 1.0}}, 1.0, 0.0);
    q.result.push_back({blocker.handle, 1.0, 5.0});
    q.qmin = 5.0;  // unreachable barrier
    f.qi.update_qmin(q, 5.0);
    Item& item = f.add_item("i1", {{"x", 1.0}}, 0.2, 1.0);
    CHECK(f.qi.match_item(item, 0.0, f.catalog, f.cfg).empty());
    // Within reach once the override supplies enough feedback mass.
    CHECK(f.qi.match_item(item, 100.0, f.catalog, f.cfg).size() == 1);
}

TEST_CASE("update_qmin rejects decreasing values") {
    Fixture f;
    Query& q = f.add_query("q1", {{"x", 1.0}});
    f.qi.update_qmin(q, 0.4);
    f.qi.update_qmin(q, 0.4);  // equal is a no-op
    CHECK_THROWS(f.qi.update_qmin(q, 0.1));
}

TEST_CASE("item index add/update and match_query basics") {
    Fixture f;
    Query& q = f.add_query("q1", {{"a", 1.0}}, 3);
    CHECK(f.ii.match_query(q, f.catalog, f.cfg).empty());

    Item& item = f.add_item("i1", {{"a", 1.0}}, 0.4, 1.0);
    auto top = f.ii.match_query(q, f.catalog, f.cfg);
    REQUIRE(top.size() == 1);
    CHECK(top[0].item == item.handle);

    CHECK_NOTHROW(f.ii.update_item(item));
    Item ghost;
    ghost.handle = 99;
    ghost.id = "ghost";
    CHECK_THROWS(f.ii.update_item(ghost));
}

TEST_CASE("match_query equals a full-scan top-k") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> term(0, 5);
    Fixture f;
    Query& q = f.add_query("q1", {{"t0", 1.0}, {"t1", 1.0}, {"t2", 1.0}}, 3);
    for (int i = 0; i < 50; ++i) {
        Item& item =
            f.add_item("i" + std::to_string(i),
                       {{"t" + std::to_string(term(rng)), unit(rng) + 0.1},
                        {"u" + std::to_string(term(rng)), unit(rng) + 0.1}},
                       unit(rng), unit(rng) * 10.0);
        item.dyn = unit(rng) * 3.0;
    }
    auto got = f.ii.match_query(q, f.catalog, f.cfg);

    // Full scan oracle.
    struct Row {
        ItemId item;
        double score;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < f.catalog.item_count(); ++i) {
        const Item& item = f.catalog.item(static_cast<ItemId>(i));
        double text = text_score(q.terms, item.terms);
        if (!(text > 0)) continue;
        double score = landmark_total(text, item.static_quality, item.dyn, item.ts, f.cfg);
        if (!(score > 0)) continue;
        rows.push_back({item.handle, score});
    }
    std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
        const Item& ia = f.catalog.item(a.item);
        const Item& ib = f.catalog.item(b.item);
        return result_precedes(a.score, ia.ts, ia.id, b.score, ib.ts, ib.id);
    });
    REQUIRE(got.size() == std::min<std::size_t>(3, rows.size()));
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].item == rows[i].item);
        CHECK(got[i].score == rows[i].score);
    }
}
