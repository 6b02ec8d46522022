#include <algorithm>
#include <set>

#include "ctk/engine.hpp"
#include "doctest.h"
#include "fuzz_support.hpp"

using namespace ctk;

namespace {

QueryRec query(const std::string& id, std::vector<std::pair<std::string, double>> terms,
               std::uint32_t k, Timestamp ts) {
    QueryRec q;
    q.id = id;
    q.k = k;
    q.ts = ts;
    for (auto& [t, w] : terms) q.terms.push_back({t, w});
    return q;
}

ItemRec item(const std::string& id, std::vector<std::pair<std::string, double>> terms,
             double stat, Timestamp ts) {
    ItemRec i;
    i.id = id;
    i.ts = ts;
    i.static_quality = stat;
    for (auto& [t, w] : terms) i.terms.push_back({t, w});
    return i;
}

EventRec event(const std::string& id, const std::string& target, double score,
               Timestamp ts) {
    EventRec e;
    e.id = id;
    e.ts = ts;
    e.target = target;
    e.score = score;
    return e;
}

EngineConfig rrts_config(EhVariant variant = EhVariant::kItemPart,
                         ThetaStrategy theta = ThetaStrategy::global(1.0)) {
    EngineConfig ec;
    ec.mode = Mode::kRrts;
    ec.variant = variant;
    ec.theta = theta;
    return ec;
}

std::vector<std::string> result_ids(const Engine& engine, QueryId q) {
    std::vector<std::string> out;
    for (const auto& e : engine.result_of(q)) {
        out.push_back(engine.catalog().item(e.item).id);
    }
    return out;
}

/// Structural invariants that must hold between records.
void check_structure(const Engine& engine) {
    const Catalog& catalog = engine.catalog();
    for (std::size_t qi = 0; qi < catalog.query_count(); ++qi) {
        QueryId q = static_cast<QueryId>(qi);
        const Query& query = catalog.query(q);
        // Result sorted under the total order, no duplicate items.
        std::set<ItemId> seen;
        for (std::size_t p = 0; p < query.result.size(); ++p) {
            CHECK(seen.insert(query.result[p].item).second);
            if (p > 0) {
                const ResultEntry& hi = query.result[p - 1];
                const ResultEntry& lo = query.result[p];
                const Item& a = catalog.item(hi.item);
                const Item& b = catalog.item(lo.item);
                CHECK(result_precedes(hi.score, a.ts, a.id, lo.score, b.ts, b.id));
            }
        }
        // qmin law.
        if (query.full()) {
            CHECK(query.qmin == query.result.back().score);
        } else {
            CHECK(query.qmin == 0.0);
        }
        // Reverse index mirrors list membership; no query is active and
        // candidate for the same item.
        for (ItemId it : engine.candidate_items_of(q)) {
            CHECK(engine.is_candidate(q, it));
            CHECK_FALSE(catalog.item(it).active_queries.count(q));
        }
        for (const auto& e : query.result) {
            CHECK(catalog.item(e.item).active_queries.count(q));
            CHECK_FALSE(engine.is_candidate(q, e.item));
        }
    }
    // Every stored candidate is reachable through the reverse view.
    for (std::size_t ii = 0; ii < catalog.item_count(); ++ii) {
        ItemId it = static_cast<ItemId>(ii);
        const CandidateList* list = engine.candidate_list_of(it);
        if (list == nullptr) continue;
        list->for_each([&](const CandidateEntry& e) {
            auto items = engine.candidate_items_of(e.query);
            CHECK(std::find(items.begin(), items.end(), it) != items.end());
        });
    }
}

}  // namespace

TEST_CASE("a query over an empty catalog registers with an empty result") {
    Engine engine(rrts_config());
    engine.process(query("q1", {{"a", 1.0}}, 2, 0.0));
    CHECK(engine.result_of(0).empty());
    CHECK(engine.catalog().query(0).qmin == 0.0);
    CHECK(engine.metrics().queries == 1);
}

TEST_CASE("an under-filled result keeps a zero barrier") {
    Engine engine(rrts_config());
    engine.process(item("i1", {{"a", 1.0}}, 0.5, 0.0));
    engine.process(query("q1", {{"a", 1.0}}, 2, 1.0));
    CHECK(engine.result_of(0).size() == 1);
    CHECK(engine.catalog().query(0).qmin == 0.0);
}

TEST_CASE("duplicate ids are rejected") {
    Engine engine(rrts_config());
    engine.process(query("q1", {{"a", 1.0}}, 1, 0.0));
    CHECK_THROWS(engine.process(query("q1", {{"a", 1.0}}, 1, 0.0)));
    engine.process(item("i1", {{"a", 1.0}}, 0.5, 1.0));
    CHECK_THROWS(engine.process(item("i1", {{"a", 1.0}}, 0.5, 1.0)));
    CHECK_THROWS(engine.process(event("e1", "ghost", 1.0, 2.0)));
}

TEST_CASE("registration computes the oracle top-k over existing items") {
    auto records = fuzz::random_stream(7, {.n_queries = 0, .n_items = 30, .n_events = 0});
    Engine engine(rrts_config());
    Oracle oracle(engine.config().score);
    for (const auto& rec : records) {
        engine.process(rec);
        oracle.step(rec);
    }
    auto q = query("probe", {{"t0", 1.0}, {"t1", 1.0}}, 5, 100.0);
    engine.process(q);
    oracle.step(q);
    auto mismatch = diff_results(engine.catalog(), engine.catalog().query(0),
                                 oracle.catalog(), oracle.query(0));
    CHECK_FALSE(mismatch.has_value());
}

TEST_CASE("item arrival updates exactly the beaten queries") {
    Engine engine(rrts_config());
    engine.process(query("qa", {{"a", 1.0}}, 1, 0.0));
    engine.process(query("qb", {{"b", 1.0}}, 1, 0.0));
    engine.process(item("i1", {{"a", 1.0}}, 0.9, 1.0));
    CHECK(result_ids(engine, 0) == std::vector<std::string>{"i1"});
    CHECK(engine.result_of(1).empty());

    // A second, weaker item beats nobody: no deltas.
    std::uint64_t updates_before = engine.metrics().result_updates;
    engine.process(item("i2", {{"a", 1.0}}, 0.1, 2.0));
    CHECK(engine.metrics().result_updates == updates_before);
    CHECK(result_ids(engine, 0) == std::vector<std::string>{"i1"});
}

TEST_CASE("an eviction produces one delta with the displaced item") {
    Engine engine(rrts_config());
    std::vector<ResultDelta> deltas;
    engine.set_delta_sink([&](const ResultDelta& d) { deltas.push_back(d); });
    engine.process(query("q", {{"a", 1.0}}, 1, 0.0));
    engine.process(item("lo", {{"a", 1.0}}, 0.2, 1.0));
    engine.process(item("hi", {{"a", 1.0}}, 0.9, 2.0));
    REQUIRE(deltas.size() == 2);
    CHECK(engine.catalog().item(deltas[1].added).id == "hi");
    CHECK(deltas[1].evicted != kNoItem);
    CHECK(engine.catalog().item(deltas[1].evicted).id == "lo");
    check_structure(engine);
}

TEST_CASE("zero-score events are complete no-ops") {
    Engine engine(rrts_config());
    engine.process(query("q", {{"a", 1.0}}, 1, 0.0));
    engine.process(item("i1", {{"a", 1.0}}, 0.5, 1.0));
    auto metrics_before = engine.metrics().result_updates;
    engine.process(event("e0", "i1", 0.0, 2.0));
    CHECK(engine.metrics().zero_score_events == 1);
    CHECK(engine.metrics().result_updates == metrics_before);
    CHECK(engine.dirty_queries().empty());
    CHECK(engine.catalog().item(0).dyn == 0.0);
}

TEST_CASE("feedback pushes an evicted item back into the result") {
    Engine engine(rrts_config(EhVariant::kItemPart, ThetaStrategy::global(2.0)));
    engine.process(query("q", {{"news", 1.0}}, 2, 0.0));
    engine.process(item("a", {{"news", 1.0}}, 0.9, 1.0));
    engine.process(item("b", {{"news", 1.0}}, 0.5, 2.0));
    engine.process(item("c", {{"news", 1.0}}, 0.1, 3.0));
    engine.process(item("d", {{"news", 1.0}}, 0.7, 4.0));
    CHECK(result_ids(engine, 0) == std::vector<std::string>{"a", "d"});
    // b has no candidate window yet (no events), so q sits in no list of
    // b; the first event rebuilds and still catches the update.
    CHECK_FALSE(engine.is_candidate(0, engine.catalog().find_item("b")));
    engine.process(event("e1", "b", 1.0, 5.0));
    CHECK(result_ids(engine, 0) == std::vector<std::string>{"b", "a"});
    check_structure(engine);
}

TEST_CASE("per-item refresh counters follow the window law") {
    // Unit-score events; theta fixed at 0.5 while the item collects
    // dyn 1.2 in three events of 0.4... use unit events: dyn 1, 2, 3.
    Engine engine(rrts_config(EhVariant::kSimple, ThetaStrategy::global(0.5)));
    engine.process(query("q", {{"a", 1.0}}, 1, 0.0));
    engine.process(item("i1", {{"a", 1.0}}, 0.5, 1.0));
    engine.process(event("e1", "i1", 1.0, 2.0));
    // refresh jumps to floor(1/0.5)+1 = 3, window 1.5 covers dyn 1.
    const Item& it = engine.catalog().item(0);
    CHECK(it.refresh == 3);
    CHECK(it.window_top() == doctest::Approx(1.5));
    CHECK(it.window_top() >= it.dyn);
    CHECK(engine.per_item_refreshes()[0] == 1);
    engine.process(event("e2", "i1", 1.0, 3.0));
    // dyn 2 > 1.5: second refresh, refresh = floor(2/0.5)+1 = 5.
    CHECK(it.refresh == 5);
    CHECK(engine.per_item_refreshes()[0] == 2);
    check_structure(engine);
}

TEST_CASE("refresh window always covers the aggregate") {
    auto records = fuzz::random_stream(31, {.n_queries = 10, .n_items = 20, .n_events = 150});
    for (double theta : {0.3, 1.0, 5.0}) {
        Engine engine(rrts_config(EhVariant::kLazy, ThetaStrategy::global(theta)));
        for (const auto& rec : records) {
            engine.process(rec);
            for (std::size_t i = 0; i < engine.catalog().item_count(); ++i) {
                const Item& it = engine.catalog().item(static_cast<ItemId>(i));
                if (it.refresh > 0) {
                    CHECK(it.refresh * it.theta >= it.dyn);
                }
            }
        }
    }
}

TEST_CASE("refresh count is bounded by the window law") {
    auto records = fuzz::random_stream(77, {.n_queries = 15, .n_items = 10, .n_events = 300});
    double theta = 2.0;
    Engine engine(rrts_config(EhVariant::kItemPart, ThetaStrategy::global(theta)));
    for (const auto& rec : records) engine.process(rec);
    for (std::size_t i = 0; i < engine.catalog().item_count(); ++i) {
        const Item& it = engine.catalog().item(static_cast<ItemId>(i));
        double bound = std::floor(it.dyn / theta) + 1;
        CHECK(engine.per_item_refreshes()[i] <= bound);
    }
}

TEST_CASE("theta zero degenerates to exact per-event matching") {
    auto records = fuzz::random_stream(13, {.n_queries = 12, .n_items = 25, .n_events = 120});
    ScoreConfig cfg = fuzz::random_config(5);

    EngineConfig naive;
    naive.score = cfg;
    naive.mode = Mode::kNaive;
    Engine naive_engine(naive);

    EngineConfig zero = rrts_config(EhVariant::kSimple, ThetaStrategy::zero());
    zero.score = cfg;
    Engine zero_engine(zero);

    for (const auto& rec : records) {
        naive_engine.process(rec);
        zero_engine.process(rec);
    }
    CHECK(naive_engine.metrics().ih_matches == zero_engine.metrics().ih_matches);
}

TEST_CASE("every configuration tracks the reference on random streams") {
    int failures = 0;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        auto records = fuzz::random_stream(seed, {});
        auto cfg = fuzz::random_config(seed * 31);
        auto trace = fuzz::oracle_hash_trace(records, cfg);
        std::unordered_map<std::string, double> prescan;
        for (const auto& rec : records) {
            if (const auto* i = std::get_if<ItemRec>(&rec)) prescan.emplace(i->id, 0.0);
            if (const auto* e = std::get_if<EventRec>(&rec)) prescan[e->target] += e->score;
        }
        std::vector<std::pair<ThetaStrategy, std::string>> thetas{
            {ThetaStrategy::zero(), "zero"},
            {ThetaStrategy::global(0.05), "g0.05"},
            {ThetaStrategy::exact_fraction(0.5, &prescan), "f0.5"},
            {ThetaStrategy::exact_fraction(1.0, &prescan), "f1"},
        };
        for (const auto& [theta, label] : thetas) {
            for (const auto& setup : fuzz::config_matrix(theta, label)) {
                auto bad = fuzz::engine_matches_trace(records, cfg, setup, trace);
                if (bad) {
                    ++failures;
                    auto detail = fuzz::run_against_reference(records, cfg, setup);
                    FAIL_CHECK("seed " << seed << " " << setup.label << ": "
                                       << (detail ? *detail : "hash-only divergence")
                                       << " (record " << *bad << ")");
                }
            }
        }
    }
    CHECK(failures == 0);
}

TEST_CASE("structural invariants hold along a random run") {
    auto records = fuzz::random_stream(321, {.n_queries = 15, .n_items = 30, .n_events = 150});
    for (auto variant : {EhVariant::kStatic, EhVariant::kExhaustive, EhVariant::kItemPart}) {
        Engine engine(rrts_config(variant, ThetaStrategy::global(0.8)));
        std::size_t step = 0;
        for (const auto& rec : records) {
            engine.process(rec);
            if (++step % 25 == 0) check_structure(engine);
        }
        check_structure(engine);
    }
}

TEST_CASE("cumulative refresh rule still tracks the reference") {
    auto records = fuzz::random_stream(55, {.n_queries = 10, .n_items = 20, .n_events = 120});
    ScoreConfig cfg = fuzz::random_config(55);
    auto trace = fuzz::oracle_hash_trace(records, cfg);
    EngineConfig ec = rrts_config(EhVariant::kLazy, ThetaStrategy::global(0.7));
    ec.score = cfg;
    ec.cumulative_refresh = true;
    Engine engine(ec);
    fuzz::ResultHasher hasher;
    for (std::size_t i = 0; i < records.size(); ++i) {
        engine.process(records[i]);
        hasher.update(engine.dirty_queries(),
                      [&](QueryId q) -> const std::vector<ResultEntry>& {
                          return engine.result_of(q);
                      });
        REQUIRE(hasher.value() == trace[i]);
    }
}

TEST_CASE("candidate pruning flag keeps results identical") {
    auto records = fuzz::random_stream(99, {.n_queries = 15, .n_items = 25, .n_events = 200});
    ScoreConfig cfg = fuzz::random_config(17);
    auto trace = fuzz::oracle_hash_trace(records, cfg);
    for (auto variant : {EhVariant::kSimple, EhVariant::kItemPart}) {
        EngineConfig ec = rrts_config(variant, ThetaStrategy::global(0.5));
        ec.score = cfg;
        ec.prune_outgrown_candidates = true;
        Engine engine(ec);
        fuzz::ResultHasher hasher;
        for (std::size_t i = 0; i < records.size(); ++i) {
            engine.process(records[i]);
            hasher.update(engine.dirty_queries(),
                          [&](QueryId q) -> const std::vector<ResultEntry>& {
                              return engine.result_of(q);
                          });
            REQUIRE(hasher.value() == trace[i]);
        }
    }
}

TEST_CASE("late-registered queries join live candidate windows") {
    // An item inside a valid window must accept updates for a query
    // registered after the window was built.
    Engine engine(rrts_config(EhVariant::kItemPart, ThetaStrategy::global(10.0)));
    engine.process(query("q_old", {{"a", 1.0}}, 1, 0.0));
    engine.process(item("blocker", {{"a", 1.0}}, 1.0, 1.0));   // score 0.6
    engine.process(item("runner", {{"a", 1.0}}, 0.0, 2.0));    // score 0.3
    engine.process(event("e1", "runner", 0.25, 3.0));  // builds runner's window
    CHECK(result_ids(engine, 0) == std::vector<std::string>{"blocker"});
    // New query whose barrier sits inside runner's window.
    engine.process(query("q_new", {{"a", 1.0}}, 1, 4.0));
    CHECK(result_ids(engine, 1) == std::vector<std::string>{"blocker"});
    CHECK(engine.is_candidate(1, engine.catalog().find_item("runner")));
    // Feedback lifts runner past the blocker for q_new without any
    // further refresh: the patched candidate entry must catch it.
    engine.process(event("e2", "runner", 1.0, 5.0));
    CHECK(result_ids(engine, 1) == std::vector<std::string>{"runner"});
    CHECK(result_ids(engine, 0) == std::vector<std::string>{"runner"});
    check_structure(engine);
}
