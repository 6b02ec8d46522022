#include <vector>

#include "ctk/oracle.hpp"
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

std::vector<std::string> result_ids(const Oracle& oracle, QueryId q) {
    std::vector<std::string> out;
    for (const auto& e : oracle.result_of(q)) {
        out.push_back(oracle.catalog().item(e.item).id);
    }
    return out;
}

}  // namespace

TEST_CASE("a query over an empty item set has an empty result") {
    Oracle oracle(ScoreConfig{});
    oracle.step(query("q1", {{"a", 1.0}}, 2, 0.0));
    CHECK(oracle.result_of(0).empty());
    CHECK(oracle.query(0).qmin == 0.0);
}

TEST_CASE("an arriving item does not always change the result") {
    ScoreConfig cfg;
    Oracle oracle(cfg);
    oracle.step(query("q", {{"news", 1.0}}, 2, 0.0));
    oracle.step(item("a", {{"news", 1.0}}, 0.9, 1.0));
    oracle.step(item("b", {{"news", 1.0}}, 0.5, 2.0));
    CHECK(result_ids(oracle, 0) == std::vector<std::string>{"a", "b"});
    // c scores below both incumbents: the top-2 is untouched.
    oracle.step(item("c", {{"news", 1.0}}, 0.1, 3.0));
    CHECK(result_ids(oracle, 0) == std::vector<std::string>{"a", "b"});
    CHECK(oracle.dirty_queries().empty());
}

TEST_CASE("item reenters the result after enough feedback") {
    ScoreConfig cfg;
    cfg.alpha = 0.3;
    cfg.beta = 0.3;
    cfg.gamma = 0.4;
    Oracle oracle(cfg);
    oracle.step(query("q", {{"news", 1.0}}, 2, 0.0));
    oracle.step(item("a", {{"news", 1.0}}, 0.9, 1.0));
    oracle.step(item("b", {{"news", 1.0}}, 0.5, 2.0));
    oracle.step(item("c", {{"news", 1.0}}, 0.1, 3.0));
    CHECK(result_ids(oracle, 0) == std::vector<std::string>{"a", "b"});
    // d displaces b: 0.3 + 0.3*0.7 beats 0.3 + 0.3*0.5.
    oracle.step(item("d", {{"news", 1.0}}, 0.7, 4.0));
    CHECK(result_ids(oracle, 0) == std::vector<std::string>{"a", "d"});
    // One unit of feedback (gamma 0.4) lifts b back past d and a.
    oracle.step(event("e1", "b", 1.0, 5.0));
    CHECK(result_ids(oracle, 0) == std::vector<std::string>{"b", "a"});
}

TEST_CASE("zero-score events change nothing") {
    ScoreConfig cfg;
    Oracle oracle(cfg);
    oracle.step(query("q", {{"x", 1.0}}, 1, 0.0));
    oracle.step(item("i1", {{"x", 1.0}}, 0.5, 1.0));
    auto before = oracle.result_of(0);
    oracle.step(event("e1", "i1", 0.0, 2.0));
    CHECK(oracle.result_of(0) == before);
    CHECK(oracle.dirty_queries().empty());
}

TEST_CASE("oracle rejects unknown event targets") {
    Oracle oracle(ScoreConfig{});
    CHECK_THROWS(oracle.step(event("e1", "ghost", 1.0, 0.0)));
}

TEST_CASE("diff_results pinpoints the first divergence") {
    ScoreConfig cfg;
    Oracle a(cfg), b(cfg);
    for (Oracle* o : {&a, &b}) {
        o->step(query("q", {{"x", 1.0}}, 2, 0.0));
        o->step(item("i1", {{"x", 1.0}}, 0.9, 1.0));
    }
    CHECK_FALSE(diff_results(a.catalog(), a.query(0), b.catalog(), b.query(0)).has_value());

    // Diverge: only b sees a second, better item.
    b.step(item("i2", {{"x", 1.0}}, 1.0, 2.0));
    auto mismatch = diff_results(a.catalog(), a.query(0), b.catalog(), b.query(0));
    REQUIRE(mismatch.has_value());
    CHECK(mismatch->query_id == "q");
    CHECK(mismatch->position == 0);
    CHECK(mismatch->expected.find("i2") != std::string::npos);
    CHECK(mismatch->actual.find("i1") != std::string::npos);
    CHECK_FALSE(mismatch->to_string().empty());
}

TEST_CASE("reference hash traces are reproducible") {
    auto records = fuzz::random_stream(123, {});
    auto cfg = fuzz::random_config(123);
    auto t1 = fuzz::oracle_hash_trace(records, cfg);
    auto t2 = fuzz::oracle_hash_trace(records, cfg);
    CHECK(t1 == t2);
    CHECK(t1.size() == records.size());
}
