#include "ctk/stream_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace ctk {

using nlohmann::json;

Timestamp record_ts(const StreamRecord& rec) {
    return std::visit([](const auto& r) { return r.ts; }, rec);
}

namespace {

double require_number(const json& j, const char* field, std::size_t line_no) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_number()) {
        throw ParseError(line_no, std::string("missing or non-numeric field '") + field + "'");
    }
    return it->get<double>();
}

std::string require_string(const json& j, const char* field, std::size_t line_no) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw ParseError(line_no, std::string("missing or empty field '") + field + "'");
    }
    return it->get<std::string>();
}

std::vector<TermWeight> parse_terms(const json& j, std::size_t line_no) {
    auto it = j.find("terms");
    if (it == j.end() || !it->is_array()) {
        throw ParseError(line_no, "missing 'terms' array");
    }
    std::vector<TermWeight> out;
    std::unordered_set<std::string> seen;
    out.reserve(it->size());
    for (const auto& t : *it) {
        if (!t.is_object()) throw ParseError(line_no, "term entry must be an object");
        TermWeight tw;
        tw.term = require_string(t, "t", line_no);
        tw.weight = require_number(t, "w", line_no);
        if (!(tw.weight > 0)) throw ParseError(line_no, "term weight must be > 0");
        if (!seen.insert(tw.term).second) {
            throw ParseError(line_no, "duplicate term '" + tw.term + "'");
        }
        out.push_back(std::move(tw));
    }
    return out;
}

Timestamp parse_ts(const json& j, std::size_t line_no) {
    double ts = require_number(j, "ts", line_no);
    if (!(ts >= 0) || !std::isfinite(ts)) {
        throw ParseError(line_no, "ts must be a finite non-negative number");
    }
    return ts;
}

json terms_to_json(const std::vector<TermWeight>& terms) {
    json arr = json::array();
    for (const auto& tw : terms) {
        arr.push_back(json{{"t", tw.term}, {"w", tw.weight}});
    }
    return arr;
}

}  // namespace

StreamRecord parse_record(const std::string& line, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record must be a JSON object");
    auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string()) {
        throw ParseError(line_no, "missing 'type' tag");
    }
    const std::string type = type_it->get<std::string>();
    if (type == "query") {
        QueryRec q;
        q.id = require_string(j, "id", line_no);
        q.ts = parse_ts(j, line_no);
        q.terms = parse_terms(j, line_no);
        double k = require_number(j, "k", line_no);
        if (k < 1 || k != std::floor(k) || k > 1e6) {
            throw ParseError(line_no, "k must be a positive integer");
        }
        q.k = static_cast<std::uint32_t>(k);
        return q;
    }
    if (type == "item") {
        ItemRec i;
        i.id = require_string(j, "id", line_no);
        i.ts = parse_ts(j, line_no);
        i.terms = parse_terms(j, line_no);
        i.static_quality = require_number(j, "static", line_no);
        if (i.static_quality < 0.0 || i.static_quality > 1.0) {
            throw ParseError(line_no, "static quality out of range [0, 1]");
        }
        return i;
    }
    if (type == "event") {
        EventRec e;
        e.id = require_string(j, "id", line_no);
        e.ts = parse_ts(j, line_no);
        e.target = require_string(j, "target", line_no);
        e.score = require_number(j, "score", line_no);
        if (e.score < 0.0 || e.score > 1.0) {
            throw ParseError(line_no, "event score out of range [0, 1]");
        }
        return e;
    }
    throw ParseError(line_no, "unknown type tag '" + type + "'");
}

std::string write_record(const StreamRecord& rec) {
    json j;
    if (const auto* q = std::get_if<QueryRec>(&rec)) {
        j = json{{"type", "query"},
                 {"id", q->id},
                 {"ts", q->ts},
                 {"terms", terms_to_json(q->terms)},
                 {"k", q->k}};
    } else if (const auto* i = std::get_if<ItemRec>(&rec)) {
        j = json{{"type", "item"},
                 {"id", i->id},
                 {"ts", i->ts},
                 {"terms", terms_to_json(i->terms)},
                 {"static", i->static_quality}};
    } else {
        const auto& e = std::get<EventRec>(rec);
        j = json{{"type", "event"},
                 {"id", e.id},
                 {"ts", e.ts},
                 {"target", e.target},
                 {"score", e.score}};
    }
    return j.dump();
}

std::vector<StreamRecord> read_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stream file: " + path);
    std::vector<StreamRecord> records;
    std::unordered_set<std::string> items_seen;
    std::string line;
    std::size_t line_no = 0;
    Timestamp last_ts = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        StreamRecord rec = parse_record(line, line_no);
        Timestamp ts = record_ts(rec);
        if (ts < last_ts) {
            throw ParseError(line_no, "timestamp regression");
        }
        last_ts = ts;
        if (const auto* i = std::get_if<ItemRec>(&rec)) {
            items_seen.insert(i->id);
        } else if (const auto* e = std::get_if<EventRec>(&rec)) {
            if (!items_seen.count(e->target)) {
                throw ParseError(line_no, "event targets unknown item '" + e->target + "'");
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void write_stream(const std::string& path, const std::vector<StreamRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    for (const auto& rec : records) {
        out << write_record(rec) << '\n';
    }
}

StreamStats compute_stats(const std::vector<StreamRecord>& records) {
    StreamStats s;
    std::unordered_map<std::string, std::uint64_t> events_per_item;
    for (const auto& rec : records) {
        if (std::holds_alternative<QueryRec>(rec)) {
            ++s.n_queries;
        } else if (const auto* i = std::get_if<ItemRec>(&rec)) {
            ++s.n_items;
            events_per_item.emplace(i->id, 0);
        } else {
            ++s.n_events;
            ++events_per_item[std::get<EventRec>(rec).target];
        }
    }
    if (!events_per_item.empty()) {
        std::uint64_t min_ev = std::numeric_limits<std::uint64_t>::max();
        for (const auto& [id, n] : events_per_item) min_ev = std::min(min_ev, n);
        s.min_events_per_item = min_ev;
        s.avg_events_per_item =
            static_cast<double>(s.n_events) / static_cast<double>(s.n_items);
    }
    return s;
}

void write_stats(const std::string& path, const StreamStats& stats) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open stats file: " + path);
    out << "n_queries=" << stats.n_queries << '\n'
        << "n_items=" << stats.n_items << '\n'
        << "n_events=" << stats.n_events << '\n'
        << "min_events_per_item=" << stats.min_events_per_item << '\n'
        << "avg_events_per_item=" << stats.avg_events_per_item << '\n';
}

namespace {

/// Zipf(s) sampler over ranks [0, n): CDF table + binary search.
class ZipfSampler {
  public:
    ZipfSampler(std::uint64_t n, double s) : cdf_(n) {
        double acc = 0.0;
        for (std::uint64_t r = 0; r < n; ++r) {
            acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
            cdf_[r] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }
    std::uint64_t operator()(std::mt19937_64& rng) const {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        return static_cast<std::uint64_t>(
            std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    }

  private:
    std::vector<double> cdf_;
};

std::uint64_t pack2(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}
// Vocab ids fit in 21 bits for any workload we generate.
std::uint64_t pack3(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    return (static_cast<std::uint64_t>(a) << 42) | (static_cast<std::uint64_t>(b) << 21) | c;
}

template <typename Map>
std::vector<std::uint64_t> top_keys(const Map& counts, std::size_t limit) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> v;  // (count, key)
    v.reserve(counts.size());
    for (const auto& [key, count] : counts) v.emplace_back(count, key);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (v.size() > limit) v.resize(limit);
    std::vector<std::uint64_t> keys;
    keys.reserve(v.size());
    for (const auto& [count, key] : v) keys.push_back(key);
    return keys;
}

}  // namespace

std::vector<StreamRecord> generate_workload(const WorkloadParams& p) {
    if (p.vocab_size < 3 || p.max_item_terms < p.min_item_terms || p.min_item_terms == 0 ||
        p.vocab_size >= (1u << 21)) {
        throw std::invalid_argument("infeasible workload parameters");
    }
    if (std::abs(p.ngram_share_1 + p.ngram_share_2 + p.ngram_share_3 - 1.0) > 1e-9) {
        throw std::invalid_argument("n-gram shares must sum to 1");
    }
    std::mt19937_64 rng(p.seed);
    ZipfSampler zipf(p.vocab_size, p.term_zipf_s);

    // Items first: term sets feed the query n-gram pools.
    std::vector<std::vector<std::uint32_t>> item_terms(p.n_items);
    std::unordered_map<std::uint64_t, std::uint64_t> uni, bi, tri;
    for (auto& terms : item_terms) {
        std::uint32_t len = std::uniform_int_distribution<std::uint32_t>(
            p.min_item_terms, p.max_item_terms)(rng);
        std::unordered_set<std::uint32_t> set;
        while (set.size() < len) set.insert(static_cast<std::uint32_t>(zipf(rng)));
        terms.assign(set.begin(), set.end());
        std::sort(terms.begin(), terms.end());
        for (std::size_t a = 0; a < terms.size(); ++a) {
            ++uni[terms[a]];
            for (std::size_t b = a + 1; b < terms.size(); ++b) {
                ++bi[pack2(terms[a], terms[b])];
                for (std::size_t c = b + 1; c < terms.size(); ++c) {
                    ++tri[pack3(terms[a], terms[b], terms[c])];
                }
            }
        }
    }
    constexpr std::size_t kPoolLimit = 5000;
    std::vector<std::uint64_t> pool1 = top_keys(uni, kPoolLimit);
    std::vector<std::uint64_t> pool2 = top_keys(bi, kPoolLimit);
    std::vector<std::uint64_t> pool3 = top_keys(tri, kPoolLimit);
    if (pool1.empty()) throw std::invalid_argument("empty term pool");

    // Timeline: items evenly spaced, events uniform after their item,
    // queries front-loaded at ts 0 unless interleaving is requested.
    const double span = std::max<double>(1.0, static_cast<double>(p.n_items));
    const double item_gap = span / static_cast<double>(std::max<std::uint64_t>(1, p.n_items));

    struct Timed {
        Timestamp ts;
        StreamRecord rec;
    };
    std::vector<Timed> timeline;

    std::vector<Timestamp> item_ts(p.n_items);
    for (std::uint64_t j = 0; j < p.n_items; ++j) {
        item_ts[j] = static_cast<double>(j + 1) * item_gap;
        ItemRec rec;
        rec.id = "i" + std::to_string(j + 1);
        rec.ts = item_ts[j];
        rec.terms.reserve(item_terms[j].size());
        for (std::uint32_t t : item_terms[j]) {
            rec.terms.push_back({"term" + std::to_string(t), 1.0});
        }
        rec.static_quality = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        timeline.push_back({rec.ts, std::move(rec)});
    }

    // Heavy-tailed per-item event counts: lognormal shape, rescaled so
    // the sample lands on the requested mean, stochastic rounding.
    std::vector<double> raw_counts(p.n_items);
    double raw_sum = 0.0;
    for (auto& r : raw_counts) {
        double z = std::normal_distribution<double>(0.0, 1.0)(rng);
        r = std::exp(p.event_count_sigma * z);
        raw_sum += r;
    }
    double scale = raw_sum > 0 ? p.events_per_item_mean *
                                     static_cast<double>(p.n_items) / raw_sum
                               : 0.0;
    std::uint64_t event_no = 0;
    for (std::uint64_t j = 0; j < p.n_items; ++j) {
        double frac = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        std::uint64_t count =
            static_cast<std::uint64_t>(std::floor(raw_counts[j] * scale + frac));
        double window = std::max(1.0, (span + 1.0 - item_ts[j]) * p.event_burst);
        for (std::uint64_t e = 0; e < count; ++e) {
            EventRec rec;
            rec.id = "e" + std::to_string(++event_no);
            rec.target = "i" + std::to_string(j + 1);
            rec.ts = std::min(span + 1.0,
                              item_ts[j] + std::uniform_real_distribution<double>(
                                               0.0, window)(rng));
            rec.score = 1.0;
            timeline.push_back({rec.ts, std::move(rec)});
        }
    }

    for (std::uint64_t n = 0; n < p.n_queries; ++n) {
        QueryRec rec;
        rec.id = "q" + std::to_string(n + 1);
        rec.k = p.k;
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        int len = u < p.ngram_share_2 ? 2
                  : u < p.ngram_share_2 + p.ngram_share_3 ? 3
                                                          : 1;
        if (len == 3 && pool3.empty()) len = 2;
        if (len == 2 && pool2.empty()) len = 1;
        std::vector<std::uint32_t> terms;
        if (len == 2) {
            std::uint64_t key = pool2[std::uniform_int_distribution<std::size_t>(
                0, pool2.size() - 1)(rng)];
            terms = {static_cast<std::uint32_t>(key >> 32),
                     static_cast<std::uint32_t>(key & 0xFFFFFFFFu)};
        } else if (len == 3) {
            std::uint64_t key = pool3[std::uniform_int_distribution<std::size_t>(
                0, pool3.size() - 1)(rng)];
            terms = {static_cast<std::uint32_t>(key >> 42),
                     static_cast<std::uint32_t>((key >> 21) & 0x1FFFFFu),
                     static_cast<std::uint32_t>(key & 0x1FFFFFu)};
        } else {
            terms = {static_cast<std::uint32_t>(
                pool1[std::uniform_int_distribution<std::size_t>(0, pool1.size() - 1)(rng)])};
        }
        for (std::uint32_t t : terms) {
            rec.terms.push_back({"term" + std::to_string(t), 1.0});
        }
        if (p.interleave_queries) {
            rec.ts = std::uniform_real_distribution<double>(0.0, span)(rng);
            timeline.push_back({rec.ts, std::move(rec)});
        } else {
            rec.ts = 0.0;
            // Front-loaded queries keep their generation order at ts 0.
            timeline.push_back({0.0, std::move(rec)});
        }
    }

    std::stable_sort(timeline.begin(), timeline.end(), [](const Timed& a, const Timed& b) {
        return a.ts < b.ts;
    });
    std::vector<StreamRecord> out;
    out.reserve(timeline.size());
    for (auto& t : timeline) out.push_back(std::move(t.rec));
    return out;
}

void generate_workload_file(const WorkloadParams& params, const std::string& path) {
    auto records = generate_workload(params);
    write_stream(path, records);
    write_stats(path + ".stats", compute_stats(records));
}

std::vector<StreamRecord> filter_min_events(const std::vector<StreamRecord>& records,
                                            std::uint64_t min_events) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& rec : records) {
        if (const auto* e = std::get_if<EventRec>(&rec)) ++counts[e->target];
    }
    std::vector<StreamRecord> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        if (const auto* i = std::get_if<ItemRec>(&rec)) {
            auto it = counts.find(i->id);
            if (it != counts.end() && it->second >= min_events) out.push_back(rec);
        } else if (const auto* e = std::get_if<EventRec>(&rec)) {
            if (counts[e->target] >= min_events) out.push_back(rec);
        } else {
            out.push_back(rec);
        }
    }
    return out;
}

void filter_min_events_file(const std::string& in_path, std::uint64_t min_events,
                            const std::string& out_path) {
    auto records = read_stream(in_path);
    auto filtered = filter_min_events(records, min_events);
    write_stream(out_path, filtered);
    write_stats(out_path + ".stats", compute_stats(filtered));
}

}  // namespace ctk
