#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ctk/core.hpp"

namespace ctk {

/// External term/weight pair as it appears on the wire.
struct TermWeight {
    std::string term;
    double weight = 1.0;
    bool operator==(const TermWeight&) const = default;
};

struct QueryRec {
    std::string id;
    Timestamp ts = 0.0;
    std::vector<TermWeight> terms;
    std::uint32_t k = 1;
    bool operator==(const QueryRec&) const = default;
};

struct ItemRec {
    std::string id;
    Timestamp ts = 0.0;
    std::vector<TermWeight> terms;
    double static_quality = 0.0;
    bool operator==(const ItemRec&) const = default;
};

struct EventRec {
    std::string id;
    Timestamp ts = 0.0;
    std::string target;
    double score = 0.0;
    bool operator==(const EventRec&) const = default;
};

using StreamRecord = std::variant<QueryRec, ItemRec, EventRec>;

Timestamp record_ts(const StreamRecord& rec);

/// Thrown on malformed input; carries the 1-based line number.
struct ParseError : std::runtime_error {
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_no(line) {}
    std::size_t line_no;
};

/// Parses one line of the stream format. Strict: unknown type tags,
/// missing/extra semantics, out-of-range scores or weights all throw.
/// Cross-record checks (ts order, event targets) live in read_stream.
StreamRecord parse_record(const std::string& line, std::size_t line_no = 0);

/// Serializes a record to its single-line form (no trailing newline).
std::string write_record(const StreamRecord& rec);

/// Reads and validates a whole stream file: per-line parsing plus
/// non-decreasing timestamps and events targeting previously seen items.
std::vector<StreamRecord> read_stream(const std::string& path);

void write_stream(const std::string& path, const std::vector<StreamRecord>& records);

/// Per-stream counts written next to generated/filtered streams.
struct StreamStats {
    std::uint64_t n_queries = 0;
    std::uint64_t n_items = 0;
    std::uint64_t n_events = 0;
    std::uint64_t min_events_per_item = 0;
    double avg_events_per_item = 0.0;
};

StreamStats compute_stats(const std::vector<StreamRecord>& records);
void write_stats(const std::string& path, const StreamStats& stats);

/// Knobs for the synthetic Twitter-like workload.
///
/// Items draw Zipf-distributed terms; queries are sampled uniformly from
/// the most frequent 1/2/3-grams of the item corpus with a length mixture
/// averaging ~1.5 terms; per-item event counts are heavy-tailed around
/// events_per_item_mean with unit event scores.
struct WorkloadParams {
    std::uint64_t n_queries = 1000;
    std::uint64_t n_items = 1000;
    double events_per_item_mean = 5.0;
    std::uint64_t vocab_size = 2000;
    double term_zipf_s = 1.0;
    /// Shares of 1-, 2- and 3-term queries; must sum to 1.
    double ngram_share_1 = 0.6;
    double ngram_share_2 = 0.3;
    double ngram_share_3 = 0.1;
    std::uint32_t k = 1;
    std::uint64_t seed = 1;
    /// Terms per item are uniform in [min_item_terms, max_item_terms].
    std::uint32_t min_item_terms = 3;
    std::uint32_t max_item_terms = 8;
    /// Tail heaviness of the per-item event count distribution.
    double event_count_sigma = 1.0;
    /// Fraction of the remaining timeline an item's events spread over;
    /// 1.0 is uniform to the end, small values cluster feedback shortly
    /// after publication (bursty, retweet-like).
    double event_burst = 0.15;
    /// When false (default) all queries are emitted at ts 0 before any
    /// item; when true they are spread across the timeline.
    bool interleave_queries = false;
};

std::vector<StreamRecord> generate_workload(const WorkloadParams& params);

/// Generates, writes the stream and its stats sidecar at <path>.stats.
void generate_workload_file(const WorkloadParams& params, const std::string& path);

/// Keeps queries, items with at least min_events events, and the events
/// of retained items; relative order is preserved.
std::vector<StreamRecord> filter_min_events(const std::vector<StreamRecord>& records,
                                            std::uint64_t min_events);

void filter_min_events_file(const std::string& in_path, std::uint64_t min_events,
                            const std::string& out_path);

}  // namespace ctk
