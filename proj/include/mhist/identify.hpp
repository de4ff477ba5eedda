#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mhist/histogram.hpp"
#include "mhist/template.hpp"

namespace mhist {

/// Nonzero bins of a raw histogram, ascending by bin index.
struct SparseHistogram {
    BinSpec spec = BinSpec::default_4d();
    int dims = 4;
    std::vector<std::uint32_t> bins;
    std::vector<double> counts;
    std::int64_t pair_count = 0;

    static SparseHistogram from_dense(const MinutiaeHistogram& h);
    MinutiaeHistogram to_dense() const;
    double total() const;

    bool operator==(const SparseHistogram&) const = default;
};

/// Bin intersection score: sum over bins of min(h1, h2). Both inputs raw, same spec.
double bis(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2);
double bis(const MinutiaeHistogram& dense, const SparseHistogram& sparse);

struct GalleryEntry {
    std::string finger_id;
    std::string impression_id;
    SparseHistogram hist;
    std::size_t minutia_count = 0;
};

/// Enrolled raw 4D histograms. Entries keep insertion order.
class GalleryIndex {
public:
    explicit GalleryIndex(BinSpec spec = BinSpec::default_4d());

    const BinSpec& spec() const { return spec_; }
    const std::vector<GalleryEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    /// Number of distinct finger ids.
    std::size_t finger_count() const;

    /// Rescales to 500 DPI and enrolls; the template needs finger and impression ids.
    void enroll(const MinutiaTemplate& t);
    /// Adds a prebuilt entry; its spec must match.
    void add(GalleryEntry entry);

private:
    BinSpec spec_;
    std::vector<GalleryEntry> entries_;
};

struct RankedFinger {
    std::string finger_id;
    double score = 0.0;
};

struct RankingResult {
    std::string query_finger;
    std::string query_impression;
    /// Descending score; ties by ascending finger id (numeric ids compare as numbers).
    std::vector<RankedFinger> ranked;
    /// 1-based; empty when the query's finger has no comparable enrolled impression.
    std::optional<std::size_t> true_rank;
    /// true_rank / number of ranked fingers.
    std::optional<double> accessed_fraction;
};

/// Orders finger ids numerically when both are integers, otherwise lexicographically.
bool finger_id_less(const std::string& a, const std::string& b);

/// Ranks gallery fingers by their best impression's BIS against the query. The enrolled entry
/// with the query's own (finger, impression) is skipped.
RankingResult search(const GalleryIndex& index, const MinutiaTemplate& query);

struct AccessRateReport {
    std::size_t queries = 0;
    double mean_accessed_fraction = 0.0;
    double rank1_percent = 0.0;
    /// Same restricted to queries with at least `min_minutiae` minutiae.
    std::size_t large_queries = 0;
    double rank1_percent_large = 0.0;
    std::vector<RankingResult> results;
};

AccessRateReport access_rate_report(const GalleryIndex& index, std::span<const MinutiaTemplate> queries,
                                    std::size_t min_minutiae = 30);

/// Binary index file: "MHIX" magic, version, spec, then length-prefixed sparse entries (little endian).
void write_index(std::ostream& out, const GalleryIndex& index);
GalleryIndex read_index(std::istream& in);

}  // namespace mhist
