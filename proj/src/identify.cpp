#include "mhist/identify.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "mhist/error.hpp"

namespace mhist {

namespace {

constexpr char kMagic[4] = {'M', 'H', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

void require_raw_pair(const BinSpec& a, int da, bool na, const BinSpec& b, int db, bool nb) {
    if (!(a == b) || da != db) throw std::invalid_argument("bis: histogram specs differ");
    if (na || nb) throw std::invalid_argument("bis: histograms must be unnormalized");
}

std::optional<long long> as_integer(const std::string& s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

template <typename T>
void put(std::ostream& out, T v) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void put_double(std::ostream& out, double d) { put(out, std::bit_cast<std::uint64_t>(d)); }

void put_string(std::ostream& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ModelFormatError("index file truncated");
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
    return static_cast<T>(u);
}

double get_double(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }

std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > (1u << 20)) throw ModelFormatError("index file: implausible string length");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw ModelFormatError("index file truncated");
    return s;
}

}  // namespace

SparseHistogram SparseHistogram::from_dense(const MinutiaeHistogram& h) {
    SparseHistogram s;
    s.spec = h.spec;
    s.dims = h.dims;
    s.pair_count = h.pair_count;
    for (std::size_t i = 0; i < h.mass.size(); ++i) {
        if (h.mass[i] != 0.0) {
            s.bins.push_back(static_cast<std::uint32_t>(i));
            s.counts.push_back(h.mass[i]);
        }
    }
    return s;
}

MinutiaeHistogram SparseHistogram::to_dense() const {
    MinutiaeHistogram h;
    h.spec = spec;
    h.dims = dims;
    h.mass.assign(bin_count(spec, dims), 0.0);
    for (std::size_t k = 0; k < bins.size(); ++k) h.mass.at(bins[k]) = counts[k];
    h.pair_count = pair_count;
    return h;
}

double SparseHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

double bis(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2) {
    require_raw_pair(h1.spec, h1.dims, h1.normalized, h2.spec, h2.dims, h2.normalized);
    double s = 0.0;
    for (std::size_t i = 0; i < h1.mass.size(); ++i) s += std::min(h1.mass[i], h2.mass[i]);
    return s;
}

double bis(const MinutiaeHistogram& dense, const SparseHistogram& sparse) {
    require_raw_pair(dense.spec, dense.dims, dense.normalized, sparse.spec, sparse.dims, false);
    double s = 0.0;
    for (std::size_t k = 0; k < sparse.bins.size(); ++k) s += std::min(dense.mass[sparse.bins[k]], sparse.counts[k]);
    return s;
}

GalleryIndex::GalleryIndex(BinSpec spec) : spec_(spec) { spec_.validate(); }

std::size_t GalleryIndex::finger_count() const {
    std::set<std::string> ids;
    for (const auto& e : entries_) ids.insert(e.finger_id);
    return ids.size();
}

void GalleryIndex::enroll(const MinutiaTemplate& t) {
    if (!t.finger_id || !t.impression_id) throw std::invalid_argument("enrolled templates need finger and impression ids");
    GalleryEntry e;
    e.finger_id = *t.finger_id;
    e.impression_id = *t.impression_id;
    e.hist = SparseHistogram::from_dense(build_4dmh(rescale_to_500dpi(t), spec_, false));
    e.minutia_count = t.minutiae.size();
    add(std::move(e));
}

void GalleryIndex::add(GalleryEntry entry) {
    if (!(entry.hist.spec == spec_) || entry.hist.dims != 4) throw std::invalid_argument("gallery entry spec differs from index spec");
    entries_.push_back(std::move(entry));
}

bool finger_id_less(const std::string& a, const std::string& b) {
    const auto ia = as_integer(a), ib = as_integer(b);
    if (ia && ib && *ia != *ib) return *ia < *ib;
    if (ia && !ib) return true;
    if (!ia && ib) return false;
    return a < b;
}

RankingResult search(const GalleryIndex& index, const MinutiaTemplate& query) {
    if (index.empty()) throw std::invalid_argument("search on an empty gallery");
    RankingResult result;
    result.query_finger = query.finger_id.value_or("");
    result.query_impression = query.impression_id.value_or("");
    const auto q = build_4dmh(rescale_to_500dpi(query), index.spec(), false);

    std::map<std::string, double> best;
    for (const auto& e : index.entries()) {
        if (query.finger_id && query.impression_id && e.finger_id == *query.finger_id &&
            e.impression_id == *query.impression_id) {
            continue;
        }
        const double s = bis(q, e.hist);
        auto [it, inserted] = best.try_emplace(e.finger_id, s);
        if (!inserted) it->second = std::max(it->second, s);
    }
    for (const auto& [id, score] : best) result.ranked.push_back({id, score});
    std::sort(result.ranked.begin(), result.ranked.end(), [](const RankedFinger& a, const RankedFinger& b) {
        if (a.score != b.score) return a.score > b.score;
        return finger_id_less(a.finger_id, b.finger_id);
    });
    if (query.finger_id) {
        for (std::size_t k = 0; k < result.ranked.size(); ++k) {
            if (result.ranked[k].finger_id == *query.finger_id) {
                result.true_rank = k + 1;
                result.accessed_fraction = static_cast<double>(k + 1) / static_cast<double>(result.ranked.size());
                break;
            }
        }
    }
    return result;
}

AccessRateReport access_rate_report(const GalleryIndex& index, std::span<const MinutiaTemplate> queries,
                                    std::size_t min_minutiae) {
    if (queries.empty()) throw std::invalid_argument("access rate report needs at least one query");
    AccessRateReport report;
    std::size_t rank1 = 0, rank1_large = 0;
    double fraction_sum = 0.0;
    for (const auto& q : queries) {
        auto r = search(index, q);
        if (!r.true_rank) {
            throw std::invalid_argument("query finger '" + r.query_finger + "' is not enrolled");
        }
        ++report.queries;
        fraction_sum += *r.accessed_fraction;
        const bool first = *r.true_rank == 1;
        rank1 += first;
        if (q.minutiae.size() >= min_minutiae) {
            ++report.large_queries;
            rank1_large += first;
        }
        report.results.push_back(std::move(r));
    }
    report.mean_accessed_fraction = fraction_sum / static_cast<double>(report.queries);
    report.rank1_percent = 100.0 * static_cast<double>(rank1) / static_cast<double>(report.queries);
    if (report.large_queries > 0) {
        report.rank1_percent_large = 100.0 * static_cast<double>(rank1_large) / static_cast<double>(report.large_queries);
    }
    return report;
}

void write_index(std::ostream& out, const GalleryIndex& index) {
    out.write(kMagic, 4);
    put(out, kVersion);
    const auto& spec = index.spec();
    put_double(out, spec.d_max);
    put(out, static_cast<std::int32_t>(spec.dist_bins));
    put(out, static_cast<std::int32_t>(spec.dir_bins));
    put(out, static_cast<std::int32_t>(spec.relangle_bins));
    put(out, static_cast<std::int32_t>(spec.type_bins));
    put(out, static_cast<std::uint64_t>(index.entries().size()));
    for (const auto& e : index.entries()) {
        put_string(out, e.finger_id);
        put_string(out, e.impression_id);
        put(out, static_cast<std::uint64_t>(e.minutia_count));
        put(out, static_cast<std::int64_t>(e.hist.pair_count));
        put(out, static_cast<std::uint64_t>(e.hist.bins.size()));
        for (std::size_t k = 0; k < e.hist.bins.size(); ++k) {
            put(out, e.hist.bins[k]);
            put_double(out, e.hist.counts[k]);
        }
    }
    if (!out) throw std::runtime_error("failed writing index");
}

GalleryIndex read_index(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ModelFormatError("not a minutiae histogram index file");
    if (get<std::uint32_t>(in) != kVersion) throw ModelFormatError("unsupported index version");
    BinSpec spec;
    spec.d_max = get_double(in);
    spec.dist_bins = get<std::int32_t>(in);
    spec.dir_bins = get<std::int32_t>(in);
    spec.relangle_bins = get<std::int32_t>(in);
    spec.type_bins = get<std::int32_t>(in);
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(std::string("index file: ") + e.what());
    }
    GalleryIndex index(spec);
    const auto n = get<std::uint64_t>(in);
    const std::size_t bins = bin_count(spec, 4);
    for (std::uint64_t i = 0; i < n; ++i) {
        GalleryEntry e;
        e.finger_id = get_string(in);
        e.impression_id = get_string(in);
        e.minutia_count = get<std::uint64_t>(in);
        e.hist.spec = spec;
        e.hist.pair_count = get<std::int64_t>(in);
        const auto nnz = get<std::uint64_t>(in);
        if (nnz > bins) throw ModelFormatError("index file: too many nonzero bins");
        for (std::uint64_t k = 0; k < nnz; ++k) {
            const auto b = get<std::uint32_t>(in);
            const double c = get_double(in);
            if (b >= bins || (!e.hist.bins.empty() && b <= e.hist.bins.back())) throw ModelFormatError("index file: bad bin index");
            if (!(c > 0.0) || !std::isfinite(c)) throw ModelFormatError("index file: bad bin count");
            e.hist.bins.push_back(b);
            e.hist.counts.push_back(c);
        }
        index.add(std::move(e));
    }
    return index;
}

}  // namespace mhist
