#include "mhist/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mhist/error.hpp"

namespace mhist {

namespace {

int clamp_bin(double scaled, int bins) {
    const int b = static_cast<int>(std::floor(scaled));
    return std::clamp(b, 0, bins - 1);
}

int type_combination(MinutiaType first, MinutiaType second) {
    if (first == MinutiaType::Unknown || second == MinutiaType::Unknown) {
        throw std::invalid_argument("4D histogram with type bins needs every minutia typed (E or B)");
    }
    return 2 * (first == MinutiaType::Bifurcation ? 1 : 0) + (second == MinutiaType::Bifurcation ? 1 : 0);
}

void require_pairs(const MinutiaTemplate& t) {
    if (t.minutiae.size() < 2) throw PairFeaturesUndefined();
    if (t.dpi != 500) throw std::invalid_argument("histograms are built from 500 DPI templates; rescale first");
}

}  // namespace

void BinSpec::validate() const {
    if (!(d_max > 0.0) || !std::isfinite(d_max)) throw std::invalid_argument("d_max must be positive");
    if (dist_bins < 1 || dir_bins < 1 || relangle_bins < 1) {
        throw std::invalid_argument("bin counts must be at least 1");
    }
    if (type_bins != 1 && type_bins != 4) throw std::invalid_argument("type bins must be 1 or 4");
}

double MinutiaeHistogram::total() const {
    return std::accumulate(mass.begin(), mass.end(), 0.0);
}

std::size_t bin_count(const BinSpec& spec, int dims) {
    const auto base = static_cast<std::size_t>(spec.dist_bins) * spec.dir_bins;
    if (dims == 2) return base;
    if (dims == 4) return base * spec.relangle_bins * spec.type_bins;
    throw std::invalid_argument("histogram dims must be 2 or 4");
}

double fold_direction_difference(double a1, double a2) {
    const double diff = std::abs(a1 - a2);
    return std::min(diff, 360.0 - diff);
}

int distance_bin(double d, const BinSpec& spec) {
    return clamp_bin(d * spec.dist_bins / spec.d_max, spec.dist_bins);
}

int direction_bin(double folded, const BinSpec& spec) {
    return clamp_bin(folded * spec.dir_bins / 180.0, spec.dir_bins);
}

int relangle_bin(double relangle, const BinSpec& spec) {
    return clamp_bin(relangle * spec.relangle_bins / 360.0, spec.relangle_bins);
}

double relative_position_angle(const Minutia& from, const Minutia& to) {
    const double dx = to.x - from.x;
    const double dy = to.y - from.y;
    // coincident minutiae have no relative position; pin them to 0
    if (dx == 0.0 && dy == 0.0) return 0.0;
    const double heading = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    return normalize_degrees(heading - from.direction);
}

long pair_bin_2d(const Minutia& a, const Minutia& b, const BinSpec& spec) {
    const double d = std::hypot(a.x - b.x, a.y - b.y);
    if (d > spec.d_max) return -1;
    const double alpha = fold_direction_difference(a.direction, b.direction);
    return static_cast<long>(index_2d(spec, distance_bin(d, spec), direction_bin(alpha, spec)));
}

MinutiaeHistogram normalized(MinutiaeHistogram h) {
    const double sum = h.total();
    if (sum > 0.0) {
        for (auto& m : h.mass) m /= sum;
    }
    h.normalized = true;
    return h;
}

MinutiaeHistogram build_2dmh(const MinutiaTemplate& t, const BinSpec& spec, bool normalize) {
    spec.validate();
    require_pairs(t);
    MinutiaeHistogram h;
    h.spec = spec;
    h.dims = 2;
    h.mass.assign(bin_count(spec, 2), 0.0);
    const auto& ms = t.minutiae;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        for (std::size_t j = i + 1; j < ms.size(); ++j) {
            const long bin = pair_bin_2d(ms[i], ms[j], spec);
            if (bin < 0) continue;
            h.mass[static_cast<std::size_t>(bin)] += 1.0;
            ++h.pair_count;
        }
    }
    return normalize ? normalized(std::move(h)) : h;
}

MinutiaeHistogram build_4dmh(const MinutiaTemplate& t, const BinSpec& spec, bool normalize) {
    spec.validate();
    require_pairs(t);
    MinutiaeHistogram h;
    h.spec = spec;
    h.dims = 4;
    h.mass.assign(bin_count(spec, 4), 0.0);
    const auto& ms = t.minutiae;

    auto add_ordered = [&](const Minutia& first, const Minutia& second, int dbin, int abin) {
        const int rbin = relangle_bin(relative_position_angle(first, second), spec);
        const int tbin = spec.type_bins == 4 ? type_combination(first.type, second.type) : 0;
        const std::size_t idx =
            ((index_2d(spec, dbin, abin) * spec.relangle_bins) + rbin) * spec.type_bins + tbin;
        h.mass[idx] += 1.0;
    };

    for (std::size_t i = 0; i < ms.size(); ++i) {
        for (std::size_t j = i + 1; j < ms.size(); ++j) {
            const double d = std::hypot(ms[i].x - ms[j].x, ms[i].y - ms[j].y);
            if (d > spec.d_max) continue;
            const int dbin = distance_bin(d, spec);
            const int abin = direction_bin(fold_direction_difference(ms[i].direction, ms[j].direction), spec);
            add_ordered(ms[i], ms[j], dbin, abin);
            add_ordered(ms[j], ms[i], dbin, abin);
            ++h.pair_count;
        }
    }
    return normalize ? normalized(std::move(h)) : h;
}

}  // namespace mhist
