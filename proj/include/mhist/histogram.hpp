#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mhist/template.hpp"

namespace mhist {

/// Binning of pairwise minutia features.
///
/// Distances in [0, d_max] are split into `dist_bins` equal intervals and the folded
/// direction difference in [0, 180] into `dir_bins` equal intervals. The 4D layout adds
/// the angle of the second minutia's position relative to the first minutia's direction
/// (`relangle_bins` over [0, 360)) and the ordered type combination (EE, EB, BE, BB).
struct BinSpec {
    double d_max = 200.0;
    int dist_bins = 10;
    int dir_bins = 10;
    int relangle_bins = 20;
    /// 4 distinguishes EE/EB/BE/BB; 1 ignores minutia types.
    int type_bins = 4;

    /// 10 x 10 bins over 200 px, the classification setting.
    static BinSpec default_2d() { return {}; }
    /// 20 x 20 x 20 x 4 bins over 200 px, the identification setting.
    static BinSpec default_4d() { return {200.0, 20, 20, 20, 4}; }

    double dist_width() const { return d_max / dist_bins; }
    double dir_width() const { return 180.0 / dir_bins; }
    double relangle_width() const { return 360.0 / relangle_bins; }

    /// Throws std::invalid_argument if d_max or any bin count is out of range.
    void validate() const;

    bool operator==(const BinSpec&) const = default;
};

struct MinutiaeHistogram {
    BinSpec spec;
    int dims = 2;
    /// Row-major over (distance, direction[, relangle, type]).
    std::vector<double> mass;
    bool normalized = false;
    /// Number of unordered pairs with d <= d_max.
    std::int64_t pair_count = 0;

    std::size_t size() const { return mass.size(); }
    double total() const;

    bool operator==(const MinutiaeHistogram&) const = default;
};

/// Number of bins of a `dims`-dimensional histogram under `spec`.
std::size_t bin_count(const BinSpec& spec, int dims);

/// min(|a1 - a2|, 360 - |a1 - a2|) for directions in [0, 360).
double fold_direction_difference(double a1, double a2);

int distance_bin(double d, const BinSpec& spec);
int direction_bin(double folded, const BinSpec& spec);
int relangle_bin(double relangle, const BinSpec& spec);

/// Angle of (to - from) measured counter-clockwise from `from`'s direction, in [0, 360).
double relative_position_angle(const Minutia& from, const Minutia& to);

/// Flat index of a 2D bin.
inline std::size_t index_2d(const BinSpec& spec, int dist_bin, int dir_bin) {
    return static_cast<std::size_t>(dist_bin) * spec.dir_bins + dir_bin;
}

/// Bin of an unordered pair in the 2D layout, or -1 if d > d_max.
long pair_bin_2d(const Minutia& a, const Minutia& b, const BinSpec& spec);

/// Histogram of (distance, folded direction difference) over all unordered pairs.
/// Expects a 500 DPI template with at least two minutiae.
MinutiaeHistogram build_2dmh(const MinutiaTemplate& t, const BinSpec& spec = BinSpec::default_2d(),
                             bool normalize = true);

/// 2D histogram extended by relative position angle and type combination. Every unordered
/// pair within d_max contributes once per ordering.
MinutiaeHistogram build_4dmh(const MinutiaTemplate& t, const BinSpec& spec = BinSpec::default_4d(),
                             bool normalize = false);

/// Scales masses to sum to one; a histogram with no mass stays all-zero.
MinutiaeHistogram normalized(MinutiaeHistogram h);

}  // namespace mhist
