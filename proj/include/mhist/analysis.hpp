#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mhist/histogram.hpp"
#include "mhist/transport.hpp"

namespace mhist {

/// Labeled square matrix of pairwise distances, row-major.
struct DistanceMatrix {
    std::vector<std::string> labels;
    std::vector<double> d;

    std::size_t size() const { return labels.size(); }
    double at(std::size_t i, std::size_t j) const { return d[i * labels.size() + j]; }
    /// Throws unless square, symmetric (to 1e-9 relative), zero-diagonal and non-negative.
    void validate() const;
};

/// Pairwise EMDs between normalized histograms.
DistanceMatrix emd_matrix(std::span<const MinutiaeHistogram> hs, std::vector<std::string> labels, const CostParams& params);

struct MdsResult {
    std::size_t n = 0;
    std::size_t dims = 0;
    /// n x dims, row-major, centered at the origin.
    std::vector<double> coords;
    /// Eigenvalues of the double-centered matrix for the kept axes, descending.
    std::vector<double> eigenvalues;
    /// Axes whose eigenvalue was negative; their coordinates are zero.
    std::vector<bool> zeroed;
    /// Any eigenvalue of the full spectrum below -1e-9 * largest magnitude (non-Euclidean input).
    bool non_euclidean = false;

    double coord(std::size_t i, std::size_t k) const { return coords[i * dims + k]; }
};

/// Classical (Torgerson) scaling: eigen-decomposition of -1/2 J D^2 J. Each axis is
/// sign-fixed so that its first nonzero coordinate is positive.
MdsResult mds_embed(const DistanceMatrix& dm, std::size_t dims = 2);

struct BootstrapNeighborhood {
    std::string finger_id;
    double alpha = 0.1;
    /// EMD radius around `mean`.
    double radius = 0.0;
    int replicates = 0;
    MinutiaeHistogram mean;
    /// One EMD per replicate, sorted ascending.
    std::vector<double> distances;
};

/// Each replicate resamples the impressions with replacement, averages them, and records the
/// EMD from a uniformly chosen out-of-bag impression to that average. The radius is the lower
/// empirical (1 - alpha) quantile of those EMDs.
BootstrapNeighborhood bootstrap_neighborhood(std::span<const MinutiaeHistogram> impressions, double alpha,
                                             int replicates, const CostParams& params, std::uint64_t seed,
                                             std::string finger_id = {});

/// Lower empirical quantile of sorted values: element ceil(q * n) - 1, clamped to the range.
double lower_quantile(std::span<const double> sorted, double q);

}  // namespace mhist
