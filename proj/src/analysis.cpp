#include "mhist/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mhist/realness.hpp"

namespace mhist {

void DistanceMatrix::validate() const {
    const std::size_t n = labels.size();
    if (d.size() != n * n) throw std::invalid_argument("distance matrix is not square");
    for (std::size_t i = 0; i < n; ++i) {
        if (at(i, i) != 0.0) throw std::invalid_argument("distance matrix diagonal must be zero");
        for (std::size_t j = 0; j < n; ++j) {
            const double v = at(i, j);
            if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("distance matrix has a negative or non-finite entry");
            const double w = at(j, i);
            if (std::abs(v - w) > 1e-9 * std::max(1.0, std::max(v, w))) {
                throw std::invalid_argument("distance matrix is not symmetric");
            }
        }
    }
}

DistanceMatrix emd_matrix(std::span<const MinutiaeHistogram> hs, std::vector<std::string> labels, const CostParams& params) {
    if (labels.size() != hs.size()) throw std::invalid_argument("one label per histogram required");
    DistanceMatrix dm;
    dm.labels = std::move(labels);
    const std::size_t n = hs.size();
    dm.d.assign(n * n, 0.0);
    if (n == 0) return dm;
    const auto cost = build_cost_matrix(hs.front().spec, params);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = emd(hs[i], hs[j], cost);
            dm.d[i * n + j] = dm.d[j * n + i] = v;
        }
    }
    return dm;
}

MdsResult mds_embed(const DistanceMatrix& dm, std::size_t dims) {
    dm.validate();
    const std::size_t n = dm.size();
    if (n == 0) throw std::invalid_argument("empty distance matrix");
    if (dims < 1 || dims > n) throw std::invalid_argument("embedding dimension must be in [1, n]");

    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd d2(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
            const double v = dm.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            d2(i, j) = v * v;
        }
    }
    const Eigen::MatrixXd J = Eigen::MatrixXd::Identity(N, N) - Eigen::MatrixXd::Constant(N, N, 1.0 / n);
    Eigen::MatrixXd B = -0.5 * J * d2 * J;
    B = 0.5 * (B + B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
    if (eig.info() != Eigen::Success) throw std::runtime_error("eigen-decomposition failed");
    const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
    const Eigen::MatrixXd& vectors = eig.eigenvectors();

    MdsResult out;
    out.n = n;
    out.dims = dims;
    out.coords.assign(n * dims, 0.0);
    const double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
    out.non_euclidean = values.minCoeff() < -1e-9 * scale;
    for (std::size_t k = 0; k < dims; ++k) {
        const Eigen::Index col = N - 1 - static_cast<Eigen::Index>(k);
        const double lambda = values(col);
        out.eigenvalues.push_back(lambda);
        const bool negative = lambda < 0.0;
        out.zeroed.push_back(negative);
        if (negative) continue;
        Eigen::VectorXd v = vectors.col(col);
        const double vmax = v.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < N; ++i) {
            if (std::abs(v(i)) > 1e-9 * vmax) {
                if (v(i) < 0.0) v = -v;
                break;
            }
        }
        const double s = std::sqrt(lambda);
        for (Eigen::Index i = 0; i < N; ++i) out.coords[static_cast<std::size_t>(i) * dims + k] = s * v(i);
    }
    // Remove the tiny centroid drift left by round-off.
    for (std::size_t k = 0; k < dims; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += out.coords[i * dims + k];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) out.coords[i * dims + k] -= mean;
    }
    return out;
}

double lower_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const auto n = static_cast<double>(sorted.size());
    long idx = static_cast<long>(std::ceil(q * n - 1e-12)) - 1;
    idx = std::clamp(idx, 0L, static_cast<long>(sorted.size()) - 1);
    return sorted[static_cast<std::size_t>(idx)];
}

BootstrapNeighborhood bootstrap_neighborhood(std::span<const MinutiaeHistogram> impressions, double alpha,
                                             int replicates, const CostParams& params, std::uint64_t seed,
                                             std::string finger_id) {
    if (impressions.size() < 2) throw std::invalid_argument("bootstrap needs at least 2 impressions");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
    if (replicates < 100) throw std::invalid_argument("bootstrap needs at least 100 replicates");

    BootstrapNeighborhood out;
    out.finger_id = std::move(finger_id);
    out.alpha = alpha;
    out.replicates = replicates;
    out.mean = average_histogram(impressions);
    const auto cost = build_cost_matrix(out.mean.spec, params);

    std::mt19937_64 rng(seed);
    const std::size_t n = impressions.size();
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<MinutiaeHistogram> resample(n);
    std::vector<char> in_bag(n);
    std::vector<std::size_t> out_of_bag;
    out.distances.reserve(static_cast<std::size_t>(replicates));
    for (int r = 0; r < replicates; ++r) {
        do {
            std::fill(in_bag.begin(), in_bag.end(), 0);
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t pick = draw(rng);
                resample[k] = impressions[pick];
                in_bag[pick] = 1;
            }
            out_of_bag.clear();
            for (std::size_t k = 0; k < n; ++k) {
                if (!in_bag[k]) out_of_bag.push_back(k);
            }
        } while (out_of_bag.empty());
        const auto mean = average_histogram(resample);
        std::uniform_int_distribution<std::size_t> held(0, out_of_bag.size() - 1);
        out.distances.push_back(emd(impressions[out_of_bag[held(rng)]], mean, cost));
    }
    std::sort(out.distances.begin(), out.distances.end());
    out.radius = lower_quantile(out.distances, 1.0 - alpha);
    return out;
}

}  // namespace mhist
