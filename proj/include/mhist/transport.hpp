#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mhist/histogram.hpp"

namespace mhist {

/// Ground-cost parameters: `s` per neighbouring distance bin, `r` per neighbouring
/// direction bin, `e` the exponent applied to each term.
struct CostParams {
    double r = 1.0;
    double s = 1.0;
    double e = 1.0;

    void validate() const;
    bool operator==(const CostParams&) const = default;
};

/// Dense row-major ground cost between source bins (rows) and sink bins (columns).
class CostMatrix {
public:
    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> cost);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t i, std::size_t j) const { return cost_[i * cols_ + j]; }
    std::span<const double> data() const { return cost_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> cost_;
};

/// cost((x,u),(y,v)) = (s|x-y|)^e + (r|u-v|)^e over the 2D (distance, direction) bins.
/// The direction axis is not periodic: 0 and 180 degrees are its two extremes.
CostMatrix build_cost_matrix(const BinSpec& spec, const CostParams& params);

struct FlowEntry {
    std::size_t from = 0;
    std::size_t to = 0;
    double mass = 0.0;
};

struct TransportPlan {
    /// Nonzero flows only, sorted by (from, to).
    std::vector<FlowEntry> flow;
    double total_cost = 0.0;

    /// Flow on a single cell, 0 when absent.
    double at(std::size_t from, std::size_t to) const;
};

/// Exact transportation solver (primal network simplex on the bipartite supply/demand tree).
///
/// Masses are scaled by a power of two (total below 2^50) and rounded to integers before
/// pivoting so the basis stays integral. Marginal totals must agree to within 1e-9 (relative to the larger of 1 and
/// the total); negative or non-finite masses are rejected.
TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              const CostMatrix& cost);

/// Earth mover's distance between two 2D histograms with the same spec and total mass.
double emd(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2, const CostParams& params = {});
/// Same, reusing a prebuilt cost matrix for `h1.spec`.
double emd(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2, const CostMatrix& cost);
/// Optimal plan from h1's bins to h2's bins.
TransportPlan emd_plan(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2, const CostMatrix& cost);

/// Per-source-bin share of the total cost: sum over sinks of flow * cost.
std::vector<double> source_cost_contributions(const TransportPlan& plan, const CostMatrix& cost);

}  // namespace mhist
