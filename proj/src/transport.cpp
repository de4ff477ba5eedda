#include "mhist/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mhist {

namespace {

// Total scaled mass stays below 2^50: far inside int64, and the rounding error per bin
// is ~1e-15 of the total instead of 1e-9.
constexpr int kScaledTotalBits = 50;
constexpr double kBalanceTolerance = 1e-9;

/// Primal transportation simplex over a spanning-tree basis of the bipartite graph
/// rows [0, m) and columns [m, m + n). Flows are integral.
class TransportSimplex {
public:
    TransportSimplex(std::vector<std::int64_t> supply, std::vector<std::int64_t> demand,
                     std::vector<double> cost)
        : m_(supply.size()),
          n_(demand.size()),
          supply_(std::move(supply)),
          demand_(std::move(demand)),
          cost_(std::move(cost)),
          adj_(m_ + n_),
          pot_(m_ + n_, 0.0),
          visited_(m_ + n_, 0),
          parent_cell_(m_ + n_, -1) {
        double max_cost = 0.0;
        for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
        tolerance_ = 1e-11 * std::max(1.0, max_cost);
        block_ = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(double(m_ * n_))));
    }

    void solve() {
        initial_basis();
        const std::size_t degenerate_limit = 10 * (m_ + n_) + 100;
        const std::size_t pivot_limit = 1000 * (m_ * n_) + 10000;
        std::size_t degenerate_run = 0;
        for (std::size_t pivots = 0;; ++pivots) {
            if (pivots > pivot_limit) throw std::logic_error("transportation simplex failed to converge");
            compute_potentials();
            const long entering = bland_ ? entering_bland() : entering_block();
            if (entering < 0) return;
            const bool degenerate = pivot(static_cast<std::size_t>(entering));
            degenerate_run = degenerate ? degenerate_run + 1 : 0;
            // Bland's rule cannot cycle; fall back to it when progress stalls.
            if (degenerate_run > degenerate_limit) bland_ = true;
        }
    }

    struct Cell {
        std::size_t row;
        std::size_t col;
        std::int64_t flow;
    };

    const std::vector<Cell>& basis() const { return basis_; }
    double cost(std::size_t r, std::size_t c) const { return cost_[r * n_ + c]; }

private:
    std::size_t col_node(std::size_t c) const { return m_ + c; }

    void add_cell(std::size_t r, std::size_t c, std::int64_t flow) {
        const int id = static_cast<int>(basis_.size());
        basis_.push_back({r, c, flow});
        adj_[r].push_back(id);
        adj_[col_node(c)].push_back(id);
    }

    // Least-cost rule. Every allocation retires exactly one line except the last, which
    // yields m + n - 1 cells forming a spanning tree even under degeneracy.
    void initial_basis() {
        std::vector<std::int64_t> s = supply_;
        std::vector<std::int64_t> d = demand_;
        std::vector<std::uint32_t> order(m_ * n_);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return cost_[a] < cost_[b]; });
        std::vector<char> row_done(m_, 0);
        std::vector<char> col_done(n_, 0);
        std::size_t open_rows = m_;
        std::size_t open_cols = n_;
        basis_.reserve(m_ + n_ - 1);
        for (const auto idx : order) {
            const std::size_t r = idx / n_;
            const std::size_t c = idx % n_;
            if (row_done[r] || col_done[c]) continue;
            const std::int64_t x = std::min(s[r], d[c]);
            add_cell(r, c, x);
            s[r] -= x;
            d[c] -= x;
            if (open_rows + open_cols == 2) break;
            // Never retire the last open row while columns remain, nor vice versa.
            if (s[r] == 0 && open_rows > 1) {
                row_done[r] = 1;
                --open_rows;
            } else {
                col_done[c] = 1;
                --open_cols;
            }
        }
        if (basis_.size() != m_ + n_ - 1) throw std::logic_error("initial basis is not a spanning tree");
    }

    void compute_potentials() {
        std::fill(visited_.begin(), visited_.end(), 0);
        stack_.clear();
        pot_[0] = 0.0;
        visited_[0] = 1;
        stack_.push_back(0);
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            for (const int id : adj_[node]) {
                const Cell& cell = basis_[static_cast<std::size_t>(id)];
                const std::size_t rn = cell.row;
                const std::size_t cn = col_node(cell.col);
                const std::size_t other = node == rn ? cn : rn;
                if (visited_[other]) continue;
                // u_row + v_col = cost on basic cells
                pot_[other] = cost(cell.row, cell.col) - pot_[node];
                visited_[other] = 1;
                stack_.push_back(other);
            }
        }
    }

    double reduced(std::size_t idx) const {
        const std::size_t r = idx / n_;
        const std::size_t c = idx % n_;
        return cost_[idx] - pot_[r] - pot_[col_node(c)];
    }

    long entering_block() {
        const std::size_t total = m_ * n_;
        double best = -tolerance_;
        long best_idx = -1;
        std::size_t scanned = 0;
        std::size_t in_block = 0;
        std::size_t idx = next_scan_;
        while (scanned < total) {
            const double rc = reduced(idx);
            if (rc < best) {
                best = rc;
                best_idx = static_cast<long>(idx);
            }
            ++scanned;
            ++in_block;
            idx = idx + 1 == total ? 0 : idx + 1;
            if (in_block == block_) {
                if (best_idx >= 0) break;
                in_block = 0;
            }
        }
        next_scan_ = idx;
        return best_idx;
    }

    long entering_bland() const {
        const std::size_t total = m_ * n_;
        for (std::size_t idx = 0; idx < total; ++idx) {
            if (reduced(idx) < -tolerance_) return static_cast<long>(idx);
        }
        return -1;
    }

    // Returns true when the pivot moved zero flow.
    bool pivot(std::size_t entering) {
        const std::size_t er = entering / n_;
        const std::size_t ec = entering % n_;
        const std::size_t target = col_node(ec);

        // Tree path from the entering row to the entering column.
        std::fill(visited_.begin(), visited_.end(), 0);
        stack_.clear();
        visited_[er] = 1;
        parent_cell_[er] = -1;
        stack_.push_back(er);
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            if (node == target) break;
            for (const int id : adj_[node]) {
                const Cell& cell = basis_[static_cast<std::size_t>(id)];
                const std::size_t other = node == cell.row ? col_node(cell.col) : cell.row;
                if (visited_[other]) continue;
                visited_[other] = 1;
                parent_cell_[other] = id;
                stack_.push_back(other);
            }
        }

        // Walking back from the column, cells alternate -theta, +theta, ...
        path_.clear();
        for (std::size_t node = target; node != er;) {
            const int id = parent_cell_[node];
            path_.push_back(id);
            const Cell& cell = basis_[static_cast<std::size_t>(id)];
            node = node == cell.row ? col_node(cell.col) : cell.row;
        }

        std::int64_t theta = std::numeric_limits<std::int64_t>::max();
        int leaving = -1;
        std::size_t leaving_key = 0;
        for (std::size_t k = 0; k < path_.size(); k += 2) {
            const int id = path_[k];
            const Cell& cell = basis_[static_cast<std::size_t>(id)];
            const std::size_t key = cell.row * n_ + cell.col;
            if (cell.flow < theta || (cell.flow == theta && bland_ && key < leaving_key)) {
                theta = cell.flow;
                leaving = id;
                leaving_key = key;
            }
        }

        for (std::size_t k = 0; k < path_.size(); ++k) {
            Cell& cell = basis_[static_cast<std::size_t>(path_[k])];
            cell.flow += (k % 2 == 0) ? -theta : theta;
        }

        // Swap the leaving cell for the entering one in place.
        Cell& out = basis_[static_cast<std::size_t>(leaving)];
        erase_adj(out.row, leaving);
        erase_adj(col_node(out.col), leaving);
        out = Cell{er, ec, theta};
        adj_[er].push_back(leaving);
        adj_[target].push_back(leaving);
        return theta == 0;
    }

    void erase_adj(std::size_t node, int id) {
        auto& list = adj_[node];
        const auto it = std::find(list.begin(), list.end(), id);
        *it = list.back();
        list.pop_back();
    }

    std::size_t m_;
    std::size_t n_;
    std::vector<std::int64_t> supply_;
    std::vector<std::int64_t> demand_;
    std::vector<double> cost_;
    std::vector<Cell> basis_;
    std::vector<std::vector<int>> adj_;
    std::vector<double> pot_;
    std::vector<char> visited_;
    std::vector<int> parent_cell_;
    std::vector<std::size_t> stack_;
    std::vector<int> path_;
    double tolerance_ = 0.0;
    std::size_t block_ = 16;
    std::size_t next_scan_ = 0;
    bool bland_ = false;
};

void check_masses(std::span<const double> masses, const char* which) {
    for (double v : masses) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(which) + " mass is not finite");
        if (v < 0.0) throw std::invalid_argument(std::string("negative ") + which + " mass");
    }
}

std::vector<std::int64_t> scale_masses(std::span<const double> masses, double scale) {
    std::vector<std::int64_t> out(masses.size());
    for (std::size_t i = 0; i < masses.size(); ++i) out[i] = std::llround(masses[i] * scale);
    return out;
}

void rebalance(std::vector<std::int64_t>& supply, std::vector<std::int64_t>& demand) {
    const std::int64_t s = std::accumulate(supply.begin(), supply.end(), std::int64_t{0});
    const std::int64_t d = std::accumulate(demand.begin(), demand.end(), std::int64_t{0});
    if (s == d) return;
    auto& smaller = s < d ? supply : demand;
    const auto it = std::max_element(smaller.begin(), smaller.end());
    *it += std::abs(s - d);
}

}  // namespace

void CostParams::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!ok(r) || !ok(s) || !ok(e)) throw std::invalid_argument("cost parameters r, s, e must be positive and finite");
}

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> cost)
    : rows_(rows), cols_(cols), cost_(std::move(cost)) {
    if (cost_.size() != rows_ * cols_) throw std::invalid_argument("cost matrix size mismatch");
}

CostMatrix build_cost_matrix(const BinSpec& spec, const CostParams& params) {
    spec.validate();
    params.validate();
    const std::size_t bins = bin_count(spec, 2);
    // Per-axis step costs are tabulated once; |x - y| takes at most max(bins) values.
    const int max_steps = std::max(spec.dist_bins, spec.dir_bins);
    std::vector<double> dist_term(max_steps), dir_term(max_steps);
    for (int k = 0; k < max_steps; ++k) {
        dist_term[k] = std::pow(params.s * k, params.e);
        dir_term[k] = std::pow(params.r * k, params.e);
    }
    std::vector<double> cost(bins * bins);
    for (int x = 0; x < spec.dist_bins; ++x) {
        for (int u = 0; u < spec.dir_bins; ++u) {
            const std::size_t from = index_2d(spec, x, u);
            for (int y = 0; y < spec.dist_bins; ++y) {
                for (int v = 0; v < spec.dir_bins; ++v) {
                    cost[from * bins + index_2d(spec, y, v)] = dist_term[std::abs(x - y)] + dir_term[std::abs(u - v)];
                }
            }
        }
    }
    return CostMatrix(bins, bins, std::move(cost));
}

double TransportPlan::at(std::size_t from, std::size_t to) const {
    const auto it = std::lower_bound(flow.begin(), flow.end(), std::pair{from, to},
                                     [](const FlowEntry& f, const std::pair<std::size_t, std::size_t>& key) {
                                         return std::pair{f.from, f.to} < key;
                                     });
    if (it != flow.end() && it->from == from && it->to == to) return it->mass;
    return 0.0;
}

TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              const CostMatrix& cost) {
    if (supply.size() != cost.rows() || demand.size() != cost.cols()) {
        throw std::invalid_argument("marginal sizes do not match the cost matrix");
    }
    check_masses(supply, "supply");
    check_masses(demand, "demand");
    const double total_s = std::accumulate(supply.begin(), supply.end(), 0.0);
    const double total_d = std::accumulate(demand.begin(), demand.end(), 0.0);
    if (std::abs(total_s - total_d) > kBalanceTolerance * std::max(1.0, std::max(total_s, total_d))) {
        throw std::invalid_argument("unbalanced marginals: supply " + std::to_string(total_s) + " vs demand " +
                                    std::to_string(total_d));
    }

    TransportPlan plan;
    if (total_s <= 0.0) return plan;

    // A power of two keeps integral and dyadic masses exact.
    int exponent = 0;
    std::frexp(total_s, &exponent);
    const double scale = std::ldexp(1.0, kScaledTotalBits - exponent);
    auto s_int = scale_masses(supply, scale);
    auto d_int = scale_masses(demand, scale);
    rebalance(s_int, d_int);

    // Bins without mass cannot carry flow.
    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < s_int.size(); ++i) if (s_int[i] > 0) rows.push_back(i);
    for (std::size_t j = 0; j < d_int.size(); ++j) if (d_int[j] > 0) cols.push_back(j);
    if (rows.empty() || cols.empty()) return plan;

    std::vector<std::int64_t> s_active, d_active;
    for (auto i : rows) s_active.push_back(s_int[i]);
    for (auto j : cols) d_active.push_back(d_int[j]);
    std::vector<double> sub(rows.size() * cols.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) sub[a * cols.size() + b] = cost(rows[a], cols[b]);
    }

    TransportSimplex simplex(std::move(s_active), std::move(d_active), std::move(sub));
    simplex.solve();

    long double total = 0.0L;
    for (const auto& cell : simplex.basis()) {
        if (cell.flow <= 0) continue;
        const std::size_t from = rows[cell.row];
        const std::size_t to = cols[cell.col];
        plan.flow.push_back({from, to, static_cast<double>(cell.flow) / scale});
        total += static_cast<long double>(cell.flow) * cost(from, to);
    }
    plan.total_cost = static_cast<double>(total / scale);
    std::sort(plan.flow.begin(), plan.flow.end(),
              [](const FlowEntry& a, const FlowEntry& b) { return std::pair{a.from, a.to} < std::pair{b.from, b.to}; });
    return plan;
}

namespace {

void check_compatible(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2, const CostMatrix& cost) {
    if (h1.dims != 2 || h2.dims != 2) throw std::invalid_argument("EMD is defined on 2D histograms");
    if (!(h1.spec == h2.spec)) throw std::invalid_argument("histograms have different bin specs");
    if (h1.normalized != h2.normalized) throw std::invalid_argument("cannot compare normalized with raw histogram");
    if (h1.mass.size() != cost.rows() || h2.mass.size() != cost.cols()) {
        throw std::invalid_argument("cost matrix does not match histogram size");
    }
}

}  // namespace

double emd(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2, const CostParams& params) {
    return emd(h1, h2, build_cost_matrix(h1.spec, params));
}

double emd(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2, const CostMatrix& cost) {
    return emd_plan(h1, h2, cost).total_cost;
}

TransportPlan emd_plan(const MinutiaeHistogram& h1, const MinutiaeHistogram& h2, const CostMatrix& cost) {
    check_compatible(h1, h2, cost);
    return solve_transport(h1.mass, h2.mass, cost);
}

std::vector<double> source_cost_contributions(const TransportPlan& plan, const CostMatrix& cost) {
    std::vector<double> out(cost.rows(), 0.0);
    for (const auto& f : plan.flow) out[f.from] += f.mass * cost(f.from, f.to);
    return out;
}

}  // namespace mhist
