#include "mhist/refine.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mhist {

namespace {

enum class Move { Add, Delete, Flip };

// Separate streams for initialization and refinement from one user seed.
std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

struct Candidate {
    Move move = Move::Add;
    int index = -1;
    Minutia added;
};

// Raw 2D counts kept in sync with the minutiae list.
struct PairCounts {
    std::vector<double> counts;
    std::int64_t pairs = 0;

    void account(const std::vector<Minutia>& ms, const Minutia& m, int skip, const BinSpec& spec, double sign) {
        for (int j = 0; j < static_cast<int>(ms.size()); ++j) {
            if (j == skip) continue;
            const long bin = pair_bin_2d(m, ms[j], spec);
            if (bin < 0) continue;
            counts[static_cast<std::size_t>(bin)] += sign;
            pairs += sign > 0 ? 1 : -1;
        }
    }

    MinutiaeHistogram histogram(const BinSpec& spec) const {
        MinutiaeHistogram h;
        h.spec = spec;
        h.dims = 2;
        h.mass.resize(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) h.mass[i] = counts[i] / static_cast<double>(pairs);
        h.normalized = true;
        h.pair_count = pairs;
        return h;
    }
};

PairCounts count_pairs(const std::vector<Minutia>& ms, const BinSpec& spec) {
    PairCounts pc;
    pc.counts.assign(bin_count(spec, 2), 0.0);
    for (std::size_t i = 0; i < ms.size(); ++i) {
        for (std::size_t j = i + 1; j < ms.size(); ++j) {
            const long bin = pair_bin_2d(ms[i], ms[j], spec);
            if (bin < 0) continue;
            pc.counts[static_cast<std::size_t>(bin)] += 1.0;
            ++pc.pairs;
        }
    }
    return pc;
}

PairCounts apply(const PairCounts& base, const std::vector<Minutia>& ms, const Candidate& c, const BinSpec& spec) {
    PairCounts next = base;
    switch (c.move) {
        case Move::Add:
            next.account(ms, c.added, -1, spec, 1.0);
            break;
        case Move::Delete:
            next.account(ms, ms[c.index], c.index, spec, -1.0);
            break;
        case Move::Flip: {
            auto flipped = ms[c.index];
            flipped.direction = normalize_degrees(flipped.direction + 180.0);
            next.account(ms, ms[c.index], c.index, spec, -1.0);
            next.account(ms, flipped, c.index, spec, 1.0);
            break;
        }
    }
    return next;
}

void commit(std::vector<Minutia>& ms, const Candidate& c) {
    switch (c.move) {
        case Move::Add:
            ms.push_back(c.added);
            break;
        case Move::Delete:
            ms.erase(ms.begin() + c.index);
            break;
        case Move::Flip:
            ms[c.index].direction = normalize_degrees(ms[c.index].direction + 180.0);
            break;
    }
}

const char* move_name(Move m) {
    switch (m) {
        case Move::Add: return "add";
        case Move::Delete: return "delete";
        case Move::Flip: return "flip";
    }
    return "?";
}

Minutia random_minutia(const RefineConfig& cfg, std::mt19937_64& rng) {
    const auto [x, y] = cfg.foreground.sample(rng);
    std::bernoulli_distribution reverse(0.5);
    const double dir = cfg.field.at(x, y) + (reverse(rng) ? 180.0 : 0.0);
    return make_minutia(x, y, dir, MinutiaType::Unknown);
}

// Per-minutia weight: summed transport cost per pair of the bins its pairs fall into.
std::vector<double> deletion_weights(const std::vector<Minutia>& ms, const PairCounts& pc,
                                     const std::vector<double>& contributions, const BinSpec& spec) {
    std::vector<double> w(ms.size(), 0.0);
    for (std::size_t i = 0; i < ms.size(); ++i) {
        for (std::size_t j = i + 1; j < ms.size(); ++j) {
            const long bin = pair_bin_2d(ms[i], ms[j], spec);
            if (bin < 0) continue;
            const auto b = static_cast<std::size_t>(bin);
            const double per_pair = contributions[b] / pc.counts[b];
            w[i] += per_pair;
            w[j] += per_pair;
        }
    }
    return w;
}

}  // namespace

bool Foreground::contains(double x, double y) const {
    if (!(x >= x0 && x < x1 && y >= y0 && y < y1)) return false;
    if (mask.empty()) return true;
    const auto i = static_cast<int>(std::floor(x - x0));
    const auto j = static_cast<int>(std::floor(y - y0));
    if (i < 0 || j < 0 || i >= mask_width || j >= mask_height) return false;
    return mask[static_cast<std::size_t>(j) * mask_width + i] != 0;
}

std::pair<double, double> Foreground::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
    for (int attempt = 0; attempt < 1000000; ++attempt) {
        const double x = ux(rng), y = uy(rng);
        if (contains(x, y)) return {x, y};
    }
    throw std::runtime_error("foreground mask too sparse to sample");
}

void Foreground::validate() const {
    if (!(x0 >= 0.0 && y0 >= 0.0 && x1 > x0 && y1 > y0) || !std::isfinite(x1) || !std::isfinite(y1)) {
        throw std::invalid_argument("foreground rectangle must be non-empty with non-negative corners");
    }
    if (!mask.empty()) {
        if (mask_width <= 0 || mask_height <= 0 || mask.size() != static_cast<std::size_t>(mask_width) * mask_height) {
            throw std::invalid_argument("foreground mask size does not match its dimensions");
        }
        bool any = false;
        for (auto v : mask) any = any || v != 0;
        if (!any) throw std::invalid_argument("foreground mask is empty");
    }
}

double OrientationField::at(double x, double y) const {
    if (kind == Kind::Constant) return std::fmod(normalize_degrees(angle_deg), 180.0);
    if (x == cx && y == cy) return 0.0;
    const double a = std::atan2(y - cy, x - cx) * 180.0 / std::numbers::pi;
    return std::fmod(normalize_degrees(a), 180.0);
}

void RefineConfig::validate() const {
    if (!(threshold > 0.0) || !std::isfinite(threshold)) throw std::invalid_argument("threshold must be positive");
    if (max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
    if (!allow_add && !allow_delete && !allow_flip) throw std::invalid_argument("at least one move must be enabled");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (!(delete_bias >= 0.0 && delete_bias <= 1.0)) throw std::invalid_argument("delete_bias must be in [0, 1]");
    if (count_distribution.empty()) throw std::invalid_argument("count distribution is empty");
    if (target.dims != 2 || !target.normalized || target.mass.size() != bin_count(target.spec, 2) ||
        std::abs(target.total() - 1.0) > 1e-9) {
        throw std::invalid_argument("refine target must be a normalized 2D histogram with unit mass");
    }
    params.validate();
    foreground.validate();
}

MinutiaTemplate init_template(const RefineConfig& cfg) {
    cfg.validate();
    auto rng = seeded(cfg.rng_seed, 0);
    std::uniform_int_distribution<std::size_t> pick(0, cfg.count_distribution.size() - 1);
    const int n = cfg.count_distribution[pick(rng)];
    if (n < 2) throw std::invalid_argument("initial template needs at least 2 minutiae");
    MinutiaTemplate t;
    t.label = Label::Synthetic;
    for (int k = 0; k < n; ++k) t.minutiae.push_back(random_minutia(cfg, rng));
    return t;
}

std::string_view to_string(RefineStatus s) {
    switch (s) {
        case RefineStatus::Success: return "success";
        case RefineStatus::Stall: return "stall";
        case RefineStatus::Timeout: return "timeout";
    }
    return "?";
}

RefineResult refine(const MinutiaTemplate& t, const RefineConfig& cfg) {
    cfg.validate();
    if (t.minutiae.size() < 2) throw std::invalid_argument("refine needs at least 2 minutiae");
    const BinSpec& spec = cfg.target.spec;
    const auto cost = build_cost_matrix(spec, cfg.params);
    auto rng = seeded(cfg.rng_seed, 1);

    RefineResult result;
    result.tmpl = rescale_to_500dpi(t);
    auto& ms = result.tmpl.minutiae;
    PairCounts pc = count_pairs(ms, spec);
    const double inf = std::numeric_limits<double>::infinity();
    auto score = [&](const PairCounts& c) { return c.pairs > 0 ? emd(c.histogram(spec), cfg.target, cost) : inf; };

    double current = score(pc);
    result.trace.push_back({0, current, "init", -1});
    result.final_emd = current;
    if (current <= cfg.threshold) {
        result.status = RefineStatus::Success;
        return result;
    }

    std::vector<Move> moves;
    if (cfg.allow_add) moves.push_back(Move::Add);
    if (cfg.allow_delete) moves.push_back(Move::Delete);
    if (cfg.allow_flip) moves.push_back(Move::Flip);

    result.status = RefineStatus::Timeout;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        std::vector<Move> usable;
        for (Move m : moves) {
            if (m == Move::Delete && ms.size() <= 2) continue;
            usable.push_back(m);
        }
        if (usable.empty()) {
            result.status = RefineStatus::Stall;
            break;
        }

        std::discrete_distribution<int> biased_delete;
        bool have_bias = false;
        if (cfg.allow_delete && cfg.delete_bias > 0.0 && pc.pairs > 0 && ms.size() > 2) {
            const auto plan = emd_plan(pc.histogram(spec), cfg.target, cost);
            const auto w = deletion_weights(ms, pc, source_cost_contributions(plan, cost), spec);
            double sum = 0.0;
            for (double v : w) sum += v;
            if (sum > 0.0) {
                biased_delete = std::discrete_distribution<int>(w.begin(), w.end());
                have_bias = true;
            }
        }

        std::uniform_int_distribution<std::size_t> pick_move(0, usable.size() - 1);
        std::uniform_int_distribution<int> pick_index(0, static_cast<int>(ms.size()) - 1);
        std::bernoulli_distribution use_bias(cfg.delete_bias);
        Candidate best;
        best.move = Move::Add;
        double best_emd = inf;
        bool found = false;
        for (int b = 0; b < cfg.batch_size; ++b) {
            Candidate c;
            c.move = usable[pick_move(rng)];
            if (c.move == Move::Add) {
                c.added = random_minutia(cfg, rng);
            } else if (c.move == Move::Delete && have_bias && use_bias(rng)) {
                c.index = biased_delete(rng);
            } else {
                c.index = pick_index(rng);
            }
            const double e = score(apply(pc, ms, c, spec));
            if (e < best_emd) {
                best_emd = e;
                best = c;
                found = true;
            }
        }
        if (!found || !(best_emd < current)) {
            result.status = RefineStatus::Stall;
            break;
        }
        pc = apply(pc, ms, best, spec);
        commit(ms, best);
        current = best_emd;
        result.iterations = iter;
        result.trace.push_back({iter, current, move_name(best.move), best.index});
        if (current <= cfg.threshold) {
            result.status = RefineStatus::Success;
            break;
        }
    }
    result.final_emd = current;
    return result;
}

MinutiaTemplate assign_types(const MinutiaTemplate& t, double p_bif, std::uint64_t seed) {
    if (!(p_bif >= 0.0 && p_bif <= 1.0)) throw std::invalid_argument("bifurcation probability must be in [0, 1]");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution bif(p_bif);
    MinutiaTemplate out = t;
    for (auto& m : out.minutiae) m.type = bif(rng) ? MinutiaType::Bifurcation : MinutiaType::Ending;
    return out;
}

}  // namespace mhist
