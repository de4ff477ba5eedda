// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mhist/analysis.hpp"
#include "mhist/histogram.hpp"
#include "mhist/identify.hpp"
#include "mhist/realness.hpp"
#include "mhist/refine.hpp"
#include "mhist/transport.hpp"
#include "support/fixtures.hpp"
#include "support/geometry.hpp"
#include "support/oracles.hpp"
#include "support/populations.hpp"

namespace mhist {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------------------------

Outcome solver_exactness() {
    Outcome o;
    const auto start = Clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> size(1, 4), mass(0, 100);
    std::uniform_real_distribution<double> cost(0.0, 10.0);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int m = size(rng), n = size(rng);
        std::vector<double> supply(m), demand(n);
        long total = 0;
        do {
            total = 0;
            for (auto& s : supply) total += static_cast<long>(s = mass(rng));
        } while (total == 0 || total > 100L * n);
        for (auto& d : demand) d = mass(rng);
        long dsum = std::accumulate(demand.begin(), demand.end(), 0L, [](long a, double b) { return a + static_cast<long>(b); });
        std::uniform_int_distribution<int> pick(0, n - 1);
        while (dsum != total) {
            const int j = pick(rng);
            if (dsum < total && demand[j] < 100) ++demand[j], ++dsum;
            if (dsum > total && demand[j] > 0) --demand[j], --dsum;
        }
        std::vector<double> c(static_cast<std::size_t>(m * n));
        // Half the instances use integer costs so that ties and degenerate vertices occur.
        for (auto& v : c) v = trial % 2 ? cost(rng) : std::floor(cost(rng));
        const double got = solve_transport(supply, demand, CostMatrix(m, n, c)).total_cost;
        const double want = testing::brute_force_transport({supply, demand, c});
        const double err = std::abs(got - want) / std::max(1.0, std::abs(want));
        worst = std::max(worst, err);
    }
    const double secs = seconds_since(start);
    o.detail << "500 instances, max relative error " << worst << ", " << secs << " s";
    o.require(worst <= 1e-9, "error above 1e-9");
    o.require(secs < 10.0, "runtime not below 10 s");
    return o;
}

Outcome metric_axioms() {
    Outcome o;
    std::mt19937_64 rng(1002);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto spec = BinSpec::default_2d();
    std::vector<MinutiaeHistogram> hs(200);
    for (auto& h : hs) {
        h.spec = spec;
        h.mass.resize(bin_count(spec, 2));
        for (auto& m : h.mass) m = u(rng);
        const double total = std::accumulate(h.mass.begin(), h.mass.end(), 0.0);
        for (auto& m : h.mass) m /= total;
        h.normalized = true;
        h.pair_count = 1;
    }
    const auto cost = build_cost_matrix(spec, CostParams{1.0, 1.0, 1.0});
    const std::size_t n = hs.size();
    std::vector<double> d(n * n, 0.0);
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            d[i * n + j] = emd(hs[i], hs[j], cost);
            d[j * n + i] = emd(hs[j], hs[i], cost);
            asym = std::max(asym, std::abs(d[i * n + j] - d[j * n + i]));
        }
    }
    double violation = 0.0;
    long triples = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                violation = std::max(violation, d[i * n + k] - d[i * n + j] - d[j * n + k]);
                ++triples;
            }
        }
    }
    o.detail << n << " histograms, max asymmetry " << asym << ", max triangle violation " << std::max(0.0, violation)
             << " over " << triples << " triples";
    o.require(asym <= 1e-9, "symmetry");
    o.require(violation <= 1e-7, "triangle inequality");
    return o;
}

Outcome invariance() {
    Outcome o;
    std::mt19937_64 rng(1003);
    std::uniform_real_distribution<double> angle(0.0, 360.0), shift(-60.0, 60.0);
    std::uniform_int_distribution<int> count(10, 40);
    int checked = 0, flagged = 0, changed = 0;
    for (int trial = 0; trial < 100; ++trial) {
        MinutiaTemplate t;
        const int n = count(rng);
        for (int k = 0; k < n; ++k) t.minutiae.push_back(testing::random_disc_minutia(rng, 120.0, 0.4));
        const auto moved = testing::rotate_translate(t, angle(rng), 250.0, 250.0, shift(rng), shift(rng));
        if (testing::has_feature_near_edge(t, BinSpec::default_2d(), 1e-9) ||
            testing::has_feature_near_edge(t, BinSpec::default_4d(), 1e-9)) {
            ++flagged;
            continue;
        }
        ++checked;
        if (!(build_2dmh(t) == build_2dmh(moved)) || !(build_4dmh(t) == build_4dmh(moved))) ++changed;
    }
    o.detail << checked << " templates compared bitwise, " << flagged << " flagged near a bin edge, " << changed
             << " changed";
    o.require(changed == 0, "histogram changed under a rigid motion");
    o.require(checked >= 90, "too many templates flagged");
    return o;
}

Outcome angle_folding() {
    Outcome o;
    const double a = fold_direction_difference(10.0, 350.0);
    const double b = fold_direction_difference(170.0, 190.0);
    const double c = fold_direction_difference(90.0, 270.0);
    o.detail << "(10,350)->" << a << " (170,190)->" << b << " (90,270)->" << c;
    o.require(a == 20.0 && b == 20.0 && c == 180.0, "folded values");
    return o;
}

Outcome decision_logic() {
    Outcome o;
    const auto first = emd_difference_score(0.66, 1.79);
    const auto second = emd_difference_score(1.69, 0.61);
    o.detail << "(0.66,1.79)->" << to_string(first.decision) << " score " << first.fused << ", (1.69,0.61)->"
             << to_string(second.decision) << " score " << second.fused;
    o.require(first.decision == Label::Real && second.decision == Label::Synthetic, "decisions");
    o.require(first.fused > 0.0 && second.fused < 0.0, "positive score means real");
    return o;
}

// ---------------------------------------------------------------------------------------------

struct ProtocolArtifacts {
    std::vector<MinutiaTemplate> real;
    ClassModel model;
};

std::vector<MinutiaTemplate> labeled_population(double radius, std::uint64_t seed, Label label) {
    testing::PopulationConfig cfg;
    cfg.radius = radius;
    cfg.seed = seed;
    cfg.label = label;
    return testing::generate_population(cfg);
}

/// Expected distance-bin index of the population's average 2D histogram.
double mean_distance_bin(const std::vector<MinutiaTemplate>& ts) {
    std::vector<MinutiaeHistogram> hs;
    for (const auto& t : ts) hs.push_back(build_2dmh(t));
    const auto avg = average_histogram(hs);
    double mean = 0.0;
    for (int x = 0; x < avg.spec.dist_bins; ++x) {
        for (int u = 0; u < avg.spec.dir_bins; ++u) mean += x * avg.mass[index_2d(avg.spec, x, u)];
    }
    return mean;
}

/// Set III accuracy of a histogram-only model trained on Sets I and II.
EvaluationReport protocol(const std::vector<MinutiaTemplate>& real, const std::vector<MinutiaTemplate>& synth,
                          ClassModel* model_out) {
    std::vector<MinutiaTemplate> all = real;
    all.insert(all.end(), synth.begin(), synth.end());
    const auto split = split_by_finger(all, SplitConfig{});
    const auto trained = train(split.set1, split.set2, TrainingGrid::histogram_only());
    if (model_out) *model_out = trained.model;
    return evaluate(trained.model, split.set3);
}

Outcome protocol_round_trip(ProtocolArtifacts& artifacts) {
    Outcome o;
    const auto start = Clock::now();
    const auto real = labeled_population(40.0, 601, Label::Real);
    const auto synth = labeled_population(100.0, 602, Label::Synthetic);
    const double gap = mean_distance_bin(synth) - mean_distance_bin(real);
    const auto separated = protocol(real, synth, &artifacts.model);
    artifacts.real = real;

    const auto same_a = labeled_population(45.0, 603, Label::Real);
    const auto same_b = labeled_population(45.0, 604, Label::Synthetic);
    const auto identical = protocol(same_a, same_b, nullptr);
    const double secs = seconds_since(start);

    o.detail << "separated (mean distance bins " << gap << " apart): Set III " << separated.accuracy << "% on "
             << separated.rows.size() << " templates; identical: " << identical.accuracy << "%; " << secs << " s";
    o.require(gap >= 2.0, "populations not 2 distance bins apart");
    o.require(separated.accuracy >= 95.0, "separated accuracy below 95%");
    o.require(std::abs(identical.accuracy - 50.0) <= 6.0, "identical accuracy outside 50 +- 6%");
    o.require(secs < 300.0, "runtime not below 5 min");
    return o;
}

// ---------------------------------------------------------------------------------------------

Outcome identification() {
    Outcome o;
    std::mt19937_64 rng(1007);
    std::uniform_int_distribution<int> count(2, 40);
    std::vector<MinutiaeHistogram> raw;
    for (int k = 0; k < 200; ++k) {
        MinutiaTemplate t;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) t.minutiae.push_back(testing::random_disc_minutia(rng, 100.0, 0.4));
        raw.push_back(build_4dmh(t));
    }
    bool symmetric = true, bounded = true, self = true;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        self = self && bis(raw[i], raw[i]) == raw[i].total();
        for (std::size_t j = i + 1; j < raw.size(); ++j) {
            const double ab = bis(raw[i], raw[j]), ba = bis(raw[j], raw[i]);
            symmetric = symmetric && ab == ba;
            bounded = bounded && ab >= 0.0 && ab <= std::min(raw[i].total(), raw[j].total());
        }
    }
    o.require(symmetric, "BIS symmetry");
    o.require(bounded, "BIS bounds");
    o.require(self, "self BIS equals total mass");

    testing::PopulationConfig cfg;
    cfg.fingers = 100;
    cfg.impressions = 1;
    cfg.seed = 1107;
    const auto gallery = testing::generate_population(cfg);
    GalleryIndex index;
    for (const auto& t : gallery) index.enroll(t);
    auto queries = gallery;
    for (auto& q : queries) q.impression_id = "duplicate";
    const auto report = access_rate_report(index, queries);
    o.require(report.rank1_percent == 100.0, "rank-1 below 100%");
    o.require(std::abs(report.mean_accessed_fraction - 0.01) <= 1e-12, "mean accessed fraction not 1/100");

    int increases = 0, trials = 0;
    for (const auto& q : gallery) {
        const auto full = build_4dmh(q);
        const double self_bis = bis(full, full);
        for (int rep = 0; rep < 5; ++rep) {
            auto cut = q;
            std::shuffle(cut.minutiae.begin(), cut.minutiae.end(), rng);
            const auto drop = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(q.minutiae.size())));
            cut.minutiae.resize(q.minutiae.size() - drop);
            if (bis(build_4dmh(cut), full) > self_bis) ++increases;
            ++trials;
        }
    }
    o.require(increases == 0, "deletion increased self-BIS");
    o.detail << "BIS symmetric/bounded on 200 histograms; duplicates: rank-1 " << report.rank1_percent
             << "%, mean accessed fraction " << report.mean_accessed_fraction << "; 20% deletion raised self-BIS in "
             << increases << "/" << trials << " trials";
    return o;
}

// ---------------------------------------------------------------------------------------------

RefineConfig closed_loop_config(const ProtocolArtifacts& a, double threshold) {
    RefineConfig rc;
    rc.target = a.model.avg_real;
    rc.params = a.model.params;
    rc.threshold = threshold;
    rc.max_iters = 500;
    // The finger region: the square bounding the real population's disc, whorl-like field.
    rc.foreground.x0 = rc.foreground.y0 = 205.0;
    rc.foreground.x1 = rc.foreground.y1 = 295.0;
    rc.field.kind = OrientationField::Kind::Radial;
    rc.field.cx = rc.field.cy = 250.0;
    rc.count_distribution.clear();
    for (const auto& t : a.real) rc.count_distribution.push_back(static_cast<int>(t.minutiae.size()));
    return rc;
}

Outcome refiner(const ProtocolArtifacts& a) {
    Outcome o;
    const auto start = Clock::now();
    const auto cost = build_cost_matrix(a.model.spec, a.model.params);

    std::vector<double> real_emds;
    for (const auto& t : a.real) real_emds.push_back(emd(build_2dmh(t), a.model.avg_real, cost));
    std::sort(real_emds.begin(), real_emds.end());
    const double threshold = lower_quantile(real_emds, 0.95);

    int monotone_runs = 0;
    long accepted = 0;
    double recompute_err = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto rc = closed_loop_config(a, 1e-6);
        rc.max_iters = 200;
        rc.rng_seed = seed;
        const auto r = refine(init_template(rc), rc);
        bool ok = r.trace.size() >= 1 && r.trace.front().move == "init";
        for (std::size_t k = 1; k < r.trace.size(); ++k) ok = ok && r.trace[k].emd < r.trace[k - 1].emd;
        accepted += static_cast<long>(r.trace.size()) - 1;
        recompute_err = std::max(recompute_err, std::abs(emd(build_2dmh(r.tmpl), rc.target, cost) - r.final_emd));
        if (ok) ++monotone_runs;
    }
    o.require(monotone_runs == 20, "EMD trace not strictly decreasing");
    o.require(recompute_err <= 1e-9, "final EMD does not match a fresh computation");

    const int runs = 50;
    int classified_real = 0, reached = 0;
    for (int k = 0; k < runs; ++k) {
        auto rc = closed_loop_config(a, threshold);
        rc.rng_seed = 5000 + static_cast<std::uint64_t>(k);
        const auto r = refine(init_template(rc), rc);
        if (r.status == RefineStatus::Success) ++reached;
        const auto typed = assign_types(r.tmpl, 0.409, rc.rng_seed);
        if (classify(typed, a.model).decision == Label::Real) ++classified_real;
    }
    const double share = 100.0 * classified_real / runs;
    o.detail << "20/20 seeded traces checked: " << monotone_runs << " strictly decreasing (" << accepted
             << " accepted moves); closed loop at threshold " << threshold << ": " << reached << "/" << runs
             << " reached it, " << share << "% classified real; " << seconds_since(start) << " s";
    o.require(share >= 90.0, "fewer than 90% of refined templates classified real");
    return o;
}

// ---------------------------------------------------------------------------------------------

double embedded_distance(const MdsResult& r, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < r.dims; ++k) s += (r.coord(i, k) - r.coord(j, k)) * (r.coord(i, k) - r.coord(j, k));
    return std::sqrt(s);
}

Outcome mds() {
    Outcome o;
    double err = 0.0;
    const DistanceMatrix triangle{{"a", "b", "c"}, {0, 1, 1, 1, 0, 1, 1, 1, 0}};
    const DistanceMatrix line{{"0", "1", "2"}, {0, 1, 2, 1, 0, 1, 2, 1, 0}};
    for (const auto* dm : {&triangle, &line}) {
        const auto r = mds_embed(*dm, 2);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) err = std::max(err, std::abs(embedded_distance(r, i, j) - dm->at(i, j)));
        }
    }
    const auto dm = testing::database_average_emds();
    const auto r = mds_embed(dm, 2);
    std::vector<std::pair<double, double>> real, synth;
    for (std::size_t i = 0; i < dm.size(); ++i) {
        (testing::is_synthetic_database(dm.labels[i]) ? synth : real).emplace_back(r.coord(i, 0), r.coord(i, 1));
    }
    const double margin = testing::separating_margin(real, synth);
    o.detail << "fixture max distance error " << err << "; {D,H,L} vs nine real databases separating margin " << margin;
    o.require(err <= 1e-9, "fixtures not reproduced");
    o.require(synth.size() == 3 && real.size() == 9 && margin > 0.0, "not linearly separable");
    return o;
}

Outcome bootstrap_coverage() {
    Outcome o;
    const double alpha = 0.1;
    testing::PopulationConfig cfg;
    cfg.impressions = 1;
    cfg.radius = 60.0;
    std::mt19937_64 rng(1010);
    const auto base = testing::generate_finger(rng, cfg);
    std::vector<MinutiaeHistogram> sample;
    for (int k = 0; k < 8; ++k) sample.push_back(build_2dmh(testing::generate_impression(base, rng, cfg)));
    const auto nb = bootstrap_neighborhood(sample, alpha, 1000, {}, 77, "fixture");
    const auto cost = build_cost_matrix(nb.mean.spec, CostParams{});
    int inside = 0;
    const int draws = 1000;
    for (int k = 0; k < draws; ++k) {
        if (emd(build_2dmh(testing::generate_impression(base, rng, cfg)), nb.mean, cost) <= nb.radius) ++inside;
    }
    const double coverage = static_cast<double>(inside) / draws;
    o.detail << "radius " << nb.radius << ", empirical coverage " << coverage << " over " << draws
             << " fresh impressions (need >= " << 1.0 - alpha - 0.05 << ")";
    o.require(coverage >= 1.0 - alpha - 0.05, "coverage too low");
    return o;
}

}  // namespace
}  // namespace mhist

int main() {
    using namespace mhist;
    ProtocolArtifacts artifacts;
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"solver exactness", solver_exactness},
        {"metric axioms", metric_axioms},
        {"rigid-motion invariance", invariance},
        {"angle folding", angle_folding},
        {"decision logic", decision_logic},
        {"protocol round trip", [&] { return protocol_round_trip(artifacts); }},
        {"identification properties", identification},
        {"refiner", [&] { return refiner(artifacts); }},
        {"MDS", mds},
        {"bootstrap coverage", bootstrap_coverage},
    };
    int failures = 0;
    int number = 0;
    for (const auto& [name, run] : criteria) {
        ++number;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        if (!o.pass) ++failures;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", number, name, o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", number - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
