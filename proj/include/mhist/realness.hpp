#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mhist/histogram.hpp"
#include "mhist/template.hpp"
#include "mhist/transport.hpp"

namespace mhist {

/// z-score transform (value - offset) / scale.
struct FeatureNorm {
    double offset = 0.0;
    double scale = 1.0;

    double apply(double value) const { return (value - offset) / scale; }
    bool operator==(const FeatureNorm&) const = default;
};

enum class SideFeature { MeanIrd = 0, VarIrd = 1, BifurcationPct = 2 };

/// Trained test of realness.
struct ClassModel {
    BinSpec spec = BinSpec::default_2d();
    CostParams params;
    MinutiaeHistogram avg_real;
    MinutiaeHistogram avg_synth;
    /// Fused score s = w0 + w1*a + w2*b + w3*c + w4*d.
    std::array<double, 5> weights{0.0, 1.0, 0.0, 0.0, 0.0};
    /// Normalization of b (mean IRD), c (IRD variance), d (bifurcation percentage).
    std::array<FeatureNorm, 3> feature_norms{};

    void validate() const;
    bool operator==(const ClassModel&) const = default;
};

struct RealnessScore {
    double emd_real = 0.0;
    double emd_synth = 0.0;
    /// emd_synth - emd_real; positive leans real.
    double a = 0.0;
    std::optional<double> b;
    std::optional<double> c;
    std::optional<double> d;
    double fused = 0.0;
    Label decision = Label::Synthetic;
};

/// Raw side features of a 500 DPI template; absent values stay empty.
struct SideFeatures {
    std::optional<double> mean_ird;
    std::optional<double> var_ird;
    std::optional<double> pct_bif;
};

SideFeatures side_features(const MinutiaTemplate& t500);

/// Bin-wise arithmetic mean of normalized histograms sharing one spec.
MinutiaeHistogram average_histogram(std::span<const MinutiaeHistogram> hs);

/// Classification by the nearer class average. `fused` is set to `a`; ties are synthetic.
RealnessScore emd_difference_score(const MinutiaeHistogram& h, const ClassModel& model);
RealnessScore emd_difference_score(const MinutiaeHistogram& h, const ClassModel& model, const CostMatrix& cost);
/// Fixture form: decision from two already computed EMDs.
RealnessScore emd_difference_score(double emd_real, double emd_synth);

/// Linear fusion of the EMD difference with normalized side features; real iff fused > 0.
/// A side feature may be absent only when its weight is zero.
RealnessScore fuse_features(double a, const SideFeatures& raw, const ClassModel& model);

/// Full pipeline for one template: rescale, 2D histogram, EMDs, fusion.
RealnessScore classify(const MinutiaTemplate& t, const ClassModel& model);
RealnessScore classify(const MinutiaTemplate& t, const ClassModel& model, const CostMatrix& cost);

/// Model whose fused score is the negation of `model`'s: every decision with fused != 0 flips.
ClassModel inverted(const ClassModel& model);

/// Finger-index ranges of the three disjoint sets (inclusive bounds).
struct SplitConfig {
    int set1_first = 1, set1_last = 40;
    int set2_first = 41, set2_last = 70;
    int set3_first = 71, set3_last = 110;

    void validate() const;
};

struct DatasetSplit {
    std::vector<MinutiaTemplate> set1;
    std::vector<MinutiaTemplate> set2;
    std::vector<MinutiaTemplate> set3;
};

/// Partitions templates by numeric finger id; templates outside every range are dropped.
DatasetSplit split_by_finger(std::span<const MinutiaTemplate> templates, const SplitConfig& split);

/// Candidate values searched exhaustively; iteration order is lexicographic in
/// (r, s, e, w0, w1, w2, w3, w4) and the first best grid point wins.
struct TrainingGrid {
    std::vector<double> r{0.5, 1.0, 2.0};
    std::vector<double> s{0.5, 1.0, 2.0};
    std::vector<double> e{1.0, 2.0};
    std::vector<double> w0{-1.0, -0.5, 0.0, 0.5, 1.0};
    std::vector<double> w1{0.0, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> w2{-1.0, 0.0, 1.0};
    std::vector<double> w3{-1.0, 0.0, 1.0};
    std::vector<double> w4{-1.0, 0.0, 1.0};

    /// Weights grid that only uses the histogram term: w0 = 0, w1 = 1, side weights 0.
    static TrainingGrid histogram_only();
    void validate() const;
};

struct TrainResult {
    ClassModel model;
    double set2_accuracy = 0.0;
};

/// Averages from Set I, feature norms and grid search on Set II. Set III is never seen.
TrainResult train(std::span<const MinutiaTemplate> set1, std::span<const MinutiaTemplate> set2,
                  const TrainingGrid& grid = {}, const BinSpec& spec = BinSpec::default_2d());

struct EvaluationRow {
    std::string template_id;
    Label label = Label::Real;
    RealnessScore score;
};

struct EvaluationReport {
    std::vector<EvaluationRow> rows;
    double accuracy = 0.0;
    double real_accuracy = 0.0;
    double synth_accuracy = 0.0;
    std::size_t real_count = 0;
    std::size_t synth_count = 0;
};

/// Percent correct overall and per class on labeled templates.
EvaluationReport evaluate(const ClassModel& model, std::span<const MinutiaTemplate> test_set);

/// "<finger>_<impression>" or whatever identification the template carries.
std::string template_id(const MinutiaTemplate& t);

}  // namespace mhist
