#include "mhist/realness.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include "mhist/error.hpp"

namespace mhist {

namespace {

struct Sample {
    MinutiaeHistogram hist;
    SideFeatures features;
    Label label;
};

Label require_label(const MinutiaTemplate& t) {
    if (!t.label) throw std::invalid_argument("template " + template_id(t) + " has no real/synthetic label");
    return *t.label;
}

MinutiaeHistogram template_histogram(const MinutiaTemplate& t500, const BinSpec& spec) {
    auto h = build_2dmh(t500, spec, true);
    if (h.pair_count == 0) {
        throw std::invalid_argument("template " + template_id(t500) + " has no minutiae pair within d_max");
    }
    return h;
}

std::optional<double> feature_value(const SideFeatures& f, int k) {
    switch (k) {
        case 0: return f.mean_ird;
        case 1: return f.var_ird;
        default: return f.pct_bif;
    }
}

int finger_number(const MinutiaTemplate& t) {
    if (!t.finger_id) throw std::invalid_argument("template without finger id cannot be split");
    int v = 0;
    const auto& s = *t.finger_id;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument("finger id '" + s + "' is not a finger index");
    }
    return v;
}

void require_nonempty(const std::vector<double>& v, const char* name) {
    if (v.empty()) throw std::invalid_argument(std::string("training grid '") + name + "' is empty");
}

}  // namespace

void ClassModel::validate() const {
    spec.validate();
    params.validate();
    for (const auto* h : {&avg_real, &avg_synth}) {
        if (!h->normalized || h->dims != 2 || !(h->spec == spec) || h->mass.size() != bin_count(spec, 2)) {
            throw std::invalid_argument("class averages must be normalized 2D histograms of the model spec");
        }
    }
    for (const auto& n : feature_norms) {
        if (!(n.scale > 0.0) || !std::isfinite(n.scale) || !std::isfinite(n.offset)) {
            throw std::invalid_argument("feature normalization scales must be positive");
        }
    }
    for (double w : weights) {
        if (!std::isfinite(w)) throw std::invalid_argument("fusion weights must be finite");
    }
}

SideFeatures side_features(const MinutiaTemplate& t500) {
    SideFeatures f;
    f.mean_ird = t500.mean_ird;
    f.var_ird = t500.var_ird;
    for (const auto& m : t500.minutiae) {
        if (m.type != MinutiaType::Unknown) {
            f.pct_bif = bifurcation_percentage(t500);
            break;
        }
    }
    return f;
}

MinutiaeHistogram average_histogram(std::span<const MinutiaeHistogram> hs) {
    if (hs.empty()) throw std::invalid_argument("cannot average an empty list of histograms");
    MinutiaeHistogram avg;
    avg.spec = hs.front().spec;
    avg.dims = hs.front().dims;
    avg.mass.assign(hs.front().mass.size(), 0.0);
    avg.normalized = true;
    for (const auto& h : hs) {
        if (!(h.spec == avg.spec) || h.dims != avg.dims) throw std::invalid_argument("cannot average histograms of mixed specs");
        if (!h.normalized) throw std::invalid_argument("only normalized histograms can be averaged");
        for (std::size_t i = 0; i < h.mass.size(); ++i) avg.mass[i] += h.mass[i];
        avg.pair_count += h.pair_count;
    }
    const double n = static_cast<double>(hs.size());
    for (auto& m : avg.mass) m /= n;
    return avg;
}

RealnessScore emd_difference_score(double emd_real, double emd_synth) {
    RealnessScore s;
    s.emd_real = emd_real;
    s.emd_synth = emd_synth;
    s.a = emd_synth - emd_real;
    s.fused = s.a;
    s.decision = emd_real < emd_synth ? Label::Real : Label::Synthetic;
    return s;
}

RealnessScore emd_difference_score(const MinutiaeHistogram& h, const ClassModel& model, const CostMatrix& cost) {
    if (!(h.spec == model.spec) || h.dims != 2) throw std::invalid_argument("histogram spec does not match the model");
    if (!h.normalized) throw std::invalid_argument("realness scoring needs a normalized histogram");
    return emd_difference_score(emd(h, model.avg_real, cost), emd(h, model.avg_synth, cost));
}

RealnessScore emd_difference_score(const MinutiaeHistogram& h, const ClassModel& model) {
    return emd_difference_score(h, model, build_cost_matrix(model.spec, model.params));
}

RealnessScore fuse_features(double a, const SideFeatures& raw, const ClassModel& model) {
    RealnessScore s;
    s.a = a;
    double fused = model.weights[0] + model.weights[1] * a;
    std::array<std::optional<double>*, 3> slots{&s.b, &s.c, &s.d};
    static constexpr const char* names[] = {"mean interridge distance", "interridge variance", "bifurcation percentage"};
    for (int k = 0; k < 3; ++k) {
        const auto value = feature_value(raw, k);
        if (value) *slots[k] = model.feature_norms[k].apply(*value);
        const double w = model.weights[k + 2];
        if (w == 0.0) continue;
        if (!value) throw std::invalid_argument(std::string("missing side feature: ") + names[k]);
        if (!std::isfinite(*value)) throw std::invalid_argument(std::string("non-finite side feature: ") + names[k]);
        fused += w * **slots[k];
    }
    s.fused = fused;
    s.decision = fused > 0.0 ? Label::Real : Label::Synthetic;
    return s;
}

RealnessScore classify(const MinutiaTemplate& t, const ClassModel& model, const CostMatrix& cost) {
    const auto t500 = rescale_to_500dpi(t);
    const auto h = template_histogram(t500, model.spec);
    const auto emds = emd_difference_score(h, model, cost);
    auto s = fuse_features(emds.a, side_features(t500), model);
    s.emd_real = emds.emd_real;
    s.emd_synth = emds.emd_synth;
    return s;
}

RealnessScore classify(const MinutiaTemplate& t, const ClassModel& model) {
    return classify(t, model, build_cost_matrix(model.spec, model.params));
}

ClassModel inverted(const ClassModel& model) {
    ClassModel out = model;
    for (auto& w : out.weights) w = -w;
    return out;
}

void SplitConfig::validate() const {
    const std::array<std::pair<int, int>, 3> ranges{{{set1_first, set1_last}, {set2_first, set2_last}, {set3_first, set3_last}}};
    for (const auto& [a, b] : ranges) {
        if (a > b) throw std::invalid_argument("split range has first > last");
    }
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        for (std::size_t j = i + 1; j < ranges.size(); ++j) {
            if (ranges[i].first <= ranges[j].second && ranges[j].first <= ranges[i].second) {
                throw std::invalid_argument("split ranges overlap");
            }
        }
    }
}

DatasetSplit split_by_finger(std::span<const MinutiaTemplate> templates, const SplitConfig& split) {
    split.validate();
    DatasetSplit out;
    for (const auto& t : templates) {
        const int f = finger_number(t);
        if (f >= split.set1_first && f <= split.set1_last) out.set1.push_back(t);
        else if (f >= split.set2_first && f <= split.set2_last) out.set2.push_back(t);
        else if (f >= split.set3_first && f <= split.set3_last) out.set3.push_back(t);
    }
    return out;
}

TrainingGrid TrainingGrid::histogram_only() {
    TrainingGrid g;
    g.w0 = {0.0};
    g.w1 = {1.0};
    g.w2 = g.w3 = g.w4 = {0.0};
    return g;
}

void TrainingGrid::validate() const {
    require_nonempty(r, "r");
    require_nonempty(s, "s");
    require_nonempty(e, "e");
    require_nonempty(w0, "w0");
    require_nonempty(w1, "w1");
    require_nonempty(w2, "w2");
    require_nonempty(w3, "w3");
    require_nonempty(w4, "w4");
    for (const auto* axis : {&r, &s, &e}) {
        for (double v : *axis) {
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("cost grid values must be positive");
        }
    }
}

TrainResult train(std::span<const MinutiaTemplate> set1, std::span<const MinutiaTemplate> set2,
                  const TrainingGrid& grid, const BinSpec& spec) {
    grid.validate();
    spec.validate();

    std::vector<MinutiaeHistogram> real1, synth1;
    for (const auto& t : set1) {
        const auto label = require_label(t);
        auto h = template_histogram(rescale_to_500dpi(t), spec);
        (label == Label::Real ? real1 : synth1).push_back(std::move(h));
    }
    if (real1.empty()) throw ClassEmpty("no real templates in Set I");
    if (synth1.empty()) throw ClassEmpty("no synthetic templates in Set I");

    std::vector<Sample> samples;
    std::size_t real2 = 0;
    for (const auto& t : set2) {
        const auto label = require_label(t);
        const auto t500 = rescale_to_500dpi(t);
        samples.push_back({template_histogram(t500, spec), side_features(t500), label});
        if (label == Label::Real) ++real2;
    }
    if (real2 == 0) throw ClassEmpty("no real templates in Set II");
    if (real2 == samples.size()) throw ClassEmpty("no synthetic templates in Set II");

    ClassModel model;
    model.spec = spec;
    model.avg_real = average_histogram(real1);
    model.avg_synth = average_histogram(synth1);

    // z-score each side feature over Set II; a feature missing anywhere is disabled.
    std::array<bool, 3> available{};
    const std::size_t n = samples.size();
    std::array<std::vector<double>, 3> normalized_features;
    for (int k = 0; k < 3; ++k) {
        available[k] = true;
        double sum = 0.0, sq = 0.0;
        for (const auto& smp : samples) {
            const auto v = feature_value(smp.features, k);
            if (!v) {
                available[k] = false;
                break;
            }
            sum += *v;
            sq += *v * *v;
        }
        FeatureNorm norm;
        if (available[k]) {
            const double mean = sum / n;
            const double var = std::max(0.0, sq / n - mean * mean);
            norm.offset = mean;
            norm.scale = var > 0.0 ? std::sqrt(var) : 1.0;
        }
        model.feature_norms[k] = norm;
        normalized_features[k].resize(n, 0.0);
        if (available[k]) {
            for (std::size_t i = 0; i < n; ++i) normalized_features[k][i] = norm.apply(*feature_value(samples[i].features, k));
        }
    }
    const std::vector<double> zero{0.0};
    const auto& g2 = available[0] ? grid.w2 : zero;
    const auto& g3 = available[1] ? grid.w3 : zero;
    const auto& g4 = available[2] ? grid.w4 : zero;

    std::vector<char> is_real(n);
    for (std::size_t i = 0; i < n; ++i) is_real[i] = samples[i].label == Label::Real;

    long best_correct = -1;
    std::vector<double> a(n);
    for (double r : grid.r) {
        for (double s : grid.s) {
            for (double e : grid.e) {
                const CostParams params{r, s, e};
                const auto cost = build_cost_matrix(spec, params);
                for (std::size_t i = 0; i < n; ++i) {
                    a[i] = emd(samples[i].hist, model.avg_synth, cost) - emd(samples[i].hist, model.avg_real, cost);
                }
                for (double w0 : grid.w0) {
                    for (double w1 : grid.w1) {
                        for (double w2 : g2) {
                            for (double w3 : g3) {
                                for (double w4 : g4) {
                                    long correct = 0;
                                    for (std::size_t i = 0; i < n; ++i) {
                                        const double fused = w0 + w1 * a[i] + w2 * normalized_features[0][i] +
                                                             w3 * normalized_features[1][i] + w4 * normalized_features[2][i];
                                        correct += (fused > 0.0) == static_cast<bool>(is_real[i]);
                                    }
                                    if (correct > best_correct) {
                                        best_correct = correct;
                                        model.params = params;
                                        model.weights = {w0, w1, w2, w3, w4};
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    TrainResult result;
    result.model = std::move(model);
    result.set2_accuracy = 100.0 * static_cast<double>(best_correct) / static_cast<double>(n);
    return result;
}

EvaluationReport evaluate(const ClassModel& model, std::span<const MinutiaTemplate> test_set) {
    if (test_set.empty()) throw std::invalid_argument("empty test set");
    model.validate();
    const auto cost = build_cost_matrix(model.spec, model.params);
    EvaluationReport report;
    std::size_t real_ok = 0, synth_ok = 0;
    for (const auto& t : test_set) {
        EvaluationRow row;
        row.template_id = template_id(t);
        row.label = require_label(t);
        row.score = classify(t, model, cost);
        const bool ok = row.score.decision == row.label;
        if (row.label == Label::Real) {
            ++report.real_count;
            real_ok += ok;
        } else {
            ++report.synth_count;
            synth_ok += ok;
        }
        report.rows.push_back(std::move(row));
    }
    auto pct = [](std::size_t k, std::size_t n) { return n == 0 ? 0.0 : 100.0 * static_cast<double>(k) / static_cast<double>(n); };
    report.accuracy = pct(real_ok + synth_ok, test_set.size());
    report.real_accuracy = pct(real_ok, report.real_count);
    report.synth_accuracy = pct(synth_ok, report.synth_count);
    return report;
}

std::string template_id(const MinutiaTemplate& t) {
    if (t.finger_id && t.impression_id) return *t.finger_id + "_" + *t.impression_id;
    if (t.finger_id) return *t.finger_id;
    if (t.impression_id) return *t.impression_id;
    return "?";
}

}  // namespace mhist
