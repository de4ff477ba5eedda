#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mhist/analysis.hpp"
#include "mhist/template.hpp"

namespace mhist::testing {

// EMDs between average 2D histograms of twelve fingerprint databases, upper triangle as printed.
// A-C, E-G, I-K are real databases; D, H, L are synthetic.
inline DistanceMatrix database_average_emds() {
    static constexpr std::array<std::array<double, 12>, 12> upper{{
        {0, 0.02, 0.06, 1.11, 0.03, 0.03, 0.10, 0.68, 0.03, 0.05, 0.04, 0.44},
        {0, 0, 0.05, 1.11, 0.03, 0.04, 0.11, 0.68, 0.02, 0.05, 0.03, 0.43},
        {0, 0, 0, 1.10, 0.06, 0.08, 0.10, 0.68, 0.05, 0.03, 0.03, 0.44},
        {0, 0, 0, 0, 1.11, 1.11, 1.12, 0.58, 1.11, 1.11, 1.11, 0.81},
        {0, 0, 0, 0, 0, 0.03, 0.11, 0.68, 0.02, 0.06, 0.04, 0.44},
        {0, 0, 0, 0, 0, 0, 0.11, 0.68, 0.04, 0.07, 0.06, 0.44},
        {0, 0, 0, 0, 0, 0, 0, 0.71, 0.11, 0.08, 0.10, 0.48},
        {0, 0, 0, 0, 0, 0, 0, 0, 0.68, 0.69, 0.69, 0.29},
        {0, 0, 0, 0, 0, 0, 0, 0, 0, 0.05, 0.04, 0.43},
        {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.03, 0.45},
        {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.45},
        {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    }};
    DistanceMatrix dm;
    for (char c = 'A'; c <= 'L'; ++c) dm.labels.emplace_back(1, c);
    dm.d.assign(144, 0.0);
    for (int i = 0; i < 12; ++i) {
        for (int j = i + 1; j < 12; ++j) dm.d[i * 12 + j] = dm.d[j * 12 + i] = upper[i][j];
    }
    return dm;
}

inline bool is_synthetic_database(const std::string& label) { return label == "D" || label == "H" || label == "L"; }

/// Searches for a line strictly separating two planar point sets: every normal perpendicular to
/// a difference of two points, plus a fine angular sweep. Returns the margin of the best
/// separating direction found, or a non-positive value when none was found.
inline double separating_margin(const std::vector<std::pair<double, double>>& a,
                                const std::vector<std::pair<double, double>>& b) {
    std::vector<double> angles;
    for (int k = 0; k < 7200; ++k) angles.push_back(k * M_PI / 3600.0);
    std::vector<std::pair<double, double>> all = a;
    all.insert(all.end(), b.begin(), b.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            const double t = std::atan2(all[j].second - all[i].second, all[j].first - all[i].first) + M_PI / 2.0;
            for (double eps : {-1e-6, 0.0, 1e-6}) angles.push_back(t + eps);
        }
    }
    double best = -INFINITY;
    for (double t : angles) {
        const double ux = std::cos(t), uy = std::sin(t);
        double amax = -INFINITY, bmin = INFINITY;
        for (const auto& p : a) amax = std::max(amax, ux * p.first + uy * p.second);
        for (const auto& p : b) bmin = std::min(bmin, ux * p.first + uy * p.second);
        best = std::max(best, bmin - amax);
    }
    return best;
}

// Three minutiae on an equilateral triangle: all three pairs share one distance.
inline MinutiaTemplate triangle(double side, double rotation_deg, int finger, int impression, Label label) {
    MinutiaTemplate t;
    const double cx = 250.0, cy = 250.0, rad = side / std::sqrt(3.0);
    for (int k = 0; k < 3; ++k) {
        const double phi = (rotation_deg + 120.0 * k) * std::numbers::pi / 180.0;
        t.minutiae.push_back(make_minutia(cx + rad * std::cos(phi), cy + rad * std::sin(phi), 40.0 * k + impression, MinutiaType::Ending));
    }
    t.label = label;
    t.finger_id = std::to_string(finger);
    t.impression_id = std::to_string(impression);
    return t;
}

// Real pairs all at distance 30 (bin 1), synthetic pairs at 170 (bin 8).
inline std::vector<MinutiaTemplate> separable_dataset() {
    std::vector<MinutiaTemplate> out;
    for (int f = 1; f <= 110; ++f) {
        for (int i = 1; i <= 2; ++i) {
            out.push_back(triangle(30.0, 7.0 * f + i, f, i, Label::Real));
            out.push_back(triangle(170.0, 11.0 * f + i, f, i, Label::Synthetic));
        }
    }
    return out;
}

}  // namespace mhist::testing
