#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mhist/histogram.hpp"
#include "mhist/template.hpp"
#include "mhist/transport.hpp"

namespace mhist {

/// Axis-aligned rectangle [x0, x1) x [y0, y1), optionally restricted by a 1 px mask whose
/// cell (i, j) covers [x0 + i, x0 + i + 1) x [y0 + j, y0 + j + 1).
struct Foreground {
    double x0 = 0.0, y0 = 0.0, x1 = 300.0, y1 = 400.0;
    int mask_width = 0;
    int mask_height = 0;
    /// Row-major, nonzero = foreground. Empty means the whole rectangle.
    std::vector<std::uint8_t> mask;

    bool contains(double x, double y) const;
    /// Uniform point on the foreground (rejection sampling against the mask).
    std::pair<double, double> sample(std::mt19937_64& rng) const;
    void validate() const;
};

/// Toy orientation fields: constant angle, or radial about a center. Values in [0, 180).
struct OrientationField {
    enum class Kind { Constant, Radial };
    Kind kind = Kind::Constant;
    double angle_deg = 0.0;
    double cx = 150.0, cy = 200.0;

    double at(double x, double y) const;
};

struct RefineConfig {
    /// Normalized 2D reference histogram; its spec drives histogram construction.
    MinutiaeHistogram target;
    CostParams params;
    double threshold = 0.1;
    int max_iters = 500;
    bool allow_add = true;
    bool allow_delete = true;
    bool allow_flip = true;
    /// Candidate moves scored per iteration.
    int batch_size = 16;
    /// Share of delete proposals drawn from minutiae involved in the costliest bins.
    double delete_bias = 0.5;
    std::uint64_t rng_seed = 1;
    Foreground foreground;
    OrientationField field;
    /// Minutiae counts to draw from uniformly.
    std::vector<int> count_distribution{40};

    void validate() const;
};

/// n from the count distribution, uniform positions on the foreground, directions along the
/// field or reversed with equal odds. Minutiae are untyped.
MinutiaTemplate init_template(const RefineConfig& cfg);

enum class RefineStatus { Success, Stall, Timeout };
std::string_view to_string(RefineStatus s);

struct TraceRow {
    int iteration = 0;
    double emd = 0.0;
    /// "init", "add", "delete" or "flip".
    std::string move;
    /// Index of the affected minutia before the move; -1 for init/add.
    int index = -1;
};

struct RefineResult {
    MinutiaTemplate tmpl;
    std::vector<TraceRow> trace;
    RefineStatus status = RefineStatus::Stall;
    int iterations = 0;
    double final_emd = 0.0;
};

/// Greedy best-of-batch hill climbing on EMD(2D-MH(t), target); only strictly improving
/// moves are accepted. Stops on emd <= threshold, a batch without improvement, or max_iters.
RefineResult refine(const MinutiaTemplate& t, const RefineConfig& cfg);

/// Each minutia becomes a bifurcation with probability p, otherwise an ending.
MinutiaTemplate assign_types(const MinutiaTemplate& t, double p_bif, std::uint64_t seed);

}  // namespace mhist
