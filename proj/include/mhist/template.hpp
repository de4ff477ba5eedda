#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mhist {

enum class MinutiaType { Ending, Bifurcation, Unknown };

enum class Label { Real, Synthetic };

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);

/// Reduces any finite angle into [0, 360).
double normalize_degrees(double degrees);

struct Minutia {
    double x = 0.0;
    double y = 0.0;
    /// Degrees, always in [0, 360).
    double direction = 0.0;
    MinutiaType type = MinutiaType::Unknown;

    bool operator==(const Minutia&) const = default;
};

/// Checked constructor: reduces the direction and rejects non-finite or negative coordinates.
Minutia make_minutia(double x, double y, double direction, MinutiaType type);

struct MinutiaTemplate {
    std::vector<Minutia> minutiae;
    int dpi = 500;
    std::optional<double> mean_ird;
    std::optional<double> var_ird;
    std::optional<Label> label;
    std::optional<std::string> finger_id;
    std::optional<std::string> impression_id;

    bool operator==(const MinutiaTemplate&) const = default;
};

/// Reads the line-oriented template format:
///
///     # comment
///     dpi 500
///     mean_ird 9.2
///     var_ird 3.1
///     label real
///     finger 12
///     impression 3
///     10 20 90 E
///
/// Header keywords may appear in any order before the first minutia line.
/// Tokens after the fourth field of a minutia line are ignored.
MinutiaTemplate parse_template(std::istream& in);
MinutiaTemplate parse_template(std::string_view text);

/// Writes a template such that parse_template(serialize_template(t)) == t.
std::string serialize_template(const MinutiaTemplate& t);

/// Non-fatal issues: interridge statistics outside the usual adult range at 500 DPI.
std::vector<std::string> validation_warnings(const MinutiaTemplate& t);

/// Demagnifies or magnifies a template to 500 DPI. Directions are untouched.
MinutiaTemplate rescale_to_500dpi(const MinutiaTemplate& t);

/// Percentage of bifurcations among typed minutiae; throws when no minutia is typed.
double bifurcation_percentage(const MinutiaTemplate& t);

}  // namespace mhist
