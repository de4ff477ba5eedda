#include "mhist/template.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mhist/error.hpp"

namespace mhist {

namespace {

constexpr double kReferenceDpi = 500.0;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_real(std::string_view token, std::size_t line, const char* field) {
    double value = 0.0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ParseError(line, std::string("non-numeric ") + field + " '" + std::string(token) + "'");
    }
    return value;
}

int parse_int(std::string_view token, std::size_t line, const char* field) {
    int value = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ParseError(line, std::string("non-integer ") + field + " '" + std::string(token) + "'");
    }
    return value;
}

MinutiaType parse_type(std::string_view token, std::size_t line) {
    if (token == "E") return MinutiaType::Ending;
    if (token == "B") return MinutiaType::Bifurcation;
    if (token == "U") return MinutiaType::Unknown;
    throw ParseError(line, "unknown minutia type '" + std::string(token) + "'");
}

char type_code(MinutiaType t) {
    switch (t) {
        case MinutiaType::Ending: return 'E';
        case MinutiaType::Bifurcation: return 'B';
        case MinutiaType::Unknown: break;
    }
    return 'U';
}

void append_real(std::string& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

bool is_header_key(std::string_view key) {
    return key == "dpi" || key == "mean_ird" || key == "var_ird" || key == "label" ||
           key == "finger" || key == "impression";
}

}  // namespace

std::string_view to_string(Label label) {
    return label == Label::Real ? "real" : "synthetic";
}

Label label_from_string(std::string_view text) {
    if (text == "real") return Label::Real;
    if (text == "synthetic") return Label::Synthetic;
    throw std::invalid_argument("unknown label '" + std::string(text) + "'");
}

double normalize_degrees(double degrees) {
    double r = std::fmod(degrees, 360.0);
    if (r < 0.0) r += 360.0;
    // fmod of a tiny negative value can round up to exactly 360
    if (r >= 360.0) r = 0.0;
    return r;
}

Minutia make_minutia(double x, double y, double direction, MinutiaType type) {
    if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || y < 0.0) {
        throw std::invalid_argument("minutia coordinates must be finite and non-negative");
    }
    if (!std::isfinite(direction)) {
        throw std::invalid_argument("minutia direction must be finite");
    }
    return Minutia{x, y, normalize_degrees(direction), type};
}

MinutiaTemplate parse_template(std::istream& in) {
    MinutiaTemplate t;
    bool have_dpi = false;
    bool in_minutiae = false;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = trim(raw);
        if (text.empty() || text.front() == '#') continue;
        const auto tokens = split_ws(text);
        const auto key = tokens.front();

        if (is_header_key(key)) {
            if (in_minutiae) throw ParseError(line, "header '" + std::string(key) + "' after minutiae");
            if (tokens.size() < 2) throw ParseError(line, "malformed header '" + std::string(key) + "'");
            const auto value = tokens[1];
            if (key == "dpi") {
                t.dpi = parse_int(value, line, "dpi");
                if (t.dpi <= 0) throw ParseError(line, "dpi must be positive");
                have_dpi = true;
            } else if (key == "mean_ird") {
                const double v = parse_real(value, line, "mean_ird");
                if (!std::isfinite(v) || v <= 0.0) throw ParseError(line, "mean_ird must be positive");
                t.mean_ird = v;
            } else if (key == "var_ird") {
                const double v = parse_real(value, line, "var_ird");
                if (!std::isfinite(v) || v < 0.0) throw ParseError(line, "var_ird must be non-negative");
                t.var_ird = v;
            } else if (key == "label") {
                try {
                    t.label = label_from_string(value);
                } catch (const std::invalid_argument& e) {
                    throw ParseError(line, e.what());
                }
            } else if (key == "finger") {
                t.finger_id = std::string(value);
            } else {
                t.impression_id = std::string(value);
            }
            continue;
        }

        if (!have_dpi) throw ParseError(line, "malformed header: missing 'dpi' before minutiae");
        in_minutiae = true;
        if (tokens.size() < 4) throw ParseError(line, "minutia line needs 'x y direction type'");
        const double x = parse_real(tokens[0], line, "x");
        const double y = parse_real(tokens[1], line, "y");
        const double dir = parse_real(tokens[2], line, "direction");
        const auto type = parse_type(tokens[3], line);
        if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || y < 0.0) {
            throw ParseError(line, "coordinates must be finite and non-negative");
        }
        const double reduced = std::isfinite(dir) ? normalize_degrees(dir) : std::nan("");
        if (std::isnan(reduced)) throw ParseError(line, "direction is not a finite angle");
        t.minutiae.push_back(Minutia{x, y, reduced, type});
    }
    if (!have_dpi) throw ParseError(line, "malformed header: missing 'dpi'");
    return t;
}

MinutiaTemplate parse_template(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_template(in);
}

std::string serialize_template(const MinutiaTemplate& t) {
    std::string out;
    out += "dpi " + std::to_string(t.dpi) + "\n";
    if (t.mean_ird) {
        out += "mean_ird ";
        append_real(out, *t.mean_ird);
        out += '\n';
    }
    if (t.var_ird) {
        out += "var_ird ";
        append_real(out, *t.var_ird);
        out += '\n';
    }
    if (t.label) out += "label " + std::string(to_string(*t.label)) + "\n";
    if (t.finger_id) out += "finger " + *t.finger_id + "\n";
    if (t.impression_id) out += "impression " + *t.impression_id + "\n";
    for (const auto& m : t.minutiae) {
        append_real(out, m.x);
        out += ' ';
        append_real(out, m.y);
        out += ' ';
        append_real(out, m.direction);
        out += ' ';
        out += type_code(m.type);
        out += '\n';
    }
    return out;
}

std::vector<std::string> validation_warnings(const MinutiaTemplate& t) {
    std::vector<std::string> warnings;
    if (t.mean_ird && t.var_ird && t.dpi > 0) {
        const double scaled = *t.mean_ird * kReferenceDpi / t.dpi;
        if (scaled < 3.0 || scaled > 25.0) {
            warnings.push_back("mean interridge distance " + std::to_string(scaled) +
                               " px at 500 DPI is outside [3, 25]");
        }
    }
    return warnings;
}

MinutiaTemplate rescale_to_500dpi(const MinutiaTemplate& t) {
    if (t.dpi <= 0) throw std::invalid_argument("dpi must be positive");
    if (t.dpi == 500) return t;
    // Multiply before dividing so that e.g. 569 px at 569 DPI maps to exactly 500 px.
    const double dpi = static_cast<double>(t.dpi);
    MinutiaTemplate out = t;
    for (auto& m : out.minutiae) {
        m.x = m.x * kReferenceDpi / dpi;
        m.y = m.y * kReferenceDpi / dpi;
    }
    if (out.mean_ird) *out.mean_ird = *out.mean_ird * kReferenceDpi / dpi;
    if (out.var_ird) *out.var_ird = *out.var_ird * (kReferenceDpi * kReferenceDpi) / (dpi * dpi);
    out.dpi = 500;
    return out;
}

double bifurcation_percentage(const MinutiaTemplate& t) {
    std::size_t typed = 0;
    std::size_t bif = 0;
    for (const auto& m : t.minutiae) {
        if (m.type == MinutiaType::Unknown) continue;
        ++typed;
        if (m.type == MinutiaType::Bifurcation) ++bif;
    }
    if (typed == 0) throw std::invalid_argument("no typed minutiae");
    return 100.0 * static_cast<double>(bif) / static_cast<double>(typed);
}

}  // namespace mhist
