#include "mhist/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mhist/error.hpp"

namespace mhist {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModelFormat = "mhist-model";
constexpr int kModelVersion = 1;

template <typename T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ModelFormatError(std::string("missing key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ModelFormatError(std::string("key '") + key + "' has the wrong type");
    }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_number(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(line, "not a number: '" + s + "'");
    return v;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ModelFormatError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ModelFormatError("unknown config key '" + where + "." + key + "'");
        }
    }
}

template <typename Fn>
auto rethrow_invalid(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(e.what());
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf, ptr);
}

json to_json(const BinSpec& spec) {
    return {{"d_max", spec.d_max},
            {"dist_bins", spec.dist_bins},
            {"dir_bins", spec.dir_bins},
            {"relangle_bins", spec.relangle_bins},
            {"type_bins", spec.type_bins}};
}

json to_json(const CostParams& p) { return {{"r", p.r}, {"s", p.s}, {"e", p.e}}; }

json to_json(const MinutiaeHistogram& h) {
    return {{"spec", to_json(h.spec)},
            {"dims", h.dims},
            {"normalized", h.normalized},
            {"pair_count", h.pair_count},
            {"mass", h.mass}};
}

json to_json(const ClassModel& m) {
    json norms = json::array();
    for (const auto& n : m.feature_norms) norms.push_back({{"offset", n.offset}, {"scale", n.scale}});
    return {{"format", kModelFormat},
            {"version", kModelVersion},
            {"spec", to_json(m.spec)},
            {"params", to_json(m.params)},
            {"weights", m.weights},
            {"feature_norms", norms},
            {"avg_real", to_json(m.avg_real)},
            {"avg_synth", to_json(m.avg_synth)}};
}

json to_json(const RealnessScore& s) {
    return {{"emd_real", s.emd_real}, {"emd_synth", s.emd_synth}, {"a", s.a},
            {"b", optional_number(s.b)}, {"c", optional_number(s.c)}, {"d", optional_number(s.d)},
            {"fused", s.fused}, {"decision", std::string(to_string(s.decision))}};
}

json to_json(const TransportPlan& plan) {
    json flow = json::array();
    for (const auto& f : plan.flow) flow.push_back({{"from", f.from}, {"to", f.to}, {"mass", f.mass}});
    return {{"total_cost", plan.total_cost}, {"flow", flow}};
}

json to_json(const RankingResult& r) {
    json ranked = json::array();
    for (const auto& f : r.ranked) ranked.push_back({{"finger", f.finger_id}, {"score", f.score}});
    return {{"query", {{"finger", r.query_finger}, {"impression", r.query_impression}}},
            {"ranked", ranked},
            {"true_rank", r.true_rank ? json(*r.true_rank) : json(nullptr)},
            {"accessed_fraction", optional_number(r.accessed_fraction)}};
}

json to_json(const AccessRateReport& r) {
    return {{"queries", r.queries},
            {"mean_accessed_fraction", r.mean_accessed_fraction},
            {"rank1_percent", r.rank1_percent},
            {"large_queries", r.large_queries},
            {"rank1_percent_large", r.rank1_percent_large}};
}

BinSpec bin_spec_from_json(const json& j) {
    BinSpec s;
    s.d_max = field<double>(j, "d_max");
    s.dist_bins = field<int>(j, "dist_bins");
    s.dir_bins = field<int>(j, "dir_bins");
    s.relangle_bins = field<int>(j, "relangle_bins");
    s.type_bins = field<int>(j, "type_bins");
    rethrow_invalid([&] { s.validate(); });
    return s;
}

CostParams cost_params_from_json(const json& j) {
    CostParams p{field<double>(j, "r"), field<double>(j, "s"), field<double>(j, "e")};
    rethrow_invalid([&] { p.validate(); });
    return p;
}

MinutiaeHistogram histogram_from_json(const json& j) {
    MinutiaeHistogram h;
    h.spec = bin_spec_from_json(field<json>(j, "spec"));
    h.dims = field<int>(j, "dims");
    h.normalized = field<bool>(j, "normalized");
    h.pair_count = field<std::int64_t>(j, "pair_count");
    h.mass = field<std::vector<double>>(j, "mass");
    if (h.dims != 2 && h.dims != 4) throw ModelFormatError("histogram dims must be 2 or 4");
    if (h.mass.size() != bin_count(h.spec, h.dims)) throw ModelFormatError("histogram mass length does not match its spec");
    if (h.pair_count < 0) throw ModelFormatError("negative pair_count");
    for (double m : h.mass) {
        if (!std::isfinite(m) || m < 0.0) throw ModelFormatError("histogram mass must be finite and non-negative");
    }
    const double total = h.total();
    if (h.normalized) {
        const double expected = h.pair_count > 0 ? 1.0 : 0.0;
        if (std::abs(total - expected) > 1e-9) throw ModelFormatError("normalized histogram mass does not sum to 1");
    } else {
        const double expected = static_cast<double>(h.pair_count) * (h.dims == 4 ? 2.0 : 1.0);
        if (total != expected) throw ModelFormatError("raw histogram mass does not match pair_count");
    }
    return h;
}

ClassModel model_from_json(const json& j) {
    if (field<std::string>(j, "format") != kModelFormat) throw ModelFormatError("not a model file");
    if (field<int>(j, "version") != kModelVersion) throw ModelFormatError("unsupported model version");
    ClassModel m;
    m.spec = bin_spec_from_json(field<json>(j, "spec"));
    m.params = cost_params_from_json(field<json>(j, "params"));
    const auto w = field<std::vector<double>>(j, "weights");
    if (w.size() != 5) throw ModelFormatError("model needs exactly 5 weights");
    std::copy(w.begin(), w.end(), m.weights.begin());
    const auto norms = field<json>(j, "feature_norms");
    if (!norms.is_array() || norms.size() != 3) throw ModelFormatError("model needs exactly 3 feature norms");
    for (std::size_t k = 0; k < 3; ++k) {
        m.feature_norms[k] = {field<double>(norms[k], "offset"), field<double>(norms[k], "scale")};
    }
    m.avg_real = histogram_from_json(field<json>(j, "avg_real"));
    m.avg_synth = histogram_from_json(field<json>(j, "avg_synth"));
    rethrow_invalid([&] { m.validate(); });
    return m;
}

ClassModel load_model(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelFormatError("cannot open model file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ModelFormatError("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

void save_model(const fs::path& path, const ClassModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(model).dump(1) << '\n';
}

void write_evaluation_csv(std::ostream& out, const EvaluationReport& report) {
    out << "template_id,emd_real,emd_synth,a,b,c,d,fused,decision,label\n";
    for (const auto& r : report.rows) {
        const auto& s = r.score;
        out << r.template_id << ',' << format_double(s.emd_real) << ',' << format_double(s.emd_synth) << ','
            << format_double(s.a) << ',' << optional_csv(s.b) << ',' << optional_csv(s.c) << ',' << optional_csv(s.d)
            << ',' << format_double(s.fused) << ',' << to_string(s.decision) << ',' << to_string(r.label) << '\n';
    }
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "iteration,emd,move,index\n";
    for (const auto& t : trace) out << t.iteration << ',' << format_double(t.emd) << ',' << t.move << ',' << t.index << '\n';
}

DistanceMatrix read_distance_matrix_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> linenos;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        rows.push_back(split_csv(line));
        linenos.push_back(lineno);
    }
    if (rows.empty()) throw ParseError("empty distance matrix file");
    DistanceMatrix dm;
    dm.labels.assign(rows[0].begin() + 1, rows[0].end());
    const std::size_t n = dm.labels.size();
    if (rows.size() != n + 1) throw ParseError(linenos.back(), "expected " + std::to_string(n) + " matrix rows");
    dm.d.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = rows[i + 1];
        if (r.size() != n + 1) throw ParseError(linenos[i + 1], "expected " + std::to_string(n + 1) + " cells");
        if (r[0] != dm.labels[i]) throw ParseError(linenos[i + 1], "row label '" + r[0] + "' does not match header");
        for (std::size_t j = 0; j < n; ++j) dm.d[i * n + j] = parse_number(r[j + 1], linenos[i + 1]);
    }
    return dm;
}

void write_distance_matrix_csv(std::ostream& out, const DistanceMatrix& dm) {
    for (const auto& l : dm.labels) out << ',' << l;
    out << '\n';
    for (std::size_t i = 0; i < dm.size(); ++i) {
        out << dm.labels[i];
        for (std::size_t j = 0; j < dm.size(); ++j) out << ',' << format_double(dm.at(i, j));
        out << '\n';
    }
}

void write_coordinates_csv(std::ostream& out, const DistanceMatrix& dm, const MdsResult& r) {
    out << "label";
    for (std::size_t k = 0; k < r.dims; ++k) out << ",x" << k + 1;
    out << '\n';
    for (std::size_t i = 0; i < r.n; ++i) {
        out << dm.labels[i];
        for (std::size_t k = 0; k < r.dims; ++k) out << ',' << format_double(r.coord(i, k));
        out << '\n';
    }
}

MinutiaTemplate load_template(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open template file " + path.string());
    auto t = parse_template(in);
    const std::string stem = path.stem().string();
    const auto us = stem.rfind('_');
    if (us != std::string::npos && us > 0 && us + 1 < stem.size()) {
        if (!t.finger_id) t.finger_id = stem.substr(0, us);
        if (!t.impression_id) t.impression_id = stem.substr(us + 1);
    }
    return t;
}

std::vector<MinutiaTemplate> load_dataset(const fs::path& dir, std::optional<Label> label) {
    if (!fs::is_directory(dir)) throw ParseError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".mnt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<MinutiaTemplate> out;
    for (const auto& f : files) {
        auto t = load_template(f);
        if (label) t.label = *label;
        out.push_back(std::move(t));
    }
    std::stable_sort(out.begin(), out.end(), [](const MinutiaTemplate& a, const MinutiaTemplate& b) {
        const auto fa = a.finger_id.value_or(""), fb = b.finger_id.value_or("");
        if (fa != fb) return finger_id_less(fa, fb);
        return finger_id_less(a.impression_id.value_or(""), b.impression_id.value_or(""));
    });
    return out;
}

void RunConfig::validate() const {
    spec2d.validate();
    spec4d.validate();
    grid.validate();
    split.validate();
    foreground.validate();
    if (refine_max_iters < 0 || refine_batch_size < 1) throw std::invalid_argument("refine iteration settings out of range");
    if (count_distribution.empty()) throw std::invalid_argument("count_distribution is empty");
    for (int c : count_distribution) {
        if (c < 2) throw std::invalid_argument("count_distribution entries must be at least 2");
    }
    if (!(p_bif >= 0.0 && p_bif <= 1.0)) throw std::invalid_argument("p_bif must be in [0, 1]");
    if (!(bootstrap_alpha > 0.0 && bootstrap_alpha < 1.0)) throw std::invalid_argument("bootstrap alpha must be in (0, 1)");
    if (bootstrap_replicates < 100) throw std::invalid_argument("bootstrap needs at least 100 replicates");
    for (const auto* dir : {&real_dir, &synth_dir}) {
        if (*dir && !fs::is_directory(**dir)) throw std::invalid_argument("configured directory does not exist: " + **dir);
    }
}

RunConfig config_from_json(const json& j) {
    check_keys(j, {"spec2d", "spec4d", "grid", "split", "seed", "refine", "bootstrap", "paths"}, "config");
    RunConfig c;
    if (j.contains("spec2d")) c.spec2d = bin_spec_from_json(j["spec2d"]);
    if (j.contains("spec4d")) c.spec4d = bin_spec_from_json(j["spec4d"]);
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        check_keys(g, {"r", "s", "e", "w0", "w1", "w2", "w3", "w4"}, "grid");
        auto axis = [&](const char* key, std::vector<double>& dst) {
            if (g.contains(key)) dst = field<std::vector<double>>(g, key);
        };
        axis("r", c.grid.r);
        axis("s", c.grid.s);
        axis("e", c.grid.e);
        axis("w0", c.grid.w0);
        axis("w1", c.grid.w1);
        axis("w2", c.grid.w2);
        axis("w3", c.grid.w3);
        axis("w4", c.grid.w4);
    }
    if (j.contains("split")) {
        const auto& s = j["split"];
        check_keys(s, {"set1", "set2", "set3"}, "split");
        auto range = [&](const char* key, int& first, int& last) {
            if (!s.contains(key)) return;
            const auto v = field<std::vector<int>>(s, key);
            if (v.size() != 2) throw ModelFormatError(std::string("split.") + key + " must be [first, last]");
            first = v[0];
            last = v[1];
        };
        range("set1", c.split.set1_first, c.split.set1_last);
        range("set2", c.split.set2_first, c.split.set2_last);
        range("set3", c.split.set3_first, c.split.set3_last);
    }
    if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
    if (j.contains("refine")) {
        const auto& r = j["refine"];
        check_keys(r, {"max_iters", "batch_size", "foreground", "field", "count_distribution", "p_bif"}, "refine");
        if (r.contains("max_iters")) c.refine_max_iters = field<int>(r, "max_iters");
        if (r.contains("batch_size")) c.refine_batch_size = field<int>(r, "batch_size");
        if (r.contains("count_distribution")) c.count_distribution = field<std::vector<int>>(r, "count_distribution");
        if (r.contains("p_bif")) c.p_bif = field<double>(r, "p_bif");
        if (r.contains("foreground")) {
            const auto& f = r["foreground"];
            check_keys(f, {"x0", "y0", "x1", "y1"}, "refine.foreground");
            c.foreground.x0 = field<double>(f, "x0");
            c.foreground.y0 = field<double>(f, "y0");
            c.foreground.x1 = field<double>(f, "x1");
            c.foreground.y1 = field<double>(f, "y1");
        }
        if (r.contains("field")) {
            const auto& f = r["field"];
            check_keys(f, {"kind", "angle", "cx", "cy"}, "refine.field");
            const auto kind = field<std::string>(f, "kind");
            if (kind == "constant") {
                c.field.kind = OrientationField::Kind::Constant;
            } else if (kind == "radial") {
                c.field.kind = OrientationField::Kind::Radial;
            } else {
                throw ModelFormatError("refine.field.kind must be \"constant\" or \"radial\"");
            }
            if (f.contains("angle")) c.field.angle_deg = field<double>(f, "angle");
            if (f.contains("cx")) c.field.cx = field<double>(f, "cx");
            if (f.contains("cy")) c.field.cy = field<double>(f, "cy");
        }
    }
    if (j.contains("bootstrap")) {
        const auto& b = j["bootstrap"];
        check_keys(b, {"alpha", "replicates"}, "bootstrap");
        if (b.contains("alpha")) c.bootstrap_alpha = field<double>(b, "alpha");
        if (b.contains("replicates")) c.bootstrap_replicates = field<int>(b, "replicates");
    }
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        check_keys(p, {"real_dir", "synth_dir", "model", "index"}, "paths");
        if (p.contains("real_dir")) c.real_dir = field<std::string>(p, "real_dir");
        if (p.contains("synth_dir")) c.synth_dir = field<std::string>(p, "synth_dir");
        if (p.contains("model")) c.model_path = field<std::string>(p, "model");
        if (p.contains("index")) c.index_path = field<std::string>(p, "index");
    }
    rethrow_invalid([&] { c.validate(); });
    return c;
}

json to_json(const RunConfig& c) {
    json paths = json::object();
    if (c.real_dir) paths["real_dir"] = *c.real_dir;
    if (c.synth_dir) paths["synth_dir"] = *c.synth_dir;
    if (c.model_path) paths["model"] = *c.model_path;
    if (c.index_path) paths["index"] = *c.index_path;
    return {{"spec2d", to_json(c.spec2d)},
            {"spec4d", to_json(c.spec4d)},
            {"grid", {{"r", c.grid.r}, {"s", c.grid.s}, {"e", c.grid.e}, {"w0", c.grid.w0}, {"w1", c.grid.w1},
                      {"w2", c.grid.w2}, {"w3", c.grid.w3}, {"w4", c.grid.w4}}},
            {"split", {{"set1", {c.split.set1_first, c.split.set1_last}},
                       {"set2", {c.split.set2_first, c.split.set2_last}},
                       {"set3", {c.split.set3_first, c.split.set3_last}}}},
            {"seed", c.seed},
            {"refine", {{"max_iters", c.refine_max_iters},
                        {"batch_size", c.refine_batch_size},
                        {"foreground", {{"x0", c.foreground.x0}, {"y0", c.foreground.y0}, {"x1", c.foreground.x1}, {"y1", c.foreground.y1}}},
                        {"field", {{"kind", c.field.kind == OrientationField::Kind::Radial ? "radial" : "constant"},
                                   {"angle", c.field.angle_deg}, {"cx", c.field.cx}, {"cy", c.field.cy}}},
                        {"count_distribution", c.count_distribution},
                        {"p_bif", c.p_bif}}},
            {"bootstrap", {{"alpha", c.bootstrap_alpha}, {"replicates", c.bootstrap_replicates}}},
            {"paths", paths}};
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

}  // namespace mhist
