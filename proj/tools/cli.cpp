#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "mhist/error.hpp"
#include "mhist/io.hpp"

namespace mhist::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw UsageError("no such file: " + path);
}

void require_dir(const std::string& path) {
    if (!fs::is_directory(path)) throw UsageError("no such directory: " + path);
}

std::string pick(const std::optional<std::string>& given, const std::optional<std::string>& configured, const char* what) {
    if (given && !given->empty()) return *given;
    if (configured) return *configured;
    throw UsageError(std::string("missing ") + what);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

RunConfig resolve_config(const std::string& flag) {
    std::string path = flag;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnv)) path = env;
    }
    if (path.empty()) return RunConfig{};
    require_file(path);
    try {
        return load_config(path);
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    } catch (const ModelFormatError& e) {
        throw UsageError(std::string("config ") + path + ": " + e.what());
    }
}

ClassModel read_model(const std::string& path) {
    require_file(path);
    return load_model(path);
}

GalleryIndex read_index_file(const std::string& path) {
    require_file(path);
    std::ifstream in(path, std::ios::binary);
    return read_index(in);
}

std::vector<MinutiaTemplate> read_dataset(const std::string& dir, std::optional<Label> label) {
    require_dir(dir);
    return load_dataset(dir, label);
}

MinutiaTemplate read_template(const std::string& path) {
    require_file(path);
    return load_template(path);
}

/// Set I/II/III of the combined real and synthetic datasets.
DatasetSplit split_both(const std::string& real_dir, const std::string& synth_dir, const SplitConfig& split) {
    const auto real = read_dataset(real_dir, Label::Real);
    const auto synth = read_dataset(synth_dir, Label::Synthetic);
    if (real.empty()) throw ClassEmpty("no templates in " + real_dir);
    if (synth.empty()) throw ClassEmpty("no templates in " + synth_dir);
    auto r = split_by_finger(real, split);
    auto s = split_by_finger(synth, split);
    for (auto [dst, src] : {std::pair{&r.set1, &s.set1}, std::pair{&r.set2, &s.set2}, std::pair{&r.set3, &s.set3}}) {
        dst->insert(dst->end(), src->begin(), src->end());
    }
    return r;
}

json report_summary(const EvaluationReport& r) {
    return {{"templates", r.rows.size()},
            {"accuracy", r.accuracy},
            {"real_accuracy", r.real_accuracy},
            {"synth_accuracy", r.synth_accuracy},
            {"real_count", r.real_count},
            {"synth_count", r.synth_count}};
}

struct Options {
    std::string config;

    // histogram
    std::string hist_file;
    int dims = 2;
    bool normalize = false;
    std::optional<double> d_max;
    std::optional<int> dist_bins, dir_bins, relangle_bins, type_bins;

    // train / evaluate / classify
    std::optional<std::string> real_dir, synth_dir, model, out;
    bool histogram_only = false;
    bool all = false;
    std::string template_path;

    // identify
    std::optional<std::string> index;
    std::string ident_dir, ident_template;
    int min_minutiae = 30;
    std::optional<int> top;

    // refine
    double threshold = 0.1;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iters, batch_size;
    std::optional<std::string> trace;

    // mds
    std::string matrix;
    std::size_t mds_dims = 2;
};

int cmd_histogram(const Options& o, const RunConfig& cfg, std::ostream& out) {
    BinSpec spec = o.dims == 4 ? cfg.spec4d : cfg.spec2d;
    if (o.d_max) spec.d_max = *o.d_max;
    if (o.dist_bins) spec.dist_bins = *o.dist_bins;
    if (o.dir_bins) spec.dir_bins = *o.dir_bins;
    if (o.relangle_bins) spec.relangle_bins = *o.relangle_bins;
    if (o.type_bins) spec.type_bins = *o.type_bins;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto t = rescale_to_500dpi(read_template(o.hist_file));
    const auto h = o.dims == 4 ? build_4dmh(t, spec, o.normalize) : build_2dmh(t, spec, o.normalize);
    out << to_json(h).dump() << '\n';
    return kOk;
}

int cmd_train(const Options& o, const RunConfig& cfg, std::ostream& out) {
    const auto real_dir = pick(o.real_dir, cfg.real_dir, "real template directory");
    const auto synth_dir = pick(o.synth_dir, cfg.synth_dir, "synthetic template directory");
    const auto model_path = pick(o.out, cfg.model_path, "--out model path");
    const auto sets = split_both(real_dir, synth_dir, cfg.split);
    const auto grid = o.histogram_only ? TrainingGrid::histogram_only() : cfg.grid;
    const auto result = train(sets.set1, sets.set2, grid, cfg.spec2d);
    save_model(model_path, result.model);
    out << json{{"model", model_path},
                {"set2_accuracy", result.set2_accuracy},
                {"params", to_json(result.model.params)},
                {"weights", result.model.weights}}
               .dump()
        << '\n';
    return kOk;
}

int cmd_classify(const Options& o, const RunConfig& cfg, std::ostream& out) {
    const auto model = read_model(pick(o.model, cfg.model_path, "model path"));
    const auto score = classify(read_template(o.template_path), model);
    out << to_json(score).dump() << '\n';
    return score.decision == Label::Real ? kOk : kSynthetic;
}

int cmd_evaluate(const Options& o, const RunConfig& cfg, std::ostream& out) {
    const auto model = read_model(pick(o.model, cfg.model_path, "model path"));
    const auto real_dir = pick(o.real_dir, cfg.real_dir, "real template directory");
    const auto synth_dir = pick(o.synth_dir, cfg.synth_dir, "synthetic template directory");
    std::vector<MinutiaTemplate> test;
    if (o.all) {
        test = read_dataset(real_dir, Label::Real);
        const auto synth = read_dataset(synth_dir, Label::Synthetic);
        test.insert(test.end(), synth.begin(), synth.end());
    } else {
        test = split_both(real_dir, synth_dir, cfg.split).set3;
    }
    if (test.empty()) throw ClassEmpty("no templates to evaluate");
    const auto report = evaluate(model, test);
    if (o.out) {
        std::ostringstream csv;
        write_evaluation_csv(csv, report);
        write_text(*o.out, csv.str());
    }
    out << report_summary(report).dump() << '\n';
    return kOk;
}

int cmd_enroll(const Options& o, const RunConfig& cfg, std::ostream& out) {
    const auto index_path = pick(o.index, cfg.index_path, "--index path");
    GalleryIndex index(cfg.spec4d);
    for (const auto& t : read_dataset(o.ident_dir, std::nullopt)) index.enroll(t);
    std::ostringstream bytes;
    write_index(bytes, index);
    write_text(index_path, bytes.str());
    out << json{{"index", index_path}, {"entries", index.entries().size()}, {"fingers", index.finger_count()}}.dump()
        << '\n';
    return kOk;
}

int cmd_search(const Options& o, const RunConfig& cfg, std::ostream& out) {
    const auto index = read_index_file(pick(o.index, cfg.index_path, "--index path"));
    auto result = search(index, read_template(o.ident_template));
    if (o.top && static_cast<std::size_t>(*o.top) < result.ranked.size()) result.ranked.resize(*o.top);
    out << to_json(result).dump() << '\n';
    return kOk;
}

int cmd_report(const Options& o, const RunConfig& cfg, std::ostream& out) {
    const auto index = read_index_file(pick(o.index, cfg.index_path, "--index path"));
    const auto queries = read_dataset(o.ident_dir, std::nullopt);
    if (queries.empty()) throw UsageError("no query templates in " + o.ident_dir);
    out << to_json(access_rate_report(index, queries, o.min_minutiae)).dump() << '\n';
    return kOk;
}

int cmd_refine(const Options& o, const RunConfig& cfg, std::ostream& out) {
    const auto model = read_model(pick(o.model, cfg.model_path, "--target model path"));
    if (!o.out) throw UsageError("missing --out template path");
    RefineConfig rc;
    rc.target = model.avg_real;
    rc.params = model.params;
    rc.threshold = o.threshold;
    rc.max_iters = o.max_iters.value_or(cfg.refine_max_iters);
    rc.batch_size = o.batch_size.value_or(cfg.refine_batch_size);
    rc.rng_seed = o.seed.value_or(cfg.seed);
    rc.foreground = cfg.foreground;
    rc.field = cfg.field;
    rc.count_distribution = cfg.count_distribution;
    try {
        rc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto result = refine(init_template(rc), rc);
    const auto typed = assign_types(result.tmpl, cfg.p_bif, rc.rng_seed);
    write_text(*o.out, serialize_template(typed));
    if (o.trace) {
        std::ostringstream csv;
        write_trace_csv(csv, result.trace);
        write_text(*o.trace, csv.str());
    }
    out << json{{"status", std::string(to_string(result.status))},
                {"iterations", result.iterations},
                {"final_emd", result.final_emd},
                {"minutiae", typed.minutiae.size()}}
               .dump()
        << '\n';
    return kOk;
}

int cmd_mds(const Options& o, std::ostream& out, std::ostream& err) {
    require_file(o.matrix);
    std::ifstream in(o.matrix);
    const auto dm = read_distance_matrix_csv(in);
    MdsResult r;
    try {
        r = mds_embed(dm, o.mds_dims);
    } catch (const std::invalid_argument& e) {
        throw UsageError(o.matrix + ": " + e.what());
    }
    if (r.non_euclidean) err << "mhist: warning: distance matrix is not Euclidean; negative eigenvalues were zeroed\n";
    std::ostringstream csv;
    write_coordinates_csv(csv, dm, r);
    if (o.out) {
        write_text(*o.out, csv.str());
    } else {
        out << csv.str();
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Minutiae histogram tools: realness test, identification, synthetic refinement, MDS"};
    app.name("mhist");
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", o.config, std::string("JSON config file (default: $") + kConfigEnv + ")");

    auto* histogram = app.add_subcommand("histogram", "Print the minutiae histogram of a template as JSON");
    histogram->add_option("template", o.hist_file, "Template file")->required();
    histogram->add_option("--dims", o.dims, "2 or 4")->check(CLI::IsMember({2, 4}));
    histogram->add_flag("--normalize", o.normalize, "Divide by the total mass");
    histogram->add_option("--d-max", o.d_max, "Largest pair distance in pixels");
    histogram->add_option("--dist-bins", o.dist_bins);
    histogram->add_option("--dir-bins", o.dir_bins);
    histogram->add_option("--relangle-bins", o.relangle_bins);
    histogram->add_option("--type-bins", o.type_bins);

    auto* trainc = app.add_subcommand("train", "Train the realness test and write the model JSON");
    trainc->add_option("real_dir", o.real_dir, "Directory of real *.mnt templates");
    trainc->add_option("synth_dir", o.synth_dir, "Directory of synthetic *.mnt templates");
    trainc->add_option("--out", o.out, "Model file to write");
    trainc->add_flag("--histogram-only", o.histogram_only, "Use the EMD difference alone");

    auto* classifyc = app.add_subcommand("classify", "Score one template; exit 0 = real, 1 = synthetic");
    classifyc->add_option("model", o.model, "Model JSON")->required();
    classifyc->add_option("template", o.template_path, "Template file")->required();

    auto* evaluatec = app.add_subcommand("evaluate", "Accuracy of a model on Set III (or all templates)");
    evaluatec->add_option("model", o.model, "Model JSON");
    evaluatec->add_option("real_dir", o.real_dir);
    evaluatec->add_option("synth_dir", o.synth_dir);
    evaluatec->add_flag("--all", o.all, "Evaluate every template instead of Set III");
    evaluatec->add_option("--out", o.out, "Per-template CSV report");

    auto* identify = app.add_subcommand("identify", "4D histogram indexing");
    identify->require_subcommand(1);
    auto* enroll = identify->add_subcommand("enroll", "Build an index from a template directory");
    enroll->add_option("dir", o.ident_dir)->required();
    enroll->add_option("--index", o.index, "Index file to write");
    auto* searchc = identify->add_subcommand("search", "Rank enrolled fingers for one query");
    searchc->add_option("template", o.ident_template)->required();
    searchc->add_option("--index", o.index, "Index file");
    searchc->add_option("--top", o.top, "Keep only the first k fingers")->check(CLI::PositiveNumber);
    auto* report = identify->add_subcommand("report", "Rank-1 rate and access rate for a query directory");
    report->add_option("dir", o.ident_dir)->required();
    report->add_option("--index", o.index, "Index file");
    report->add_option("--min-minutiae", o.min_minutiae, "Size cut for the large-template subset");

    auto* refinec = app.add_subcommand("refine", "Generate a synthetic template matching a model's real average");
    refinec->add_option("--target", o.model, "Model JSON whose avg_real is the target");
    refinec->add_option("--threshold", o.threshold, "Stop once EMD falls to this value")->check(CLI::NonNegativeNumber);
    refinec->add_option("--seed", o.seed);
    refinec->add_option("--max-iters", o.max_iters);
    refinec->add_option("--batch-size", o.batch_size);
    refinec->add_option("--out", o.out, "Template file to write");
    refinec->add_option("--trace", o.trace, "CSV of accepted moves");

    auto* mdsc = app.add_subcommand("mds", "Classical MDS of a labeled distance matrix CSV");
    mdsc->add_option("matrix", o.matrix)->required();
    mdsc->add_option("--dims", o.mds_dims)->check(CLI::PositiveNumber);
    mdsc->add_option("--out", o.out, "Coordinates CSV (default: standard output)");

    std::vector<const char*> argv{"mhist"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const auto cfg = resolve_config(o.config);
        if (histogram->parsed()) return cmd_histogram(o, cfg, out);
        if (trainc->parsed()) return cmd_train(o, cfg, out);
        if (classifyc->parsed()) return cmd_classify(o, cfg, out);
        if (evaluatec->parsed()) return cmd_evaluate(o, cfg, out);
        if (enroll->parsed()) return cmd_enroll(o, cfg, out);
        if (searchc->parsed()) return cmd_search(o, cfg, out);
        if (report->parsed()) return cmd_report(o, cfg, out);
        if (refinec->parsed()) return cmd_refine(o, cfg, out);
        if (mdsc->parsed()) return cmd_mds(o, out, err);
        throw UsageError("no command");
    } catch (const UsageError& e) {
        err << "mhist: " << e.what() << '\n';
        return kUsage;
    } catch (const ParseError& e) {
        err << "mhist: " << e.what() << '\n';
        return kUsage;
    } catch (const PairFeaturesUndefined& e) {
        err << "mhist: template has fewer than two minutiae: " << e.what() << '\n';
        return kTooFewMinutiae;
    } catch (const ClassEmpty& e) {
        err << "mhist: " << e.what() << '\n';
        return kClassEmpty;
    } catch (const ModelFormatError& e) {
        err << "mhist: corrupt model or index: " << e.what() << '\n';
        return kCorruptModel;
    } catch (const std::exception& e) {
        err << "mhist: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace mhist::cli
