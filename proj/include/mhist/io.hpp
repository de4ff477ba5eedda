#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mhist/analysis.hpp"
#include "mhist/histogram.hpp"
#include "mhist/identify.hpp"
#include "mhist/realness.hpp"
#include "mhist/refine.hpp"
#include "mhist/template.hpp"
#include "mhist/transport.hpp"

namespace mhist {

using json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

json to_json(const BinSpec& spec);
json to_json(const CostParams& params);
json to_json(const MinutiaeHistogram& h);
json to_json(const ClassModel& model);
json to_json(const RealnessScore& score);
json to_json(const TransportPlan& plan);
json to_json(const RankingResult& ranking);
json to_json(const AccessRateReport& report);

/// Decoders throw ModelFormatError on missing keys, wrong types or invariant violations.
BinSpec bin_spec_from_json(const json& j);
CostParams cost_params_from_json(const json& j);
MinutiaeHistogram histogram_from_json(const json& j);
ClassModel model_from_json(const json& j);

ClassModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const ClassModel& model);

/// template_id,emd_real,emd_synth,a,b,c,d,fused,decision,label
void write_evaluation_csv(std::ostream& out, const EvaluationReport& report);
/// iteration,emd,move,index
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

/// Square matrix with a header row of labels and one labeled row per point:
///     ,A,B
///     A,0,0.5
///     B,0.5,0
DistanceMatrix read_distance_matrix_csv(std::istream& in);
void write_distance_matrix_csv(std::ostream& out, const DistanceMatrix& dm);
/// label,x1,...,xk
void write_coordinates_csv(std::ostream& out, const DistanceMatrix& dm, const MdsResult& r);

/// Reads a template file. When the file has no finger/impression header, a stem of the form
/// `<finger>_<impression>` fills them in.
MinutiaTemplate load_template(const std::filesystem::path& path);
/// All `*.mnt` files of a directory ordered by (finger, impression); `label`, when given,
/// overrides the files' own label.
std::vector<MinutiaTemplate> load_dataset(const std::filesystem::path& dir, std::optional<Label> label = std::nullopt);

/// Settings shared by the commands. Every key is optional in the JSON file.
struct RunConfig {
    BinSpec spec2d = BinSpec::default_2d();
    BinSpec spec4d = BinSpec::default_4d();
    TrainingGrid grid;
    SplitConfig split;
    std::uint64_t seed = 1;
    int refine_max_iters = 500;
    int refine_batch_size = 16;
    Foreground foreground;
    OrientationField field;
    std::vector<int> count_distribution{40};
    double p_bif = 0.409;
    double bootstrap_alpha = 0.1;
    int bootstrap_replicates = 1000;
    /// Defaults for command arguments that were not given on the command line.
    std::optional<std::string> real_dir;
    std::optional<std::string> synth_dir;
    std::optional<std::string> model_path;
    std::optional<std::string> index_path;

    /// Checks value ranges and that configured input directories exist.
    void validate() const;
};

/// Unknown keys are rejected so that misspelled settings do not pass silently.
RunConfig config_from_json(const json& j);
json to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace mhist
