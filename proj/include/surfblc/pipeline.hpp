#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "surfblc/blc_model.hpp"
#include "surfblc/png_io.hpp"

namespace surfblc {

struct ManifestRecord {
    std::string id;
    std::string liner_id;
    std::string segment;         // "3h" or "6h"
    double operating_hours = 0;
    std::string rgb_path;        // relative to the manifest file
    std::string depth_path;
    std::string blc_path;        // optional, may be empty
};

/// Loads and validates a manifest JSON (array of records). When check_files
/// is set, every referenced file must exist relative to the manifest.
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path,
                                          bool check_files = true);
void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

struct FoldPlan {
    std::size_t k = 0;
    std::map<std::string, std::size_t> assignment;  // record id -> fold index
};

/// Liner-level split, stratified over operating-hour quartile bins so both
/// sides see a similar hour distribution. No liner ends up on both sides.
std::pair<std::vector<ManifestRecord>, std::vector<ManifestRecord>> grouped_split(
    const std::vector<ManifestRecord>& records, double eval_fraction, std::uint64_t seed);

/// Liner-level k-fold assignment balancing both liner and record counts.
FoldPlan make_folds(const std::vector<ManifestRecord>& records, std::size_t k, std::uint64_t seed);

struct AugmentOptions {
    double blur_sigma = 1.0;
    bool include_composed = true;  // add flip-then-blur for the paper's 4x factor
};

/// Image-side augmentation; labels of the variants stay identical to the
/// source. Returns {original, flipped, blurred[, flipped+blurred]}.
std::vector<ReflectionImage> augment(const ReflectionImage& img, const AugmentOptions& opts = {});

ReflectionImage flip_vertical(const ReflectionImage& img);
ReflectionImage gaussian_blur(const ReflectionImage& img, double sigma);

// --- evaluation ---------------------------------------------------------------

struct SampleEval {
    std::string id;
    double hours = 0;
    double w1 = 0;
    double sk_pred = 0, sk_true = 0;
    double vvv_pred = 0, vvv_true = 0;   // ml/m^2
    double vmp_pred = 0, vmp_true = 0;
    double q_pred[3] = {0, 0, 0};        // BLC heights at ratios 25/50/75%
    double q_true[3] = {0, 0, 0};
};

struct HourBinSummary {
    double lo = 0, hi = 0;
    std::size_t count = 0;
    // five-number summaries for boxplots
    double w1_box[5] = {0, 0, 0, 0, 0};
    double sk_diff_box[5] = {0, 0, 0, 0, 0};
};

struct EvalReport {
    std::vector<SampleEval> samples;   // ordered by record id
    double w1_mean = 0, w1_std = 0;
    double sk_mae = 0, sk_std = 0, sk_mape = 0;  // MAPE in percent, over sk_true > 0
    double vvv_mae = 0, vvv_std = 0;   // ml/m^2
    double vmp_mae = 0, vmp_std = 0;
    std::vector<HourBinSummary> hour_bins;       // eval-set hour quartile bins
};

using BlcPredictor = std::function<Blc(const ManifestRecord&, const ReflectionImage&)>;

/// Evaluates an arbitrary predictor against manifest ground truth (BLC files,
/// recomputed from depth when their sampling differs from k).
EvalReport evaluate_predictor(const BlcPredictor& predictor,
                              const std::vector<ManifestRecord>& records,
                              const std::filesystem::path& base_dir, std::size_t k);

EvalReport evaluate(const ModelBundle& bundle, const std::vector<ManifestRecord>& records,
                    const std::filesystem::path& base_dir);

/// Per-component mean of the training BLCs; the reference baseline predictor.
Blc mean_blc_baseline(const std::vector<ManifestRecord>& records,
                      const std::filesystem::path& base_dir, std::size_t k);

// report artifacts
void write_report_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, EvalReport>>& rows);
void write_samples_csv(const std::filesystem::path& path, const EvalReport& report);
void write_quartile_scatter_csv(const std::filesystem::path& path, const EvalReport& report);
void write_quartile_scatter_svg(const std::filesystem::path& path, const EvalReport& report);
void write_hours_csv(const std::filesystem::path& path, const EvalReport& report);
void write_hours_boxplot_svg(const std::filesystem::path& path, const EvalReport& report);

// --- training ------------------------------------------------------------------

struct PipelineConfig {
    PreprocessConfig prep;
    TrainConfig stage1;          // defaults: 30 epochs, lr 1e-3
    TrainConfig stage2;          // defaults: 40 epochs, lr 4e-4
    double eval_fraction = 0.2;
    std::size_t folds = 5;
    bool augment_train = false;
    AugmentOptions aug;
    std::uint64_t seed = 0;

    static PipelineConfig defaults();
    static PipelineConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

/// Trains both stages on the given records (stage 1 first, then stage 2 on
/// the frozen stage-1 outputs) and returns the bundle.
ModelBundle train_pipeline(const std::vector<ManifestRecord>& records,
                           const std::filesystem::path& base_dir, const PipelineConfig& config);

struct MetricRow {
    std::string label;
    double w1 = 0, w1_std = 0;
    double sk_mae = 0, sk_mape = 0, sk_std = 0;
    double vvv_mae = 0, vvv_std = 0;  // ul/m^2 (reporting unit)
    double vmp_mae = 0, vmp_std = 0;
};

struct CrossvalResult {
    std::vector<EvalReport> fold_reports;
    std::vector<MetricRow> rows;  // one per fold plus the "Avg." row
};

CrossvalResult run_crossval(const std::vector<ManifestRecord>& records,
                            const std::filesystem::path& base_dir, const PipelineConfig& config);

MetricRow metric_row(const std::string& label, const EvalReport& report);

/// FNV-1a hash of a file's bytes, lowercase hex; used for output provenance.
std::string file_hash_hex(const std::filesystem::path& path);

} // namespace surfblc
