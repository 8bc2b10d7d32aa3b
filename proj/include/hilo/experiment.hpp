// Ablation / robustness experiment harness: feature-toggle variants crossed
// with noise levels and seeds. Every cell perturbs the subject parameters,
// regenerates the body assets, trains, reconstructs, and evaluates against
// the clean target. Cells are independent and may run in parallel.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hilo/corpus.hpp"
#include "hilo/metrics.hpp"
#include "hilo/pipeline.hpp"

namespace hilo {

struct Variant {
    std::string name;
    bool hf = true;
    bool progressive = true;
    bool gate = true;
    bool voxel_feature = true;
};

// full, no_hf, fixed_hf, no_gate, no_voxel, no_hf_no_gate
Variant variant_from_name(const std::string& name);

struct ExperimentMatrix {
    std::vector<Variant> variants;     // must include the identity variant
    std::vector<double> noise_levels;  // applied to both parameter groups
    std::vector<std::uint64_t> seeds;

    void validate() const;
};

struct MatrixCell {
    Variant variant;
    double s1 = 0.0, s2 = 0.0;
    std::uint64_t seed = 0;
};

std::vector<MatrixCell> enumerate_cells(const ExperimentMatrix& matrix);

struct CellResult {
    MatrixCell cell;
    MetricsReport metrics;
    std::int64_t train_iters = 0;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;
    std::vector<TraceRow> trace;
};

struct EvalConfig {
    int samples = 10000;
    NormalRenderConfig render;
};

// Runs every cell for one subject. The same (noise level, seed) pair yields
// the same perturbed body for every variant, so variants compare fairly.
std::vector<CellResult> run_matrix(const PipelineConfig& base, const ExperimentMatrix& matrix,
                                   const CorpusManifest& manifest, const std::string& corpus_dir,
                                   const std::string& subject_id, const EvalConfig& eval_cfg,
                                   int jobs);

// variant,s1,s2,seed,chamfer_cm,p2s_cm,normals,train_iters,wall_seconds
void write_results_csv(const std::vector<CellResult>& results, const std::string& path);

struct ResultRow {
    std::string variant;
    double s1 = 0.0, s2 = 0.0;
    std::uint64_t seed = 0;
    double chamfer_cm = 0.0, p2s_cm = 0.0, normals = 0.0;
    std::int64_t train_iters = 0;
    double wall_seconds = 0.0;
};
std::vector<ResultRow> read_results_csv(const std::string& path);

// Median of the metric over seeds for one (variant, noise) group; throws when
// the group is absent.
double median_metric(const std::vector<ResultRow>& rows, const std::string& variant, double s1,
                     const std::string& metric);

struct CheckOutcome {
    std::vector<std::string> lines;  // one "PASS ..."/"FAIL ..."/"SKIP ..." per assertion
    bool all_passed = true;
    int evaluated = 0;
};

// Ordering assertions over a results CSV: the identity variant must beat the
// single ablations, and its noise-degradation ratio must beat the variant
// without the interpolated voxel feature. Assertions without data are skipped.
CheckOutcome check_orderings(const std::vector<ResultRow>& rows);

}  // namespace hilo
