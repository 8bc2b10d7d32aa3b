// Command implementations behind the command-line entry point. Each returns a
// process exit code: 0 success, 2 configuration error, 3 degenerate-geometry
// outcome (no surface, diverged training), 4 I/O failure.
#pragma once

#include <string>

#include "hilo/config.hpp"
#include "hilo/corpus.hpp"
#include "hilo/experiment.hpp"
#include "hilo/pipeline.hpp"

namespace hilo {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitIo = 4;

// Mappings from the flat key/value config to the module configs.
PipelineConfig pipeline_config_from(const RunConfig& cfg);
CorpusConfig corpus_config_from(const RunConfig& cfg);
ExperimentMatrix matrix_from(const RunConfig& cfg);
EvalConfig eval_config_from(const RunConfig& cfg);

int cmd_gen_corpus(const RunConfig& cfg, bool force);
int cmd_train(const RunConfig& cfg, const std::string& subject, const std::string& resume_dir);
int cmd_reconstruct(const RunConfig& cfg, const std::string& checkpoint,
                    const std::string& subject, const std::string& output);
int cmd_eval(const RunConfig& cfg, const std::string& gt_path, const std::string& recon_path,
             const std::string& csv_out);
int cmd_matrix(const RunConfig& cfg, const std::string& subject);
int cmd_dump_voxels(const RunConfig& cfg, const std::string& subject, const std::string& output,
                    const std::string& checkpoint);
int cmd_plot(const std::string& kind, const std::string& csv_path, const std::string& svg_path);
int cmd_check(const std::string& results_csv);

}  // namespace hilo
