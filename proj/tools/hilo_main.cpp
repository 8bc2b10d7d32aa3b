// Command-line entry point: corpus generation, training, reconstruction,
// evaluation, the ablation/noise experiment matrix, volume dumps, plots, and
// ordering checks over result tables.
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hilo/cli.hpp"

namespace {

// --config file values first, then --set overrides (flags win)
hilo::RunConfig build_config(const std::string& config_file,
                             const std::vector<std::string>& overrides,
                             const std::string& out_override) {
    hilo::RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    cfg.apply_overrides(overrides);
    if (!out_override.empty()) cfg.set("out", out_override);
    return cfg;
}

std::string config_help() {
    std::string text = "Config keys (key = value lines in --config files, or --set key=value):\n";
    for (const auto& key : hilo::RunConfig::schema()) {
        text += "  " + key.name;
        text += std::string(std::max<size_t>(1, 28 - key.name.size()), ' ');
        text += "[" + key.def + "] " + key.help + "\n";
    }
    return text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hilo: detail-preserving, noise-robust implicit surface reconstruction\n" +
                 config_help()};
    app.require_subcommand(1);

    std::string config_file, out_override;
    std::vector<std::string> overrides;
    app.add_option("--config", config_file, "configuration file (key = value lines)");
    app.add_option("--set", overrides, "override one config key, e.g. --set train.lr=1e-3");
    app.add_option("--out", out_override, "output root (shorthand for --set out=...)");

    auto* gen = app.add_subcommand("gen-corpus", "generate synthetic subjects and targets");
    bool force = false;
    gen->add_flag("--force", force, "overwrite an existing non-empty corpus directory");

    auto* train = app.add_subcommand("train", "fit the implicit function to one subject");
    std::string subject = "sub000", resume_dir;
    train->add_option("--subject", subject, "subject id from the corpus manifest");
    train->add_option("--resume", resume_dir, "run directory holding checkpoint.bin + trace.csv");

    auto* recon = app.add_subcommand("reconstruct", "extract a mesh from a trained checkpoint");
    std::string checkpoint, recon_subject = "sub000", recon_output;
    recon->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    recon->add_option("--subject", recon_subject, "subject id providing the body conditioning");
    recon->add_option("--output", recon_output, "output mesh path (.obj or .ply)");

    auto* eval = app.add_subcommand("eval", "chamfer / p2s / normal-image error for a mesh pair");
    std::string gt_path, recon_path, eval_csv;
    eval->add_option("--gt", gt_path, "ground-truth mesh")->required();
    eval->add_option("--recon", recon_path, "reconstructed mesh")->required();
    eval->add_option("--csv", eval_csv, "also append a results CSV row here");

    auto* matrix = app.add_subcommand("matrix", "variant x noise x seed experiment grid");
    std::string matrix_subject = "sub000";
    matrix->add_option("--subject", matrix_subject, "subject id");

    auto* dump = app.add_subcommand("dump-voxels", "write the occupancy grid (or encoded volume)");
    std::string dump_subject = "sub000", dump_output = "voxels.bin", dump_checkpoint;
    dump->add_option("--subject", dump_subject, "subject id");
    dump->add_option("--output", dump_output, "output dump path");
    dump->add_option("--checkpoint", dump_checkpoint,
                     "encode the grid with this checkpoint's encoder first");

    auto* plot = app.add_subcommand("plot", "SVG charts from trace or results CSVs");
    std::string plot_kind = "trace", plot_csv, plot_svg = "plot.svg";
    plot->add_option("--kind", plot_kind, "trace | sweep");
    plot->add_option("--csv", plot_csv, "input CSV")->required();
    plot->add_option("--output", plot_svg, "output SVG path");

    auto* check = app.add_subcommand("check", "ordering assertions over a results CSV");
    std::string check_csv;
    check->add_option("--csv", check_csv, "results CSV from the matrix command")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : hilo::kExitConfig;
    }

    try {
        hilo::RunConfig cfg = build_config(config_file, overrides, out_override);
        if (gen->parsed()) return hilo::cmd_gen_corpus(cfg, force);
        if (train->parsed()) return hilo::cmd_train(cfg, subject, resume_dir);
        if (recon->parsed()) return hilo::cmd_reconstruct(cfg, checkpoint, recon_subject, recon_output);
        if (eval->parsed()) return hilo::cmd_eval(cfg, gt_path, recon_path, eval_csv);
        if (matrix->parsed()) return hilo::cmd_matrix(cfg, matrix_subject);
        if (dump->parsed()) return hilo::cmd_dump_voxels(cfg, dump_subject, dump_output, dump_checkpoint);
        if (plot->parsed()) return hilo::cmd_plot(plot_kind, plot_csv, plot_svg);
        if (check->parsed()) return hilo::cmd_check(check_csv);
    } catch (const hilo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return hilo::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hilo::kExitIo;
    }
    return hilo::kExitOk;
}
