#include "hilo/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hilo/svg_plot.hpp"

namespace fs = std::filesystem;

namespace hilo {

namespace {

std::string sanitize(std::string id) {
    std::replace(id.begin(), id.end(), '/', '-');
    return id;
}

std::string corpus_dir(const RunConfig& cfg) { return cfg.get_string("out") + "/corpus"; }

struct SubjectAssets {
    CorpusManifest manifest;
    std::unique_ptr<BodyAssets> assets;
};

SubjectAssets load_subject(const RunConfig& cfg, const std::string& subject,
                           const PipelineConfig& pipe) {
    SubjectAssets out;
    std::string dir = corpus_dir(cfg);
    out.manifest = read_manifest(dir + "/manifest.txt");
    const CorpusEntry& entry = out.manifest.find(subject);
    TriMesh body = load_mesh(dir + "/" + entry.body_file);
    TriMesh target = load_mesh(dir + "/" + entry.target_file);
    out.assets = make_body_assets(std::move(body), std::move(target), pipe.voxel_resolution,
                                  pipe.padding_frac);
    return out;
}

}  // namespace

PipelineConfig pipeline_config_from(const RunConfig& cfg) {
    PipelineConfig p;
    p.train.points_per_step = static_cast<int>(cfg.get_int("train.points_per_step"));
    p.train.near_fraction = cfg.get_double("train.near_fraction");
    p.train.near_sigma = cfg.get_double("train.near_sigma");
    p.train.uniform_fraction = cfg.get_double("train.uniform_fraction");
    p.train.lr = cfg.get_double("train.lr");
    p.train.decay = cfg.get_double("train.decay");
    p.train.eps = cfg.get_double("train.eps");
    p.train.total_iters = cfg.get_int("train.total_iters");
    p.train.trace_every = cfg.get_int("train.trace_every");
    p.train.abort_factor = cfg.get_double("train.abort_factor");
    p.train.abort_patience = static_cast<int>(cfg.get_int("train.abort_patience"));

    p.feat.hf.num_bands = static_cast<int>(cfg.get_int("hf.num_bands"));
    p.feat.hf.include_raw = cfg.get_bool("hf.include_raw");
    p.feat.hf_enabled = cfg.get_bool("hf.enabled");
    p.feat.progressive = cfg.get_bool("hf.progressive");
    p.feat.anneal_iters = cfg.get_int("hf.anneal_iters");
    p.feat.voxel_feature = cfg.get_bool("voxel.feature");
    p.feat.feature_channels = static_cast<int>(cfg.get_int("voxel.channels"));

    p.gate.enabled = cfg.get_bool("gate.enabled");
    std::string mode = cfg.get_string("gate.mode");
    if (mode == "global") p.gate.mode = GateMode::Global;
    else if (mode == "pointwise") p.gate.mode = GateMode::Pointwise;
    else throw ConfigError("gate.mode must be global or pointwise, got '" + mode + "'");
    p.gate.output_scalar = cfg.get_bool("gate.output_scalar");

    p.hidden_dims.clear();
    for (auto d : cfg.get_int_list("net.hidden_dims")) p.hidden_dims.push_back(static_cast<int>(d));
    if (p.hidden_dims.empty()) throw ConfigError("net.hidden_dims must not be empty");

    p.voxel_resolution = static_cast<int>(cfg.get_int("voxel.resolution"));
    p.padding_frac = cfg.get_double("voxel.padding_frac");

    p.recon.resolution = static_cast<int>(cfg.get_int("recon.resolution"));
    p.recon.refine_levels = static_cast<int>(cfg.get_int("recon.refine_levels"));
    p.recon.iso = cfg.get_double("recon.iso");
    p.recon.band = cfg.get_double("recon.band");
    return p;
}

CorpusConfig corpus_config_from(const RunConfig& cfg) {
    CorpusConfig c;
    c.subjects = static_cast<int>(cfg.get_int("corpus.subjects"));
    c.body_kind = cfg.get_string("corpus.body");
    c.mc_resolution = static_cast<int>(cfg.get_int("corpus.mc_resolution"));
    c.sphere_radius = cfg.get_double("corpus.sphere_radius");
    c.sphere_subdiv = static_cast<int>(cfg.get_int("corpus.sphere_subdiv"));
    c.pose_jitter = cfg.get_double("corpus.pose_jitter");
    c.shape_jitter = cfg.get_double("corpus.shape_jitter");
    c.clothing.lf_offset = cfg.get_double("corpus.lf_offset");
    c.clothing.hf_amp = cfg.get_double("corpus.hf_amp");
    c.clothing.hf_freq = cfg.get_double("corpus.hf_freq");
    c.noise_levels = cfg.get_double_list("corpus.noise_levels");
    c.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    return c;
}

ExperimentMatrix matrix_from(const RunConfig& cfg) {
    ExperimentMatrix m;
    for (const auto& name : cfg.get_string_list("matrix.variants"))
        m.variants.push_back(variant_from_name(name));
    m.noise_levels = cfg.get_double_list("matrix.noise_levels");
    for (auto s : cfg.get_int_list("matrix.seeds"))
        m.seeds.push_back(static_cast<std::uint64_t>(s));
    return m;
}

EvalConfig eval_config_from(const RunConfig& cfg) {
    EvalConfig e;
    e.samples = static_cast<int>(cfg.get_int("eval.samples"));
    e.render.resolution = static_cast<int>(cfg.get_int("eval.normal_res"));
    return e;
}

int cmd_gen_corpus(const RunConfig& cfg, bool force) {
    try {
        std::string dir = corpus_dir(cfg);
        if (fs::exists(dir) && !fs::is_empty(dir)) {
            if (!force) {
                std::cerr << "corpus directory " << dir
                          << " is not empty; pass --force to overwrite\n";
                return kExitIo;
            }
            fs::remove_all(dir);
        }
        CorpusConfig corpus_cfg = corpus_config_from(cfg);
        CorpusManifest manifest = generate_corpus(corpus_cfg, dir);
        cfg.write_effective(dir + "/config.txt");
        std::cout << "corpus: " << manifest.entries.size() << " variants under " << dir << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

int cmd_train(const RunConfig& cfg, const std::string& subject, const std::string& resume_dir) {
    try {
        PipelineConfig pipe = pipeline_config_from(cfg);
        SubjectAssets subj = load_subject(cfg, subject, pipe);
        std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

        FieldNetwork resume_net;
        const FieldNetwork* resume_ptr = nullptr;
        std::int64_t start_iter = 0;
        std::vector<TraceRow> prior_trace;
        if (!resume_dir.empty()) {
            resume_net = load_params(resume_dir + "/checkpoint.bin");
            resume_ptr = &resume_net;
            std::ifstream trace_in(resume_dir + "/trace.csv");
            std::string line;
            std::getline(trace_in, line);  // header
            while (std::getline(trace_in, line)) {
                std::stringstream ls(line);
                std::string iter_s, beta_s, loss_s;
                std::getline(ls, iter_s, ',');
                std::getline(ls, beta_s, ',');
                std::getline(ls, loss_s, ',');
                prior_trace.push_back({std::stoll(iter_s), std::stod(beta_s), std::stod(loss_s), 0.0});
            }
            if (!prior_trace.empty()) start_iter = prior_trace.back().iter + 1;
        }

        TrainResult result = train(pipe, *subj.assets, seed, resume_ptr, start_iter);

        std::string run_dir = cfg.get_string("out") + "/train_" + sanitize(subject);
        fs::create_directories(run_dir);
        save_params(result.net, run_dir + "/checkpoint.bin");
        std::vector<TraceRow> full_trace = prior_trace;
        full_trace.insert(full_trace.end(), result.trace.begin(), result.trace.end());
        write_trace_csv(full_trace, run_dir + "/trace.csv");
        cfg.write_effective(run_dir + "/config.txt");

        if (result.aborted) {
            std::cerr << "training aborted: " << result.abort_reason << " (trace written to "
                      << run_dir << "/trace.csv)\n";
            return kExitDegenerate;
        }
        double final_loss = result.trace.empty() ? -1.0 : result.trace.back().loss;
        std::cout << "trained " << subject << " for " << result.iters_run
                  << " iters, final loss " << final_loss << ", checkpoint " << run_dir
                  << "/checkpoint.bin\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::string msg = e.what();
        return msg.find("unknown subject") != std::string::npos ? kExitConfig : kExitIo;
    }
}

int cmd_reconstruct(const RunConfig& cfg, const std::string& checkpoint,
                    const std::string& subject, const std::string& output) {
    try {
        PipelineConfig pipe = pipeline_config_from(cfg);
        FieldNetwork net = load_params(checkpoint);
        if (net.spec.dims != pipe.layer_spec().dims) {
            std::ostringstream os;
            os << "checkpoint layer spec (";
            for (int d : net.spec.dims) os << d << " ";
            os << ") does not match the configured feature/hidden dims";
            std::cerr << "config error: " << os.str() << "\n";
            return kExitConfig;
        }
        SubjectAssets subj = load_subject(cfg, subject, pipe);
        double beta = pipe.feat.beta_at(pipe.train.total_iters);
        std::optional<TriMesh> mesh = reconstruct(net, *subj.assets, pipe.feat, beta, pipe.recon);
        if (!mesh) {
            std::cerr << "no surface: the field never crosses the iso level\n";
            return kExitDegenerate;
        }
        std::string path = output.empty()
                               ? cfg.get_string("out") + "/recon_" + sanitize(subject) + ".obj"
                               : output;
        save_mesh(*mesh, path);
        std::cout << "reconstructed " << subject << ": " << mesh->vertices.size() << " vertices, "
                  << mesh->faces.size() << " faces -> " << path << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::string msg = e.what();
        return msg.find("unknown subject") != std::string::npos ? kExitConfig : kExitIo;
    }
}

int cmd_eval(const RunConfig& cfg, const std::string& gt_path, const std::string& recon_path,
             const std::string& csv_out) {
    try {
        TriMesh gt = load_mesh(gt_path);
        TriMesh recon = load_mesh(recon_path);
        EvalConfig eval_cfg = eval_config_from(cfg);
        std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
        MetricsReport m = evaluate_pair(gt, recon, eval_cfg.samples, seed, eval_cfg.render);

        std::cout << "chamfer_cm " << m.chamfer_cm << "\np2s_cm " << m.p2s_cm << "\nnormals "
                  << m.normals << "\n";
        if (!csv_out.empty()) {
            CellResult row;
            row.cell.variant.name = "eval";
            row.cell.seed = seed;
            row.metrics = m;
            row.train_iters = 0;   // no training happened in this command
            row.wall_seconds = 0;  // keeps eval output byte-reproducible
            write_results_csv({row}, csv_out);
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

int cmd_matrix(const RunConfig& cfg, const std::string& subject) {
    try {
        PipelineConfig pipe = pipeline_config_from(cfg);
        ExperimentMatrix matrix = matrix_from(cfg);
        EvalConfig eval_cfg = eval_config_from(cfg);
        int jobs = static_cast<int>(cfg.get_int("matrix.jobs"));

        std::string dir = corpus_dir(cfg);
        CorpusManifest manifest = read_manifest(dir + "/manifest.txt");
        std::vector<CellResult> results =
            run_matrix(pipe, matrix, manifest, dir, subject, eval_cfg, jobs);

        std::string out_dir = cfg.get_string("out") + "/matrix_" + sanitize(subject);
        fs::create_directories(out_dir);
        write_results_csv(results, out_dir + "/results.csv");
        cfg.write_effective(out_dir + "/config.txt");

        int failed = 0;
        for (const auto& r : results) failed += r.failed ? 1 : 0;
        std::cout << "matrix: " << results.size() << " cells, " << failed << " failed -> "
                  << out_dir << "/results.csv\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::string msg = e.what();
        return msg.find("unknown subject") != std::string::npos || msg.find("variant") != std::string::npos
                   ? kExitConfig
                   : kExitIo;
    }
}

int cmd_dump_voxels(const RunConfig& cfg, const std::string& subject, const std::string& output,
                    const std::string& checkpoint) {
    try {
        PipelineConfig pipe = pipeline_config_from(cfg);
        SubjectAssets subj = load_subject(cfg, subject, pipe);
        const VoxelGrid& grid = subj.assets->grid;
        if (checkpoint.empty()) {
            write_volume_dump(output, grid.resolution, grid.origin, grid.voxel_size, 1,
                              grid.values);
            std::cout << "wrote occupancy grid " << grid.resolution[2] << "^3 -> " << output
                      << "\n";
        } else {
            FieldNetwork net = load_params(checkpoint);
            FeatureVolume vol = encode_voxels(grid, net.encoder);
            write_volume_dump(output, vol.resolution, vol.origin, vol.voxel_size, vol.channels,
                              vol.values);
            std::cout << "wrote encoded feature volume (" << vol.channels << " channels) -> "
                      << output << "\n";
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::string msg = e.what();
        return msg.find("unknown subject") != std::string::npos ? kExitConfig : kExitIo;
    }
}

int cmd_plot(const std::string& kind, const std::string& csv_path, const std::string& svg_path) {
    try {
        if (kind == "trace") {
            std::ifstream in(csv_path);
            if (!in) throw std::runtime_error("cannot open trace CSV: " + csv_path);
            std::string line;
            std::getline(in, line);
            PlotSeries loss{"loss", {}}, beta{"beta", {}};
            while (std::getline(in, line)) {
                std::stringstream ls(line);
                std::string it, b, lo;
                std::getline(ls, it, ',');
                std::getline(ls, b, ',');
                std::getline(ls, lo, ',');
                loss.points.emplace_back(std::stod(it), std::stod(lo));
                beta.points.emplace_back(std::stod(it), std::stod(b));
            }
            write_line_chart(svg_path, "training trace", "iteration", "loss", {loss}, true);
            std::cout << "wrote " << svg_path << "\n";
            return kExitOk;
        }
        if (kind == "sweep") {
            std::vector<ResultRow> rows = read_results_csv(csv_path);
            std::vector<std::string> variants;
            std::vector<double> levels;
            for (const auto& r : rows) {
                if (std::find(variants.begin(), variants.end(), r.variant) == variants.end())
                    variants.push_back(r.variant);
                if (std::find(levels.begin(), levels.end(), r.s1) == levels.end())
                    levels.push_back(r.s1);
            }
            std::sort(levels.begin(), levels.end());
            std::vector<PlotSeries> series;
            for (const auto& v : variants) {
                PlotSeries s{v, {}};
                for (double level : levels)
                    s.points.emplace_back(level, median_metric(rows, v, level, "chamfer_cm"));
                series.push_back(std::move(s));
            }
            write_line_chart(svg_path, "noise sweep (median chamfer)", "noise level",
                             "chamfer (cm)", series);
            std::cout << "wrote " << svg_path << "\n";
            return kExitOk;
        }
        std::cerr << "config error: unknown plot kind '" << kind << "' (trace|sweep)\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

int cmd_check(const std::string& results_csv) {
    try {
        std::vector<ResultRow> rows = read_results_csv(results_csv);
        CheckOutcome outcome = check_orderings(rows);
        for (const auto& line : outcome.lines) std::cout << line << "\n";
        return outcome.all_passed ? kExitOk : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

}  // namespace hilo
