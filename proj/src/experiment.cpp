#include "hilo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace hilo {

Variant variant_from_name(const std::string& name) {
    Variant v;
    v.name = name;
    if (name == "full") return v;
    if (name == "no_hf") {
        v.hf = false;
        return v;
    }
    if (name == "fixed_hf") {
        v.progressive = false;
        return v;
    }
    if (name == "no_gate") {
        v.gate = false;
        return v;
    }
    if (name == "no_voxel") {
        v.voxel_feature = false;
        return v;
    }
    if (name == "no_hf_no_gate") {
        v.hf = false;
        v.gate = false;
        return v;
    }
    throw std::runtime_error("unknown variant '" + name +
                             "' (expected full, no_hf, fixed_hf, no_gate, no_voxel, no_hf_no_gate)");
}

void ExperimentMatrix::validate() const {
    if (variants.empty() || noise_levels.empty() || seeds.empty())
        throw std::runtime_error("experiment matrix must have variants, noise levels and seeds");
    bool has_identity = false;
    for (const auto& v : variants)
        if (v.hf && v.progressive && v.gate && v.voxel_feature) has_identity = true;
    if (!has_identity)
        throw std::runtime_error("experiment matrix must include the identity (full) variant");
}

std::vector<MatrixCell> enumerate_cells(const ExperimentMatrix& matrix) {
    matrix.validate();
    std::vector<MatrixCell> cells;
    for (const auto& variant : matrix.variants)
        for (double level : matrix.noise_levels)
            for (std::uint64_t seed : matrix.seeds)
                cells.push_back({variant, level, level, seed});
    return cells;
}

namespace {

PipelineConfig apply_variant(PipelineConfig cfg, const Variant& v) {
    cfg.feat.hf_enabled = v.hf;
    cfg.feat.progressive = v.progressive;
    cfg.feat.voxel_feature = v.voxel_feature;
    cfg.gate.enabled = v.gate;
    return cfg;
}

CellResult run_cell(const PipelineConfig& base, const MatrixCell& cell,
                    const CorpusManifest& manifest, const CorpusEntry& entry,
                    const TriMesh& target, const EvalConfig& eval_cfg) {
    CellResult result;
    result.cell = cell;
    auto t0 = std::chrono::steady_clock::now();
    try {
        // identical noisy body for every variant at the same (level, seed)
        ProxyBody params = entry.params;
        if (cell.s1 > 0.0 || cell.s2 > 0.0) {
            Rng noise_rng(derive_seed(cell.seed, "matrix-noise",
                                      static_cast<std::uint64_t>(cell.s1 * 1e6)));
            perturb_params(params, cell.s1, cell.s2, noise_rng);
        }
        TriMesh body = build_body_mesh(manifest, params);

        PipelineConfig cfg = apply_variant(base, cell.variant);
        auto assets = make_body_assets(std::move(body), target, cfg.voxel_resolution,
                                       cfg.padding_frac);

        TrainResult trained = train(cfg, *assets, cell.seed);
        result.train_iters = trained.iters_run;
        result.trace = trained.trace;
        if (trained.aborted) throw std::runtime_error("training aborted: " + trained.abort_reason);

        double beta = cfg.feat.beta_at(cfg.train.total_iters);
        std::optional<TriMesh> recon = reconstruct(trained.net, *assets, cfg.feat, beta, cfg.recon);
        if (!recon) throw std::runtime_error("no surface in reconstruction");

        result.metrics = evaluate_pair(target, *recon, eval_cfg.samples, cell.seed,
                                       eval_cfg.render);
    } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
        result.metrics.chamfer_cm = std::numeric_limits<double>::infinity();
        result.metrics.p2s_cm = std::numeric_limits<double>::infinity();
        result.metrics.normals = std::numeric_limits<double>::infinity();
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace

std::vector<CellResult> run_matrix(const PipelineConfig& base, const ExperimentMatrix& matrix,
                                   const CorpusManifest& manifest, const std::string& corpus_dir,
                                   const std::string& subject_id, const EvalConfig& eval_cfg,
                                   int jobs) {
    const CorpusEntry& entry = manifest.find(subject_id);
    TriMesh target = load_mesh(corpus_dir + "/" + entry.target_file);

    std::vector<MatrixCell> cells = enumerate_cells(matrix);
    std::vector<CellResult> results(cells.size());
    std::atomic<size_t> cursor{0};
    auto worker = [&]() {
        while (true) {
            size_t i = cursor.fetch_add(1);
            if (i >= cells.size()) break;
            results[i] = run_cell(base, cells[i], manifest, entry, target, eval_cfg);
        }
    };
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

void write_results_csv(const std::vector<CellResult>& results, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write results CSV: " + path);
    out << "variant,s1,s2,seed,chamfer_cm,p2s_cm,normals,train_iters,wall_seconds\n";
    char buf[256];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%llu,%.17g,%.17g,%.17g,%lld,%.3f\n",
                      r.cell.variant.name.c_str(), r.cell.s1, r.cell.s2,
                      static_cast<unsigned long long>(r.cell.seed), r.metrics.chamfer_cm,
                      r.metrics.p2s_cm, r.metrics.normals,
                      static_cast<long long>(r.train_iters), r.wall_seconds);
        out << buf;
        if (r.failed) out << "# cell failed: " << r.error << "\n";
    }
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open results CSV: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("variant,", 0) != 0)
        throw std::runtime_error("bad results CSV header: " + path);
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 9) throw std::runtime_error("bad results CSV row: " + line);
        ResultRow r;
        r.variant = fields[0];
        r.s1 = std::stod(fields[1]);
        r.s2 = std::stod(fields[2]);
        r.seed = std::stoull(fields[3]);
        r.chamfer_cm = std::stod(fields[4]);
        r.p2s_cm = std::stod(fields[5]);
        r.normals = std::stod(fields[6]);
        r.train_iters = std::stoll(fields[7]);
        r.wall_seconds = std::stod(fields[8]);
        rows.push_back(r);
    }
    return rows;
}

namespace {

double metric_of(const ResultRow& r, const std::string& metric) {
    if (metric == "chamfer_cm") return r.chamfer_cm;
    if (metric == "p2s_cm") return r.p2s_cm;
    if (metric == "normals") return r.normals;
    throw std::runtime_error("unknown metric: " + metric);
}

}  // namespace

double median_metric(const std::vector<ResultRow>& rows, const std::string& variant, double s1,
                     const std::string& metric) {
    std::vector<double> values;
    for (const auto& r : rows)
        if (r.variant == variant && std::abs(r.s1 - s1) < 1e-12)
            values.push_back(metric_of(r, metric));
    if (values.empty())
        throw std::runtime_error("no rows for variant '" + variant + "' at noise " +
                                 std::to_string(s1));
    std::sort(values.begin(), values.end());
    size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

CheckOutcome check_orderings(const std::vector<ResultRow>& rows) {
    CheckOutcome outcome;
    auto has_group = [&rows](const std::string& variant, double s1) {
        for (const auto& r : rows)
            if (r.variant == variant && std::abs(r.s1 - s1) < 1e-12) return true;
        return false;
    };
    auto emit = [&outcome](bool ok, const std::string& what) {
        outcome.lines.push_back(std::string(ok ? "PASS " : "FAIL ") + what);
        outcome.all_passed &= ok;
        ++outcome.evaluated;
    };
    char buf[256];

    // detail orderings at the lowest noise level present
    double base_noise = std::numeric_limits<double>::max();
    for (const auto& r : rows) base_noise = std::min(base_noise, r.s1);
    for (const std::string metric : {"chamfer_cm", "normals"}) {
        for (const std::string ablation : {"no_hf", "no_gate"}) {
            if (!has_group("full", base_noise) || !has_group(ablation, base_noise)) continue;
            double full = median_metric(rows, "full", base_noise, metric);
            double abl = median_metric(rows, ablation, base_noise, metric);
            std::snprintf(buf, sizeof(buf), "median %s: full (%.4f) < %s (%.4f)", metric.c_str(),
                          full, ablation.c_str(), abl);
            emit(full < abl, buf);
        }
    }
    if (has_group("full", base_noise) && has_group("no_hf", base_noise)) {
        double fc = median_metric(rows, "full", base_noise, "chamfer_cm");
        double fn = median_metric(rows, "full", base_noise, "normals");
        double ac = median_metric(rows, "no_hf", base_noise, "chamfer_cm");
        double an = median_metric(rows, "no_hf", base_noise, "normals");
        double gap_c = (ac - fc) / fc, gap_n = (an - fn) / fn;
        std::snprintf(buf, sizeof(buf),
                      "relative normals gap vs no_hf (%.4f) exceeds chamfer gap (%.4f)", gap_n,
                      gap_c);
        emit(gap_n > gap_c, buf);
    }

    // robustness: degradation ratio between the extreme noise levels present
    std::vector<double> levels;
    for (const auto& r : rows)
        if (std::find(levels.begin(), levels.end(), r.s1) == levels.end()) levels.push_back(r.s1);
    std::sort(levels.begin(), levels.end());
    if (levels.size() >= 2) {
        double lo = levels.front() > 0 ? levels.front() : levels[1];
        double hi = levels.back();
        if (hi > lo && has_group("full", lo) && has_group("full", hi) &&
            has_group("no_voxel", lo) && has_group("no_voxel", hi)) {
            double full_ratio = median_metric(rows, "full", hi, "chamfer_cm") /
                                median_metric(rows, "full", lo, "chamfer_cm");
            double ablation_ratio = median_metric(rows, "no_voxel", hi, "chamfer_cm") /
                                    median_metric(rows, "no_voxel", lo, "chamfer_cm");
            std::snprintf(buf, sizeof(buf),
                          "chamfer degradation ratio %.2f->%.2f: full (%.3f) < no_voxel (%.3f)",
                          lo, hi, full_ratio, ablation_ratio);
            emit(full_ratio < ablation_ratio, buf);
        }
    }
    if (outcome.evaluated == 0) {
        outcome.lines.push_back("SKIP no assertion had data");
        outcome.all_passed = false;
    }
    return outcome;
}

}  // namespace hilo
