#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "hilo/metrics.hpp"
#include "hilo/pipeline.hpp"

using namespace hilo;

namespace {

std::unique_ptr<BodyAssets> sphere_assets(double lf_offset = 0.05, double hf_amp = 0.0,
                                          int voxel_res = 16, double padding_frac = 0.1) {
    TriMesh body = make_icosphere(0.5, 3);
    TriMesh target = generate_target(body, ClothingSpec{lf_offset, hf_amp, 20.0});
    return make_body_assets(std::move(body), std::move(target), voxel_res, padding_frac);
}

PipelineConfig desk_config() {
    PipelineConfig cfg;
    cfg.train.points_per_step = 800;
    cfg.train.lr = 2e-3;
    cfg.train.total_iters = 300;
    cfg.train.trace_every = 10;
    cfg.feat.anneal_iters = 150;
    cfg.hidden_dims = {64, 48, 32};
    cfg.voxel_resolution = 16;
    cfg.recon.resolution = 32;
    cfg.recon.refine_levels = 1;
    return cfg;
}

}  // namespace

TEST_CASE("sample_points: on-surface mode, labels, determinism") {
    auto assets = sphere_assets();
    TrainConfig cfg;
    cfg.points_per_step = 400;
    cfg.near_sigma = 0.0;  // exactly on the surface

    Rng rng(derive_seed(5, "sampling"));
    SampleBatch batch = sample_points(*assets, cfg, rng);
    REQUIRE(batch.points.size() == 400);
    int on_surface = static_cast<int>(std::llround(0.9 * 400));
    for (int i = 0; i < on_surface; ++i) {
        double d = assets->target_tree.closest_point(batch.points[i]).signed_distance;
        CHECK(d < 1e-9);
        // the deterministic tie-break labels on-surface points outside
        CHECK(batch.gt[i] == 0.0);
    }

    Rng rng_a(derive_seed(5, "sampling"));
    Rng rng_b(derive_seed(5, "sampling"));
    SampleBatch a = sample_points(*assets, cfg, rng_a);
    SampleBatch b = sample_points(*assets, cfg, rng_b);
    CHECK(a.points == b.points);
    CHECK(a.gt == b.gt);
}

TEST_CASE("sample_points: uniform labels match the analytic volume fraction") {
    auto assets = sphere_assets(0.0, 0.0, 16, 0.3);
    TrainConfig cfg;
    cfg.points_per_step = 4000;
    cfg.near_fraction = 0.0;
    cfg.uniform_fraction = 1.0;
    Rng rng(derive_seed(17, "sampling"));
    SampleBatch batch = sample_points(*assets, cfg, rng);

    double inside = batch.gt.sum();
    Vec3 ext = assets->domain.extent();
    double sphere_vol = 4.0 / 3.0 * M_PI * std::pow(0.5, 3);
    double expected = sphere_vol / (ext.x() * ext.y() * ext.z());
    double sigma = std::sqrt(expected * (1 - expected) / cfg.points_per_step);
    CHECK(std::abs(inside / cfg.points_per_step - expected) < 3.0 * sigma + 1e-3);
}

TEST_CASE("assemble_features: composition and block layout") {
    auto assets = sphere_assets();
    FeatureConfig feat;
    feat.feature_channels = 6;
    FieldNetwork net = init_params(LayerSpec{{feat.dim(), 8, 1}}, GateConfig{}, 6, 3);
    FeatureVolume vol = encode_voxels(assets->grid, net.encoder);

    // on the body surface the banded block starts [0, 0,1, 0,1, ...]
    Vec3 on_surface = assets->body.vertices[7];
    FeatureBatch fb = assemble_features({on_surface}, *assets, vol, feat, 10.0);
    CHECK(std::abs(fb.features(0, 0)) < 1e-9);
    for (int k = 0; k < feat.hf.num_bands; ++k) {
        CHECK(std::abs(fb.features(0, 1 + 2 * k)) < 1e-7);                  // sin
        CHECK(fb.features(0, 2 + 2 * k) == doctest::Approx(1.0).epsilon(1e-7));  // cos
    }

    // beta = 0: every band is weighted to zero, raw distance still present
    Vec3 p(0.61, 0.13, -0.27);
    FeatureBatch fb0 = assemble_features({p}, *assets, vol, feat, 0.0);
    for (int k = 0; k < feat.hf.num_bands; ++k) {
        CHECK(fb0.features(0, 1 + 2 * k) == 0.0);
        CHECK(fb0.features(0, 2 + 2 * k) == 0.0);
    }
    CHECK(fb0.features(0, 0) != 0.0);

    // recomposition oracle: the row equals the three module outputs in order
    double beta = 2.3;
    FeatureBatch fb1 = assemble_features({p}, *assets, vol, feat, beta);
    SurfaceSample ss = signed_distance(assets->body_tree, assets->body, p, true);
    Eigen::VectorXd hf = hf_encode(ss.signed_distance, feat.hf, beta);
    Eigen::VectorXd vx = sample_trilinear(vol, p);
    NormalFeature nf = normal_features(ss, assets->target_tree);
    Eigen::VectorXd expected(feat.dim());
    expected << hf, vx, nf.body_normal, nf.cloth_normal;
    CHECK((fb1.features.row(0).transpose() - expected).lpNorm<Eigen::Infinity>() == 0.0);

    // disabled blocks shrink the feature dimension
    FeatureConfig raw = feat;
    raw.hf_enabled = false;
    raw.voxel_feature = false;
    CHECK(raw.dim() == 7);
    FeatureBatch fb2 = assemble_features({p}, *assets, vol, raw, beta);
    CHECK(fb2.features.cols() == 7);
    CHECK(fb2.features(0, 0) == ss.signed_distance);
}

TEST_CASE("occupancy loss: values and naive-loop oracle") {
    Eigen::VectorXd o(3), gt(3);
    o << 0.2, 0.9, 0.5;
    gt << 0.0, 1.0, 1.0;
    LossResult r = occupancy_loss(gt, gt);
    CHECK(r.loss == 0.0);
    CHECK(r.grad.cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd one(1), zero(1);
    one << 1.0;
    zero << 0.0;
    LossResult single = occupancy_loss(one, zero);
    CHECK(single.loss == 1.0);
    CHECK(single.grad[0] == 2.0);

    Rng rng(3);
    const int n = 257;
    Eigen::VectorXd pred(n), labels(n);
    for (int i = 0; i < n; ++i) {
        pred[i] = rng.uniform();
        labels[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    LossResult batch = occupancy_loss(pred, labels);
    double naive = 0.0;
    for (int i = 0; i < n; ++i) naive += (pred[i] - labels[i]) * (pred[i] - labels[i]);
    naive /= n;
    CHECK(std::abs(batch.loss - naive) < 1e-12);
    for (int i = 0; i < n; ++i)
        CHECK(batch.grad[i] == doctest::Approx(2.0 * (pred[i] - labels[i]) / n).epsilon(1e-12));
}

TEST_CASE("optimizer: zero gradient is a no-op, scalar update formula, skip on non-finite") {
    LayerSpec spec{{1, 1}};
    GateConfig no_gate;
    no_gate.enabled = false;
    FieldNetwork net = init_params(spec, no_gate, 2, 5);
    net.weights[0](0, 0) = 1.5;
    FieldGradients grads = make_gradients(net, 1, 8);

    RmsProp opt;
    opt.lr = 0.1;
    opt.decay = 0.0;
    double before = net.weights[0](0, 0);
    opt.step(net, grads);  // all-zero gradients
    CHECK(net.weights[0](0, 0) == before);

    grads.d_weights[0](0, 0) = 3.0;
    opt.step(net, grads);
    // v = g^2 = 9, step = lr * g / (3 + eps)
    CHECK(net.weights[0](0, 0) == doctest::Approx(before - 0.1 * 3.0 / (3.0 + opt.eps)).epsilon(1e-12));

    grads.d_weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    double prev = net.weights[0](0, 0);
    opt.step(net, grads);
    CHECK(net.weights[0](0, 0) == prev);
    CHECK(opt.skipped == 1);
}

TEST_CASE("train: zero iterations returns the initialized network") {
    auto assets = sphere_assets();
    PipelineConfig cfg = desk_config();
    cfg.train.total_iters = 0;
    TrainResult result = train(cfg, *assets, 11);
    FieldNetwork fresh = init_params(cfg.layer_spec(), cfg.gate, cfg.feat.feature_channels,
                                     derive_seed(11, "init"));
    std::vector<double> a, b;
    result.net.visit_parameters([&a](const double* p, size_t n) { a.insert(a.end(), p, p + n); });
    fresh.visit_parameters([&b](const double* p, size_t n) { b.insert(b.end(), p, p + n); });
    CHECK(a == b);
    CHECK(result.trace.empty());
}

TEST_CASE("train: sphere task converges and is reproducible") {
    auto assets = sphere_assets();
    PipelineConfig cfg = desk_config();
    TrainResult result = train(cfg, *assets, 7);
    REQUIRE_FALSE(result.aborted);
    REQUIRE_FALSE(result.trace.empty());
    CHECK(result.trace.back().loss < 0.05);

    // smoothed over 50-iteration windows the loss is nonincreasing
    std::vector<double> window_means;
    double acc = 0.0;
    int count = 0;
    std::int64_t window = 0;
    for (const auto& row : result.trace) {
        if (row.iter >= (window + 1) * 50) {
            if (count) window_means.push_back(acc / count);
            acc = 0.0;
            count = 0;
            ++window;
        }
        acc += row.loss;
        ++count;
    }
    if (count) window_means.push_back(acc / count);
    REQUIRE(window_means.size() >= 4);
    for (size_t i = 1; i < window_means.size(); ++i)
        CHECK(window_means[i] <= window_means[i - 1] + 1e-9);

    // bitwise reproducibility of the trace and the parameters
    TrainResult again = train(cfg, *assets, 7);
    REQUIRE(again.trace.size() == result.trace.size());
    for (size_t i = 0; i < result.trace.size(); ++i) {
        CHECK(again.trace[i].loss == result.trace[i].loss);
        CHECK(again.trace[i].grad_norm == result.trace[i].grad_norm);
    }
    std::vector<double> a, b;
    result.net.visit_parameters([&a](const double* p, size_t n) { a.insert(a.end(), p, p + n); });
    again.net.visit_parameters([&b](const double* p, size_t n) { b.insert(b.end(), p, p + n); });
    CHECK(a == b);
}

TEST_CASE("train: resume continues the trace without reusing iterations") {
    auto assets = sphere_assets();
    PipelineConfig cfg = desk_config();
    cfg.train.total_iters = 60;
    cfg.train.trace_every = 5;

    PipelineConfig first_half = cfg;
    first_half.train.total_iters = 30;
    TrainResult part1 = train(first_half, *assets, 13);
    TrainResult part2 = train(cfg, *assets, 13, &part1.net, 30);
    REQUIRE_FALSE(part2.trace.empty());
    CHECK(part2.trace.front().iter == 30);
    CHECK(part2.trace.back().iter == 59);
    for (const auto& row : part2.trace) CHECK(row.iter >= 30);
}

TEST_CASE("reconstruct_field: constant field yields no surface") {
    FieldFn constant = [](const std::vector<Vec3>& pts, Eigen::VectorXd& out) {
        out = Eigen::VectorXd::Constant(static_cast<int>(pts.size()), 0.9);
    };
    Aabb box;
    box.expand(Vec3(-1, -1, -1));
    box.expand(Vec3(1, 1, 1));
    ReconConfig cfg;
    cfg.resolution = 16;
    cfg.refine_levels = 1;
    CHECK_FALSE(reconstruct_field(constant, box, cfg).has_value());
}

TEST_CASE("reconstruct_field: analytic sphere accuracy and refinement benefit") {
    const double radius = 0.55;
    FieldFn sphere_field = [radius](const std::vector<Vec3>& pts, Eigen::VectorXd& out) {
        out.resize(static_cast<int>(pts.size()));
        for (size_t i = 0; i < pts.size(); ++i) {
            double s = pts[i].norm() - radius;
            out[static_cast<int>(i)] = 1.0 / (1.0 + std::exp(s / 0.01));
        }
    };
    Aabb box;
    box.expand(Vec3(-0.9, -0.9, -0.9));
    box.expand(Vec3(0.9, 0.9, 0.9));

    ReconConfig refined;
    refined.resolution = 32;
    refined.refine_levels = 1;
    ReconStats stats;
    auto mesh = reconstruct_field(sphere_field, box, refined, &stats);
    REQUIRE(mesh.has_value());
    CHECK(mesh->is_watertight());
    double fine_voxel = 1.8 / ((32 - 1) * 2);
    double mean_err = 0.0;
    for (const auto& v : mesh->vertices) mean_err += std::abs(v.norm() - radius);
    mean_err /= static_cast<double>(mesh->vertices.size());
    CHECK(mean_err <= fine_voxel);

    ReconConfig flat;
    flat.resolution = 32;
    flat.refine_levels = 0;
    auto coarse_mesh = reconstruct_field(sphere_field, box, flat);
    REQUIRE(coarse_mesh.has_value());
    TriMesh analytic = make_icosphere(radius, 4);
    double chamfer_refined = chamfer(analytic, *mesh, 20000, 3);
    double chamfer_coarse = chamfer(analytic, *coarse_mesh, 20000, 3);
    CHECK(chamfer_refined <= chamfer_coarse);

    // refinement only evaluates near the surface: far fewer points than 63^3
    CHECK(stats.points_evaluated < 32 * 32 * 32 + 63 * 63 * 63 / 4);
}

TEST_CASE("reconstruct: encodes the volume exactly once per body") {
    auto assets = sphere_assets();
    PipelineConfig cfg = desk_config();
    cfg.train.total_iters = 20;
    TrainResult trained = train(cfg, *assets, 23);
    ReconStats stats;
    auto mesh = reconstruct(trained.net, *assets, cfg.feat, cfg.feat.max_beta(), cfg.recon, &stats);
    CHECK(stats.encode_calls == 1);
    CHECK(stats.point_batches >= 2);
    CHECK(stats.points_evaluated >= 32 * 32 * 32);
    REQUIRE(mesh.has_value());
    CHECK(mesh->is_watertight());

    // byte-level determinism of the reconstruction
    auto mesh2 = reconstruct(trained.net, *assets, cfg.feat, cfg.feat.max_beta(), cfg.recon);
    CHECK(mesh->vertices == mesh2->vertices);
    CHECK(mesh->faces == mesh2->faces);
}

TEST_CASE("trace csv format") {
    std::vector<TraceRow> trace = {{0, 0.0, 0.25, 1.0}, {10, 0.5, 0.125, 0.5}};
    std::string path = (std::filesystem::temp_directory_path() / "hilo_trace_test.csv").string();
    write_trace_csv(trace, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "iter,beta,loss");
    std::getline(in, line);
    CHECK(line.rfind("0,0,", 0) == 0);
    std::filesystem::remove(path);
}
