#include "hilo/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace hilo {

void TrainConfig::validate() const {
    if (points_per_step < 1) throw std::runtime_error("train: points_per_step must be positive");
    if (std::abs(near_fraction + uniform_fraction - 1.0) > 1e-12)
        throw std::runtime_error("train: near and uniform fractions must sum to 1");
    if (near_fraction < 0 || uniform_fraction < 0)
        throw std::runtime_error("train: fractions must be nonnegative");
    if (lr <= 0 || decay < 0 || decay >= 1 || eps <= 0)
        throw std::runtime_error("train: bad optimizer constants");
    if (total_iters < 0) throw std::runtime_error("train: total_iters must be >= 0");
}

void ReconConfig::validate() const {
    if (resolution < 2) throw std::runtime_error("recon: resolution must be >= 2");
    if (refine_levels < 0 || refine_levels > 4)
        throw std::runtime_error("recon: refine_levels out of range");
    if (band < 0) throw std::runtime_error("recon: band must be >= 0");
}

LayerSpec PipelineConfig::layer_spec() const {
    LayerSpec spec;
    spec.dims.clear();
    spec.dims.push_back(feat.dim());
    for (int d : hidden_dims) spec.dims.push_back(d);
    spec.dims.push_back(1);
    return spec;
}

std::unique_ptr<BodyAssets> make_body_assets(TriMesh body, TriMesh target, int voxel_resolution,
                                             double padding_frac) {
    std::unique_ptr<BodyAssets> assets(new BodyAssets());
    assets->body = std::move(body);
    assets->target = std::move(target);
    assets->body_tree = BvhTree::build(assets->body);
    assets->target_tree = BvhTree::build(assets->target);
    assets->body_watertight = assets->body.is_watertight();
    if (!assets->target.is_watertight())
        throw std::runtime_error("target mesh must be watertight (occupancy labels need a sign)");

    double padding = padding_frac * assets->body.bounds().diagonal();
    assets->grid = voxelize(assets->body, assets->body_tree,
                            {voxel_resolution, voxel_resolution, voxel_resolution}, padding);

    Aabb box = assets->target.bounds();
    double pad = padding_frac * box.diagonal();
    box.lo -= Vec3::Constant(pad);
    box.hi += Vec3::Constant(pad);
    assets->domain = box;
    return assets;
}

SampleBatch sample_points(const BodyAssets& assets, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    const int n = cfg.points_per_step;
    const int n_near = static_cast<int>(std::llround(cfg.near_fraction * n));

    SampleBatch batch;
    batch.points.reserve(n);
    SurfaceSampler sampler(assets.target);
    for (int i = 0; i < n_near; ++i) {
        auto s = sampler.sample(rng);
        batch.points.push_back(s.point + cfg.near_sigma * rng.normal3());
    }
    const Aabb& box = assets.domain;
    for (int i = n_near; i < n; ++i) {
        batch.points.emplace_back(rng.uniform(box.lo.x(), box.hi.x()),
                                  rng.uniform(box.lo.y(), box.hi.y()),
                                  rng.uniform(box.lo.z(), box.hi.z()));
    }
    batch.gt.resize(n);
    for (int i = 0; i < n; ++i)
        batch.gt[i] = inside_test(assets.target_tree, batch.points[i]) ? 1.0 : 0.0;
    return batch;
}

FeatureBatch assemble_features(const std::vector<Vec3>& points, const BodyAssets& assets,
                               const FeatureVolume& vol, const FeatureConfig& feat, double beta) {
    const int n = static_cast<int>(points.size());
    const int dim = feat.dim();
    FeatureBatch batch;
    batch.features.resize(n, dim);
    batch.points = points;
    batch.body_sdf.resize(n);

    const int hf_dim = feat.hf_enabled ? feat.hf.dim() : 1;
    for (int i = 0; i < n; ++i) {
        SurfaceSample ss =
            signed_distance(assets.body_tree, assets.body, points[i], assets.body_watertight);
        batch.body_sdf[i] = ss.signed_distance;
        int col = 0;
        if (feat.hf_enabled) {
            batch.features.row(i).segment(0, hf_dim) =
                hf_encode(ss.signed_distance, feat.hf, beta).transpose();
        } else {
            batch.features(i, 0) = ss.signed_distance;
        }
        col = hf_dim;
        if (feat.voxel_feature) {
            batch.features.row(i).segment(col, feat.feature_channels) =
                sample_trilinear(vol, points[i]).transpose();
            col += feat.feature_channels;
        }
        NormalFeature nf = normal_features(ss, assets.target_tree);
        batch.features.row(i).segment(col, 3) = nf.body_normal.transpose();
        batch.features.row(i).segment(col + 3, 3) = nf.cloth_normal.transpose();
    }
    return batch;
}

void scatter_voxel_feature_gradients(const FeatureConfig& feat, const FeatureBatch& batch,
                                     const FeatureVolume& vol, const Eigen::MatrixXd& d_features,
                                     std::vector<double>& d_volume) {
    if (!feat.voxel_feature) return;
    const int offset = feat.hf_enabled ? feat.hf.dim() : 1;
    for (size_t i = 0; i < batch.points.size(); ++i) {
        Eigen::VectorXd upstream =
            d_features.row(static_cast<int>(i)).segment(offset, feat.feature_channels).transpose();
        sample_trilinear_backward(vol, batch.points[i], upstream, d_volume);
    }
}

LossResult occupancy_loss(const Eigen::VectorXd& predicted, const Eigen::VectorXd& gt) {
    if (predicted.size() != gt.size())
        throw std::runtime_error("occupancy_loss: prediction/label size mismatch");
    const double n = static_cast<double>(predicted.size());
    Eigen::VectorXd diff = predicted - gt;
    LossResult r;
    r.loss = diff.squaredNorm() / n;
    r.grad = 2.0 * diff / n;
    return r;
}

void RmsProp::step(FieldNetwork& net, FieldGradients& grads) {
    size_t total = net.parameter_count();
    if (v.empty()) v.assign(total, 0.0);
    if (v.size() != total) throw std::runtime_error("optimizer state does not match network");

    bool finite = true;
    grads.visit_parameters(net, [&finite](double* g, size_t n) {
        for (size_t i = 0; i < n; ++i)
            if (!std::isfinite(g[i])) finite = false;
    });
    if (!finite) {
        ++skipped;
        return;
    }

    // walk the gradient spans in lockstep with the parameter spans
    std::vector<std::pair<double*, size_t>> param_spans;
    net.visit_parameters([&param_spans](double* p, size_t n) { param_spans.emplace_back(p, n); });
    size_t cursor = 0, span_idx = 0;
    grads.visit_parameters(net, [&](double* g, size_t n) {
        double* p = param_spans[span_idx].first;
        for (size_t i = 0; i < n; ++i) {
            double& vi = v[cursor + i];
            vi = decay * vi + (1.0 - decay) * g[i] * g[i];
            p[i] -= lr * g[i] / (std::sqrt(vi) + eps);
        }
        cursor += n;
        ++span_idx;
    });
}

TrainResult train(const PipelineConfig& cfg, const BodyAssets& assets, std::uint64_t seed,
                  const FieldNetwork* resume_from, std::int64_t start_iter) {
    cfg.train.validate();
    LayerSpec spec = cfg.layer_spec();

    TrainResult result;
    if (resume_from) {
        if (resume_from->spec.dims != spec.dims)
            throw std::runtime_error("resume network does not match the configured layer spec");
        result.net = *resume_from;
    } else {
        result.net =
            init_params(spec, cfg.gate, cfg.feat.feature_channels, derive_seed(seed, "init"));
    }

    RmsProp opt;
    opt.lr = cfg.train.lr;
    opt.decay = cfg.train.decay;
    opt.eps = cfg.train.eps;

    const bool pointwise =
        cfg.gate.enabled && cfg.gate.mode == GateMode::Pointwise;

    const size_t volume_values =
        static_cast<size_t>(cfg.feat.feature_channels) * assets.grid.cell_count();
    FieldGradients grads = make_gradients(result.net, cfg.train.points_per_step, volume_values);
    double initial_loss = -1.0;
    int bad_streak = 0;

    result.iters_run = start_iter;
    for (std::int64_t t = start_iter; t < cfg.train.total_iters; ++t) {
        double beta = cfg.feat.beta_at(t);
        Rng sample_rng(derive_seed(seed, "sampling", static_cast<std::uint64_t>(t)));
        SampleBatch batch = sample_points(assets, cfg.train, sample_rng);

        EncodeCache enc_cache;
        FeatureVolume vol = encode_voxels(assets.grid, result.net.encoder, &enc_cache);
        FeatureBatch features = assemble_features(batch.points, assets, vol, cfg.feat, beta);

        ForwardCache cache;
        Eigen::VectorXd out = phi_si_forward(result.net, features.features, vol, cache,
                                             pointwise ? &features.points : nullptr);
        LossResult loss = occupancy_loss(out, batch.gt);

        if (!std::isfinite(loss.loss)) {
            result.aborted = true;
            result.abort_reason = "non-finite loss at iteration " + std::to_string(t);
            break;
        }
        if (initial_loss < 0) initial_loss = std::max(loss.loss, 1e-12);
        bad_streak = loss.loss > cfg.train.abort_factor * initial_loss ? bad_streak + 1 : 0;
        if (bad_streak >= cfg.train.abort_patience) {
            result.aborted = true;
            result.abort_reason = "loss diverged for " + std::to_string(bad_streak) +
                                  " consecutive iterations at iteration " + std::to_string(t);
            break;
        }

        grads.setZero();
        phi_si_backward(result.net, vol, cache, loss.grad, grads);
        scatter_voxel_feature_gradients(cfg.feat, features, vol, grads.d_features, grads.d_volume);
        encode_voxels_backward(assets.grid, result.net.encoder, enc_cache, grads.d_volume,
                               grads.d_encoder);

        double norm_sq = 0.0;
        grads.visit_parameters(result.net, [&norm_sq](double* g, size_t n) {
            for (size_t i = 0; i < n; ++i) norm_sq += g[i] * g[i];
        });

        opt.step(result.net, grads);
        result.iters_run = t + 1;

        if (t % cfg.train.trace_every == 0 || t + 1 == cfg.train.total_iters)
            result.trace.push_back({t, beta, loss.loss, std::sqrt(norm_sq)});
    }
    if (!result.net.all_finite()) {
        result.aborted = true;
        result.abort_reason = "non-finite parameters after training";
    }
    return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write trace: " + path);
    out << "iter,beta,loss\n";
    char buf[96];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n",
                      static_cast<long long>(row.iter), row.beta, row.loss);
        out << buf;
    }
}

namespace {

struct FineLattice {
    int n = 0;                  // points per axis
    Vec3 origin;
    double spacing = 0.0;
    std::vector<double> values;
    std::vector<bool> exact;    // true where the field was evaluated

    size_t idx(int x, int y, int z) const {
        return (static_cast<size_t>(z) * n + y) * n + x;
    }
};

}  // namespace

std::optional<TriMesh> reconstruct_field(const FieldFn& field, const Aabb& box,
                                         const ReconConfig& cfg, ReconStats* stats) {
    cfg.validate();
    const int coarse_n = cfg.resolution;
    const int factor = 1 << cfg.refine_levels;
    FineLattice fine;
    fine.n = (coarse_n - 1) * factor + 1;
    fine.origin = box.lo;
    fine.spacing = box.extent().maxCoeff() / (fine.n - 1);
    fine.values.assign(static_cast<size_t>(fine.n) * fine.n * fine.n, 0.0);
    fine.exact.assign(fine.values.size(), false);

    auto evaluate = [&](const std::vector<Vec3>& pts, std::vector<size_t> const& slots) {
        const size_t chunk = 8192;
        Eigen::VectorXd out;
        for (size_t start = 0; start < pts.size(); start += chunk) {
            size_t count = std::min(chunk, pts.size() - start);
            std::vector<Vec3> sub(pts.begin() + start, pts.begin() + start + count);
            field(sub, out);
            for (size_t i = 0; i < count; ++i) {
                fine.values[slots[start + i]] = out[static_cast<int>(i)];
                fine.exact[slots[start + i]] = true;
            }
            if (stats) {
                stats->point_batches++;
                stats->points_evaluated += static_cast<std::int64_t>(count);
            }
        }
    };
    auto point_at = [&](int x, int y, int z) -> Vec3 {
        return fine.origin + fine.spacing * Vec3(x, y, z);
    };

    // coarse pass
    {
        std::vector<Vec3> pts;
        std::vector<size_t> slots;
        pts.reserve(static_cast<size_t>(coarse_n) * coarse_n * coarse_n);
        for (int z = 0; z < coarse_n; ++z)
            for (int y = 0; y < coarse_n; ++y)
                for (int x = 0; x < coarse_n; ++x) {
                    pts.push_back(point_at(x * factor, y * factor, z * factor));
                    slots.push_back(fine.idx(x * factor, y * factor, z * factor));
                }
        evaluate(pts, slots);
    }

    const double lo_band = cfg.iso - cfg.band, hi_band = cfg.iso + cfg.band;
    auto straddles = [&](int x, int y, int z, int step) {
        double mn = std::numeric_limits<double>::max();
        double mx = std::numeric_limits<double>::lowest();
        for (int c = 0; c < 8; ++c) {
            double v = fine.values[fine.idx(x + (c & 1) * step, y + ((c >> 1) & 1) * step,
                                            z + ((c >> 2) & 1) * step)];
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        return mn < hi_band && mx > lo_band;
    };

    // active cells at the coarse level, by fine-lattice anchor
    std::vector<std::array<int, 3>> active;
    for (int z = 0; z + 1 < coarse_n; ++z)
        for (int y = 0; y + 1 < coarse_n; ++y)
            for (int x = 0; x + 1 < coarse_n; ++x)
                if (straddles(x * factor, y * factor, z * factor, factor))
                    active.push_back({x * factor, y * factor, z * factor});

    int step = factor;
    for (int level = 0; level < cfg.refine_levels; ++level) {
        const int half = step / 2;
        // evaluate the refinement lattice of every active cell
        std::vector<Vec3> pts;
        std::vector<size_t> slots;
        for (const auto& cell : active) {
            for (int dz = 0; dz <= 2; ++dz)
                for (int dy = 0; dy <= 2; ++dy)
                    for (int dx = 0; dx <= 2; ++dx) {
                        int x = cell[0] + dx * half, y = cell[1] + dy * half,
                            z = cell[2] + dz * half;
                        size_t id = fine.idx(x, y, z);
                        if (fine.exact[id]) continue;
                        fine.exact[id] = true;  // reserve so it is queued once
                        pts.push_back(point_at(x, y, z));
                        slots.push_back(id);
                    }
        }
        evaluate(pts, slots);

        std::vector<std::array<int, 3>> next;
        for (const auto& cell : active)
            for (int dz = 0; dz < 2; ++dz)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        int x = cell[0] + dx * half, y = cell[1] + dy * half,
                            z = cell[2] + dz * half;
                        if (straddles(x, y, z, half)) next.push_back({x, y, z});
                    }
        active = std::move(next);
        step = half;
    }

    // fill never-refined lattice points by trilinear interpolation from the
    // coarse lattice; they are far from iso by construction
    if (factor > 1) {
        for (int z = 0; z < fine.n; ++z)
            for (int y = 0; y < fine.n; ++y)
                for (int x = 0; x < fine.n; ++x) {
                    size_t id = fine.idx(x, y, z);
                    if (fine.exact[id]) continue;
                    int cx = std::min(x / factor, coarse_n - 2);
                    int cy = std::min(y / factor, coarse_n - 2);
                    int cz = std::min(z / factor, coarse_n - 2);
                    double fx = (static_cast<double>(x) - cx * factor) / factor;
                    double fy = (static_cast<double>(y) - cy * factor) / factor;
                    double fz = (static_cast<double>(z) - cz * factor) / factor;
                    double acc = 0.0;
                    for (int c = 0; c < 8; ++c) {
                        double wx = (c & 1) ? fx : 1.0 - fx;
                        double wy = ((c >> 1) & 1) ? fy : 1.0 - fy;
                        double wz = ((c >> 2) & 1) ? fz : 1.0 - fz;
                        acc += wx * wy * wz *
                               fine.values[fine.idx((cx + (c & 1)) * factor,
                                                    (cy + ((c >> 1) & 1)) * factor,
                                                    (cz + ((c >> 2) & 1)) * factor)];
                    }
                    fine.values[id] = acc;
                }
    }

    ScalarGrid grid;
    grid.nx = grid.ny = grid.nz = fine.n;
    grid.origin = fine.origin;
    grid.spacing = fine.spacing;
    grid.values = std::move(fine.values);
    TriMesh mesh = marching_cubes(grid, cfg.iso);
    if (mesh.empty()) return std::nullopt;
    return mesh;
}

std::optional<TriMesh> reconstruct(const FieldNetwork& net, const BodyAssets& assets,
                                   const FeatureConfig& feat, double beta, const ReconConfig& cfg,
                                   ReconStats* stats) {
    // volume encoded exactly once per body; per-point work happens per batch
    FeatureVolume vol = encode_voxels(assets.grid, net.encoder);
    if (stats) stats->encode_calls++;
    const bool pointwise = net.gate_cfg.enabled && net.gate_cfg.mode == GateMode::Pointwise;

    FieldFn field = [&](const std::vector<Vec3>& pts, Eigen::VectorXd& out) {
        FeatureBatch fb = assemble_features(pts, assets, vol, feat, beta);
        ForwardCache cache;
        out = phi_si_forward(net, fb.features, vol, cache, pointwise ? &fb.points : nullptr);
    };
    return reconstruct_field(field, assets.domain, cfg, stats);
}

}  // namespace hilo
