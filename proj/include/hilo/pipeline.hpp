// Training and inference: point sampling around the target surface, assembly
// of the concatenated point feature (banded distance encoding, interpolated
// grid feature, body/cloth normals), the squared-error occupancy objective, a
// root-mean-square gradient optimizer, the training loop, and coarse-to-fine
// grid reconstruction ending in marching cubes.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hilo/corpus.hpp"
#include "hilo/field_net.hpp"
#include "hilo/hf_encoding.hpp"
#include "hilo/marching_cubes.hpp"
#include "hilo/proxy_body.hpp"
#include "hilo/voxel_fields.hpp"

namespace hilo {

struct TrainConfig {
    int points_per_step = 8000;
    double near_fraction = 0.9;
    double near_sigma = 0.05;  // isotropic offset around surface samples
    double uniform_fraction = 0.1;
    double lr = 1e-4;
    double decay = 0.99;
    double eps = 1e-8;
    std::int64_t total_iters = 2000;
    std::int64_t trace_every = 10;
    double abort_factor = 10.0;
    int abort_patience = 100;

    void validate() const;
};

// Which blocks compose the per-point feature, and the annealing schedule.
struct FeatureConfig {
    HfConfig hf;                // banded distance encoding
    bool hf_enabled = true;     // off = raw signed distance only (1 channel)
    bool progressive = true;    // off = all bands active from step 0
    std::int64_t anneal_iters = 2000;
    bool voxel_feature = true;  // interpolated grid feature channels
    int feature_channels = 22;  // grid encoder output channels

    int dim() const {
        return (hf_enabled ? hf.dim() : 1) + (voxel_feature ? feature_channels : 0) + 6;
    }
    double max_beta() const { return static_cast<double>(hf.num_bands); }
    double beta_at(std::int64_t iter) const {
        if (!progressive) return max_beta();
        return ProgressiveSchedule{anneal_iters, max_beta()}.beta_at(iter);
    }
};

struct ReconConfig {
    int resolution = 64;     // initial lattice points per axis
    int refine_levels = 2;   // final lattice = (resolution-1)*2^levels + 1
    double iso = 0.5;
    double band = 0.02;      // straddle band for refinement

    void validate() const;
};

struct PipelineConfig {
    TrainConfig train;
    FeatureConfig feat;
    GateConfig gate;
    std::vector<int> hidden_dims{512, 256, 128};
    int voxel_resolution = 32;
    double padding_frac = 0.1;  // box padding as a fraction of the diagonal
    ReconConfig recon;

    LayerSpec layer_spec() const;
};

// Immutable per-subject geometry: body (the conditioning input), clean target
// (ground truth), their trees, and the body occupancy grid. Address-stable.
struct BodyAssets {
    TriMesh body;
    TriMesh target;
    BvhTree body_tree;
    BvhTree target_tree;
    bool body_watertight = false;
    VoxelGrid grid;
    Aabb domain;  // padded target bounds; sampling and reconstruction domain

    BodyAssets(const BodyAssets&) = delete;
    BodyAssets& operator=(const BodyAssets&) = delete;

  private:
    BodyAssets() = default;
    friend std::unique_ptr<BodyAssets> make_body_assets(TriMesh body, TriMesh target,
                                                        int voxel_resolution,
                                                        double padding_frac);
};

std::unique_ptr<BodyAssets> make_body_assets(TriMesh body, TriMesh target, int voxel_resolution,
                                             double padding_frac);

struct SampleBatch {
    std::vector<Vec3> points;
    Eigen::VectorXd gt;  // occupancy in {0,1} from the target inside test
};

// Near-surface samples (area-uniform surface points plus isotropic offsets)
// and uniform box samples, labelled by the target inside test.
SampleBatch sample_points(const BodyAssets& assets, const TrainConfig& cfg, Rng& rng);

struct FeatureBatch {
    Eigen::MatrixXd features;   // n x FeatureConfig::dim()
    std::vector<Vec3> points;
    std::vector<double> body_sdf;
};

// Per point: signed distance to the body -> banded encoding, interpolated
// grid feature, body and cloth normals, concatenated in that order.
FeatureBatch assemble_features(const std::vector<Vec3>& points, const BodyAssets& assets,
                               const FeatureVolume& vol, const FeatureConfig& feat, double beta);

// Routes the voxel-feature block of d_features back onto the volume values.
void scatter_voxel_feature_gradients(const FeatureConfig& feat, const FeatureBatch& batch,
                                     const FeatureVolume& vol, const Eigen::MatrixXd& d_features,
                                     std::vector<double>& d_volume);

struct LossResult {
    double loss;
    Eigen::VectorXd grad;  // d loss / d prediction
};
LossResult occupancy_loss(const Eigen::VectorXd& predicted, const Eigen::VectorXd& gt);

// Root-mean-square gradient step: v <- decay*v + (1-decay)*g^2,
// p <- p - lr*g/(sqrt(v)+eps). Steps with any non-finite gradient are skipped.
struct RmsProp {
    double lr = 1e-4, decay = 0.99, eps = 1e-8;
    std::vector<double> v;  // flat state in parameter declaration order
    std::int64_t skipped = 0;

    void step(FieldNetwork& net, FieldGradients& grads);
};

struct TraceRow {
    std::int64_t iter;
    double beta;
    double loss;
    double grad_norm;
};

struct TrainResult {
    FieldNetwork net;
    std::vector<TraceRow> trace;
    std::int64_t iters_run = 0;
    bool aborted = false;
    std::string abort_reason;
};

// Sampling streams derive per iteration from (seed, iteration), so a resumed
// run replays exactly as an uninterrupted one. `resume_from` continues
// training the given network starting at `start_iter` (optimizer averages
// restart from zero).
TrainResult train(const PipelineConfig& cfg, const BodyAssets& assets, std::uint64_t seed,
                  const FieldNetwork* resume_from = nullptr, std::int64_t start_iter = 0);

// loss trace CSV: "iter,beta,loss" rows
void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

struct ReconStats {
    std::int64_t encode_calls = 0;
    std::int64_t point_batches = 0;
    std::int64_t points_evaluated = 0;
};

// Batch field evaluator: fills out[i] for each query point.
using FieldFn = std::function<void(const std::vector<Vec3>&, Eigen::VectorXd&)>;

// Coarse lattice evaluation, band-limited binary refinement near the iso
// surface, then marching cubes on the finest lattice. Returns nothing when
// the field never crosses iso ("no surface").
std::optional<TriMesh> reconstruct_field(const FieldFn& field, const Aabb& box,
                                         const ReconConfig& cfg, ReconStats* stats = nullptr);

// Full inference for a trained network: encode the body grid once, then
// evaluate the field over the reconstruction lattice. beta is the frozen
// encoding progress (normally the final annealed value).
std::optional<TriMesh> reconstruct(const FieldNetwork& net, const BodyAssets& assets,
                                   const FeatureConfig& feat, double beta, const ReconConfig& cfg,
                                   ReconStats* stats = nullptr);

}  // namespace hilo
