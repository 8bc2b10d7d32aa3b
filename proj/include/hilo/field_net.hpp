// The spatial-interaction implicit function: fully connected layers modulated
// by gate vectors derived from the encoded voxel volume, with a hand-rolled
// reverse-mode pass over this fixed graph. Forward evaluation over a point
// batch is read-only with respect to the network and may run concurrently;
// backward accumulates into caller-owned gradient buffers.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hilo/voxel_fields.hpp"

namespace hilo {

struct LayerSpec {
    std::vector<int> dims{39, 512, 256, 128, 1};  // input, hidden..., output(=1)
    double leaky_slope = 0.01;                    // hidden activation slope

    int hidden_layers() const { return static_cast<int>(dims.size()) - 2; }
    void validate() const;
};

enum class GateMode { Global, Pointwise };

struct GateConfig {
    bool enabled = true;
    GateMode mode = GateMode::Global;
    bool output_scalar = false;  // extra learned scalar gate on the output
};

// One gate: a kernel-3 conv over the feature volume, pooled globally (or
// sampled at the query point in pointwise mode) and squashed to (0,1).
struct GateModule {
    Conv3dLayer conv;  // feature channels -> gated layer width
};

struct FieldNetwork {
    LayerSpec spec;
    GateConfig gate_cfg;
    int feature_channels = 22;  // channel count of the volumes it gates on

    std::vector<Eigen::MatrixXd> weights;  // [out x in] per linear layer
    std::vector<Eigen::VectorXd> biases;
    std::vector<GateModule> gates;  // one per hidden layer when enabled
    GateModule output_gate;         // 1-channel, present when gate_cfg.output_scalar
    Conv3dStack encoder;            // grid encoder f3d, trained jointly

    size_t parameter_count() const;

    // Enumerates every parameter buffer in declaration order (linear layers,
    // gates, output gate, encoder); the same order used by checkpoints and
    // the optimizer.
    template <typename F>
    void visit_parameters(F&& f) {
        for (size_t l = 0; l < weights.size(); ++l) {
            f(weights[l].data(), static_cast<size_t>(weights[l].size()));
            f(biases[l].data(), static_cast<size_t>(biases[l].size()));
        }
        for (auto& g : gates) {
            f(g.conv.weights.data(), g.conv.weights.size());
            f(g.conv.bias.data(), g.conv.bias.size());
        }
        if (gate_cfg.output_scalar) {
            f(output_gate.conv.weights.data(), output_gate.conv.weights.size());
            f(output_gate.conv.bias.data(), output_gate.conv.bias.size());
        }
        for (auto& l : encoder.layers) {
            f(l.weights.data(), l.weights.size());
            f(l.bias.data(), l.bias.size());
        }
    }
    template <typename F>
    void visit_parameters(F&& f) const {
        const_cast<FieldNetwork*>(this)->visit_parameters(
            [&f](double* p, size_t n) { f(static_cast<const double*>(p), n); });
    }

    bool all_finite() const;
};

// Glorot-uniform linear and encoder weights, zero biases, zero gate convs
// (every initial gate is exactly 0.5). Deterministic for a fixed seed.
FieldNetwork init_params(const LayerSpec& spec, const GateConfig& gate_cfg, int feature_channels,
                         std::uint64_t seed);

// Mean of the conv response over the whole volume per output channel, padded
// with zeros, divided by the full voxel count: S[c][tap] summary so the
// pooled conv never materializes the conv output.
std::vector<double> pool_shift_summary(const FeatureVolume& vol);
void pool_shift_summary_backward(const FeatureVolume& vol, const std::vector<double>& d_summary,
                                 std::vector<double>& d_values);

// g = sigmoid(global_average_pool(conv3d(vol))): one gate vector shared by
// every query point of a batch. Throws on channel mismatch.
Eigen::VectorXd gate_forward(const GateModule& gate, const FeatureVolume& vol);

struct ForwardCache {
    Eigen::MatrixXd input;               // n x dims[0]
    std::vector<Eigen::MatrixXd> pre;    // pre-activation per hidden layer
    std::vector<Eigen::MatrixXd> hidden; // gated activation per hidden layer
    std::vector<Eigen::VectorXd> gate_pre;      // pooled conv response per gate
    std::vector<Eigen::VectorXd> gate_value;    // sigmoid of the above
    std::vector<Eigen::MatrixXd> gate_point_pre;    // pointwise mode: n x width
    std::vector<Eigen::MatrixXd> gate_point_value;
    std::vector<std::vector<double>> gate_conv_out;  // pointwise mode conv fields
    std::vector<double> summary;         // pooled shift summary of the volume
    Eigen::VectorXd out_pre;             // final linear output
    Eigen::VectorXd out_sigmoid;         // squashed output before the optional scalar gate
    double out_gate_pre = 0.0;
    double out_gate_value = 1.0;
    std::vector<Vec3> points;            // pointwise mode: where gates were sampled
};

// Occupancy in (0,1) for a batch of concatenated point features. `points` is
// required only in pointwise gate mode (where gates are sampled per point).
Eigen::VectorXd phi_si_forward(const FieldNetwork& net, const Eigen::MatrixXd& features,
                               const FeatureVolume& vol, ForwardCache& cache,
                               const std::vector<Vec3>* points = nullptr);

// Gradient buffers mirroring the network plus its inputs.
struct FieldGradients {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;
    std::vector<Conv3dLayer> d_gates;  // shape-mirrors of the gate convs
    Conv3dLayer d_output_gate;
    Conv3dStack d_encoder;
    Eigen::MatrixXd d_features;
    std::vector<double> d_volume;

    void setZero();
    template <typename F>
    void visit_parameters(const FieldNetwork& net, F&& f) {
        for (size_t l = 0; l < d_weights.size(); ++l) {
            f(d_weights[l].data(), static_cast<size_t>(d_weights[l].size()));
            f(d_biases[l].data(), static_cast<size_t>(d_biases[l].size()));
        }
        for (auto& g : d_gates) {
            f(g.weights.data(), g.weights.size());
            f(g.bias.data(), g.bias.size());
        }
        if (net.gate_cfg.output_scalar) {
            f(d_output_gate.weights.data(), d_output_gate.weights.size());
            f(d_output_gate.bias.data(), d_output_gate.bias.size());
        }
        for (auto& l : d_encoder.layers) {
            f(l.weights.data(), l.weights.size());
            f(l.bias.data(), l.bias.size());
        }
    }
};

FieldGradients make_gradients(const FieldNetwork& net, int batch_size, size_t volume_values);

// Reverse pass matching a prior phi_si_forward with the same cache. Gradients
// are accumulated (not overwritten) into `grads`; d_volume covers the gate
// path only (the trilinear feature path is the caller's).
void phi_si_backward(const FieldNetwork& net, const FeatureVolume& vol, const ForwardCache& cache,
                     const Eigen::VectorXd& upstream, FieldGradients& grads);

// Checkpoint: magic "HILO", format version, layer spec, gate configuration,
// feature channels, encoder shape, then little-endian float64 parameters in
// declaration order. Round-trips are bit exact.
void save_params(const FieldNetwork& net, const std::string& path);
FieldNetwork load_params(const std::string& path);

}  // namespace hilo
