#include "hilo/field_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hilo/rng.hpp"

namespace hilo {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Conv3dLayer make_conv(int in_ch, int out_ch) {
    Conv3dLayer l;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.weights.assign(static_cast<size_t>(out_ch) * in_ch * 27, 0.0);
    l.bias.assign(out_ch, 0.0);
    return l;
}

}  // namespace

void LayerSpec::validate() const {
    if (dims.size() < 2) throw std::runtime_error("layer spec needs at least input and output dims");
    if (dims.back() != 1) throw std::runtime_error("layer spec must end in a single output unit");
    for (int d : dims)
        if (d < 1) throw std::runtime_error("layer spec dims must be positive");
}

size_t FieldNetwork::parameter_count() const {
    size_t n = 0;
    visit_parameters([&n](const double*, size_t c) { n += c; });
    return n;
}

bool FieldNetwork::all_finite() const {
    bool ok = true;
    visit_parameters([&ok](const double* p, size_t n) {
        for (size_t i = 0; i < n; ++i)
            if (!std::isfinite(p[i])) ok = false;
    });
    return ok;
}

FieldNetwork init_params(const LayerSpec& spec, const GateConfig& gate_cfg, int feature_channels,
                         std::uint64_t seed) {
    spec.validate();
    FieldNetwork net;
    net.spec = spec;
    net.gate_cfg = gate_cfg;
    net.feature_channels = feature_channels;

    Rng rng(derive_seed(seed, "net-init"));
    const int n_linear = static_cast<int>(spec.dims.size()) - 1;
    for (int l = 0; l < n_linear; ++l) {
        int fan_in = spec.dims[l], fan_out = spec.dims[l + 1];
        double a = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-a, a);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    if (gate_cfg.enabled) {
        for (int j = 0; j < spec.hidden_layers(); ++j)
            net.gates.push_back({make_conv(feature_channels, spec.dims[j + 1])});
    }
    if (gate_cfg.output_scalar) net.output_gate = {make_conv(feature_channels, 1)};

    net.encoder = make_grid_encoder(feature_channels);
    for (auto& layer : net.encoder.layers) {
        double a = std::sqrt(6.0 / (layer.in_channels * 27 + layer.out_channels * 27));
        for (auto& w : layer.weights) w = rng.uniform(-a, a);
    }
    return net;
}

std::vector<double> pool_shift_summary(const FeatureVolume& vol) {
    const int d = vol.resolution[0], h = vol.resolution[1], w = vol.resolution[2];
    const size_t plane = vol.cell_count();
    const double inv = 1.0 / static_cast<double>(plane);
    std::vector<double> summary(static_cast<size_t>(vol.channels) * 27, 0.0);
    for (int c = 0; c < vol.channels; ++c) {
        const double* in_c = vol.values.data() + plane * c;
        int tap = 0;
        for (int kz = -1; kz <= 1; ++kz)
            for (int ky = -1; ky <= 1; ++ky)
                for (int kx = -1; kx <= 1; ++kx, ++tap) {
                    // sum of in[z+kz, y+ky, x+kx] over all output voxels with
                    // zero padding = sum over the clipped input region
                    double acc = 0.0;
                    int z0 = std::max(0, kz), z1 = std::min(d, d + kz);
                    int y0 = std::max(0, ky), y1 = std::min(h, h + ky);
                    int x0 = std::max(0, kx), x1 = std::min(w, w + kx);
                    for (int z = z0; z < z1; ++z)
                        for (int y = y0; y < y1; ++y) {
                            const double* row = in_c + (static_cast<size_t>(z) * h + y) * w;
                            for (int x = x0; x < x1; ++x) acc += row[x];
                        }
                    summary[static_cast<size_t>(c) * 27 + tap] = acc * inv;
                }
    }
    return summary;
}

void pool_shift_summary_backward(const FeatureVolume& vol, const std::vector<double>& d_summary,
                                 std::vector<double>& d_values) {
    const int d = vol.resolution[0], h = vol.resolution[1], w = vol.resolution[2];
    const size_t plane = vol.cell_count();
    const double inv = 1.0 / static_cast<double>(plane);
    if (d_values.size() != vol.values.size())
        throw std::runtime_error("pool summary backward: gradient buffer size mismatch");
    for (int c = 0; c < vol.channels; ++c) {
        double* out_c = d_values.data() + plane * c;
        int tap = 0;
        for (int kz = -1; kz <= 1; ++kz)
            for (int ky = -1; ky <= 1; ++ky)
                for (int kx = -1; kx <= 1; ++kx, ++tap) {
                    double g = d_summary[static_cast<size_t>(c) * 27 + tap] * inv;
                    if (g == 0.0) continue;
                    int z0 = std::max(0, kz), z1 = std::min(d, d + kz);
                    int y0 = std::max(0, ky), y1 = std::min(h, h + ky);
                    int x0 = std::max(0, kx), x1 = std::min(w, w + kx);
                    for (int z = z0; z < z1; ++z)
                        for (int y = y0; y < y1; ++y) {
                            double* row = out_c + (static_cast<size_t>(z) * h + y) * w;
                            for (int x = x0; x < x1; ++x) row[x] += g;
                        }
                }
    }
}

namespace {

// Pooled gate response from the precomputed shift summary; exactly equal to
// mean(conv3d(vol)) + bias per channel.
Eigen::VectorXd gate_pre_from_summary(const GateModule& gate, const std::vector<double>& summary,
                                      int channels) {
    if (gate.conv.in_channels != channels)
        throw std::runtime_error("gate: volume channel mismatch");
    Eigen::VectorXd m(gate.conv.out_channels);
    for (int o = 0; o < gate.conv.out_channels; ++o) {
        double acc = gate.conv.bias[o];
        const double* w_o = gate.conv.weights.data() + static_cast<size_t>(o) * channels * 27;
        for (size_t i = 0; i < static_cast<size_t>(channels) * 27; ++i) acc += w_o[i] * summary[i];
        m[o] = acc;
    }
    return m;
}

}  // namespace

Eigen::VectorXd gate_forward(const GateModule& gate, const FeatureVolume& vol) {
    std::vector<double> summary = pool_shift_summary(vol);
    Eigen::VectorXd m = gate_pre_from_summary(gate, summary, vol.channels);
    return m.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::VectorXd phi_si_forward(const FieldNetwork& net, const Eigen::MatrixXd& features,
                               const FeatureVolume& vol, ForwardCache& cache,
                               const std::vector<Vec3>* points) {
    const int n = static_cast<int>(features.rows());
    if (features.cols() != net.spec.dims.front())
        throw std::runtime_error("phi_si: feature dimension " + std::to_string(features.cols()) +
                                 " does not match layer spec input " +
                                 std::to_string(net.spec.dims.front()));
    if (!features.allFinite()) throw std::runtime_error("phi_si: non-finite input feature");
    const bool pointwise = net.gate_cfg.enabled && net.gate_cfg.mode == GateMode::Pointwise;
    if (pointwise && (!points || static_cast<int>(points->size()) != n))
        throw std::runtime_error("phi_si: pointwise gates need one query point per feature row");

    cache = ForwardCache{};
    cache.input = features;
    if (pointwise && points) cache.points = *points;

    const bool needs_volume =
        net.gate_cfg.enabled || net.gate_cfg.output_scalar;
    if (needs_volume) {
        if (vol.channels != net.feature_channels)
            throw std::runtime_error("phi_si: volume channel mismatch");
        if (!pointwise) cache.summary = pool_shift_summary(vol);
    }

    const int hidden = net.spec.hidden_layers();
    Eigen::MatrixXd x = features;
    for (int j = 0; j < hidden; ++j) {
        Eigen::MatrixXd z = (x * net.weights[j].transpose()).rowwise() + net.biases[j].transpose();
        Eigen::MatrixXd a =
            z.unaryExpr([s = net.spec.leaky_slope](double v) { return v > 0.0 ? v : s * v; });
        cache.pre.push_back(std::move(z));
        if (net.gate_cfg.enabled) {
            if (!pointwise) {
                Eigen::VectorXd m = gate_pre_from_summary(net.gates[j], cache.summary, vol.channels);
                Eigen::VectorXd g = m.unaryExpr([](double v) { return sigmoid(v); });
                a = a.array().rowwise() * g.transpose().array();
                cache.gate_pre.push_back(std::move(m));
                cache.gate_value.push_back(std::move(g));
            } else {
                std::vector<double> conv_out =
                    conv3d_forward(vol.values, vol.resolution, net.gates[j].conv);
                FeatureVolume gate_field;
                gate_field.channels = net.gates[j].conv.out_channels;
                gate_field.resolution = vol.resolution;
                gate_field.origin = vol.origin;
                gate_field.voxel_size = vol.voxel_size;
                gate_field.values = std::move(conv_out);
                // conv output already includes the bias
                Eigen::MatrixXd m(n, gate_field.channels);
                for (int i = 0; i < n; ++i)
                    m.row(i) = sample_trilinear(gate_field, (*points)[i]).transpose();
                Eigen::MatrixXd g = m.unaryExpr([](double v) { return sigmoid(v); });
                a = a.array() * g.array();
                cache.gate_conv_out.push_back(std::move(gate_field.values));
                cache.gate_point_pre.push_back(std::move(m));
                cache.gate_point_value.push_back(std::move(g));
            }
        }
        cache.hidden.push_back(a);
        x = std::move(a);
    }

    Eigen::VectorXd out_pre =
        (x * net.weights.back().transpose()).col(0) +
        Eigen::VectorXd::Constant(n, net.biases.back()[0]);
    cache.out_pre = out_pre;
    cache.out_sigmoid = out_pre.unaryExpr([](double v) { return sigmoid(v); });

    if (net.gate_cfg.output_scalar) {
        std::vector<double> summary =
            !cache.summary.empty() ? cache.summary : pool_shift_summary(vol);
        Eigen::VectorXd m = gate_pre_from_summary(net.output_gate, summary, vol.channels);
        cache.out_gate_pre = m[0];
        cache.out_gate_value = sigmoid(m[0]);
        if (cache.summary.empty()) cache.summary = std::move(summary);
        return cache.out_sigmoid * cache.out_gate_value;
    }
    return cache.out_sigmoid;
}

FieldGradients make_gradients(const FieldNetwork& net, int batch_size, size_t volume_values) {
    FieldGradients g;
    for (size_t l = 0; l < net.weights.size(); ++l) {
        g.d_weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.d_biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    for (const auto& gate : net.gates)
        g.d_gates.push_back(make_conv(gate.conv.in_channels, gate.conv.out_channels));
    if (net.gate_cfg.output_scalar)
        g.d_output_gate = make_conv(net.output_gate.conv.in_channels, 1);
    for (const auto& l : net.encoder.layers) {
        Conv3dLayer dl = make_conv(l.in_channels, l.out_channels);
        g.d_encoder.layers.push_back(std::move(dl));
    }
    g.d_encoder.tanh_activation = net.encoder.tanh_activation;
    g.d_features = Eigen::MatrixXd::Zero(batch_size, net.spec.dims.front());
    g.d_volume.assign(volume_values, 0.0);
    return g;
}

void FieldGradients::setZero() {
    for (auto& w : d_weights) w.setZero();
    for (auto& b : d_biases) b.setZero();
    for (auto& g : d_gates) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
    }
    std::fill(d_output_gate.weights.begin(), d_output_gate.weights.end(), 0.0);
    std::fill(d_output_gate.bias.begin(), d_output_gate.bias.end(), 0.0);
    for (auto& l : d_encoder.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    d_features.setZero();
    std::fill(d_volume.begin(), d_volume.end(), 0.0);
}

void phi_si_backward(const FieldNetwork& net, const FeatureVolume& vol, const ForwardCache& cache,
                     const Eigen::VectorXd& upstream, FieldGradients& grads) {
    const int n = static_cast<int>(cache.input.rows());
    const int hidden = net.spec.hidden_layers();
    if (static_cast<int>(cache.pre.size()) != hidden || cache.out_pre.size() != n)
        throw std::runtime_error("phi_si_backward: missing or mismatched forward cache");
    if (upstream.size() != n) throw std::runtime_error("phi_si_backward: upstream size mismatch");
    const bool pointwise = net.gate_cfg.enabled && net.gate_cfg.mode == GateMode::Pointwise;

    std::vector<double> d_summary(cache.summary.size(), 0.0);

    Eigen::VectorXd d_sig = upstream;
    if (net.gate_cfg.output_scalar) {
        double d_gate = upstream.dot(cache.out_sigmoid);
        d_sig = upstream * cache.out_gate_value;
        double dm = d_gate * cache.out_gate_value * (1.0 - cache.out_gate_value);
        const int ch = vol.channels;
        for (int i = 0; i < ch * 27; ++i)
            grads.d_output_gate.weights[i] += dm * cache.summary[i];
        grads.d_output_gate.bias[0] += dm;
        for (int i = 0; i < ch * 27; ++i) d_summary[i] += dm * net.output_gate.conv.weights[i];
    }

    Eigen::VectorXd d_out_pre =
        d_sig.array() * cache.out_sigmoid.array() * (1.0 - cache.out_sigmoid.array());

    const Eigen::MatrixXd& last_hidden = hidden > 0 ? cache.hidden.back() : cache.input;
    grads.d_weights.back().noalias() += d_out_pre.transpose() * last_hidden;
    grads.d_biases.back()[0] += d_out_pre.sum();
    Eigen::MatrixXd d_h = d_out_pre * net.weights.back();  // n x d_last

    for (int j = hidden - 1; j >= 0; --j) {
        Eigen::MatrixXd d_a;
        if (net.gate_cfg.enabled) {
            const Eigen::MatrixXd a = cache.pre[j].unaryExpr(
                [s = net.spec.leaky_slope](double v) { return v > 0.0 ? v : s * v; });
            if (!pointwise) {
                const Eigen::VectorXd& g = cache.gate_value[j];
                Eigen::VectorXd d_g = (d_h.array() * a.array()).colwise().sum().transpose();
                d_a = d_h.array().rowwise() * g.transpose().array();
                Eigen::VectorXd dm = d_g.array() * g.array() * (1.0 - g.array());
                const int ch = vol.channels;
                for (int o = 0; o < net.gates[j].conv.out_channels; ++o) {
                    double m = dm[o];
                    if (m == 0.0) continue;
                    double* wgrad =
                        grads.d_gates[j].weights.data() + static_cast<size_t>(o) * ch * 27;
                    const double* wval =
                        net.gates[j].conv.weights.data() + static_cast<size_t>(o) * ch * 27;
                    for (int i = 0; i < ch * 27; ++i) {
                        wgrad[i] += m * cache.summary[i];
                        d_summary[i] += m * wval[i];
                    }
                    grads.d_gates[j].bias[o] += m;
                }
            } else {
                const Eigen::MatrixXd& g = cache.gate_point_value[j];
                Eigen::MatrixXd d_g = d_h.array() * a.array();
                d_a = d_h.array() * g.array();
                Eigen::MatrixXd dm = d_g.array() * g.array() * (1.0 - g.array());
                // scatter per-point gate gradients into the conv output field
                FeatureVolume gate_field;
                gate_field.channels = net.gates[j].conv.out_channels;
                gate_field.resolution = vol.resolution;
                gate_field.origin = vol.origin;
                gate_field.voxel_size = vol.voxel_size;
                gate_field.values = cache.gate_conv_out[j];
                std::vector<double> d_conv(gate_field.values.size(), 0.0);
                for (int i = 0; i < n; ++i)
                    sample_trilinear_backward(gate_field, cache.points[i], dm.row(i).transpose(),
                                              d_conv);
                std::vector<double> d_vol_part;
                conv3d_backward(vol.values, vol.resolution, net.gates[j].conv, d_conv,
                                grads.d_gates[j].weights, grads.d_gates[j].bias, d_vol_part);
                for (size_t i = 0; i < d_vol_part.size(); ++i) grads.d_volume[i] += d_vol_part[i];
            }
        } else {
            d_a = d_h;
        }
        Eigen::MatrixXd d_z = d_a.array() * cache.pre[j].unaryExpr([s = net.spec.leaky_slope](
                                                double v) { return v > 0.0 ? 1.0 : s; }).array();
        const Eigen::MatrixXd& layer_in = j == 0 ? cache.input : cache.hidden[j - 1];
        grads.d_weights[j].noalias() += d_z.transpose() * layer_in;
        grads.d_biases[j] += d_z.colwise().sum().transpose();
        d_h = d_z * net.weights[j];
    }
    grads.d_features += d_h;

    if (!d_summary.empty()) {
        std::vector<double> d_vol_part(vol.values.size(), 0.0);
        pool_shift_summary_backward(vol, d_summary, d_vol_part);
        for (size_t i = 0; i < d_vol_part.size(); ++i) grads.d_volume[i] += d_vol_part[i];
    }
}

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void save_params(const FieldNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write("HILO", 4);
    auto put32 = [&out](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put32(static_cast<std::int32_t>(kCheckpointVersion));
    put32(static_cast<std::int32_t>(net.spec.dims.size()));
    for (int d : net.spec.dims) put32(d);
    out.write(reinterpret_cast<const char*>(&net.spec.leaky_slope), 8);
    put32(net.feature_channels);
    put32(net.gate_cfg.enabled ? 1 : 0);
    put32(net.gate_cfg.mode == GateMode::Pointwise ? 1 : 0);
    put32(net.gate_cfg.output_scalar ? 1 : 0);
    put32(static_cast<std::int32_t>(net.encoder.layers.size()));
    for (const auto& l : net.encoder.layers) {
        put32(l.in_channels);
        put32(l.out_channels);
    }
    net.visit_parameters([&out](const double* p, size_t count) {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * 8));
    });
    if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

FieldNetwork load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "HILO", 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    auto get32 = [&in, &path]() {
        std::int32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
        return v;
    };
    std::int32_t version = get32();
    if (version != static_cast<std::int32_t>(kCheckpointVersion))
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 " in " + path);
    LayerSpec spec;
    spec.dims.resize(get32());
    for (auto& d : spec.dims) d = get32();
    in.read(reinterpret_cast<char*>(&spec.leaky_slope), 8);
    int feature_channels = get32();
    GateConfig gate_cfg;
    gate_cfg.enabled = get32() != 0;
    gate_cfg.mode = get32() != 0 ? GateMode::Pointwise : GateMode::Global;
    gate_cfg.output_scalar = get32() != 0;
    std::int32_t encoder_layers = get32();

    FieldNetwork net = init_params(spec, gate_cfg, feature_channels, 0);
    if (static_cast<std::int32_t>(net.encoder.layers.size()) != encoder_layers)
        throw std::runtime_error("checkpoint encoder shape mismatch in " + path);
    for (auto& l : net.encoder.layers) {
        if (get32() != l.in_channels || get32() != l.out_channels)
            throw std::runtime_error("checkpoint encoder shape mismatch in " + path);
    }
    bool truncated = false;
    net.visit_parameters([&in, &truncated](double* p, size_t count) {
        in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * 8));
        if (!in) truncated = true;
    });
    if (truncated) throw std::runtime_error("truncated checkpoint: " + path);
    // must be exactly consumed
    char extra;
    in.read(&extra, 1);
    if (in) throw std::runtime_error("trailing bytes in checkpoint: " + path);
    return net;
}

}  // namespace hilo
