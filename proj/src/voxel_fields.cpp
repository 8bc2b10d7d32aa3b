#include "hilo/voxel_fields.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hilo {

VoxelGrid voxelize(const TriMesh& mesh, const BvhTree& tree, std::array<int, 3> resolution,
                   double padding) {
    if (mesh.faces.empty()) throw std::runtime_error("voxelize: empty geometry");
    if (padding < 0) throw std::runtime_error("voxelize: padding must be >= 0");
    for (int r : resolution)
        if (r < 2) throw std::runtime_error("voxelize: resolution components must be >= 2");
    if (!mesh.is_watertight()) throw std::runtime_error("voxelize: mesh not watertight");

    Aabb box = mesh.bounds();
    box.lo -= Vec3::Constant(padding);
    box.hi += Vec3::Constant(padding);
    Vec3 ext = box.extent();
    // cubic voxels: the longest padded axis spans its grid dimension exactly,
    // the padded box is centered in the remaining slack
    double vs = 0.0;
    vs = std::max(vs, ext.x() / resolution[2]);
    vs = std::max(vs, ext.y() / resolution[1]);
    vs = std::max(vs, ext.z() / resolution[0]);

    VoxelGrid grid;
    grid.resolution = resolution;
    grid.voxel_size = vs;
    Vec3 grid_extent(vs * resolution[2], vs * resolution[1], vs * resolution[0]);
    grid.origin = box.center() - 0.5 * grid_extent;
    grid.values.assign(grid.cell_count(), 0.0);

    size_t idx = 0;
    for (int z = 0; z < resolution[0]; ++z)
        for (int y = 0; y < resolution[1]; ++y)
            for (int x = 0; x < resolution[2]; ++x, ++idx)
                grid.values[idx] = inside_test(tree, grid.voxel_center(x, y, z)) ? 1.0 : 0.0;
    return grid;
}

size_t Conv3dStack::parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

Conv3dStack make_grid_encoder(int feature_channels) {
    Conv3dStack stack;
    auto make_layer = [](int in_ch, int out_ch) {
        Conv3dLayer l;
        l.in_channels = in_ch;
        l.out_channels = out_ch;
        l.weights.assign(static_cast<size_t>(out_ch) * in_ch * 27, 0.0);
        l.bias.assign(out_ch, 0.0);
        return l;
    };
    stack.layers.push_back(make_layer(1, 8));
    stack.layers.push_back(make_layer(8, feature_channels));
    return stack;
}

std::vector<double> conv3d_forward(const std::vector<double>& input, std::array<int, 3> res,
                                   const Conv3dLayer& layer) {
    const int d = res[0], h = res[1], w = res[2];
    const size_t plane = static_cast<size_t>(d) * h * w;
    if (input.size() != plane * layer.in_channels)
        throw std::runtime_error("conv3d: input channel/shape mismatch");
    std::vector<double> out(plane * layer.out_channels, 0.0);

    // row-resident accumulation: for each output row, fold the nine
    // neighboring input rows through their 3-tap x kernels
    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y) {
            const size_t row_off = (static_cast<size_t>(z) * h + y) * w;
            for (int o = 0; o < layer.out_channels; ++o) {
                double* __restrict__ orow = out.data() + plane * o + row_off;
                for (int x = 0; x < w; ++x) orow[x] = layer.bias[o];
                for (int c = 0; c < layer.in_channels; ++c) {
                    const double* in_c = input.data() + plane * c;
                    const double* w_oc =
                        layer.weights.data() +
                        (static_cast<size_t>(o) * layer.in_channels + c) * 27;
                    for (int kz = -1; kz <= 1; ++kz) {
                        const int zz = z + kz;
                        if (zz < 0 || zz >= d) continue;
                        for (int ky = -1; ky <= 1; ++ky) {
                            const int yy = y + ky;
                            if (yy < 0 || yy >= h) continue;
                            const double* __restrict__ irow =
                                in_c + (static_cast<size_t>(zz) * h + yy) * w;
                            const double* w3 = w_oc + ((kz + 1) * 3 + (ky + 1)) * 3;
                            const double w0 = w3[0], w1 = w3[1], w2 = w3[2];
                            orow[0] += w1 * irow[0] + w2 * irow[1];
                            for (int x = 1; x + 1 < w; ++x)
                                orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
                            orow[w - 1] += w0 * irow[w - 2] + w1 * irow[w - 1];
                        }
                    }
                }
            }
        }
    return out;
}

void conv3d_backward(const std::vector<double>& input, std::array<int, 3> res,
                     const Conv3dLayer& layer, const std::vector<double>& d_output,
                     std::vector<double>& d_weights, std::vector<double>& d_bias,
                     std::vector<double>& d_input) {
    const int d = res[0], h = res[1], w = res[2];
    const size_t plane = static_cast<size_t>(d) * h * w;
    d_input.assign(plane * layer.in_channels, 0.0);
    if (d_weights.size() != layer.weights.size() || d_bias.size() != layer.bias.size())
        throw std::runtime_error("conv3d backward: gradient buffer shape mismatch");

    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y) {
            const size_t row_off = (static_cast<size_t>(z) * h + y) * w;
            for (int o = 0; o < layer.out_channels; ++o) {
                const double* __restrict__ grow = d_output.data() + plane * o + row_off;
                double bias_acc = 0.0;
                for (int x = 0; x < w; ++x) bias_acc += grow[x];
                d_bias[o] += bias_acc;
                for (int c = 0; c < layer.in_channels; ++c) {
                    const double* in_c = input.data() + plane * c;
                    double* din_c = d_input.data() + plane * c;
                    const size_t wbase =
                        (static_cast<size_t>(o) * layer.in_channels + c) * 27;
                    for (int kz = -1; kz <= 1; ++kz) {
                        const int zz = z + kz;
                        if (zz < 0 || zz >= d) continue;
                        for (int ky = -1; ky <= 1; ++ky) {
                            const int yy = y + ky;
                            if (yy < 0 || yy >= h) continue;
                            const double* __restrict__ irow =
                                in_c + (static_cast<size_t>(zz) * h + yy) * w;
                            double* __restrict__ drow =
                                din_c + (static_cast<size_t>(zz) * h + yy) * w;
                            const size_t wk = wbase + ((kz + 1) * 3 + (ky + 1)) * 3;
                            const double w0 = layer.weights[wk], w1 = layer.weights[wk + 1],
                                         w2 = layer.weights[wk + 2];
                            double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                            a1 += grow[0] * irow[0];
                            a2 += grow[0] * irow[1];
                            drow[0] += w1 * grow[0];
                            drow[1] += w2 * grow[0];
                            for (int x = 1; x + 1 < w; ++x) {
                                const double g = grow[x];
                                a0 += g * irow[x - 1];
                                a1 += g * irow[x];
                                a2 += g * irow[x + 1];
                                drow[x - 1] += w0 * g;
                                drow[x] += w1 * g;
                                drow[x + 1] += w2 * g;
                            }
                            const double gl = grow[w - 1];
                            a0 += gl * irow[w - 2];
                            a1 += gl * irow[w - 1];
                            drow[w - 2] += w0 * gl;
                            drow[w - 1] += w1 * gl;
                            d_weights[wk] += a0;
                            d_weights[wk + 1] += a1;
                            d_weights[wk + 2] += a2;
                        }
                    }
                }
            }
        }
}

FeatureVolume encode_voxels(const VoxelGrid& grid, const Conv3dStack& stack, EncodeCache* cache) {
    if (stack.layers.empty()) throw std::runtime_error("encode_voxels: empty conv stack");
    if (stack.layers.front().in_channels != 1)
        throw std::runtime_error("encode_voxels: stack must take 1 input channel");

    std::vector<double> current = grid.values;
    if (cache) {
        cache->pre.clear();
        cache->post.clear();
    }
    for (const auto& layer : stack.layers) {
        std::vector<double> pre = conv3d_forward(current, grid.resolution, layer);
        if (stack.tanh_activation) {
            current.resize(pre.size());
            for (size_t i = 0; i < pre.size(); ++i) current[i] = std::tanh(pre[i]);
        } else {
            current = pre;
        }
        if (cache) {
            cache->pre.push_back(std::move(pre));
            cache->post.push_back(current);
        }
    }

    FeatureVolume vol;
    vol.channels = stack.layers.back().out_channels;
    vol.resolution = grid.resolution;
    vol.origin = grid.origin;
    vol.voxel_size = grid.voxel_size;
    vol.values = std::move(current);
    return vol;
}

void encode_voxels_backward(const VoxelGrid& grid, const Conv3dStack& stack,
                            const EncodeCache& cache, const std::vector<double>& d_volume,
                            Conv3dStack& d_stack) {
    if (cache.pre.size() != stack.layers.size())
        throw std::runtime_error("encode_voxels_backward: cache does not match stack");
    std::vector<double> d_post = d_volume;
    for (size_t li = stack.layers.size(); li-- > 0;) {
        std::vector<double> d_pre(d_post.size());
        if (stack.tanh_activation) {
            const auto& post = cache.post[li];
            for (size_t i = 0; i < d_post.size(); ++i)
                d_pre[i] = d_post[i] * (1.0 - post[i] * post[i]);
        } else {
            d_pre = d_post;
        }
        const std::vector<double>& input = li == 0 ? grid.values : cache.post[li - 1];
        std::vector<double> d_input;
        conv3d_backward(input, grid.resolution, stack.layers[li], d_pre,
                        d_stack.layers[li].weights, d_stack.layers[li].bias, d_input);
        d_post = std::move(d_input);
    }
}

namespace {

struct TrilinearCell {
    int x0, y0, z0;
    double fx, fy, fz;
};

TrilinearCell locate(const FeatureVolume& vol, const Vec3& p) {
    const int w = vol.resolution[2], h = vol.resolution[1], d = vol.resolution[0];
    Vec3 u = (p - vol.origin) / vol.voxel_size - Vec3::Constant(0.5);
    auto clamp_axis = [](double v, int n) { return std::clamp(v, 0.0, static_cast<double>(n - 1)); };
    double ux = clamp_axis(u.x(), w), uy = clamp_axis(u.y(), h), uz = clamp_axis(u.z(), d);
    TrilinearCell c;
    c.x0 = std::min(static_cast<int>(ux), w - 2);
    c.y0 = std::min(static_cast<int>(uy), h - 2);
    c.z0 = std::min(static_cast<int>(uz), d - 2);
    c.fx = ux - c.x0;
    c.fy = uy - c.y0;
    c.fz = uz - c.z0;
    return c;
}

}  // namespace

Eigen::VectorXd sample_trilinear(const FeatureVolume& vol, const Vec3& p) {
    const int w = vol.resolution[2], h = vol.resolution[1], d = vol.resolution[0];
    TrilinearCell c = locate(vol, p);
    double wx[2] = {1.0 - c.fx, c.fx}, wy[2] = {1.0 - c.fy, c.fy}, wz[2] = {1.0 - c.fz, c.fz};
    const size_t plane = static_cast<size_t>(d) * h * w;

    Eigen::VectorXd out = Eigen::VectorXd::Zero(vol.channels);
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                double weight = wx[dx] * wy[dy] * wz[dz];
                if (weight == 0.0) continue;
                size_t base =
                    (static_cast<size_t>(c.z0 + dz) * h + (c.y0 + dy)) * w + (c.x0 + dx);
                for (int ch = 0; ch < vol.channels; ++ch)
                    out[ch] += weight * vol.values[plane * ch + base];
            }
    return out;
}

void sample_trilinear_backward(const FeatureVolume& vol, const Vec3& p,
                               const Eigen::VectorXd& upstream, std::vector<double>& d_values) {
    const int w = vol.resolution[2], h = vol.resolution[1], d = vol.resolution[0];
    if (d_values.size() != vol.values.size())
        throw std::runtime_error("sample_trilinear_backward: gradient buffer size mismatch");
    TrilinearCell c = locate(vol, p);
    double wx[2] = {1.0 - c.fx, c.fx}, wy[2] = {1.0 - c.fy, c.fy}, wz[2] = {1.0 - c.fz, c.fz};
    const size_t plane = static_cast<size_t>(d) * h * w;

    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                double weight = wx[dx] * wy[dy] * wz[dz];
                if (weight == 0.0) continue;
                size_t base =
                    (static_cast<size_t>(c.z0 + dz) * h + (c.y0 + dy)) * w + (c.x0 + dx);
                for (int ch = 0; ch < vol.channels; ++ch)
                    d_values[plane * ch + base] += weight * upstream[ch];
            }
}

namespace {
constexpr char kVolumeMagic[8] = {'H', 'I', 'L', 'O', 'V', 'O', 'X', '1'};
}

void write_volume_dump(const std::string& path, std::array<int, 3> resolution, const Vec3& origin,
                       double voxel_size, int channels, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write volume dump: " + path);
    out.write(kVolumeMagic, 8);
    std::int32_t res32[3] = {resolution[0], resolution[1], resolution[2]};
    out.write(reinterpret_cast<const char*>(res32), sizeof(res32));
    double geo[4] = {origin.x(), origin.y(), origin.z(), voxel_size};
    out.write(reinterpret_cast<const char*>(geo), sizeof(geo));
    std::int32_t ch32 = channels;
    out.write(reinterpret_cast<const char*>(&ch32), sizeof(ch32));
    std::vector<float> f(values.size());
    for (size_t i = 0; i < values.size(); ++i) f[i] = static_cast<float>(values[i]);
    out.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(float)));
    if (!out) throw std::runtime_error("short write on volume dump: " + path);
}

FeatureVolume read_volume_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open volume dump: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kVolumeMagic, 8) != 0)
        throw std::runtime_error("bad volume dump magic: " + path);
    std::int32_t res32[3];
    in.read(reinterpret_cast<char*>(res32), sizeof(res32));
    double geo[4];
    in.read(reinterpret_cast<char*>(geo), sizeof(geo));
    std::int32_t ch32;
    in.read(reinterpret_cast<char*>(&ch32), sizeof(ch32));
    if (!in) throw std::runtime_error("truncated volume dump header: " + path);

    FeatureVolume vol;
    vol.resolution = {res32[0], res32[1], res32[2]};
    vol.origin = Vec3(geo[0], geo[1], geo[2]);
    vol.voxel_size = geo[3];
    vol.channels = ch32;
    size_t count = vol.cell_count() * static_cast<size_t>(ch32);
    std::vector<float> f(count);
    in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw std::runtime_error("truncated volume dump data: " + path);
    vol.values.assign(f.begin(), f.end());
    return vol;
}

}  // namespace hilo
