// Low-frequency branch: mesh voxelization to a low-resolution occupancy grid,
// a small 3D conv encoder producing a feature volume, and trilinear point
// queries with exact scatter gradients. Grids and volumes are immutable after
// creation; concurrent reads are safe.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hilo/bvh.hpp"
#include "hilo/geom.hpp"
#include "hilo/trimesh.hpp"

namespace hilo {

struct VoxelGrid {
    std::array<int, 3> resolution{32, 32, 32};  // (d, h, w) = (z, y, x) counts
    Vec3 origin = Vec3::Zero();                 // corner of the grid volume
    double voxel_size = 1.0;
    std::vector<double> values;  // occupancy in [0, 1], index (z * h + y) * w + x

    size_t cell_count() const {
        return static_cast<size_t>(resolution[0]) * resolution[1] * resolution[2];
    }
    double at(int x, int y, int z) const {
        return values[(static_cast<size_t>(z) * resolution[1] + y) * resolution[2] + x];
    }
    Vec3 voxel_center(int x, int y, int z) const {
        return origin + voxel_size * Vec3(x + 0.5, y + 0.5, z + 0.5);
    }
};

struct FeatureVolume {
    int channels = 0;
    std::array<int, 3> resolution{0, 0, 0};
    Vec3 origin = Vec3::Zero();
    double voxel_size = 1.0;
    std::vector<double> values;  // index ((c * d + z) * h + y) * w + x

    size_t cell_count() const {
        return static_cast<size_t>(resolution[0]) * resolution[1] * resolution[2];
    }
    double at(int c, int x, int y, int z) const {
        return values[((static_cast<size_t>(c) * resolution[0] + z) * resolution[1] + y) *
                          resolution[2] +
                      x];
    }
};

// Occupancy of the voxel centers of a grid fitted around the mesh bounding box
// expanded by `padding` scene units on every side. Cubic voxels; the padded box
// is centered in the grid and spans it exactly along its longest axis.
// Requires a watertight mesh; throws otherwise.
VoxelGrid voxelize(const TriMesh& mesh, const BvhTree& tree, std::array<int, 3> resolution,
                   double padding);

// One kernel-3, stride-1, zero-padded 3D convolution layer.
struct Conv3dLayer {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> weights;  // [out][in][kz][ky][kx], 27 taps
    std::vector<double> bias;     // [out]
};

struct Conv3dStack {
    std::vector<Conv3dLayer> layers;
    bool tanh_activation = true;  // false = linear (used by tests)

    size_t parameter_count() const;
};

// The grid encoder shape used throughout: channels 1 -> 8 -> feature_channels,
// tanh after each layer, all weights zero until initialized.
Conv3dStack make_grid_encoder(int feature_channels);

std::vector<double> conv3d_forward(const std::vector<double>& input, std::array<int, 3> res,
                                   const Conv3dLayer& layer);
// d_input gets the gradient w.r.t. the layer input; d_weights/d_bias are accumulated.
void conv3d_backward(const std::vector<double>& input, std::array<int, 3> res,
                     const Conv3dLayer& layer, const std::vector<double>& d_output,
                     std::vector<double>& d_weights, std::vector<double>& d_bias,
                     std::vector<double>& d_input);

struct EncodeCache {
    std::vector<std::vector<double>> pre;   // pre-activation of each layer
    std::vector<std::vector<double>> post;  // activation of each layer (input to the next)
};

// Runs the conv stack over the (single-channel) occupancy grid. Output
// resolution equals input resolution. Throws when the stack does not start
// with one input channel.
FeatureVolume encode_voxels(const VoxelGrid& grid, const Conv3dStack& stack,
                            EncodeCache* cache = nullptr);

// Reverse pass through the stack; gradients are accumulated into d_stack,
// which must mirror the stack's layer shapes.
void encode_voxels_backward(const VoxelGrid& grid, const Conv3dStack& stack,
                            const EncodeCache& cache, const std::vector<double>& d_volume,
                            Conv3dStack& d_stack);

// Trilinear interpolation of the 8 surrounding voxel centers, per channel.
// Points beyond the grid clamp to the boundary cell; total function.
Eigen::VectorXd sample_trilinear(const FeatureVolume& vol, const Vec3& p);
// Scatters `upstream` with the trilinear weights into d_values (size of vol.values).
void sample_trilinear_backward(const FeatureVolume& vol, const Vec3& p,
                               const Eigen::VectorXd& upstream, std::vector<double>& d_values);

// Binary dump: 8-byte magic, int32 (d,h,w), float64 origin/voxel size, int32
// channels, then float32 little-endian values in (c, z, y, x) order.
void write_volume_dump(const std::string& path, std::array<int, 3> resolution, const Vec3& origin,
                       double voxel_size, int channels, const std::vector<double>& values);
FeatureVolume read_volume_dump(const std::string& path);

}  // namespace hilo
