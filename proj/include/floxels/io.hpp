#pragma once

#include <string>
#include <vector>

#include "floxels/point_cloud.hpp"

namespace floxels {

enum class CloudFormat { ply_ascii, xyz_f32 };

// ply_ascii: standard ASCII PLY vertex element with float x/y/z; recognized
// optional properties flow_x/flow_y/flow_z (GT flow), label (uint class),
// dynamic (uchar 0/1).
// xyz_f32: headerless little-endian float32 x,y,z triplets (12 bytes/point).
PointCloud load_cloud(const std::string& path, CloudFormat format);
void save_cloud(const std::string& path, const PointCloud& cloud,
                CloudFormat format);

struct ManifestFrame {
    std::string path;
    double t = 0.0;  // seconds
};

struct SequenceManifest {
    std::vector<ManifestFrame> frames;
    int reference_index = 0;

    // Nominal inter-frame interval, median of successive gaps.
    double nominal_dt() const;
};

SequenceManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const SequenceManifest& m);

// Raw little-endian float32 triplets, one per point, reference-cloud order.
std::vector<Vec3> load_flow_file(const std::string& path);
void save_flow_file(const std::string& path, const std::vector<Vec3>& flow);

// Per-point cluster IDs, int32 little-endian.
void save_cluster_ids(const std::string& path,
                      const std::vector<int32_t>& ids);

// 16-bit binary PGM, row-major, values in millimeters.
void save_pgm16(const std::string& path, size_t width, size_t height,
                const std::vector<uint16_t>& pixels);

// Binary PPM (P6), 8-bit RGB.
void save_ppm(const std::string& path, size_t width, size_t height,
              const std::vector<uint8_t>& rgb);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace floxels
