#include "floxels/io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace floxels {

namespace {

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open file: " + path);
    return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
    if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot open file for writing: " + path);
    return out;
}

PointCloud load_ply_ascii(const std::string& path) {
    std::ifstream in = open_in(path, std::ios::in);
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply")
        throw ParseError(path + ": missing ply magic");

    size_t vertex_count = 0;
    std::vector<std::string> props;
    bool in_vertex_element = false;
    bool saw_format = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii")
                throw ParseError(path + ": only ascii PLY is supported");
            saw_format = true;
        } else if (tok == "element") {
            std::string name;
            size_t count;
            ls >> name >> count;
            in_vertex_element = (name == "vertex");
            if (in_vertex_element) vertex_count = count;
        } else if (tok == "property" && in_vertex_element) {
            std::string type, name;
            ls >> type >> name;
            if (type == "list") throw ParseError(path + ": list property in vertex element");
            props.push_back(name);
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!saw_format) throw ParseError(path + ": missing format line");

    auto col = [&](const char* name) -> int {
        auto it = std::find(props.begin(), props.end(), name);
        return it == props.end() ? -1
                                 : static_cast<int>(it - props.begin());
    };
    const int cx = col("x"), cy = col("y"), cz = col("z");
    if (cx < 0 || cy < 0 || cz < 0)
        throw ParseError(path + ": vertex element lacks x/y/z");
    const int cfx = col("flow_x"), cfy = col("flow_y"), cfz = col("flow_z");
    const bool has_flow = cfx >= 0 && cfy >= 0 && cfz >= 0;
    const int clabel = col("label");
    const int cdyn = col("dynamic");

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    if (has_flow) cloud.gt_flow.emplace();
    if (clabel >= 0) cloud.labels.emplace();
    if (cdyn >= 0) cloud.dynamic_mask.emplace();

    std::vector<double> row(props.size());
    for (size_t v = 0; v < vertex_count; ++v) {
        if (!std::getline(in, line))
            throw ParseError(path + ": truncated vertex list");
        std::istringstream ls(line);
        for (size_t c = 0; c < props.size(); ++c)
            if (!(ls >> row[c]))
                throw ParseError(path + ": malformed vertex record " +
                                 std::to_string(v));
        std::string extra;
        if (ls >> extra)
            throw ParseError(path + ": trailing data in vertex record " +
                             std::to_string(v));
        Point3 p{row[cx], row[cy], row[cz]};
        if (!p.finite())
            throw ParseError(path + ": non-finite coordinate in record " +
                             std::to_string(v));
        cloud.points.push_back(p);
        if (has_flow) {
            Vec3 f{row[cfx], row[cfy], row[cfz]};
            if (!f.finite())
                throw ParseError(path + ": non-finite flow in record " +
                                 std::to_string(v));
            cloud.gt_flow->push_back(f);
        }
        if (clabel >= 0)
            cloud.labels->push_back(static_cast<uint32_t>(row[clabel]));
        if (cdyn >= 0)
            cloud.dynamic_mask->push_back(row[cdyn] != 0.0 ? 1 : 0);
    }
    return cloud;
}

void save_ply_ascii(const std::string& path, const PointCloud& cloud) {
    std::ofstream out = open_out(path, std::ios::out);
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (cloud.gt_flow)
        out << "property float flow_x\nproperty float flow_y\n"
               "property float flow_z\n";
    if (cloud.labels) out << "property uint label\n";
    if (cloud.dynamic_mask) out << "property uchar dynamic\n";
    out << "end_header\n";
    out.precision(9);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        out << p.x << " " << p.y << " " << p.z;
        if (cloud.gt_flow) {
            const Vec3& f = (*cloud.gt_flow)[i];
            out << " " << f.x << " " << f.y << " " << f.z;
        }
        if (cloud.labels) out << " " << (*cloud.labels)[i];
        if (cloud.dynamic_mask)
            out << " " << static_cast<int>((*cloud.dynamic_mask)[i]);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

PointCloud load_xyz_f32(const std::string& path) {
    std::ifstream in = open_in(path, std::ios::binary);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(in.tellg());
    in.seekg(0);
    if (bytes % 12 != 0)
        throw ParseError(path + ": size is not a multiple of 12 bytes");
    const size_t n = bytes / 12;
    std::vector<float> raw(n * 3);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("read failed: " + path);
    PointCloud cloud;
    cloud.points.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Point3 p{raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
        if (!p.finite())
            throw ParseError(path + ": non-finite coordinate at point " +
                             std::to_string(i));
        cloud.points.push_back(p);
    }
    return cloud;
}

void save_xyz_f32(const std::string& path, const PointCloud& cloud) {
    std::ofstream out = open_out(path, std::ios::binary);
    std::vector<float> raw;
    raw.reserve(cloud.size() * 3);
    for (const Point3& p : cloud.points) {
        raw.push_back(static_cast<float>(p.x));
        raw.push_back(static_cast<float>(p.y));
        raw.push_back(static_cast<float>(p.z));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace

PointCloud load_cloud(const std::string& path, CloudFormat format) {
    return format == CloudFormat::ply_ascii ? load_ply_ascii(path)
                                            : load_xyz_f32(path);
}

void save_cloud(const std::string& path, const PointCloud& cloud,
                CloudFormat format) {
    if (format == CloudFormat::ply_ascii)
        save_ply_ascii(path, cloud);
    else
        save_xyz_f32(path, cloud);
}

double SequenceManifest::nominal_dt() const {
    if (frames.size() < 2) return 0.1;
    std::vector<double> gaps;
    for (size_t i = 1; i < frames.size(); ++i)
        gaps.push_back(frames[i].t - frames[i - 1].t);
    std::sort(gaps.begin(), gaps.end());
    size_t mid = gaps.size() / 2;
    if (gaps.size() % 2 == 1) return gaps[mid];
    return 0.5 * (gaps[mid - 1] + gaps[mid]);
}

SequenceManifest load_manifest(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    SequenceManifest m;
    try {
        for (const auto& f : j.at("frames"))
            m.frames.push_back({f.at("path").get<std::string>(),
                                f.at("t").get<double>()});
        m.reference_index = j.at("reference_index").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (m.frames.empty()) throw ParseError(path + ": empty frame list");
    for (size_t i = 1; i < m.frames.size(); ++i)
        if (m.frames[i].t <= m.frames[i - 1].t)
            throw ParseError(path + ": timestamps not strictly increasing");
    if (m.reference_index < 0 ||
        m.reference_index >= static_cast<int>(m.frames.size()))
        throw ParseError(path + ": reference_index out of range");
    // Relative frame paths resolve against the manifest's directory.
    const auto dir = std::filesystem::path(path).parent_path();
    for (auto& f : m.frames) {
        std::filesystem::path p(f.path);
        if (p.is_relative() && !dir.empty()) f.path = (dir / p).string();
    }
    return m;
}

void save_manifest(const std::string& path, const SequenceManifest& m) {
    nlohmann::json j;
    j["frames"] = nlohmann::json::array();
    for (const auto& f : m.frames)
        j["frames"].push_back({{"path", f.path}, {"t", f.t}});
    j["reference_index"] = m.reference_index;
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<Vec3> load_flow_file(const std::string& path) {
    PointCloud as_cloud = load_xyz_f32(path);
    return std::move(as_cloud.points);
}

void save_flow_file(const std::string& path, const std::vector<Vec3>& flow) {
    PointCloud as_cloud;
    as_cloud.points = flow;
    save_xyz_f32(path, as_cloud);
}

void save_cluster_ids(const std::string& path,
                      const std::vector<int32_t>& ids) {
    std::ofstream out = open_out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(ids.data()),
              static_cast<std::streamsize>(ids.size() * sizeof(int32_t)));
    if (!out) throw IoError("write failed: " + path);
}

void save_pgm16(const std::string& path, size_t width, size_t height,
                const std::vector<uint16_t>& pixels) {
    if (pixels.size() != width * height)
        throw InvalidConfig("pgm pixel buffer size mismatch");
    std::ofstream out = open_out(path, std::ios::binary);
    out << "P5\n" << width << " " << height << "\n65535\n";
    // PGM is big-endian for maxval > 255.
    for (uint16_t v : pixels) {
        const char bytes[2] = {static_cast<char>(v >> 8),
                               static_cast<char>(v & 0xff)};
        out.write(bytes, 2);
    }
    if (!out) throw IoError("write failed: " + path);
}

void save_ppm(const std::string& path, size_t width, size_t height,
              const std::vector<uint8_t>& rgb) {
    if (rgb.size() != width * height * 3)
        throw InvalidConfig("ppm pixel buffer size mismatch");
    std::ofstream out = open_out(path, std::ios::binary);
    out << "P6\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()),
              static_cast<std::streamsize>(rgb.size()));
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in = open_in(path, std::ios::in | std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out = open_out(path, std::ios::out | std::ios::binary);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace floxels
