#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace floxels {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }
    double norm_xy() const { return std::hypot(x, y); }

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    bool operator==(const Vec3& o) const = default;
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

using Point3 = Vec3;

struct Aabb {
    Vec3 min;
    Vec3 max;

    bool valid() const {
        return min.x <= max.x && min.y <= max.y && min.z <= max.z;
    }
    Vec3 extent() const { return max - min; }
    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    Aabb expanded(double margin) const {
        Vec3 m{margin, margin, margin};
        return {min - m, max + m};
    }
    Aabb merged(const Aabb& o) const {
        return {{std::min(min.x, o.min.x), std::min(min.y, o.min.y),
                 std::min(min.z, o.min.z)},
                {std::max(max.x, o.max.x), std::max(max.y, o.max.y),
                 std::max(max.z, o.max.z)}};
    }
};

// Error taxonomy shared by the CLI exit-code contract:
// validation/usage -> 1, I/O -> 2, numeric -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : Error {
    using Error::Error;
};
struct InvalidConfig : Error {
    using Error::Error;
};
struct InvalidSpec : Error {
    using Error::Error;
};
struct MissingGroundTruth : Error {
    using Error::Error;
};
struct MissingLabels : Error {
    using Error::Error;
};
struct LengthMismatch : Error {
    using Error::Error;
};
struct OnCellBoundary : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};
struct ParseError : IoError {
    using IoError::IoError;
};

struct NonFiniteGradient : Error {
    using Error::Error;
};

}  // namespace floxels
