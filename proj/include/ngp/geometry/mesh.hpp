#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "ngp/core/error.hpp"

namespace ngp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Triangle soup with shared vertices, object space. `parts` tags each
/// triangle with the component it came from (used for albedo painting).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> parts;

    bool empty() const { return triangles.empty(); }

    double triangle_area(std::size_t i) const {
        const auto& t = triangles[i];
        return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
    }

    double max_vertex_norm() const {
        double m = 0.0;
        for (const auto& v : vertices) m = std::max(m, v.norm());
        return m;
    }

    /// Appends `other`, offsetting its indices and tagging its triangles with `part`.
    void append(const TriangleMesh& other, int part) {
        const int base = static_cast<int>(vertices.size());
        vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
        for (const auto& t : other.triangles) {
            triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
            parts.push_back(part);
        }
    }

    /// Area-weighted vertex normals (outward for consistently wound closed meshes).
    std::vector<Vec3> vertex_normals() const {
        std::vector<Vec3> n(vertices.size(), Vec3::Zero());
        for (const auto& t : triangles) {
            const Vec3 fn = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
            for (int k = 0; k < 3; ++k) n[t[k]] += fn;
        }
        for (auto& v : n) {
            const double len = v.norm();
            v = len > 0 ? Vec3(v / len) : Vec3(0, 0, 1);
        }
        return n;
    }
};

/// Throws InvalidArgument if indices are out of range, parts are missing, or
/// coordinates are non-finite.
inline void validate_mesh(const TriangleMesh& mesh) {
    const int nv = static_cast<int>(mesh.vertices.size());
    for (const auto& v : mesh.vertices) {
        if (!v.allFinite()) throw InvalidArgument("mesh: non-finite vertex");
    }
    for (const auto& t : mesh.triangles) {
        for (int k : t) {
            if (k < 0 || k >= nv) throw InvalidArgument("mesh: triangle index " + std::to_string(k) + " out of range");
        }
    }
    if (!mesh.parts.empty() && mesh.parts.size() != mesh.triangles.size()) {
        throw InvalidArgument("mesh: part tags do not match triangle count");
    }
}

/// Writes `v` and `f` records only (1-based indices).
inline void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os.precision(17);
    for (const auto& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

/// Reads the `v`/`f` subset. Faces with more than three corners are fanned;
/// `a/b/c` corner syntax is accepted and only the position index kept.
inline TriangleMesh read_obj(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    TriangleMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string corner;
            while (ls >> corner) {
                const int i = std::stoi(corner.substr(0, corner.find('/')));
                idx.push_back(i > 0 ? i - 1 : static_cast<int>(mesh.vertices.size()) + i);
            }
            if (idx.size() < 3) throw IoError(path.string() + ":" + std::to_string(lineno) + ": face needs 3 corners");
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
                mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
                mesh.parts.push_back(0);
            }
        }
    }
    validate_mesh(mesh);
    return mesh;
}

/// Closed UV sphere of the given radius (poles are single vertices).
inline TriangleMesh uv_sphere(double radius, int rings = 24, int segments = 48) {
    TriangleMesh m;
    m.vertices.emplace_back(0, radius, 0);
    for (int i = 1; i < rings; ++i) {
        const double eta = M_PI / 2 - M_PI * i / rings;
        for (int j = 0; j < segments; ++j) {
            const double om = 2 * M_PI * j / segments;
            m.vertices.emplace_back(radius * std::cos(eta) * std::sin(om), radius * std::sin(eta),
                                    radius * std::cos(eta) * std::cos(om));
        }
    }
    m.vertices.emplace_back(0, -radius, 0);
    const int south = static_cast<int>(m.vertices.size()) - 1;
    auto ring = [&](int i, int j) { return 1 + (i - 1) * segments + (j % segments); };
    for (int j = 0; j < segments; ++j) m.triangles.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i + 1 < rings; ++i) {
        for (int j = 0; j < segments; ++j) {
            m.triangles.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
            m.triangles.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
        }
    }
    for (int j = 0; j < segments; ++j) m.triangles.push_back({south, ring(rings - 1, j + 1), ring(rings - 1, j)});
    m.parts.assign(m.triangles.size(), 0);
    return m;
}

} // namespace ngp
