#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "visyn/common.hpp"
#include "visyn/io.hpp"

namespace visyn {

// Triangle mesh with one uv per vertex. Positions are packed xyz.
struct TriMesh {
    std::vector<double> positions;                 // 3n
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<double, 2>> uv;         // n entries, [0,1]^2

    int vertex_count() const { return int(positions.size() / 3); }

    std::array<double, 3> vertex(int i) const {
        return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
    }
};

// Pair of triangles sharing an edge (v0, v1). Symmetric: stored once with a < b.
struct EdgeAdjacency {
    int tri_a, tri_b;
    int v0, v1;
};

inline std::vector<EdgeAdjacency> shared_edges(const TriMesh& mesh) {
    std::map<std::pair<int, int>, int> first_tri;
    std::vector<EdgeAdjacency> out;
    for (int t = 0; t < int(mesh.triangles.size()); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            auto key = std::minmax(a, b);
            auto it = first_tri.find(key);
            if (it == first_tri.end())
                first_tri[key] = t;
            else
                out.push_back({it->second, t, key.first, key.second});
        }
    }
    return out;
}

inline std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
    std::vector<std::vector<int>> adj(mesh.vertex_count());
    auto link = [&](int a, int b) {
        for (int v : adj[a])
            if (v == b) return;
        adj[a].push_back(b);
    };
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            link(tri[e], tri[(e + 1) % 3]);
            link(tri[(e + 1) % 3], tri[e]);
        }
    return adj;
}

// --- OBJ subset: v, vt, f with 1-based a/b (vertex/uv) indices ---------------

inline TriMesh read_obj(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::array<double, 3>> verts;
    std::vector<std::array<double, 2>> uvs;
    struct Face {
        std::array<int, 3> v, t;
    };
    std::vector<Face> faces;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            std::array<double, 3> p{};
            ls >> p[0] >> p[1] >> p[2];
            if (!ls) throw FormatError(path + ": bad vertex at line " + std::to_string(lineno));
            verts.push_back(p);
        } else if (tag == "vt") {
            std::array<double, 2> t{};
            ls >> t[0] >> t[1];
            if (!ls) throw FormatError(path + ": bad uv at line " + std::to_string(lineno));
            uvs.push_back(t);
        } else if (tag == "f") {
            Face f{};
            for (int k = 0; k < 3; ++k) {
                std::string item;
                ls >> item;
                if (item.empty())
                    throw FormatError(path + ": face needs 3 vertices at line " + std::to_string(lineno));
                int vi = 0, ti = 0;
                if (std::sscanf(item.c_str(), "%d/%d", &vi, &ti) < 1)
                    throw FormatError(path + ": bad face entry at line " + std::to_string(lineno));
                f.v[k] = vi - 1;
                f.t[k] = ti > 0 ? ti - 1 : vi - 1;
            }
            std::string extra;
            if (ls >> extra)
                throw FormatError(path + ": only triangles supported, line " + std::to_string(lineno));
            faces.push_back(f);
        }
    }
    TriMesh mesh;
    mesh.positions.reserve(verts.size() * 3);
    for (const auto& p : verts) {
        mesh.positions.push_back(p[0]);
        mesh.positions.push_back(p[1]);
        mesh.positions.push_back(p[2]);
    }
    mesh.uv.assign(verts.size(), {0.0, 0.0});
    for (const auto& f : faces) {
        for (int k = 0; k < 3; ++k) {
            if (f.v[k] < 0 || f.v[k] >= int(verts.size()))
                throw FormatError(path + ": face vertex index out of range");
            if (f.t[k] >= 0 && f.t[k] < int(uvs.size())) mesh.uv[f.v[k]] = uvs[f.t[k]];
        }
        mesh.triangles.push_back(f.v);
    }
    return mesh;
}

inline void write_obj(const std::string& path, const TriMesh& mesh,
                      const std::vector<double>* override_positions = nullptr) {
    const std::vector<double>& pos = override_positions ? *override_positions : mesh.positions;
    if (pos.size() != mesh.positions.size()) throw Error("write_obj: position size mismatch");
    std::ostringstream out;
    out.precision(9);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        out << "v " << pos[3 * i] << " " << pos[3 * i + 1] << " " << pos[3 * i + 2] << "\n";
    for (const auto& t : mesh.uv) out << "vt " << t[0] << " " << t[1] << "\n";
    for (const auto& tri : mesh.triangles)
        out << "f " << tri[0] + 1 << "/" << tri[0] + 1 << " " << tri[1] + 1 << "/" << tri[1] + 1
            << " " << tri[2] + 1 << "/" << tri[2] + 1 << "\n";
    write_text_file(path, out.str());
}

}  // namespace visyn
