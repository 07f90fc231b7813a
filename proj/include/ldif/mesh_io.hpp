#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/trimesh.hpp"

namespace ldif {

namespace detail {

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    std::string tail = s.substr(s.size() - suffix.size());
    for (auto& c : tail) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return tail == suffix;
}

inline void write_real(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

struct PlyProperty {
    std::string name;
    int size = 0;       // bytes per scalar
    bool is_float = false;
    bool is_list = false;
    int count_size = 0;  // list count bytes
};

inline int ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

inline bool ply_type_is_float(const std::string& t) {
    return t == "float" || t == "float32" || t == "double" || t == "float64";
}

inline double read_binary_scalar(const char* p, int size, bool is_float) {
    if (is_float) {
        if (size == 4) {
            float f;
            std::memcpy(&f, p, 4);
            return f;
        }
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    // Integers are stored little-endian two's complement; sizes 1/2/4/8.
    int64_t v = 0;
    std::memcpy(&v, p, size);
    // Sign-extend for signed reads is unnecessary here: indices and counts
    // in valid files are non-negative.
    return static_cast<double>(v & ((size == 8) ? ~0ull : ((1ull << (8 * size)) - 1)));
}

}  // namespace detail

inline TriMesh read_obj(std::istream& in) {
    TriMesh mesh;
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() < 2) continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) throw IoError("OBJ: malformed vertex line: " + line);
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // Accept i, i/j, i//k, i/j/k.
                int v = std::atoi(tok.c_str());
                if (v == 0) throw IoError("OBJ: malformed face token: " + tok);
                if (v < 0) v = static_cast<int>(mesh.vertices.size()) + v + 1;
                idx.push_back(v - 1);
            }
            if (idx.size() < 3) throw IoError("OBJ: face with fewer than 3 vertices");
            for (size_t k = 1; k + 1 < idx.size(); ++k)
                mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
        }
    }
    if (!mesh.indices_valid()) throw IoError("OBJ: face index out of range");
    return mesh;
}

inline TriMesh read_ply(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply") throw IoError("PLY: missing magic");
    bool binary = false;
    struct Element {
        std::string name;
        size_t count = 0;
        std::vector<detail::PlyProperty> props;
    };
    std::vector<Element> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "comment" || tag == "obj_info") continue;
        if (tag == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw IoError("PLY: unsupported format " + fmt);
        } else if (tag == "element") {
            Element e;
            ss >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) throw IoError("PLY: property before element");
            detail::PlyProperty p;
            std::string type;
            ss >> type;
            if (type == "list") {
                std::string count_type, value_type;
                ss >> count_type >> value_type >> p.name;
                p.is_list = true;
                p.count_size = detail::ply_type_size(count_type);
                p.size = detail::ply_type_size(value_type);
                p.is_float = detail::ply_type_is_float(value_type);
            } else {
                ss >> p.name;
                p.size = detail::ply_type_size(type);
                p.is_float = detail::ply_type_is_float(type);
            }
            if (p.size == 0) throw IoError("PLY: unknown property type in: " + line);
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        }
    }

    TriMesh mesh;
    std::vector<char> buf;
    for (const auto& elem : elements) {
        bool is_vertex = elem.name == "vertex";
        bool is_face = elem.name == "face";
        for (size_t i = 0; i < elem.count; ++i) {
            double xyz[3] = {0, 0, 0};
            std::vector<long> face;
            if (binary) {
                for (const auto& p : elem.props) {
                    if (p.is_list) {
                        buf.resize(p.count_size);
                        if (!in.read(buf.data(), p.count_size)) throw IoError("PLY: truncated file");
                        long n = static_cast<long>(detail::read_binary_scalar(buf.data(), p.count_size, false));
                        buf.resize(static_cast<size_t>(n) * p.size);
                        if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
                            throw IoError("PLY: truncated file");
                        if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index"))
                            for (long k = 0; k < n; ++k)
                                face.push_back(static_cast<long>(
                                    detail::read_binary_scalar(buf.data() + k * p.size, p.size, p.is_float)));
                    } else {
                        buf.resize(p.size);
                        if (!in.read(buf.data(), p.size)) throw IoError("PLY: truncated file");
                        double v = detail::read_binary_scalar(buf.data(), p.size, p.is_float);
                        if (is_vertex) {
                            if (p.name == "x") xyz[0] = v;
                            else if (p.name == "y") xyz[1] = v;
                            else if (p.name == "z") xyz[2] = v;
                        }
                    }
                }
            } else {
                if (!std::getline(in, line)) throw IoError("PLY: truncated file");
                std::istringstream ss(line);
                for (const auto& p : elem.props) {
                    if (p.is_list) {
                        long n;
                        if (!(ss >> n)) throw IoError("PLY: malformed list row");
                        for (long k = 0; k < n; ++k) {
                            long v;
                            if (!(ss >> v)) throw IoError("PLY: malformed list row");
                            if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index"))
                                face.push_back(v);
                        }
                    } else {
                        double v;
                        if (!(ss >> v)) throw IoError("PLY: malformed row");
                        if (is_vertex) {
                            if (p.name == "x") xyz[0] = v;
                            else if (p.name == "y") xyz[1] = v;
                            else if (p.name == "z") xyz[2] = v;
                        }
                    }
                }
            }
            if (is_vertex) mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
            if (is_face && !face.empty()) {
                if (face.size() < 3) throw IoError("PLY: face with fewer than 3 vertices");
                for (size_t k = 1; k + 1 < face.size(); ++k)
                    mesh.triangles.push_back({static_cast<int>(face[0]), static_cast<int>(face[k]),
                                              static_cast<int>(face[k + 1])});
            }
        }
    }
    if (!mesh.indices_valid()) throw IoError("PLY: face index out of range");
    return mesh;
}

inline TriMesh read_mesh(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open mesh file: " + path);
    if (detail::has_suffix(path, ".obj")) return read_obj(in);
    if (detail::has_suffix(path, ".ply")) return read_ply(in);
    throw IoError("unsupported mesh format (expect .obj or .ply): " + path);
}

// Optional per-vertex payloads used by the writers.
struct MeshAttributes {
    std::vector<Vec3> normals;       // empty or one per vertex
    std::vector<int> vertex_tags;    // empty or one per vertex (e.g. element index)
};

inline void write_obj(std::ostream& out, const TriMesh& mesh, const MeshAttributes& attr = {}) {
    std::string s;
    s.reserve(mesh.vertices.size() * 40);
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        s += "v ";
        detail::write_real(s, v.x());
        s += ' ';
        detail::write_real(s, v.y());
        s += ' ';
        detail::write_real(s, v.z());
        s += '\n';
        if (!attr.normals.empty()) {
            const Vec3& n = attr.normals[i];
            s += "vn ";
            detail::write_real(s, n.x());
            s += ' ';
            detail::write_real(s, n.y());
            s += ' ';
            detail::write_real(s, n.z());
            s += '\n';
        }
    }
    for (const auto& t : mesh.triangles) {
        s += "f ";
        s += std::to_string(t[0] + 1);
        s += ' ';
        s += std::to_string(t[1] + 1);
        s += ' ';
        s += std::to_string(t[2] + 1);
        s += '\n';
    }
    out << s;
}

inline void write_ply(std::ostream& out, const TriMesh& mesh, const MeshAttributes& attr = {}) {
    bool with_normals = !attr.normals.empty();
    bool with_tags = !attr.vertex_tags.empty();
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (with_normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
    if (with_tags) out << "property int element\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    std::string s;
    s.reserve(mesh.vertices.size() * 40);
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        detail::write_real(s, v.x());
        s += ' ';
        detail::write_real(s, v.y());
        s += ' ';
        detail::write_real(s, v.z());
        if (with_normals) {
            const Vec3& n = attr.normals[i];
            s += ' ';
            detail::write_real(s, n.x());
            s += ' ';
            detail::write_real(s, n.y());
            s += ' ';
            detail::write_real(s, n.z());
        }
        if (with_tags) {
            s += ' ';
            s += std::to_string(attr.vertex_tags[i]);
        }
        s += '\n';
    }
    for (const auto& t : mesh.triangles) {
        s += "3 ";
        s += std::to_string(t[0]);
        s += ' ';
        s += std::to_string(t[1]);
        s += ' ';
        s += std::to_string(t[2]);
        s += '\n';
    }
    out << s;
}

inline void write_mesh(const std::string& path, const TriMesh& mesh, const MeshAttributes& attr = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output mesh file: " + path);
    if (detail::has_suffix(path, ".obj"))
        write_obj(out, mesh, attr);
    else if (detail::has_suffix(path, ".ply"))
        write_ply(out, mesh, attr);
    else
        throw IoError("unsupported mesh format (expect .obj or .ply): " + path);
    if (!out) throw IoError("failed writing mesh file: " + path);
}

}  // namespace ldif
