// ASCII OBJ and binary little-endian PLY readers/writers. Polygon faces are
// fan-triangulated on load; loaders validate and recompute vertex normals
// when the file does not carry them.
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hilo/trimesh.hpp"

namespace hilo {

namespace {

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string e = path.substr(dot + 1);
    for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return e;
}

void append_double(std::string& buf, double v) {
    char tmp[40];
    int n = std::snprintf(tmp, sizeof(tmp), "%.17g", v);
    buf.append(tmp, static_cast<size_t>(n));
}

}  // namespace

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open OBJ file: " + path);
    TriMesh m;
    std::vector<Vec3> file_normals;
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() < 2) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw std::runtime_error("malformed v record in " + path);
            m.vertices.emplace_back(x, y, z);
        } else if (tag == "vn") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw std::runtime_error("malformed vn record in " + path);
            file_normals.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<std::uint32_t> poly;
            std::string corner;
            while (ls >> corner) {
                // index before the first '/': v, v/vt, v//vn, v/vt/vn all start with v
                long idx = std::strtol(corner.c_str(), nullptr, 10);
                if (idx == 0) throw std::runtime_error("malformed f record in " + path);
                if (idx < 0) idx = static_cast<long>(m.vertices.size()) + idx + 1;
                poly.push_back(static_cast<std::uint32_t>(idx - 1));
            }
            if (poly.size() < 3) throw std::runtime_error("face with fewer than 3 corners in " + path);
            for (size_t k = 1; k + 1 < poly.size(); ++k)
                m.faces.push_back({poly[0], poly[k], poly[k + 1]});
        }
    }
    m.validate();
    if (file_normals.size() == m.vertices.size()) {
        m.vertex_normals = std::move(file_normals);
        for (auto& n : m.vertex_normals) {
            double len = n.norm();
            n = (len > 1e-300) ? Vec3(n / len) : Vec3(0, 0, 1);
        }
    } else {
        m.compute_vertex_normals();
    }
    return m;
}

void save_obj(const TriMesh& m, const std::string& path) {
    std::string buf;
    buf.reserve(m.vertices.size() * 80 + m.faces.size() * 40);
    for (const auto& v : m.vertices) {
        buf += "v ";
        append_double(buf, v.x());
        buf += ' ';
        append_double(buf, v.y());
        buf += ' ';
        append_double(buf, v.z());
        buf += '\n';
    }
    for (const auto& n : m.vertex_normals) {
        buf += "vn ";
        append_double(buf, n.x());
        buf += ' ';
        append_double(buf, n.y());
        buf += ' ';
        append_double(buf, n.z());
        buf += '\n';
    }
    const bool with_normals = m.vertex_normals.size() == m.vertices.size();
    char tmp[96];
    for (const auto& f : m.faces) {
        int n;
        if (with_normals)
            n = std::snprintf(tmp, sizeof(tmp), "f %u//%u %u//%u %u//%u\n", f[0] + 1, f[0] + 1,
                              f[1] + 1, f[1] + 1, f[2] + 1, f[2] + 1);
        else
            n = std::snprintf(tmp, sizeof(tmp), "f %u %u %u\n", f[0] + 1, f[1] + 1, f[2] + 1);
        buf.append(tmp, static_cast<size_t>(n));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write OBJ file: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("short write on OBJ file: " + path);
}

namespace {

struct PlyProperty {
    std::string name;
    std::string type;        // scalar type, or the index type for lists
    std::string count_type;  // non-empty for list properties
};

size_t scalar_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
    throw std::runtime_error("unsupported PLY scalar type: " + t);
}

double read_scalar(const char*& p, const std::string& t) {
    auto get = [&p](auto v) {
        std::memcpy(&v, p, sizeof(v));
        p += sizeof(v);
        return v;
    };
    if (t == "char" || t == "int8") return get(std::int8_t{});
    if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
    if (t == "short" || t == "int16") return get(std::int16_t{});
    if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
    if (t == "int" || t == "int32") return get(std::int32_t{});
    if (t == "uint" || t == "uint32") return get(std::uint32_t{});
    if (t == "float" || t == "float32") return get(float{});
    if (t == "double" || t == "float64") return get(double{});
    throw std::runtime_error("unsupported PLY scalar type: " + t);
}

}  // namespace

TriMesh load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open PLY file: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::istringstream header(content);
    std::string line;
    if (!std::getline(header, line) || line.substr(0, 3) != "ply")
        throw std::runtime_error("not a PLY file: " + path);

    size_t n_vertices = 0, n_faces = 0;
    std::vector<PlyProperty> vertex_props, face_props;
    std::vector<PlyProperty>* current = nullptr;
    bool little_endian = false;
    while (std::getline(header, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            little_endian = (fmt == "binary_little_endian");
            if (!little_endian) throw std::runtime_error("PLY must be binary little-endian: " + path);
        } else if (tag == "element") {
            std::string name;
            size_t count;
            ls >> name >> count;
            if (name == "vertex") {
                n_vertices = count;
                current = &vertex_props;
            } else if (name == "face") {
                n_faces = count;
                current = &face_props;
            } else {
                throw std::runtime_error("unsupported PLY element '" + name + "' in " + path);
            }
        } else if (tag == "property") {
            if (!current) throw std::runtime_error("property before element in " + path);
            std::string t;
            ls >> t;
            PlyProperty p;
            if (t == "list") {
                ls >> p.count_type >> p.type >> p.name;
            } else {
                p.type = t;
                ls >> p.name;
            }
            current->push_back(p);
        } else if (tag == "end_header") {
            break;
        }
    }

    const char* p = content.data() + header.tellg();
    const char* end = content.data() + content.size();

    TriMesh m;
    m.vertices.resize(n_vertices);
    bool has_normals = false;
    for (const auto& pr : vertex_props)
        if (pr.name == "nx") has_normals = true;
    if (has_normals) m.vertex_normals.resize(n_vertices);

    for (size_t i = 0; i < n_vertices; ++i) {
        for (const auto& pr : vertex_props) {
            if (!pr.count_type.empty()) throw std::runtime_error("list property on vertices: " + path);
            if (p + scalar_size(pr.type) > end) throw std::runtime_error("truncated PLY file: " + path);
            double v = read_scalar(p, pr.type);
            if (pr.name == "x") m.vertices[i].x() = v;
            else if (pr.name == "y") m.vertices[i].y() = v;
            else if (pr.name == "z") m.vertices[i].z() = v;
            else if (has_normals && pr.name == "nx") m.vertex_normals[i].x() = v;
            else if (has_normals && pr.name == "ny") m.vertex_normals[i].y() = v;
            else if (has_normals && pr.name == "nz") m.vertex_normals[i].z() = v;
        }
    }
    for (size_t i = 0; i < n_faces; ++i) {
        for (const auto& pr : face_props) {
            if (pr.count_type.empty()) {
                if (p + scalar_size(pr.type) > end) throw std::runtime_error("truncated PLY file: " + path);
                read_scalar(p, pr.type);
                continue;
            }
            if (p + scalar_size(pr.count_type) > end) throw std::runtime_error("truncated PLY file: " + path);
            auto count = static_cast<size_t>(read_scalar(p, pr.count_type));
            std::vector<std::uint32_t> poly(count);
            for (size_t k = 0; k < count; ++k) {
                if (p + scalar_size(pr.type) > end) throw std::runtime_error("truncated PLY file: " + path);
                poly[k] = static_cast<std::uint32_t>(read_scalar(p, pr.type));
            }
            if (pr.name == "vertex_indices" || pr.name == "vertex_index") {
                if (count < 3) throw std::runtime_error("face with fewer than 3 corners in " + path);
                for (size_t k = 1; k + 1 < count; ++k)
                    m.faces.push_back({poly[0], poly[k], poly[k + 1]});
            }
        }
    }
    m.validate();
    if (!has_normals) m.compute_vertex_normals();
    return m;
}

void save_ply(const TriMesh& m, const std::string& path) {
    std::ostringstream os;
    os << "ply\nformat binary_little_endian 1.0\n"
       << "element vertex " << m.vertices.size() << "\n"
       << "property double x\nproperty double y\nproperty double z\n"
       << "property double nx\nproperty double ny\nproperty double nz\n"
       << "element face " << m.faces.size() << "\n"
       << "property list uchar uint32 vertex_indices\n"
       << "end_header\n";
    std::string buf = os.str();
    const bool with_normals = m.vertex_normals.size() == m.vertices.size();
    auto put = [&buf](const void* src, size_t n) {
        buf.append(static_cast<const char*>(src), n);
    };
    for (size_t i = 0; i < m.vertices.size(); ++i) {
        double v[6] = {m.vertices[i].x(), m.vertices[i].y(), m.vertices[i].z(), 0.0, 0.0, 1.0};
        if (with_normals) {
            v[3] = m.vertex_normals[i].x();
            v[4] = m.vertex_normals[i].y();
            v[5] = m.vertex_normals[i].z();
        }
        put(v, sizeof(v));
    }
    for (const auto& f : m.faces) {
        std::uint8_t count = 3;
        put(&count, 1);
        std::uint32_t idx[3] = {f[0], f[1], f[2]};
        put(idx, sizeof(idx));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write PLY file: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("short write on PLY file: " + path);
}

TriMesh load_mesh(const std::string& path) {
    std::string e = lower_ext(path);
    if (e == "obj") return load_obj(path);
    if (e == "ply") return load_ply(path);
    throw std::runtime_error("unsupported mesh extension: " + path);
}

void save_mesh(const TriMesh& m, const std::string& path) {
    std::string e = lower_ext(path);
    if (e == "obj") return save_obj(m, path);
    if (e == "ply") return save_ply(m, path);
    throw std::runtime_error("unsupported mesh extension: " + path);
}

}  // namespace hilo
