// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/scene.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace lumos {

namespace {

constexpr double kOpacityLogitEps = 1e-6;

double logit(double p) {
    const double q = std::clamp(p, kOpacityLogitEps, 1.0 - kOpacityLogitEps);
    return std::log(q / (1.0 - q));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void write_f32(std::ostream& os, double v) {
    const float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), sizeof(float));
}

} // namespace

void GaussianScene::validate() const {
    if (sh_degree < 0 || sh_degree > 3) {
        throw InvalidArgument("sh_degree must be in [0, 3]");
    }
    const std::size_t expected_sh = 3u * static_cast<std::size_t>(sh_coeff_count());
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        const GaussianPrimitive& g = primitives[i];
        const std::string where = " (primitive " + std::to_string(i) + ")";
        if (!g.center.allFinite() || !g.rotation.allFinite() || !g.scale.allFinite() ||
            !std::isfinite(g.opacity)) {
            throw InvalidArgument("non-finite primitive field" + where);
        }
        for (double c : g.sh) {
            if (!std::isfinite(c)) {
                throw InvalidArgument("non-finite SH coefficient" + where);
            }
        }
        if (std::abs(g.rotation.norm() - 1.0) > 1e-6) {
            throw InvalidArgument("rotation quaternion is not unit length" + where);
        }
        if (!(g.scale.minCoeff() > 0.0)) {
            throw InvalidArgument("scale components must be positive" + where);
        }
        if (g.opacity < 0.0 || g.opacity > 1.0) {
            throw InvalidArgument("opacity must be in [0, 1]" + where);
        }
        if (g.sh.size() != expected_sh) {
            throw InvalidArgument("sh coefficient count does not match sh_degree" + where);
        }
    }
}

void ply_write(const GaussianScene& scene, const std::filesystem::path& path) {
    if (scene.primitives.empty()) {
        throw PlyIoError(PlyIoError::Kind::EmptyScene, "refusing to write an empty scene");
    }
    scene.validate();
    const int k = scene.sh_coeff_count();
    const int n_rest = 3 * (k - 1);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw PlyIoError(PlyIoError::Kind::Io, "cannot open for write: " + path.string());
    }

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << scene.primitives.size() << "\n";
    for (const char* p : {"x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
                          "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        header << "property float " << p << "\n";
    }
    for (int i = 0; i < n_rest; ++i) {
        header << "property float f_rest_" << i << "\n";
    }
    header << "end_header\n";
    os << header.str();

    for (const GaussianPrimitive& g : scene.primitives) {
        write_f32(os, g.center.x());
        write_f32(os, g.center.y());
        write_f32(os, g.center.z());
        write_f32(os, logit(g.opacity));
        for (int i = 0; i < 3; ++i) {
            write_f32(os, std::log(g.scale[i]));
        }
        for (int i = 0; i < 4; ++i) {
            write_f32(os, g.rotation[i]);
        }
        for (int c = 0; c < 3; ++c) {
            write_f32(os, g.sh[static_cast<std::size_t>(c) * k]);
        }
        // f_rest is channel-major: all R rest coefficients, then G, then B.
        for (int c = 0; c < 3; ++c) {
            for (int j = 1; j < k; ++j) {
                write_f32(os, g.sh[static_cast<std::size_t>(c) * k + j]);
            }
        }
    }
    os.flush();
    if (!os) {
        throw PlyIoError(PlyIoError::Kind::Io, "write failed: " + path.string());
    }
}

GaussianScene ply_read(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw PlyIoError(PlyIoError::Kind::Io, "cannot open for read: " + path.string());
    }

    std::string line;
    if (!std::getline(is, line) || line != "ply") {
        throw PlyIoError(PlyIoError::Kind::Parse, "not a ply file: " + path.string());
    }
    std::size_t vertex_count = 0;
    std::vector<std::string> properties;
    bool binary_le = false;
    bool in_vertex_element = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") {
            continue;
        }
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = (fmt == "binary_little_endian");
        } else if (tok == "element") {
            std::string name;
            ls >> name >> vertex_count;
            in_vertex_element = (name == "vertex");
            if (!in_vertex_element) {
                throw PlyIoError(PlyIoError::Kind::UnknownLayout,
                                 "unsupported element: " + name);
            }
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            if (!in_vertex_element) {
                throw PlyIoError(PlyIoError::Kind::UnknownLayout,
                                 "property outside vertex element");
            }
            if (type != "float") {
                throw PlyIoError(PlyIoError::Kind::UnknownLayout,
                                 "unsupported property type: " + type);
            }
            properties.push_back(name);
        } else if (tok == "end_header") {
            break;
        } else if (!tok.empty()) {
            throw PlyIoError(PlyIoError::Kind::Parse, "unexpected header token: " + tok);
        }
    }
    if (!binary_le) {
        throw PlyIoError(PlyIoError::Kind::UnknownLayout,
                         "only binary_little_endian ply is supported");
    }
    if (vertex_count == 0) {
        throw PlyIoError(PlyIoError::Kind::EmptyScene, "ply holds no vertices");
    }

    std::map<std::string, int> index;
    for (std::size_t i = 0; i < properties.size(); ++i) {
        index[properties[i]] = static_cast<int>(i);
    }
    const auto need = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) {
            throw PlyIoError(PlyIoError::Kind::UnknownLayout,
                             "missing vertex property: " + name);
        }
        return it->second;
    };

    const int ix = need("x"), iy = need("y"), iz = need("z");
    const int iop = need("opacity");
    const int is0 = need("scale_0"), is1 = need("scale_1"), is2 = need("scale_2");
    const int ir0 = need("rot_0"), ir1 = need("rot_1"), ir2 = need("rot_2"), ir3 = need("rot_3");
    const int idc0 = need("f_dc_0"), idc1 = need("f_dc_1"), idc2 = need("f_dc_2");

    int n_rest = 0;
    while (index.count("f_rest_" + std::to_string(n_rest))) {
        ++n_rest;
    }
    if (n_rest % 3 != 0) {
        throw PlyIoError(PlyIoError::Kind::UnknownLayout,
                         "f_rest count is not a multiple of 3");
    }
    const int k = n_rest / 3 + 1;
    int degree = -1;
    for (int d = 0; d <= 3; ++d) {
        if ((d + 1) * (d + 1) == k) {
            degree = d;
        }
    }
    if (degree < 0) {
        throw PlyIoError(PlyIoError::Kind::UnknownLayout,
                         "f_rest count does not match any sh degree in [0, 3]");
    }
    std::vector<int> irest(static_cast<std::size_t>(n_rest));
    for (int i = 0; i < n_rest; ++i) {
        irest[i] = need("f_rest_" + std::to_string(i));
    }

    GaussianScene scene;
    scene.sh_degree = degree;
    scene.primitives.resize(vertex_count);

    const std::size_t stride = properties.size();
    std::vector<float> row(stride);
    for (std::size_t v = 0; v < vertex_count; ++v) {
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(stride * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(stride * sizeof(float))) {
            throw PlyIoError(PlyIoError::Kind::Truncated, "truncated vertex data");
        }
        GaussianPrimitive& g = scene.primitives[v];
        g.center = Eigen::Vector3d(row[ix], row[iy], row[iz]);
        g.opacity = sigmoid(row[iop]);
        g.scale = Eigen::Vector3d(std::exp(row[is0]), std::exp(row[is1]), std::exp(row[is2]));
        Eigen::Vector4d q(row[ir0], row[ir1], row[ir2], row[ir3]);
        const double qn = q.norm();
        if (!(qn > 0.0) || !std::isfinite(qn)) {
            throw PlyIoError(PlyIoError::Kind::Parse, "degenerate quaternion in ply");
        }
        g.rotation = q / qn;
        g.sh.assign(3u * k, 0.0);
        g.sh[0u * k] = row[idc0];
        g.sh[1u * k] = row[idc1];
        g.sh[2u * k] = row[idc2];
        for (int c = 0; c < 3; ++c) {
            for (int j = 1; j < k; ++j) {
                g.sh[static_cast<std::size_t>(c) * k + j] =
                    row[irest[static_cast<std::size_t>(c) * (k - 1) + (j - 1)]];
            }
        }
    }
    scene.validate();
    return scene;
}

} // namespace lumos
