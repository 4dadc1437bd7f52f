// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/camera.hpp>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lumos {

void CameraView::validate() const {
    if (width < 1 || height < 1) {
        throw InvalidArgument("camera image size must be at least 1x1");
    }
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw InvalidArgument("camera focal lengths must be positive");
    }
    if (!w2c.allFinite()) {
        throw InvalidArgument("camera w2c contains non-finite values");
    }
    if (w2c.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
        const Eigen::RowVector4d bottom = w2c.row(3);
        if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
            throw InvalidArgument("camera w2c bottom row must be (0,0,0,1)");
        }
    }
    const Eigen::Matrix3d r = rotation();
    const double ortho_err = (r * r.transpose() - Eigen::Matrix3d::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
    if (ortho_err > 1e-5) {
        throw InvalidArgument("camera rotation is not orthonormal within 1e-5");
    }
    if (std::abs(r.determinant() - 1.0) > 1e-5) {
        throw InvalidArgument("camera rotation must have determinant +1");
    }
}

std::vector<CameraView> cameras_load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open camera file: " + path.string());
    }
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("camera json parse error: " + std::string(e.what()));
    }
    if (!doc.is_array()) {
        throw IoError("camera json must be an array of views");
    }
    std::vector<CameraView> cams;
    cams.reserve(doc.size());
    for (const auto& item : doc) {
        CameraView cam;
        try {
            cam.width = item.at("width").get<int>();
            cam.height = item.at("height").get<int>();
            cam.fx = item.at("fx").get<double>();
            cam.fy = item.at("fy").get<double>();
            cam.cx = item.at("cx").get<double>();
            cam.cy = item.at("cy").get<double>();
            const auto& m = item.at("w2c");
            if (!m.is_array() || m.size() != 16) {
                throw IoError("w2c must hold 16 row-major floats");
            }
            for (int i = 0; i < 4; ++i) {
                for (int j = 0; j < 4; ++j) {
                    cam.w2c(i, j) = m.at(i * 4 + j).get<double>();
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw IoError("camera json field error: " + std::string(e.what()));
        }
        cam.validate();
        cams.push_back(cam);
    }
    return cams;
}

void cameras_save(const std::vector<CameraView>& cams, const std::filesystem::path& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const CameraView& cam : cams) {
        cam.validate();
        nlohmann::json m = nlohmann::json::array();
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                m.push_back(cam.w2c(i, j));
            }
        }
        doc.push_back({{"width", cam.width},
                       {"height", cam.height},
                       {"fx", cam.fx},
                       {"fy", cam.fy},
                       {"cx", cam.cx},
                       {"cy", cam.cy},
                       {"w2c", std::move(m)}});
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw IoError("cannot open camera file for write: " + path.string());
    }
    os << doc.dump(2) << "\n";
    if (!os) {
        throw IoError("camera file write failed: " + path.string());
    }
}

} // namespace lumos
