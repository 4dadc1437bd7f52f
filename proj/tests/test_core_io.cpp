// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include <lumos/camera.hpp>
#include <lumos/image.hpp>
#include <lumos/scene.hpp>
#include <lumos/tensor.hpp>

#include "testutil.hpp"

using namespace lumos;

namespace {

std::vector<std::uint8_t> read_all_bytes(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST(TensorIo, RoundtripIdentity) {
    const auto dir = test::temp_dir("tensor");
    TensorF t({2, 3}, {0, 1, 2, 3, 4, 5});
    tensor_write(t, dir / "a.lumt");
    const TensorF r = tensor_read(dir / "a.lumt");
    EXPECT_EQ(r.dims, t.dims);
    EXPECT_EQ(r.data, t.data);
}

TEST(TensorIo, ZeroRankRejected) {
    const auto dir = test::temp_dir("tensor");
    TensorF t;
    t.data = {};
    t.dims = {};
    try {
        tensor_write(t, dir / "zero.lumt");
        FAIL() << "expected TensorIoError";
    } catch (const TensorIoError& e) {
        EXPECT_EQ(e.kind(), TensorIoError::Kind::ZeroRank);
        EXPECT_STREQ(e.what(), "zero-rank tensor rejected");
    }
}

TEST(TensorIo, OneElementFileLayout) {
    // Hand-assembled byte layout for a rank-1, 1-element f32 tensor.
    const auto dir = test::temp_dir("tensor");
    TensorF t({1}, {1.5f});
    tensor_write(t, dir / "one.lumt");
    const std::vector<std::uint8_t> bytes = read_all_bytes(dir / "one.lumt");

    std::vector<std::uint8_t> expected = {'L', 'U', 'M', 'T', 1, 0, 1};
    // dim 1 as u64 little-endian
    expected.insert(expected.end(), {1, 0, 0, 0, 0, 0, 0, 0});
    const float payload = 1.5f;
    const auto* pb = reinterpret_cast<const std::uint8_t*>(&payload);
    expected.insert(expected.end(), pb, pb + 4);
    EXPECT_EQ(bytes, expected);
}

TEST(TensorIo, DistinctErrorKinds) {
    const auto dir = test::temp_dir("tensor");
    TensorF t({2}, {1.0f, 2.0f});
    tensor_write(t, dir / "good.lumt");
    std::vector<std::uint8_t> bytes = read_all_bytes(dir / "good.lumt");

    {
        auto bad = bytes;
        bad[0] = 'X';
        write_bytes(dir / "badmagic.lumt", bad);
        try {
            tensor_read(dir / "badmagic.lumt");
            FAIL();
        } catch (const TensorIoError& e) {
            EXPECT_EQ(e.kind(), TensorIoError::Kind::BadMagic);
        }
    }
    {
        auto bad = bytes;
        bad[5] = 7; // dtype slot
        write_bytes(dir / "baddtype.lumt", bad);
        try {
            tensor_read(dir / "baddtype.lumt");
            FAIL();
        } catch (const TensorIoError& e) {
            EXPECT_EQ(e.kind(), TensorIoError::Kind::DtypeMismatch);
        }
    }
    {
        auto bad = bytes;
        bad.resize(bad.size() - 3);
        write_bytes(dir / "trunc.lumt", bad);
        try {
            tensor_read(dir / "trunc.lumt");
            FAIL();
        } catch (const TensorIoError& e) {
            EXPECT_EQ(e.kind(), TensorIoError::Kind::Truncated);
        }
    }
}

TEST(Srgb, EndpointsAndMidpoint) {
    EXPECT_DOUBLE_EQ(srgb_decode(0.0), 0.0);
    EXPECT_DOUBLE_EQ(srgb_decode(1.0), 1.0);
    const double mid = srgb_decode(128.0 / 255.0);
    EXPECT_NEAR(mid, 0.21586, 1e-5);
    EXPECT_NEAR(mid, std::pow((128.0 / 255.0 + 0.055) / 1.055, 2.4), 1e-15);
}

TEST(Srgb, TransferPairMutuallyInverse) {
    for (int i = 0; i <= 1000; ++i) {
        const double v = i / 1000.0;
        EXPECT_NEAR(srgb_encode(srgb_decode(v)), v, 1e-6);
        EXPECT_NEAR(srgb_decode(srgb_encode(v)), v, 1e-6);
    }
}

TEST(Srgb, AllCodesRoundtripThroughQuantization) {
    for (int k = 0; k < 256; ++k) {
        const double linear = srgb_decode(k / 255.0);
        EXPECT_EQ(quantize8(srgb_encode(linear)), k);
    }
}

TEST(ImageIo, SaveLoadReproducesBytes) {
    const auto dir = test::temp_dir("png");
    std::mt19937_64 rng(7);
    ImageLinear img(13, 17, 3);
    for (float& v : img.data) {
        v = static_cast<float>(test::urand(rng, 0.0, 1.0));
    }
    image_save(img, dir / "a.png");
    const ImageLinear loaded = image_load(dir / "a.png");
    image_save(loaded, dir / "b.png");
    const ImageLinear reloaded = image_load(dir / "b.png");
    ASSERT_TRUE(loaded.same_shape(reloaded));
    // save(load(p)) must reproduce p byte-identically; decoded linear values
    // then agree bit-for-bit.
    EXPECT_EQ(loaded.data, reloaded.data);
}

TEST(ImageIo, NonRgbPngRejected) {
    const auto dir = test::temp_dir("png");
    Image<float> gray(8, 8, 1, 0.5f);
    image_save_gray(gray, dir / "gray.png");
    try {
        image_load(dir / "gray.png");
        FAIL();
    } catch (const ImageIoError& e) {
        EXPECT_EQ(e.kind(), ImageIoError::Kind::NotRgb8);
    }
}

TEST(ImageIo, DecodeFailureRejected) {
    const auto dir = test::temp_dir("png");
    write_bytes(dir / "junk.png", {1, 2, 3, 4, 5});
    EXPECT_THROW(image_load(dir / "junk.png"), ImageIoError);
}

namespace {

GaussianScene small_scene(int n, int degree, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return test::random_scene(rng, n, degree);
}

} // namespace

TEST(PlyIo, RoundtripPreservesFields) {
    const auto dir = test::temp_dir("ply");
    const GaussianScene scene = small_scene(5, 2, 3);
    ply_write(scene, dir / "s.ply");
    const GaussianScene r = ply_read(dir / "s.ply");
    ASSERT_EQ(r.size(), scene.size());
    ASSERT_EQ(r.sh_degree, scene.sh_degree);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const GaussianPrimitive& a = scene.primitives[i];
        const GaussianPrimitive& b = r.primitives[i];
        EXPECT_LT((a.center - b.center).cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_NEAR(a.opacity, b.opacity, 1e-6);
        EXPECT_LT((a.scale - b.scale).cwiseAbs().maxCoeff(), 1e-6);
        // Quaternions are renormalized on read; same hemisphere here.
        EXPECT_LT((a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-6);
        for (std::size_t j = 0; j < a.sh.size(); ++j) {
            EXPECT_NEAR(a.sh[j], b.sh[j], 1e-6);
        }
    }
}

TEST(PlyIo, OpacityStoredAsLogit) {
    const auto dir = test::temp_dir("ply");
    GaussianScene scene = small_scene(1, 0, 4);
    scene.primitives[0].opacity = 0.5;
    ply_write(scene, dir / "s.ply");

    // Find the end of the header, then read the 4th float (x, y, z, opacity).
    std::ifstream is(dir / "s.ply", std::ios::binary);
    std::string line;
    while (std::getline(is, line) && line != "end_header") {
    }
    float row[4] = {};
    is.read(reinterpret_cast<char*>(row), sizeof(row));
    EXPECT_FLOAT_EQ(row[3], 0.0f); // logit(0.5) = 0
}

TEST(PlyIo, DegreeZeroHasNoRestProperties) {
    const auto dir = test::temp_dir("ply");
    const GaussianScene scene = small_scene(2, 0, 5);
    ply_write(scene, dir / "d0.ply");
    std::ifstream is(dir / "d0.ply", std::ios::binary);
    std::string header(std::istreambuf_iterator<char>(is), {});
    header = header.substr(0, header.find("end_header"));
    EXPECT_EQ(header.find("f_rest_"), std::string::npos);
}

TEST(PlyIo, EmptySceneRejected) {
    const auto dir = test::temp_dir("ply");
    GaussianScene scene;
    try {
        ply_write(scene, dir / "e.ply");
        FAIL();
    } catch (const PlyIoError& e) {
        EXPECT_EQ(e.kind(), PlyIoError::Kind::EmptyScene);
    }
}

TEST(PlyIo, UnknownLayoutRejected) {
    const auto dir = test::temp_dir("ply");
    std::ofstream os(dir / "weird.ply", std::ios::binary);
    os << "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
          "property float x\nproperty float y\nend_header\n";
    const float xy[2] = {0.f, 0.f};
    os.write(reinterpret_cast<const char*>(xy), sizeof(xy));
    os.close();
    try {
        ply_read(dir / "weird.ply");
        FAIL();
    } catch (const PlyIoError& e) {
        EXPECT_EQ(e.kind(), PlyIoError::Kind::UnknownLayout);
    }
}

TEST(CameraIo, RoundtripAndValidation) {
    const auto dir = test::temp_dir("cams");
    std::vector<CameraView> cams;
    CameraView c = test::test_camera(320, 240, 111.5);
    c.w2c(0, 3) = 0.25;
    c.w2c(1, 3) = -0.5;
    c.w2c(2, 3) = 2.0;
    cams.push_back(c);
    cameras_save(cams, dir / "cams.json");
    const std::vector<CameraView> r = cameras_load(dir / "cams.json");
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].width, 320);
    EXPECT_EQ(r[0].height, 240);
    EXPECT_DOUBLE_EQ(r[0].fx, 111.5);
    EXPECT_LT((r[0].w2c - c.w2c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CameraIo, NonOrthonormalRotationRejected) {
    CameraView c = test::test_camera();
    c.w2c(0, 0) = 1.01;
    EXPECT_THROW(c.validate(), InvalidArgument);

    CameraView mirror = test::test_camera();
    mirror.w2c(0, 0) = -1.0; // det -1 reflection
    EXPECT_THROW(mirror.validate(), InvalidArgument);
}

TEST(CameraIo, NegativeFocalRejected) {
    CameraView c = test::test_camera();
    c.fx = -1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}
