#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "barecam/optics.hpp"
#include "barecam/rng.hpp"
#include "doctest.h"

using namespace barecam;
using namespace barecam::optics;

namespace {

// Kernel written out independently of the implementation, for oracle checks.
double kernel_weight(double t, double dlat2, double pixel_area) {
    const double r2 = t * t + dlat2;
    const double cos2 = t * t / r2;
    return cos2 * cos2 / r2 * pixel_area;
}

DisplayGeometry desk_display() { return {20, 20, 6.0, 3}; }

SensorGeometry desk_sensor(int factor = 16) {
    return SensorGeometry{320, 240, 0.0022, 3}.downsampled(factor);
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("field of view matches the geometry") {
    CHECK(field_of_view(6.0, 1.0) == doctest::Approx(143.13).epsilon(0.0035));
    CHECK(field_of_view(6.0, 3.0) == doctest::Approx(90.0).epsilon(1e-12));
    CHECK(field_of_view(6.0, 5.0) == doctest::Approx(2.0 * std::atan(0.6) * 180.0 / M_PI));
    CHECK(field_of_view(6.0, 5.0) == doctest::Approx(61.93).epsilon(1e-3));
    CHECK_THROWS_AS(field_of_view(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(field_of_view(6.0, -1.0), DomainError);
}

TEST_CASE("transport weights follow the cos^4/r^2 falloff") {
    // One display pixel directly above sensor pixel 0; sensor pixel 1 sits at
    // lateral offset exactly t.
    const double t = 1.0;
    DisplayGeometry disp{1, 1, 0.3, 3};
    SensorGeometry sens{2, 1, t, 3};
    GapConfig gap{t, -0.5 * t, 0.0};
    auto tm = build_transport_matrix(disp, sens, gap);
    REQUIRE(tm.rows() == 2);
    REQUIRE(tm.cols() == 1);
    const double on_axis = tm.weight(0, 0);
    const double off_axis = tm.weight(1, 0);
    CHECK(off_axis / on_axis == doctest::Approx(0.125).epsilon(1e-9));

    // Doubling t divides the on-axis weight by 4.
    GapConfig gap2{2.0 * t, -0.5 * t, 0.0};
    auto tm2 = build_transport_matrix(disp, sens, gap2);
    CHECK(tm2.weight(0, 0) / on_axis == doctest::Approx(0.25).epsilon(1e-9));

    // Against the standalone formula.
    CHECK(on_axis == doctest::Approx(kernel_weight(t, 0.0, 0.09)).epsilon(1e-12));
    CHECK(off_axis == doctest::Approx(kernel_weight(t, t * t, 0.09)).epsilon(1e-12));
}

TEST_CASE("transport weights are nonnegative and mirror symmetric") {
    auto tm = build_transport_matrix(desk_display(), desk_sensor(), GapConfig{1.0, 0, 0});
    for (double w : tm.weights()) CHECK(w >= 0.0);

    const int sh = 15, sw = 20, dh = 20, dw = 20;
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const int r = static_cast<int>(rng.below(sh)), c = static_cast<int>(rng.below(sw));
        const int di = static_cast<int>(rng.below(dh)), dj = static_cast<int>(rng.below(dw));
        const double a = tm.weight(static_cast<size_t>(r) * sw + c,
                                   static_cast<size_t>(di) * dw + dj);
        const double b = tm.weight(static_cast<size_t>(sh - 1 - r) * sw + (sw - 1 - c),
                                   static_cast<size_t>(dh - 1 - di) * dw + (dw - 1 - dj));
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("transport build is deterministic and bounded by the memory budget") {
    auto a = build_transport_matrix(desk_display(), desk_sensor(), GapConfig{1.0, 0, 0});
    auto b = build_transport_matrix(desk_display(), desk_sensor(), GapConfig{1.0, 0, 0});
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.weights() == b.weights());

    try {
        build_transport_matrix(desk_display(), desk_sensor(1), GapConfig{1.0, 0, 0}, 1024);
        FAIL("expected SizeError");
    } catch (const SizeError& e) {
        CHECK(e.required_bytes == 320ull * 240 * 400 * 8);
        CHECK(std::string(e.what()).find(std::to_string(e.required_bytes)) !=
              std::string::npos);
    }
}

TEST_CASE("rendering a centered point is 180-degree rotation invariant") {
    DisplayGeometry disp{1, 1, 0.3, 3};
    auto tm = build_transport_matrix(disp, desk_sensor(), GapConfig{1.0, 0, 0});
    ImageU8 scene(3, 1, 1, 255);
    auto raw = render_sensor_image(scene, tm);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            CHECK(raw.at(0, y, x) ==
                  doctest::Approx(raw.at(0, raw.height - 1 - y, raw.width - 1 - x))
                      .epsilon(1e-12));
}

TEST_CASE("rendering is linear in the scene") {
    auto tm = build_transport_matrix(desk_display(), desk_sensor(), GapConfig{1.0, 0, 0});

    ImageU8 zero(3, 20, 20, 0);
    auto z = render_sensor_image(zero, tm);
    for (double v : z.radiance) CHECK(v == 0.0);

    Rng rng(11);
    ImageU8 x(3, 20, 20), y(3, 20, 20), sum(3, 20, 20), twice(3, 20, 20);
    for (size_t i = 0; i < x.data.size(); ++i) {
        x.data[i] = static_cast<uint8_t>(rng.below(101));
        y.data[i] = static_cast<uint8_t>(rng.below(101));
        sum.data[i] = static_cast<uint8_t>(x.data[i] + y.data[i]);
        twice.data[i] = static_cast<uint8_t>(2 * x.data[i]);
    }
    auto rx = render_sensor_image(x, tm);
    auto ry = render_sensor_image(y, tm);
    auto rsum = render_sensor_image(sum, tm);
    auto rtwice = render_sensor_image(twice, tm);
    for (size_t i = 0; i < rx.radiance.size(); ++i) {
        CHECK(rtwice.radiance[i] == 2.0 * rx.radiance[i]);
        const double want = rx.radiance[i] + ry.radiance[i];
        CHECK(rsum.radiance[i] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("uniform scene peaks at the center and decays along the axes") {
    auto tm = build_transport_matrix(desk_display(), desk_sensor(), GapConfig{1.0, 0, 0});
    ImageU8 uniform(3, 20, 20, 200);
    auto raw = render_sensor_image(uniform, tm);

    // Independent brute-force sum for a few sensor pixels.
    const auto& sg = tm.sensor();
    const auto& dg = tm.display();
    auto expected = [&](int r, int c) {
        const double sx = (c + 0.5 - sg.width_px / 2.0) * sg.pitch_mm;
        const double sy = (r + 0.5 - sg.height_px / 2.0) * sg.pitch_mm;
        double acc = 0.0;
        for (int i = 0; i < dg.height_px; ++i)
            for (int j = 0; j < dg.width_px; ++j) {
                const double px = (j + 0.5 - dg.width_px / 2.0) * dg.pitch_mm();
                const double py = (i + 0.5 - dg.height_px / 2.0) * dg.pitch_mm();
                const double d2 = (px - sx) * (px - sx) + (py - sy) * (py - sy);
                acc += kernel_weight(1.0, d2, dg.pitch_mm() * dg.pitch_mm()) * 200.0;
            }
        return acc;
    };
    CHECK(raw.at(0, 7, 10) == doctest::Approx(expected(7, 10)).epsilon(1e-12));
    CHECK(raw.at(0, 0, 0) == doctest::Approx(expected(0, 0)).epsilon(1e-12));
    CHECK(raw.at(0, 3, 14) == doctest::Approx(expected(3, 14)).epsilon(1e-12));

    // Peak is one of the four central pixels; values never increase walking
    // outward along the central row and column.
    double peak = 0.0;
    int py = 0, px = 0;
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            if (raw.at(0, y, x) > peak) {
                peak = raw.at(0, y, x);
                py = y;
                px = x;
            }
    CHECK(std::abs(py - (raw.height - 1) / 2.0) <= 0.51);
    CHECK(std::abs(px - (raw.width - 1) / 2.0) <= 0.51);
    for (int x = px; x + 1 < raw.width; ++x)
        CHECK(raw.at(0, py, x) >= raw.at(0, py, x + 1));
    for (int x = px; x > 0; --x) CHECK(raw.at(0, py, x) >= raw.at(0, py, x - 1));
    for (int y = py; y + 1 < raw.height; ++y)
        CHECK(raw.at(0, y, px) >= raw.at(0, y + 1, px));
    for (int y = py; y > 0; --y) CHECK(raw.at(0, y, px) >= raw.at(0, y - 1, px));
}

TEST_CASE("per-image exposure maps the peak to 255 with half-away rounding") {
    RawSensorImage raw;
    raw.channels = 3;
    raw.height = 1;
    raw.width = 1;
    raw.radiance = {1.0, 0.5, 0.25};
    auto img = quantize_expose(raw);
    CHECK(img.pixels.data == std::vector<uint8_t>{255, 128, 64});
    CHECK(img.exposure_scale == doctest::Approx(255.0));
    CHECK_FALSE(img.degenerate_exposure);

    RawSensorImage zeros = raw;
    zeros.radiance = {0.0, 0.0, 0.0};
    auto z = quantize_expose(zeros);
    CHECK(z.pixels.data == std::vector<uint8_t>{0, 0, 0});
    CHECK(z.degenerate_exposure);
    CHECK(z.exposure_scale == 0.0);

    auto fixed = quantize_expose(raw, ExposureMode::FixedGain, 100.0);
    CHECK(fixed.pixels.data == std::vector<uint8_t>{100, 50, 25});
    CHECK_THROWS_AS(quantize_expose(raw, ExposureMode::FixedGain, 0.0), DomainError);
}

TEST_CASE("sensor noise is seeded, optional, and has the requested spread") {
    SensorImage img;
    img.pixels = ImageU8(3, 200, 200, 128);

    auto same = add_sensor_noise(img, 0.0, 42);
    CHECK(same.pixels == img.pixels);

    auto a = add_sensor_noise(img, 5.0, 42);
    auto b = add_sensor_noise(img, 5.0, 42);
    CHECK(a.pixels == b.pixels);
    CHECK(a.pixels.data != img.pixels.data);

    double sum = 0.0, sq = 0.0;
    const size_t n = a.pixels.data.size();
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a.pixels.data[i]) - 128.0;
        sum += d;
        sq += d * d;
    }
    const double mean = sum / static_cast<double>(n);
    const double stdev = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(stdev == doctest::Approx(5.0).epsilon(0.03));

    CHECK_THROWS_AS(add_sensor_noise(img, -1.0, 0), DomainError);
}

TEST_CASE("transport cache round-trips bit exactly") {
    auto tm = build_transport_matrix(desk_display(), desk_sensor(32), GapConfig{5.0, 0, 0});
    const auto path = temp_path("barecam_test_transport.oftm");
    tm.save(path.string());
    auto back = TransportMatrix::load(path.string());
    CHECK(back.fingerprint() == tm.fingerprint());
    CHECK(back.weights() == tm.weights());
    CHECK(back.gap().t_mm == tm.gap().t_mm);

    // Saving the loaded copy reproduces the file byte for byte.
    const auto path2 = temp_path("barecam_test_transport2.oftm");
    back.save(path2.string());
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // Truncated file refuses to load.
    std::ofstream trunc(path, std::ios::binary);
    trunc.write(b1.data(), static_cast<std::streamsize>(b1.size() / 2));
    trunc.close();
    CHECK_THROWS_AS(TransportMatrix::load(path.string()), FormatError);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("render rejects mismatched scenes") {
    auto tm = build_transport_matrix(desk_display(), desk_sensor(32), GapConfig{1.0, 0, 0});
    ImageU8 wrong(3, 32, 32, 0);
    CHECK_THROWS_AS(render_sensor_image(wrong, tm), ShapeError);
}

namespace {

// Jacobi eigenvalues of the symmetric Gram matrix A A^T; spectral oracle for
// the effective-rank comparison.
std::vector<double> gram_eigenvalues(const TransportMatrix& tm) {
    const size_t rows = tm.rows(), cols = tm.cols();
    std::vector<double> g(rows * rows, 0.0);
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = i; j < rows; ++j) {
            double acc = 0.0;
            for (size_t d = 0; d < cols; ++d) acc += tm.weight(i, d) * tm.weight(j, d);
            g[i * rows + j] = acc;
            g[j * rows + i] = acc;
        }
    const size_t n = rows;
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += g[p * n + q] * g[p * n + q];
        if (off < 1e-24) break;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) {
                const double apq = g[p * n + q];
                if (apq == 0.0) continue;
                const double app = g[p * n + p], aqq = g[q * n + q];
                const double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
                const double c = std::cos(theta), s = std::sin(theta);
                for (size_t i = 0; i < n; ++i) {
                    const double gip = g[i * n + p], giq = g[i * n + q];
                    g[i * n + p] = c * gip - s * giq;
                    g[i * n + q] = s * gip + c * giq;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double gpi = g[p * n + i], gqi = g[q * n + i];
                    g[p * n + i] = c * gpi - s * gqi;
                    g[q * n + i] = s * gpi + c * gqi;
                }
            }
    }
    std::vector<double> eig(n);
    for (size_t i = 0; i < n; ++i) eig[i] = g[i * n + i];
    return eig;
}

int effective_rank(const TransportMatrix& tm) {
    auto eig = gram_eigenvalues(tm);
    double top = 0.0;
    for (double e : eig) top = std::max(top, e);
    // singular value = sqrt(eigenvalue of A A^T)
    const double cut = 1e-6 * std::sqrt(std::max(top, 0.0));
    int rank = 0;
    for (double e : eig)
        if (e > 0.0 && std::sqrt(e) >= cut) ++rank;
    return rank;
}

}  // namespace

TEST_CASE("larger gaps blur more: effective rank drops from t=1mm to t=5mm") {
    auto sens = desk_sensor(32);  // 10x7 keeps the spectral oracle quick
    auto t1 = build_transport_matrix(desk_display(), sens, GapConfig{1.0, 0, 0});
    auto t5 = build_transport_matrix(desk_display(), sens, GapConfig{5.0, 0, 0});
    const int r1 = effective_rank(t1);
    const int r5 = effective_rank(t5);
    CHECK(r5 <= r1);
    CHECK(r1 >= 1);
}
