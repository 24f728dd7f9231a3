#include <cmath>
#include <sstream>

#include "doctest.h"
#include "inpaint/autograd.hpp"
#include "inpaint/ops.hpp"
#include "inpaint/serialize.hpp"
#include "inpaint/sketch.hpp"
#include "test_util.hpp"

using namespace inpaint;
using namespace testutil;

namespace {

LineSet random_lines(std::uint64_t seed, int n, double width) {
    Rng rng(seed);
    LineSet out;
    for (int i = 0; i < n; ++i) out.push_back({rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), width});
    return out;
}

std::vector<double> box_down2(const std::vector<double>& v, std::int64_t H, std::int64_t W) {
    std::vector<double> o((H / 2) * (W / 2));
    for (std::int64_t y = 0; y < H / 2; ++y)
        for (std::int64_t x = 0; x < W / 2; ++x)
            o[y * (W / 2) + x] = 0.25 * (v[2 * y * W + 2 * x] + v[2 * y * W + 2 * x + 1] + v[(2 * y + 1) * W + 2 * x] + v[(2 * y + 1) * W + 2 * x + 1]);
    return o;
}

}  // namespace

TEST_CASE("canny: constant image, step edges, sigma defaults") {
    CHECK(max_abs(canny(Tensor::full({32, 32}, 0.7, DType::f32))) == 0.0);
    CHECK(canny_default_sigma(256) == 2.0);
    CHECK(canny_default_sigma(512) == 2.5);
    CHECK(canny_default_sigma(64) == 1.0);
    CHECK_THROWS_AS(canny(Tensor::zeros({8, 8}, DType::f32), CannyOptions{0.0}), ContractError);
    CHECK_THROWS_AS(canny(Tensor::zeros({2, 8, 8}, DType::f32)), DimensionError);

    for (int step : {13, 20, 31}) {
        Tensor img = Tensor::zeros({1, 1, 48, 48}, DType::f64);
        for (int y = 0; y < 48; ++y)
            for (int x = step; x < 48; ++x) img.set({0, 0, y, x}, 1.0);
        for (double sigma : {1.0, 2.0}) {
            auto e = canny(img, CannyOptions{sigma}).to_vector();
            bool one_per_row = true, adjacent = true;
            for (int y = 0; y < 48; ++y) {
                int count = 0, col = -1;
                for (int x = 0; x < 48; ++x)
                    if (e[y * 48 + x] == 1.0) ++count, col = x;
                one_per_row = one_per_row && count == 1;
                adjacent = adjacent && (col == step - 1 || col == step);
            }
            CHECK(one_per_row);
            CHECK(adjacent);
        }
        // transposed: horizontal step gives one pixel per column
        Tensor t = permute(img, {0, 1, 3, 2});
        auto e = canny(t).to_vector();
        bool one_per_col = true;
        for (int x = 0; x < 48; ++x) {
            int count = 0;
            for (int y = 0; y < 48; ++y) count += e[y * 48 + x] == 1.0;
            one_per_col = one_per_col && count == 1;
        }
        CHECK(one_per_col);
    }
}

TEST_CASE("canny: diagonal step is thin along the gradient") {
    Tensor img = Tensor::zeros({40, 40}, DType::f64);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) img.set({y, x}, x + y >= 40 ? 1.0 : 0.0);
    auto e = canny(img, CannyOptions{1.5}).to_vector();
    // along the gradient (1,1) no two consecutive pixels are both edges
    int pairs = 0, total = 0;
    for (int y = 0; y + 1 < 40; ++y)
        for (int x = 0; x + 1 < 40; ++x) {
            total += e[y * 40 + x] == 1.0;
            pairs += e[y * 40 + x] == 1.0 && e[(y + 1) * 40 + x + 1] == 1.0;
        }
    CHECK(total > 20);
    CHECK(pairs == 0);
}

TEST_CASE("rasterize_lines: empty set, exact axis-aligned run, bounds") {
    CHECK(max_abs(rasterize_lines({}, 16, 24)) == 0.0);
    // pixel centers sit at (j + 0.5) / W; a width-1 line on row 5 from column 3 to 12
    const double W = 256, H = 256;
    LineSet one{{(3 + 0.5) / W, (5 + 0.5) / H, (12 + 0.5) / W, (5 + 0.5) / H, 1.0}};
    auto m = rasterize_lines(one, 256, 256, false).to_vector();
    bool exact = true;
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) exact = exact && m[y * 256 + x] == ((y == 5 && x >= 3 && x <= 12) ? 1.0 : 0.0);
    CHECK(exact);
    auto aa = rasterize_lines(one, 256, 256, true).to_vector();
    for (int x = 3; x <= 12; ++x) CHECK(aa[5 * 256 + x] >= 0.5);
    for (double v : aa) CHECK((v >= 0.0 && v <= 1.0));
    CHECK_THROWS_AS(rasterize_lines(one, 0, 5), ContractError);
}

TEST_CASE("rasterize_lines: multiscale consistency") {
    double worst_mad = 0, worst_iou = 1;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto set = random_lines(seed, 6, 3.0);
        auto a = rasterize_lines(set, 256, 256).to_vector();
        auto b = box_down2(rasterize_lines(set, 512, 512).to_vector(), 512, 512);
        double mad = 0;
        for (std::size_t i = 0; i < a.size(); ++i) mad += std::abs(a[i] - b[i]);
        worst_mad = std::max(worst_mad, mad / a.size());

        auto coarse = rasterize_lines(set, 128, 128, false);
        auto up = resize_nearest(coarse, 256, 256).to_vector();
        auto fine = rasterize_lines(set, 256, 256).to_vector();
        double inter = 0, uni = 0;
        for (std::size_t i = 0; i < fine.size(); ++i) {
            bool p = fine[i] >= 0.5, q = up[i] >= 0.5;
            inter += p && q;
            uni += p || q;
        }
        worst_iou = std::min(worst_iou, inter / uni);
    }
    MESSAGE("multiscale worst MAD " << worst_mad << ", worst IoU " << worst_iou);
    CHECK(worst_mad <= 0.05);
    CHECK(worst_iou >= 0.6);
}

TEST_CASE("rasterize_lines: drawn pixels lie near the analytic segments") {
    auto set = random_lines(77, 5, 2.0);
    const std::int64_t S = 64;
    auto m = rasterize_lines(set, S, S).to_vector();
    bool ok = true;
    for (std::int64_t y = 0; y < S; ++y)
        for (std::int64_t x = 0; x < S; ++x) {
            if (m[y * S + x] == 0.0) continue;
            double best = 1e9;
            for (const auto& s : set) {
                double ax = s.x0 * S - 0.5, ay = s.y0 * S - 0.5, bx = s.x1 * S - 0.5, by = s.y1 * S - 0.5;
                double dx = bx - ax, dy = by - ay, l2 = dx * dx + dy * dy;
                double t = l2 > 0 ? std::clamp(((x - ax) * dx + (y - ay) * dy) / l2, 0.0, 1.0) : 0.0;
                best = std::min(best, std::hypot(ax + t * dx - x, ay + t * dy - y));
            }
            ok = ok && best <= 0.5 * std::max(1.0, 2.0 * S / 256.0) + 1.0;
        }
    CHECK(ok);
}

TEST_CASE("line set text format") {
    LineSet set{{0.1, 0.2, 0.3, 0.4, 2.0}, {1.0, 0.0, 0.0, 1.0, 0.5}};
    std::stringstream ss;
    write_lines(ss, set);
    auto back = read_lines(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].x0 == 0.1);
    CHECK(back[1].width == 0.5);
    std::istringstream c("# header\n\n0 0 1 1 3 # trailing\n   \n");
    CHECK(read_lines(c).size() == 1);
    std::istringstream bad1("0 0 1 1\n");
    CHECK_THROWS_AS(read_lines(bad1), FormatError);
    std::istringstream bad2("0 0 1.5 1 2\n");
    CHECK_THROWS_AS(read_lines(bad2), FormatError);
    std::istringstream bad3("0 0 1 1 2 7\n");
    CHECK_THROWS_AS(read_lines(bad3), FormatError);
    std::istringstream bad4("0 0 1 1 0\n");
    CHECK_THROWS_AS(read_lines(bad4), FormatError);
}

TEST_CASE("SSU: doubling shape and gradients") {
    SSU ssu(16, 3);
    CHECK(ssu(Tensor::zeros({1, 1, 64, 64}, DType::f32)).shape() == Shape{1, 1, 128, 128});
    CHECK(ssu(Tensor::zeros({2, 1, 10, 6}, DType::f32)).shape() == Shape{2, 1, 20, 12});
    CHECK_THROWS_AS(ssu(Tensor::zeros({1, 2, 8, 8}, DType::f32)), DimensionError);

    SSU s32(4, 5);
    Tensor x = randu({1, 1, 8, 8}, 6, 0, 1, DType::f32), w = randn({1, 1, 16, 16}, 7, DType::f32);
    CHECK(grad_check([&](const Tensor& t) { return mean(mul(s32(t), w)); }, x) <= 1e-3);
    ParamSet p32 = s32.params();
    CHECK(grad_check_params([&] { return mean(mul(s32(x), w)); }, p32.trainable(), {0.0, 8}) <= 1e-2);

    SSU s64(4, 5, DType::f64);
    Tensor xd = randu({1, 1, 8, 8}, 6, 0, 1), wd = randn({1, 1, 16, 16}, 7);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(s64(t), wd)); }, xd) <= 1e-5);
    ParamSet p64 = s64.params();
    // zero biases leave pre-activations fed only by ReLU zeros exactly on the kink
    Rng br(8);
    for (const auto& e : p64.entries())
        if (e.tensor.rank() == 1) {
            Tensor b = e.tensor;
            for (auto& v : b.mutable_data<double>()) v = br.normal(0, 0.1);
        }
    CHECK(grad_check_params([&] { return sum(mul(s64(xd), wd)); }, p64.trainable(), {0.0, 12}) <= 1e-5);
}

TEST_CASE("upsample_iterative") {
    CHECK(doubling_count(256, 256) == 0);
    CHECK(doubling_count(256, 512) == 1);
    CHECK(doubling_count(256, 1024) == 2);
    CHECK(doubling_count(256, 600) == 2);
    CHECK_THROWS_AS(doubling_count(256, 128), ContractError);

    SSUConfig cfg;
    CHECK(cfg.gamma == 2.0);
    CHECK(cfg.beta == 2.0);
    CHECK(std::abs(shifted_sigmoid(Tensor::zeros({1}, DType::f64), cfg).item() - 0.98201379003790845) <= 1e-12);

    SSU ssu(8, 9);
    Tensor m = randu({1, 1, 32, 32}, 10, 0, 1, DType::f32);
    CHECK(upsample_iterative(ssu, m, cfg, 32, 32).bitwise_equal(m));
    CHECK_THROWS_AS(upsample_iterative(ssu, m, cfg, 16, 32), ContractError);

    Tensor big = rasterize_lines(random_lines(3, 4, 2.0), 256, 256);
    Tensor up = upsample_iterative(ssu, big, cfg, 1024, 1024);
    CHECK(up.shape() == Shape{1, 1, 1024, 1024});
    auto v = up.to_vector();
    CHECK(*std::min_element(v.begin(), v.end()) > 0.0);
    CHECK(*std::max_element(v.begin(), v.end()) < 1.0);
    CHECK(upsample_iterative(ssu, m, cfg, 50, 70).shape() == Shape{1, 1, 50, 70});

    SSU zero(8, 9);
    for (const auto& e : zero.params().entries()) {
        Tensor t = e.tensor;
        for (auto& x : t.mutable_data<float>()) x = 0.0f;
    }
    Tensor z = upsample_iterative(zero, Tensor::zeros({1, 1, 16, 16}, DType::f32), cfg, 64, 64);
    const float expect = static_cast<float>(1.0 / (1.0 + std::exp(-4.0)));
    bool constant = true;
    for (float x : z.data<float>()) constant = constant && x == expect;
    CHECK(constant);
}
