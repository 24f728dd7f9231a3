#include "inpaint/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "inpaint/nn.hpp"

namespace inpaint {

namespace {

bool inside_polygon(const std::vector<std::array<double, 2>>& poly, double x, double y) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) in = !in;
    }
    return in;
}

struct MaskCanvas {
    BinaryMask m;
    std::int64_t count = 0;

    MaskCanvas(std::int64_t h, std::int64_t w) : m(h, w) {}
    double rate() const { return static_cast<double>(count) / static_cast<double>(m.h * m.w); }
    void set(std::int64_t y, std::int64_t x) {
        auto& b = m(y, x);
        if (!b) {
            b = 1;
            ++count;
        }
    }
    void disk(double cx, double cy, double r) {
        const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cy - r)));
        const auto y1 = std::min<std::int64_t>(m.h - 1, static_cast<std::int64_t>(std::ceil(cy + r)));
        const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cx - r)));
        const auto x1 = std::min<std::int64_t>(m.w - 1, static_cast<std::int64_t>(std::ceil(cx + r)));
        for (auto y = y0; y <= y1; ++y)
            for (auto x = x0; x <= x1; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) set(y, x);
    }
    void polygon(const std::vector<std::array<double, 2>>& poly) {
        for (std::int64_t y = 0; y < m.h; ++y)
            for (std::int64_t x = 0; x < m.w; ++x)
                if (inside_polygon(poly, static_cast<double>(x), static_cast<double>(y))) set(y, x);
    }
};

std::array<double, 3> random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

double luma(const std::array<double, 3>& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

std::array<double, 3> contrasting_color(Rng& rng, double ref, double min_contrast) {
    for (int i = 0; i < 64; ++i) {
        auto c = random_color(rng);
        if (std::abs(luma(c) - ref) >= min_contrast) return c;
    }
    const double g = ref < 0.5 ? std::min(1.0, ref + min_contrast + 0.1) : std::max(0.0, ref - min_contrast - 0.1);
    return {g, g, g};
}

// A point on the image border in normalized coordinates; side 0..3 = top, right, bottom, left.
std::array<double, 2> border_point(Rng& rng, int side) {
    const double t = rng.uniform(0.05, 0.95);
    switch (side) {
        case 0: return {t, 0.0};
        case 1: return {1.0, t};
        case 2: return {t, 1.0};
        default: return {0.0, t};
    }
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto split = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return split(split(split(a) ^ b) ^ c);
}

MaskSample generate_mask(const MaskGenConfig& cfg, std::uint64_t seed) {
    if (cfg.h < 32 || cfg.w < 32) throw ContractError("generate_mask: size must be at least 32");
    if (!(cfg.rate_lo >= 0 && cfg.rate_lo <= cfg.rate_hi && cfg.rate_hi <= 1))
        throw ContractError("generate_mask: need 0 <= rate_lo <= rate_hi <= 1");
    Rng rng(seed);
    MaskSample out;
    out.blob = rng.bernoulli(cfg.blob_prob);
    const double side = static_cast<double>(std::min(cfg.h, cfg.w));
    const double lo = cfg.rate_lo - cfg.tolerance, hi = cfg.rate_hi + cfg.tolerance;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        const double target = rng.uniform(cfg.rate_lo, cfg.rate_hi);
        MaskCanvas cv(cfg.h, cfg.w);
        if (out.blob) {
            const int n = static_cast<int>(rng.integer(1, 3));
            for (int b = 0; b < n; ++b) {
                const double area = target * static_cast<double>(cfg.h * cfg.w) * rng.uniform(0.3, 0.7) / n;
                const double r = std::sqrt(area / M_PI);
                const double cx = rng.uniform(0, static_cast<double>(cfg.w - 1)), cy = rng.uniform(0, static_cast<double>(cfg.h - 1));
                std::vector<std::array<double, 2>> poly;
                const double phase = rng.uniform(0, 2 * M_PI);
                for (int k = 0; k < 12; ++k) {
                    const double a = phase + 2 * M_PI * k / 12, rr = r * rng.uniform(0.75, 1.25);
                    poly.push_back({cx + rr * std::cos(a), cy + rr * std::sin(a)});
                }
                cv.polygon(poly);
            }
        }
        int stamps = 0;
        while (cv.rate() < target && stamps < cfg.max_stamps) {
            const double r = 0.5 * side * rng.uniform(cfg.brush_min, cfg.brush_max);
            double x = rng.uniform(0, static_cast<double>(cfg.w - 1)), y = rng.uniform(0, static_cast<double>(cfg.h - 1));
            double ang = rng.uniform(0, 2 * M_PI);
            const int vertices = static_cast<int>(rng.integer(4, 10));
            for (int v = 0; v < vertices && cv.rate() < target && stamps < cfg.max_stamps; ++v) {
                ang += rng.uniform(-M_PI / 2, M_PI / 2);
                const double len = side * rng.uniform(cfg.step_min, cfg.step_max);
                for (double t = 0; t < len && cv.rate() < target && stamps < cfg.max_stamps; t += 1.0, ++stamps) {
                    cv.disk(x, y, r);
                    x = std::clamp(x + std::cos(ang), 0.0, static_cast<double>(cfg.w - 1));
                    y = std::clamp(y + std::sin(ang), 0.0, static_cast<double>(cfg.h - 1));
                }
            }
        }
        const double rate = cv.rate();
        if (rate >= lo && rate <= hi) {
            out.mask = std::move(cv.m);
            out.rate = rate;
            out.attempts = attempt;
            return out;
        }
    }
    throw MaskGenError("generate_mask: rate band [" + std::to_string(cfg.rate_lo) + ", " + std::to_string(cfg.rate_hi) + "] not reached in " +
                       std::to_string(cfg.max_attempts) + " attempts");
}

Scene synth_scene(const SceneConfig& cfg, std::uint64_t seed, DType dt) {
    const std::int64_t S = cfg.size;
    if (S < 8) throw ContractError("synth_scene: size must be at least 8");
    Rng rng(seed);
    std::vector<double> img(3 * S * S);
    auto bg = random_color(rng);
    for (int c = 0; c < 3; ++c) std::fill(img.begin() + c * S * S, img.begin() + (c + 1) * S * S, bg[c]);
    const double bl = luma(bg);
    Scene sc;

    const int nq = static_cast<int>(rng.integer(cfg.quads_min, std::max(cfg.quads_min, cfg.quads_max)));
    constexpr int kSub = 4;
    std::vector<std::array<double, 3>> placed;  // bounding circles, so no quad hides another's sides
    for (int q = 0; q < nq; ++q) {
        double cx = 0, cy = 0, hw = 0, hh = 0;
        bool found = false;
        for (int tries = 0; tries < 50 && !found; ++tries) {
            cx = rng.uniform(0.2, 0.8);
            cy = rng.uniform(0.2, 0.8);
            hw = rng.uniform(0.08, 0.22);
            hh = rng.uniform(0.08, 0.22);
            const double rad = std::hypot(hw, hh);
            found = std::all_of(placed.begin(), placed.end(), [&](const auto& p) { return std::hypot(p[0] - cx, p[1] - cy) > p[2] + rad + 0.02; });
        }
        if (!found) continue;
        placed.push_back({cx, cy, std::hypot(hw, hh)});
        const double th = rng.uniform(0, M_PI);
        std::vector<std::array<double, 2>> quad;
        const double sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, -1, 1, 1};
        for (int k = 0; k < 4; ++k) {
            const double lx = sx[k] * hw * rng.uniform(0.85, 1.0), ly = sy[k] * hh * rng.uniform(0.85, 1.0);
            quad.push_back({std::clamp(cx + lx * std::cos(th) - ly * std::sin(th), 0.0, 1.0),
                            std::clamp(cy + lx * std::sin(th) + ly * std::cos(th), 0.0, 1.0)});
        }
        auto col = contrasting_color(rng, bl, cfg.min_contrast);
        for (std::int64_t y = 0; y < S; ++y)
            for (std::int64_t x = 0; x < S; ++x) {
                int hit = 0;
                for (int a = 0; a < kSub; ++a)
                    for (int b = 0; b < kSub; ++b)
                        hit += inside_polygon(quad, (x + (b + 0.5) / kSub) / S, (y + (a + 0.5) / kSub) / S);
                if (!hit) continue;
                const double cov = static_cast<double>(hit) / (kSub * kSub);
                for (int c = 0; c < 3; ++c) {
                    auto& v = img[(c * S + y) * S + x];
                    v = (1 - cov) * v + cov * col[c];
                }
            }
        for (int k = 0; k < 4; ++k) {
            const auto& a = quad[k];
            const auto& b = quad[(k + 1) % 4];
            sc.lines.push_back({a[0], a[1], b[0], b[1], cfg.line_width});
        }
    }

    const int nl = static_cast<int>(rng.integer(cfg.lines_min, std::max(cfg.lines_min, cfg.lines_max)));
    LineSet spans;
    for (int l = 0; l < nl; ++l) {
        const int s0 = static_cast<int>(rng.integer(0, 3));
        const int s1 = (s0 + static_cast<int>(rng.integer(1, 3))) % 4;
        auto a = border_point(rng, s0), b = border_point(rng, s1);
        spans.push_back({a[0], a[1], b[0], b[1], cfg.line_width});
    }
    if (!spans.empty()) {
        auto col = contrasting_color(rng, bl, cfg.min_contrast);
        auto cov = rasterize_lines(spans, S, S, true, DType::f64).to_vector();
        for (std::int64_t i = 0; i < S * S; ++i)
            for (int c = 0; c < 3; ++c) img[c * S * S + i] = (1 - cov[i]) * img[c * S * S + i] + cov[i] * col[c];
    }
    sc.lines.insert(sc.lines.end(), spans.begin(), spans.end());

    std::vector<double> gray(S * S);
    for (std::int64_t i = 0; i < S * S; ++i) gray[i] = 0.299 * img[i] + 0.587 * img[S * S + i] + 0.114 * img[2 * S * S + i];
    sc.image = Tensor::from_doubles({1, 3, S, S}, img, dt);
    sc.edge = canny(Tensor::from_doubles({S, S}, gray, DType::f64), CannyOptions{canny_default_sigma(S)}).to(dt);
    sc.line = rasterize_lines(sc.lines, S, S, false, dt);
    return sc;
}

}  // namespace inpaint
