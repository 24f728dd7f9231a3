#include "inpaint/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "inpaint/autograd.hpp"
#include "inpaint/ops.hpp"
#include "inpaint/serialize.hpp"

namespace inpaint {

namespace {

// Separable Gaussian blur with replicated borders, kernel truncated at 4 sigma.
std::vector<double> gaussian_blur(const std::vector<double>& img, std::int64_t H, std::int64_t W, double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(2 * r + 1);
    double s = 0;
    for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& v : k) v /= s;
    auto clampi = [](std::int64_t v, std::int64_t n) { return std::clamp<std::int64_t>(v, 0, n - 1); };
    std::vector<double> tmp(img.size()), out(img.size());
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) {
            double a = 0;
            for (int i = -r; i <= r; ++i) a += k[i + r] * img[y * W + clampi(x + i, W)];
            tmp[y * W + x] = a;
        }
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) {
            double a = 0;
            for (int i = -r; i <= r; ++i) a += k[i + r] * tmp[clampi(y + i, H) * W + x];
            out[y * W + x] = a;
        }
    return out;
}

double seg_dist2(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay, l2 = dx * dx + dy * dy;
    double t = l2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = ax + t * dx - px, ey = ay + t * dy - py;
    return ex * ex + ey * ey;
}

}  // namespace

double canny_default_sigma(std::int64_t size) {
    return std::max(1.0, 2.0 + 0.5 * std::log2(static_cast<double>(size) / 256.0));
}

Tensor canny(const Tensor& gray, const CannyOptions& opt) {
    if (!(opt.sigma > 0)) throw ContractError("canny: sigma must be positive");
    std::int64_t H, W;
    if (gray.rank() == 2) {
        H = gray.size(0);
        W = gray.size(1);
    } else if (gray.rank() == 4 && gray.size(0) == 1 && gray.size(1) == 1) {
        H = gray.size(2);
        W = gray.size(3);
    } else {
        throw DimensionError("canny expects [H,W] or [1,1,H,W], got " + shape_str(gray.shape()));
    }
    auto g = gaussian_blur(gray.to_vector(), H, W, opt.sigma);
    auto px = [&](std::int64_t y, std::int64_t x) { return g[std::clamp<std::int64_t>(y, 0, H - 1) * W + std::clamp<std::int64_t>(x, 0, W - 1)]; };
    std::vector<double> gx(H * W), gy(H * W), mag(H * W);
    double mx = 0;
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) {
            const double sx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) - (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
            const double sy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) - (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
            const auto i = y * W + x;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = std::hypot(sx, sy);
            mx = std::max(mx, mag[i]);
        }
    Tensor out = Tensor::zeros({1, 1, H, W}, gray.dtype());
    if (mx <= 1e-12) return out;

    // NMS: strict on the "before" side, non-strict on the "after" side, so plateaus of two keep one pixel.
    auto m = [&](std::int64_t y, std::int64_t x) { return (y < 0 || y >= H || x < 0 || x >= W) ? 0.0 : mag[y * W + x]; };
    std::vector<double> thin(H * W, 0.0);
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) {
            const auto i = y * W + x;
            if (mag[i] <= 0) continue;
            double ang = std::atan2(gy[i], gx[i]) * 180.0 / M_PI;
            if (ang < 0) ang += 180.0;
            int dx, dy;
            if (ang < 22.5 || ang >= 157.5) dx = 1, dy = 0;
            else if (ang < 67.5) dx = 1, dy = 1;
            else if (ang < 112.5) dx = 0, dy = 1;
            else dx = -1, dy = 1;
            if (mag[i] > m(y - dy, x - dx) && mag[i] >= m(y + dy, x + dx)) thin[i] = mag[i];
        }

    const double lo = opt.low * mx, hi = opt.high * mx;
    std::vector<std::uint8_t> state(H * W, 0);  // 0 none, 1 weak, 2 edge
    std::vector<std::int64_t> stack;
    for (std::int64_t i = 0; i < H * W; ++i) {
        if (thin[i] >= hi) {
            state[i] = 2;
            stack.push_back(i);
        } else if (thin[i] >= lo) {
            state[i] = 1;
        }
    }
    while (!stack.empty()) {
        const auto i = stack.back();
        stack.pop_back();
        const auto y = i / W, x = i % W;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const auto ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                const auto j = ny * W + nx;
                if (state[j] == 1) {
                    state[j] = 2;
                    stack.push_back(j);
                }
            }
    }
    dispatch(out.dtype(), [&]<typename T>() {
        auto d = out.mutable_data<T>();
        for (std::int64_t i = 0; i < H * W; ++i) d[i] = state[i] == 2 ? T(1) : T(0);
    });
    return out;
}

Tensor rasterize_lines(const LineSet& lines, std::int64_t h, std::int64_t w, bool antialias, DType dt) {
    if (h < 1 || w < 1) throw ContractError("rasterize_lines: extents must be >= 1");
    std::vector<double> map(h * w, 0.0);
    const double scale = static_cast<double>(std::min(h, w)) / kLineReference;
    constexpr int kSub = 4;
    for (const auto& s : lines) {
        const double ax = s.x0 * w - 0.5, ay = s.y0 * h - 0.5, bx = s.x1 * w - 0.5, by = s.y1 * h - 0.5;
        const double r = 0.5 * std::max(1.0, s.width * scale), r2 = r * r;
        const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(ay, by) - r - 1)));
        const auto y1 = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::ceil(std::max(ay, by) + r + 1)));
        const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(ax, bx) - r - 1)));
        const auto x1 = std::min<std::int64_t>(w - 1, static_cast<std::int64_t>(std::ceil(std::max(ax, bx) + r + 1)));
        for (auto y = y0; y <= y1; ++y)
            for (auto x = x0; x <= x1; ++x) {
                double v;
                if (antialias) {
                    int hit = 0;
                    for (int sy = 0; sy < kSub; ++sy)
                        for (int sx = 0; sx < kSub; ++sx)
                            hit += seg_dist2(x + (sx + 0.5) / kSub - 0.5, y + (sy + 0.5) / kSub - 0.5, ax, ay, bx, by) <= r2;
                    v = static_cast<double>(hit) / (kSub * kSub);
                } else {
                    v = seg_dist2(static_cast<double>(x), static_cast<double>(y), ax, ay, bx, by) <= r2 ? 1.0 : 0.0;
                }
                auto& d = map[y * w + x];
                d = std::max(d, v);
            }
    }
    return Tensor::from_doubles({1, 1, h, w}, map, dt);
}

LineSet read_lines(std::istream& is) {
    LineSet out;
    std::string line;
    int no = 0;
    while (std::getline(is, line)) {
        ++no;
        if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
        std::istringstream ss(line);
        LineSegment s;
        if (!(ss >> s.x0)) continue;
        std::string extra;
        if (!(ss >> s.y0 >> s.x1 >> s.y1 >> s.width) || (ss >> extra))
            throw FormatError("line set, line " + std::to_string(no) + ": expected \"x0 y0 x1 y1 width\"");
        for (double c : {s.x0, s.y0, s.x1, s.y1})
            if (!(c >= 0.0 && c <= 1.0)) throw FormatError("line set, line " + std::to_string(no) + ": coordinate outside [0,1]");
        if (!(s.width > 0)) throw FormatError("line set, line " + std::to_string(no) + ": width must be positive");
        out.push_back(s);
    }
    return out;
}

void write_lines(std::ostream& os, const LineSet& lines) {
    os << "# x0 y0 x1 y1 width\n";
    os.precision(17);
    for (const auto& s : lines) os << s.x0 << ' ' << s.y0 << ' ' << s.x1 << ' ' << s.y1 << ' ' << s.width << '\n';
}

LineSet load_lines(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_lines(is);
}

void save_lines(const std::filesystem::path& path, const LineSet& lines) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    write_lines(os, lines);
}

SSU::SSU(std::int64_t width, std::uint64_t seed, DType dt) {
    Rng rng(seed);
    const ConvSpec k3{1, 1, 1};
    c1_ = Conv2d(1, width, 3, k3, rng, dt);
    c2_ = Conv2d(width, width, 3, k3, rng, dt);
    up_ = ConvTranspose2d(width, width, 4, ConvSpec{2, 1, 1}, rng, dt);
    out_ = Conv2d(width, 1, 3, k3, rng, dt);
}

Tensor SSU::operator()(const Tensor& x) const {
    if (x.rank() != 4 || x.size(1) != 1) throw DimensionError("SSU expects [N,1,H,W], got " + shape_str(x.shape()));
    return out_(relu(up_(relu(c2_(relu(c1_(x)))))));
}

ParamSet SSU::params() const {
    ParamSet ps;
    c1_.collect(ps, "ssu.c1");
    c2_.collect(ps, "ssu.c2");
    up_.collect(ps, "ssu.up");
    out_.collect(ps, "ssu.out");
    return ps;
}

Tensor shifted_sigmoid(const Tensor& logits, const SSUConfig& cfg) {
    // Saturated sigmoids round to exactly 0 or 1 (float32 beyond |v| ~ 17); keep the open interval.
    const bool f32 = logits.dtype() == DType::f32;
    const double lo = f32 ? std::numeric_limits<float>::min() : std::numeric_limits<double>::min();
    const double hi = f32 ? std::nextafter(1.0f, 0.0f) : std::nextafter(1.0, 0.0);
    return clamp(sigmoid(mul_scalar(add_scalar(logits, cfg.beta), cfg.gamma)), lo, hi);
}

int doubling_count(std::int64_t source, std::int64_t target) {
    if (target < source) throw ContractError("upsampling target " + std::to_string(target) + " is smaller than source " + std::to_string(source));
    int q = 0;
    for (std::int64_t s = source; s < target; s *= 2) ++q;
    return q;
}

Tensor upsample_iterative(const SSU& ssu, const Tensor& map, const SSUConfig& cfg, std::int64_t target_h, std::int64_t target_w) {
    if (map.rank() != 4 || map.size(1) != 1) throw DimensionError("upsample_iterative expects [N,1,H,W], got " + shape_str(map.shape()));
    if (!(cfg.gamma > 0 && cfg.beta > 0)) throw ContractError("shifted sigmoid needs gamma, beta > 0");
    const int q = std::max(doubling_count(map.size(2), target_h), doubling_count(map.size(3), target_w));
    NoGradGuard ng;
    Tensor x = map;
    for (int i = 0; i < q; ++i) x = shifted_sigmoid(ssu(x), cfg);
    if (x.size(2) == target_h && x.size(3) == target_w) return q == 0 ? map.clone() : x;
    return resize_bilinear(x, target_h, target_w);
}

}  // namespace inpaint
