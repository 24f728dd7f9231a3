#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "inpaint/nn.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

struct CannyOptions {
    double sigma = 2.0;
    double low = 0.1;   // fraction of the maximum gradient magnitude
    double high = 0.2;
};

/// 2.0 at 256, 2.5 at 512, half a unit per octave, never below 1.
double canny_default_sigma(std::int64_t size);

/// gray [H,W] or [1,1,H,W]; returns a {0,1} map [1,1,H,W] in the input dtype.
Tensor canny(const Tensor& gray, const CannyOptions& opt = {});

/// Endpoints in normalized [0,1]^2 (x right, y down); width in pixels at the reference resolution.
struct LineSegment {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double width = 1.0;
};

using LineSet = std::vector<LineSegment>;

constexpr double kLineReference = 256.0;

/// Capsule rasterization. Normalized x maps to pixel coordinate x*W - 0.5 (pixel centers at integers).
/// Width scales by min(H,W)/256 and is floored at one pixel. With antialias, the value is the 4x4
/// supersampled coverage; otherwise the pixel-center test. Overlaps combine by max. Returns [1,1,H,W].
Tensor rasterize_lines(const LineSet& lines, std::int64_t h, std::int64_t w, bool antialias = true, DType dt = DType::f32);

/// Text format: one segment per line "x0 y0 x1 y1 width", '#' starts a comment. Throws FormatError.
LineSet read_lines(std::istream& is);
void write_lines(std::ostream& os, const LineSet& lines);
LineSet load_lines(const std::filesystem::path& path);
void save_lines(const std::filesystem::path& path, const LineSet& lines);

struct SSUConfig {
    double gamma = 2.0;
    double beta = 2.0;
};

/// conv3 -> ReLU -> conv3 -> ReLU -> tconv(4, stride 2) -> ReLU -> conv3; [N,1,H,W] -> logits [N,1,2H,2W].
class SSU {
public:
    SSU() = default;
    SSU(std::int64_t width, std::uint64_t seed, DType dt = DType::f32);
    Tensor operator()(const Tensor& x) const;
    ParamSet params() const;
    std::int64_t width() const { return c1_.weight.size(0); }

private:
    Conv2d c1_, c2_;
    ConvTranspose2d up_;
    Conv2d out_;
};

/// sigmoid(gamma * (logits + beta)), clamped to the open interval representable in the dtype.
Tensor shifted_sigmoid(const Tensor& logits, const SSUConfig& cfg);

/// Number of doublings to reach at least the target extent.
int doubling_count(std::int64_t source, std::int64_t target);

/// q = doubling_count doublings, each through the SSU and the shifted sigmoid, then bilinear to the exact
/// target. Throws ContractError when the target is smaller than the source.
Tensor upsample_iterative(const SSU& ssu, const Tensor& map, const SSUConfig& cfg, std::int64_t target_h, std::int64_t target_w);

}  // namespace inpaint
