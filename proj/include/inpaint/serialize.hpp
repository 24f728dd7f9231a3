#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

/// Malformed or truncated ZTEN / checkpoint data.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// ZTEN record: "ZTEN", version 0x01, dtype byte (0x01 f32, 0x02 f64), rank byte,
// rank little-endian u32 extents, row-major little-endian payload.
void write_zten(std::ostream& os, const Tensor& t);
Tensor read_zten(std::istream& is);
void save_zten(const std::filesystem::path& path, const Tensor& t);
Tensor load_zten(const std::filesystem::path& path);

// Checkpoint: u32 entry count, then per entry u16 name length, UTF-8 name, ZTEN record.
void write_checkpoint(std::ostream& os, const NamedTensors& entries);
NamedTensors read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace inpaint
