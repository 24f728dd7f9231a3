#include "inpaint/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace inpaint {

namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

constexpr char kMagic[4] = {'Z', 'T', 'E', 'N'};
constexpr std::uint8_t kVersion = 0x01;

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(std::string("truncated input while reading ") + what);
    return v;
}

}  // namespace

void write_zten(std::ostream& os, const Tensor& t) {
    os.write(kMagic, 4);
    put<std::uint8_t>(os, kVersion);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    dispatch(t.dtype(), [&]<typename T>() {
        auto d = t.data<T>();
        os.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(T)));
    });
    if (!os) throw FormatError("write failure while writing ZTEN record");
}

Tensor read_zten(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("truncated input while reading ZTEN magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad ZTEN magic");
    auto version = get<std::uint8_t>(is, "ZTEN version");
    if (version != kVersion) throw FormatError("unsupported ZTEN version " + std::to_string(version));
    auto dt = get<std::uint8_t>(is, "ZTEN dtype");
    if (dt != 0x01 && dt != 0x02) throw FormatError("unknown ZTEN dtype byte " + std::to_string(dt));
    auto rank = get<std::uint8_t>(is, "ZTEN rank");
    if (rank > Tensor::kMaxRank) throw FormatError("ZTEN rank " + std::to_string(rank) + " exceeds 5");
    Shape shape;
    for (int i = 0; i < rank; ++i) {
        auto e = get<std::uint32_t>(is, "ZTEN extent");
        if (e == 0) throw FormatError("ZTEN extent of zero");
        shape.push_back(e);
    }
    Tensor t(shape, static_cast<DType>(dt));
    dispatch(t.dtype(), [&]<typename T>() {
        auto d = t.mutable_data<T>();
        if (!is.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(T))))
            throw FormatError("truncated ZTEN payload");
    });
    return t;
}

void save_zten(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    write_zten(os, t);
}

Tensor load_zten(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_zten(is);
}

void write_checkpoint(std::ostream& os, const NamedTensors& entries) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        if (name.size() > 0xFFFF) throw FormatError("checkpoint entry name too long: " + name.substr(0, 32) + "...");
        put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_zten(os, t);
    }
}

NamedTensors read_checkpoint(std::istream& is) {
    auto count = get<std::uint32_t>(is, "checkpoint entry count");
    NamedTensors out;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto len = get<std::uint16_t>(is, "checkpoint name length");
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw FormatError("truncated checkpoint entry name");
        out.emplace_back(std::move(name), read_zten(is));
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    write_checkpoint(os, entries);
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_checkpoint(is);
}

}  // namespace inpaint
