#include "gsa/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace gsa {

namespace {

constexpr std::array<char, 4> kMagic{'G', 'S', 'A', 'T'};
constexpr std::uint8_t kVersion = 1;

template <class T>
void put_le(std::ostream& os, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw FormatError("GSAT: truncated stream");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace

void write_gsat(std::ostream& os, const Tensor& t) {
    if (t.rank() > 255) throw FormatError("GSAT: rank exceeds 255");
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint8_t>(os, kVersion);
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype()));
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) put_le<std::uint64_t>(os, e);
    if (t.dtype() == Dtype::f64) {
        for (double v : t.data()) put_le<double>(os, v);
    } else {
        for (double v : t.data()) put_le<float>(os, static_cast<float>(v));
    }
    if (!os) throw FormatError("GSAT: write failed");
}

Tensor read_gsat(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("GSAT: bad magic");
    auto version = get_le<std::uint8_t>(is);
    if (version != kVersion) throw FormatError("GSAT: unsupported version " + std::to_string(version));
    auto dtype_tag = get_le<std::uint8_t>(is);
    if (dtype_tag > 1) throw FormatError("GSAT: unknown dtype " + std::to_string(dtype_tag));
    auto rank = get_le<std::uint8_t>(is);
    Shape shape(rank);
    for (auto& e : shape) {
        e = static_cast<std::size_t>(get_le<std::uint64_t>(is));
        if (e == 0) throw FormatError("GSAT: zero extent");
    }
    std::vector<double> data(shape_volume(shape));
    const auto dtype = static_cast<Dtype>(dtype_tag);
    for (auto& v : data) v = dtype == Dtype::f64 ? get_le<double>(is) : static_cast<double>(get_le<float>(is));
    return Tensor(std::move(shape), std::move(data), dtype);
}

void save_gsat(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("GSAT: cannot open " + path.string() + " for writing");
    write_gsat(os, t);
}

Tensor load_gsat(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("GSAT: cannot open " + path.string());
    return read_gsat(is);
}

}  // namespace gsa
