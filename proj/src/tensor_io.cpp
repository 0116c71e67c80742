#include "nadsnet/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "NDT1 writer assumes a little-endian host");

namespace nadsnet {

namespace {
constexpr char kMagic[4] = {'N', 'D', 'T', '1'};
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("save_tensor: cannot open " + path.string());
    out.write(kMagic, 4);
    const std::uint32_t header[4] = {3u, static_cast<std::uint32_t>(t.height),
                                     static_cast<std::uint32_t>(t.width),
                                     static_cast<std::uint32_t>(t.channels)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!out) throw FormatError("save_tensor: write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_tensor: cannot open " + path.string());

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("load_tensor: bad magic in " + path.string());
    }
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    if (!in || rank != 3) {
        throw FormatError("load_tensor: unsupported rank " + std::to_string(rank) + " in " +
                          path.string());
    }
    std::uint32_t dims[3];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) throw FormatError("load_tensor: truncated header in " + path.string());

    Tensor t(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != t.data.size() * sizeof(float)) {
        throw FormatError("load_tensor: truncated payload in " + path.string());
    }
    // Reject trailing garbage so round-trips stay bit-exact.
    in.peek();
    if (!in.eof()) throw FormatError("load_tensor: trailing bytes in " + path.string());
    return t;
}

}  // namespace nadsnet
