#include "mvs/checkpoint.hpp"

#include <fstream>

#include "mvs/error.hpp"

namespace mvs::ckpt {

namespace {
constexpr char kMagic[8] = {'M', 'V', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::uint64_t store_checksum(const ParamStore& ps) {
    return store_checksum(ps, "");
}

std::uint64_t store_checksum(const ParamStore& ps, const std::string& prefix) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [name, t] : ps.tensors) {
        if (name.rfind(prefix, 0) != 0) continue;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        std::uint64_t th = ad::checksum(t);
        for (int b = 0; b < 8; ++b) {
            h ^= (th >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    }
    return h;
}

void save_checkpoint(const ParamStore& ps, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_checkpoint: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    std::uint32_t ver = kVersion;
    std::uint32_t count = static_cast<std::uint32_t>(ps.tensors.size());
    f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    f.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& [name, t] : ps.tensors) {
        std::uint32_t len = static_cast<std::uint32_t>(name.size());
        f.write(reinterpret_cast<const char*>(&len), sizeof(len));
        f.write(name.data(), len);
        std::int32_t rows = t.rows, cols = t.cols;
        f.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
        f.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
        f.write(reinterpret_cast<const char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    }
    if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::string(magic, 8) != std::string(kMagic, 8))
        throw IoError("load_checkpoint: bad magic in " + path);
    std::uint32_t ver = 0, count = 0;
    f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    f.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (ver != kVersion) throw IoError("load_checkpoint: unsupported version");
    ParamStore ps;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = 0;
        f.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string name(len, '\0');
        f.read(name.data(), len);
        std::int32_t rows = 0, cols = 0;
        f.read(reinterpret_cast<char*>(&rows), sizeof(rows));
        f.read(reinterpret_cast<char*>(&cols), sizeof(cols));
        ad::Tensor t(rows, cols);
        f.read(reinterpret_cast<char*>(t.v.data()),
               static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        if (!f) throw IoError("load_checkpoint: truncated file " + path);
        ps.tensors.emplace(std::move(name), std::move(t));
    }
    return ps;
}

}  // namespace mvs::ckpt
