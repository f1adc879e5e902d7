#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "mvs/autodiff.hpp"

namespace mvs::ckpt {

// Named parameter table. std::map keeps iteration order stable, which the
// optimizer and checksum rely on.
struct ParamStore {
    std::map<std::string, ad::Tensor> tensors;
    std::set<std::string> frozen;  // excluded from training updates

    bool has(const std::string& name) const { return tensors.count(name) > 0; }
    ad::Tensor& at(const std::string& name) { return tensors.at(name); }
    const ad::Tensor& at(const std::string& name) const { return tensors.at(name); }
};

// combined FNV over all tensors, order-sensitive by name
std::uint64_t store_checksum(const ParamStore& ps);
// checksum restricted to names with the given prefix
std::uint64_t store_checksum(const ParamStore& ps, const std::string& prefix);

// Flat binary checkpoint: magic, version, tensor count, then per tensor
// (name, rows, cols, little-endian doubles).
void save_checkpoint(const ParamStore& ps, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace mvs::ckpt
