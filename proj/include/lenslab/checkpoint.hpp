#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace lenslab::ckpt {

// On-disk container shared by model and translator checkpoints:
//   magic "LLABCKPT" | u32 version | u32 header length | header JSON | raw
//   little-endian doubles, one tensor after another in header order.
inline constexpr char kMagic[8] = {'L', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kVersion = 1;

struct TensorRecord {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
};

struct Container {
    std::string kind;             // "model" or "translators"
    nlohmann::ordered_json meta;  // config + fingerprints, kind-specific
    std::vector<TensorRecord> tensors;

    const TensorRecord& tensor(const std::string& name) const;
};

void save(const std::string& path, const Container& c);

// Throws std::runtime_error on IO failure, bad magic, version mismatch,
// kind mismatch, or truncated/oversized payload.
Container load(const std::string& path, const std::string& expected_kind);

} // namespace lenslab::ckpt
