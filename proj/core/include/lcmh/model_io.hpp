#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lcmh/binary_io.hpp"
#include "lcmh/hash_learn.hpp"
#include "lcmh/network.hpp"

namespace lcmh {

/// Network block: u64 layer count, per layer u64 input_dim, u64 output_dim, u32 activation
/// tag, then every parameter as little-endian f64 in declaration order.
void write_net(ByteWriter& out, const FeedForwardNet& net);
FeedForwardNet read_net(ByteReader& in);

/// "LCMH" model file: magic, u32 version, code length, alpha, beta, head/tail partition,
/// image embedder + prototype bank, text embedder + prototype bank, training codes.
std::vector<std::uint8_t> encode_model(const HashModel& model);
HashModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const HashModel& model, const std::filesystem::path& path);
HashModel load_model(const std::filesystem::path& path);

}  // namespace lcmh
