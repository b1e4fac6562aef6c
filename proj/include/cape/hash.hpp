#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cape {

std::string sha256_hex(std::string_view data);

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

// Seed derived from a master seed and a label (e.g. a run id); independent of
// scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace cape
