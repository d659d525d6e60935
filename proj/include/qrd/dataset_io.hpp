#pragma once

#include <cstdint>
#include <string>

#include "qrd/sim.hpp"

namespace qrd {

// Dataset file layout (little-endian):
//   magic "QRT1", u32 format version,
//   u32-length-prefixed JSON header (device, states, shot count, splits,
//   RNG name, seed),
//   per shot: N float32 I samples, N float32 Q samples, u32-length-prefixed
//   JSON ground-truth record,
//   trailing CRC32 over everything between the version field and the CRC.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void write_dataset(const TraceDataset& dataset, const std::string& path);
TraceDataset read_dataset(const std::string& path);

// CRC32 (IEEE reflected polynomial, zlib-compatible).
std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed = 0);
std::uint32_t crc32_file(const std::string& path);

}  // namespace qrd
