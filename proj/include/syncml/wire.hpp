#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace syncml {

enum class MessageKind : std::uint8_t { Broadcast = 1, Update = 2, Control = 3 };

inline constexpr std::uint16_t kMasterId = 0xFFFF;

struct WireMessage {
  std::uint32_t round = 0;
  MessageKind kind = MessageKind::Broadcast;
  std::uint16_t worker_id = kMasterId;
  std::vector<double> payload;
};

// Frame layout, little-endian:
//   magic(4) | version(1) | kind(1) | round(4) | worker_id(2) | payload_len(4)
//   | payload(f64 × payload_len) | crc32(4)
// The CRC-32 covers every byte before it.
inline constexpr std::uint32_t kWireMagic = 0x4C4D5953;  // "SYML"
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 16;
inline constexpr std::size_t kFrameTrailerSize = 4;
inline constexpr std::uint32_t kMaxPayloadLength = 1u << 28;

struct FrameHeader {
  MessageKind kind;
  std::uint32_t round;
  std::uint16_t worker_id;
  std::uint32_t payload_len;

  std::size_t frame_size() const {
    return kFrameHeaderSize + 8 * std::size_t{payload_len} + kFrameTrailerSize;
  }
};

std::uint32_t crc32(std::span<const std::byte> bytes);

std::vector<std::byte> encode_frame(const WireMessage& msg);

// Validates magic, version, kind and the length bound. Throws ProtocolError.
FrameHeader decode_header(std::span<const std::byte> bytes);

// Validates the header, the exact frame length and the checksum.
WireMessage decode_frame(std::span<const std::byte> bytes);

}  // namespace syncml
