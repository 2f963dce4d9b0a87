#include "syncml/wire.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

#include "syncml/error.hpp"

namespace syncml {

static_assert(std::endian::native == std::endian::little, "wire format assumes little-endian");

namespace {

template <class T>
void put(std::byte* dst, T value) {
  std::memcpy(dst, &value, sizeof(T));
}

template <class T>
T get(const std::byte* src) {
  T value;
  std::memcpy(&value, src, sizeof(T));
  return value;
}

}  // namespace

std::uint32_t crc32(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto len = std::min(kChunk, bytes.size() - off);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(len));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::byte> encode_frame(const WireMessage& msg) {
  if (msg.payload.size() > kMaxPayloadLength) throw ProtocolError("payload too large for a frame");
  const auto len = static_cast<std::uint32_t>(msg.payload.size());
  std::vector<std::byte> out(kFrameHeaderSize + 8 * std::size_t{len} + kFrameTrailerSize);
  std::byte* p = out.data();
  put(p, kWireMagic);
  put(p + 4, kWireVersion);
  put(p + 5, static_cast<std::uint8_t>(msg.kind));
  put(p + 6, msg.round);
  put(p + 10, msg.worker_id);
  put(p + 12, len);
  if (len) std::memcpy(p + kFrameHeaderSize, msg.payload.data(), 8 * std::size_t{len});
  const auto body = std::span<const std::byte>(out).first(out.size() - kFrameTrailerSize);
  put(out.data() + body.size(), crc32(body));
  return out;
}

FrameHeader decode_header(std::span<const std::byte> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw ProtocolError("truncated frame header");
  const std::byte* p = bytes.data();
  if (get<std::uint32_t>(p) != kWireMagic) throw ProtocolError("bad frame magic");
  const auto version = get<std::uint8_t>(p + 4);
  if (version != kWireVersion)
    throw ProtocolError("unsupported wire version " + std::to_string(version));
  const auto kind = get<std::uint8_t>(p + 5);
  if (kind < 1 || kind > 3) throw ProtocolError("unknown message kind " + std::to_string(kind));
  FrameHeader h{static_cast<MessageKind>(kind), get<std::uint32_t>(p + 6),
                get<std::uint16_t>(p + 10), get<std::uint32_t>(p + 12)};
  if (h.payload_len > kMaxPayloadLength) throw ProtocolError("declared payload too large");
  return h;
}

WireMessage decode_frame(std::span<const std::byte> bytes) {
  const FrameHeader h = decode_header(bytes);
  if (bytes.size() != h.frame_size())
    throw ProtocolError("frame length " + std::to_string(bytes.size()) +
                        " does not match declared payload of " + std::to_string(h.payload_len));
  const auto body = bytes.first(bytes.size() - kFrameTrailerSize);
  if (crc32(body) != get<std::uint32_t>(bytes.data() + body.size()))
    throw ProtocolError("frame checksum mismatch");
  WireMessage msg{h.round, h.kind, h.worker_id, std::vector<double>(h.payload_len)};
  if (h.payload_len)
    std::memcpy(msg.payload.data(), bytes.data() + kFrameHeaderSize, 8 * std::size_t{h.payload_len});
  return msg;
}

}  // namespace syncml
