#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>

namespace swarmtap {

struct IpAddr {
  bool is_v6 = false;
  std::array<uint8_t, 16> octets{};  // v4 uses octets[0..3], rest stays zero

  static IpAddr v4(uint8_t a, uint8_t b, uint8_t c, uint8_t d) {
    IpAddr ip;
    ip.octets = {a, b, c, d};
    return ip;
  }
  static IpAddr v4_from_u32(uint32_t host_order) {
    return v4(static_cast<uint8_t>(host_order >> 24), static_cast<uint8_t>(host_order >> 16),
              static_cast<uint8_t>(host_order >> 8), static_cast<uint8_t>(host_order));
  }

  // Textual IPv4 dotted-quad or IPv6 (RFC 4291 forms); nullopt if unparseable.
  static std::optional<IpAddr> parse(std::string_view text);

  std::string str() const;

  uint32_t v4_u32() const {
    return (static_cast<uint32_t>(octets[0]) << 24) | (static_cast<uint32_t>(octets[1]) << 16) |
           (static_cast<uint32_t>(octets[2]) << 8) | octets[3];
  }

  // RFC1918, IPv4 loopback/link-local, IPv6 ULA/link-local/loopback.
  bool is_private() const;
  bool is_unspecified() const;

  // Packed big-endian halves; addresses are map keys all over the simulator,
  // and two u64 compares beat a 16-octet memcmp on every tree step.
  uint64_t hi() const {
    uint64_t v;
    std::memcpy(&v, octets.data(), 8);
    return __builtin_bswap64(v);
  }
  uint64_t lo() const {
    uint64_t v;
    std::memcpy(&v, octets.data() + 8, 8);
    return __builtin_bswap64(v);
  }

  friend bool operator==(const IpAddr& a, const IpAddr& b) {
    return a.is_v6 == b.is_v6 && a.hi() == b.hi() && a.lo() == b.lo();
  }
  friend std::strong_ordering operator<=>(const IpAddr& a, const IpAddr& b) {
    if (a.is_v6 != b.is_v6) return a.is_v6 <=> b.is_v6;
    if (auto c = a.hi() <=> b.hi(); c != 0) return c;
    return a.lo() <=> b.lo();
  }
};

struct Endpoint {
  IpAddr ip;
  uint16_t port = 0;

  std::string str() const;  // "a.b.c.d:p" or "[v6]:p"

  friend bool operator==(const Endpoint& a, const Endpoint& b) {
    return a.port == b.port && a.ip == b.ip;
  }
  friend std::strong_ordering operator<=>(const Endpoint& a, const Endpoint& b) {
    if (auto c = a.ip <=> b.ip; c != 0) return c;
    return a.port <=> b.port;
  }
};

struct EndpointHash {
  size_t operator()(const Endpoint& e) const {
    uint64_t h = e.ip.hi() * 0x9e3779b97f4a7c15ull;
    h ^= (e.ip.lo() + 0x9e3779b97f4a7c15ull) + (h << 6) + (h >> 2);
    h ^= (static_cast<uint64_t>(e.port) << 1) ^ static_cast<uint64_t>(e.ip.is_v6);
    h *= 0xff51afd7ed558ccdull;
    return static_cast<size_t>(h ^ (h >> 33));
  }
};

}  // namespace swarmtap
