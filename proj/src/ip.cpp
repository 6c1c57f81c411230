#include "swarmtap/ip.hpp"

#include <arpa/inet.h>

#include <cstring>

namespace swarmtap {

std::optional<IpAddr> IpAddr::parse(std::string_view text) {
  if (text.empty() || text.size() > 45) return std::nullopt;
  std::string z(text);  // inet_pton wants a terminator
  IpAddr ip;
  unsigned char buf[16];
  if (inet_pton(AF_INET, z.c_str(), buf) == 1) {
    ip.is_v6 = false;
    std::memcpy(ip.octets.data(), buf, 4);
    return ip;
  }
  if (inet_pton(AF_INET6, z.c_str(), buf) == 1) {
    ip.is_v6 = true;
    std::memcpy(ip.octets.data(), buf, 16);
    return ip;
  }
  return std::nullopt;
}

std::string IpAddr::str() const {
  char buf[INET6_ADDRSTRLEN];
  const char* r = inet_ntop(is_v6 ? AF_INET6 : AF_INET, octets.data(), buf, sizeof buf);
  return r ? std::string(r) : std::string();
}

bool IpAddr::is_private() const {
  if (!is_v6) {
    uint8_t a = octets[0], b = octets[1];
    if (a == 10) return true;                      // 10/8
    if (a == 172 && b >= 16 && b <= 31) return true;  // 172.16/12
    if (a == 192 && b == 168) return true;         // 192.168/16
    if (a == 127) return true;                     // loopback
    if (a == 169 && b == 254) return true;         // link-local
    return false;
  }
  if ((octets[0] & 0xfe) == 0xfc) return true;                       // fc00::/7 ULA
  if (octets[0] == 0xfe && (octets[1] & 0xc0) == 0x80) return true;  // fe80::/10
  // ::1 loopback
  for (int i = 0; i < 15; ++i) {
    if (octets[i] != 0) return false;
  }
  return octets[15] == 1;
}

bool IpAddr::is_unspecified() const {
  size_t n = is_v6 ? 16 : 4;
  for (size_t i = 0; i < n; ++i) {
    if (octets[i] != 0) return false;
  }
  return true;
}

std::string Endpoint::str() const {
  if (ip.is_v6) return "[" + ip.str() + "]:" + std::to_string(port);
  return ip.str() + ":" + std::to_string(port);
}

}  // namespace swarmtap
