#pragma once

#include <cstdint>
#include <map>
#include <string_view>
#include <variant>
#include <vector>

#include "swarmtap/bytes.hpp"

namespace swarmtap::bencode {

class BValue;
using BList = std::vector<BValue>;
// std::map over std::string compares with char_traits (unsigned octets), so
// iteration order is exactly the ascending raw-byte order the wire wants.
using BDict = std::map<Bytes, BValue>;

class BValue {
 public:
  BValue() : v_(int64_t{0}) {}
  BValue(int64_t n) : v_(n) {}
  BValue(int n) : v_(static_cast<int64_t>(n)) {}
  BValue(Bytes s) : v_(std::move(s)) {}
  BValue(const char* s) : v_(Bytes(s)) {}
  BValue(BList l) : v_(std::move(l)) {}
  BValue(BDict d) : v_(std::move(d)) {}

  bool is_integer() const { return std::holds_alternative<int64_t>(v_); }
  bool is_bytes() const { return std::holds_alternative<Bytes>(v_); }
  bool is_list() const { return std::holds_alternative<BList>(v_); }
  bool is_dict() const { return std::holds_alternative<BDict>(v_); }

  // Accessors throw MalformedInput on a kind mismatch so message parsers can
  // navigate untrusted trees without pre-checking every node.
  int64_t as_integer() const;
  const Bytes& as_bytes() const;
  const BList& as_list() const;
  const BDict& as_dict() const;
  BList& as_list();
  BDict& as_dict();

  // Dict lookup; nullptr when this is not a dict or the key is absent.
  const BValue* find(std::string_view key) const;

  bool operator==(const BValue& o) const { return v_ == o.v_; }

 private:
  std::variant<int64_t, Bytes, BList, BDict> v_;
};

// Canonical bencoding: i<decimal>e, <len>:<bytes>, l...e, d...e with keys in
// ascending raw-byte order.
Bytes encode(const BValue& v);

// Strict canonical decode of the whole input. Rejects leading zeros, i-0e,
// unsorted or duplicate dict keys, non-string keys, trailing bytes, and
// nesting deeper than 512 levels. Throws MalformedInput.
BValue decode(std::string_view data);

}  // namespace swarmtap::bencode
