#include "swarmtap/bencode.hpp"

#include <limits>

#include "swarmtap/error.hpp"

namespace swarmtap::bencode {

int64_t BValue::as_integer() const {
  if (!is_integer()) throw MalformedInput("bencode: expected integer");
  return std::get<int64_t>(v_);
}

const Bytes& BValue::as_bytes() const {
  if (!is_bytes()) throw MalformedInput("bencode: expected byte string");
  return std::get<Bytes>(v_);
}

const BList& BValue::as_list() const {
  if (!is_list()) throw MalformedInput("bencode: expected list");
  return std::get<BList>(v_);
}

const BDict& BValue::as_dict() const {
  if (!is_dict()) throw MalformedInput("bencode: expected dict");
  return std::get<BDict>(v_);
}

BList& BValue::as_list() {
  if (!is_list()) throw MalformedInput("bencode: expected list");
  return std::get<BList>(v_);
}

BDict& BValue::as_dict() {
  if (!is_dict()) throw MalformedInput("bencode: expected dict");
  return std::get<BDict>(v_);
}

const BValue* BValue::find(std::string_view key) const {
  if (!is_dict()) return nullptr;
  const BDict& d = std::get<BDict>(v_);
  auto it = d.find(Bytes(key));
  return it == d.end() ? nullptr : &it->second;
}

namespace {

void encode_into(const BValue& v, Bytes& out) {
  if (v.is_integer()) {
    out += 'i';
    out += std::to_string(v.as_integer());
    out += 'e';
  } else if (v.is_bytes()) {
    const Bytes& s = v.as_bytes();
    out += std::to_string(s.size());
    out += ':';
    out += s;
  } else if (v.is_list()) {
    out += 'l';
    for (const BValue& e : v.as_list()) encode_into(e, out);
    out += 'e';
  } else {
    out += 'd';
    for (const auto& [k, e] : v.as_dict()) {
      out += std::to_string(k.size());
      out += ':';
      out += k;
      encode_into(e, out);
    }
    out += 'e';
  }
}

constexpr int kMaxDepth = 512;

struct Decoder {
  std::string_view in;
  size_t pos = 0;

  [[noreturn]] void fail(const char* why) const { throw MalformedInput(std::string("bencode: ") + why); }

  char peek() const {
    if (pos >= in.size()) fail("unexpected end of input");
    return in[pos];
  }

  // Decimal digit run with the canonical no-leading-zero rule.
  uint64_t digits(uint64_t max) {
    size_t start = pos;
    uint64_t n = 0;
    while (pos < in.size() && in[pos] >= '0' && in[pos] <= '9') {
      uint64_t d = static_cast<uint64_t>(in[pos] - '0');
      if (n > (max - d) / 10) fail("integer out of range");
      n = n * 10 + d;
      ++pos;
    }
    if (pos == start) fail("expected digits");
    if (in[start] == '0' && pos - start > 1) fail("leading zeros");
    return n;
  }

  BValue integer() {
    ++pos;  // 'i'
    bool neg = false;
    if (peek() == '-') {
      neg = true;
      ++pos;
    }
    uint64_t mag = digits(neg ? static_cast<uint64_t>(std::numeric_limits<int64_t>::max()) + 1
                              : static_cast<uint64_t>(std::numeric_limits<int64_t>::max()));
    if (neg && mag == 0) fail("negative zero");
    if (peek() != 'e') fail("unterminated integer");
    ++pos;
    int64_t v = neg ? -static_cast<int64_t>(mag - 1) - 1 : static_cast<int64_t>(mag);
    return BValue(v);
  }

  BValue string() {
    uint64_t len = digits(std::numeric_limits<int64_t>::max());
    if (peek() != ':') fail("bad string length prefix");
    ++pos;
    if (len > in.size() - pos) fail("string length past end of input");
    BValue v{Bytes(in.substr(pos, len))};
    pos += len;
    return v;
  }

  BValue value(int depth) {
    if (depth > kMaxDepth) fail("nesting too deep");
    char c = peek();
    if (c == 'i') return integer();
    if (c >= '0' && c <= '9') return string();
    if (c == 'l') {
      ++pos;
      BList l;
      while (peek() != 'e') l.push_back(value(depth + 1));
      ++pos;
      return BValue(std::move(l));
    }
    if (c == 'd') {
      ++pos;
      BDict d;
      bool have_prev = false;
      Bytes prev;
      while (peek() != 'e') {
        char kc = peek();
        if (kc < '0' || kc > '9') fail("dict key is not a byte string");
        Bytes key = string().as_bytes();
        if (have_prev && !(prev < key)) fail("dict keys not in ascending order");
        prev = key;
        have_prev = true;
        d.emplace(std::move(key), value(depth + 1));
      }
      ++pos;
      return BValue(std::move(d));
    }
    fail("bad value prefix");
  }
};

}  // namespace

Bytes encode(const BValue& v) {
  Bytes out;
  encode_into(v, out);
  return out;
}

BValue decode(std::string_view data) {
  if (data.empty()) throw MalformedInput("bencode: empty input");
  Decoder d{data};
  BValue v = d.value(0);
  if (d.pos != data.size()) throw MalformedInput("bencode: trailing bytes");
  return v;
}

}  // namespace swarmtap::bencode
