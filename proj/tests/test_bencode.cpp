#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swarmtap/bencode.hpp"
#include "swarmtap/error.hpp"
#include "swarmtap/rng.hpp"
#include "testutil.hpp"

using namespace swarmtap;
using bencode::BDict;
using bencode::BList;
using bencode::BValue;

TEST_CASE("integer forms") {
  CHECK(bencode::encode(BValue(int64_t{42})) == "i42e");
  CHECK(bencode::encode(BValue(int64_t{0})) == "i0e");
  CHECK(bencode::encode(BValue(int64_t{-7})) == "i-7e");
  CHECK(bencode::decode("i0e").as_integer() == 0);
  CHECK(bencode::decode("i-3e").as_integer() == -3);
  CHECK(bencode::decode("i9223372036854775807e").as_integer() == INT64_MAX);
  CHECK(bencode::decode("i-9223372036854775808e").as_integer() == INT64_MIN);
}

TEST_CASE("string and list forms") {
  CHECK(bencode::encode(BValue("spam")) == "4:spam");
  CHECK(bencode::encode(BValue("")) == "0:");
  CHECK(bencode::encode(BValue(BList{BValue(int64_t{1}), BValue(int64_t{2})})) == "li1ei2ee");
  CHECK(bencode::decode("4:spam").as_bytes() == "spam");
  CHECK(bencode::decode("0:").as_bytes() == "");
}

TEST_CASE("dict form with sorted keys") {
  BDict d;
  d.emplace("cow", BValue("moo"));
  d.emplace("spam", BValue("eggs"));
  CHECK(bencode::encode(BValue(d)) == "d3:cow3:moo4:spam4:eggse");
  BValue v = bencode::decode("d3:cow3:moo4:spam4:eggse");
  CHECK(v.find("cow")->as_bytes() == "moo");
  CHECK(v.find("spam")->as_bytes() == "eggs");
}

TEST_CASE("malformed inputs are rejected") {
  const char* bad[] = {
      "i-0e",                    // negative zero
      "i01e",                    // leading zero
      "i1",                      // unterminated
      "ie",                      // no digits
      "i--1e",                   //
      "5:spam",                  // length past end
      "-1:x",                    // negative length
      "04:spam",                 // leading zero in length
      "d4:spam4:eggs3:cow3:mooe",  // unsorted keys
      "d3:cow3:moo3:cow4:spame",   // duplicate key
      "di1e3:mooe",              // non-string key
      "l",                       // unterminated list
      "",                        // empty
      "i1ei2e",                  // trailing garbage
      "2:abx",                   // trailing garbage after value
      "i9223372036854775808e",   // int64 overflow
      "i-9223372036854775809e",  // int64 underflow
      "x",                       // bad prefix
  };
  for (const char* s : bad) {
    CAPTURE(s);
    CHECK_THROWS_AS(bencode::decode(s), MalformedInput);
  }
}

TEST_CASE("deep nesting is rejected, not a crash") {
  std::string s(100000, 'l');
  CHECK_THROWS_AS(bencode::decode(s), MalformedInput);
  std::string t = std::string(600, 'l') + std::string(600, 'e');
  CHECK_THROWS_AS(bencode::decode(t), MalformedInput);
}

TEST_CASE("round-trip over generated values") {
  Rng rng(0x5eed);
  for (int i = 0; i < 4000; ++i) {
    BValue v = testutil::gen_bvalue(rng);
    Bytes wire = bencode::encode(v);
    CHECK(bencode::decode(wire) == v);
  }
}

TEST_CASE("canonicality: successful decode re-encodes to identical octets") {
  Rng rng(0xca11);
  int decoded = 0;
  for (int i = 0; i < 20000; ++i) {
    // Mutations of canonical wires keep the decoder busy on near-valid input.
    Bytes raw = bencode::encode(testutil::gen_bvalue(rng));
    size_t flips = rng.below(3);
    for (size_t f = 0; f < flips && !raw.empty(); ++f)
      raw[rng.below(raw.size())] = static_cast<char>(rng.below(256));
    try {
      BValue v = bencode::decode(raw);
      ++decoded;
      CHECK(bencode::encode(v) == raw);
    } catch (const MalformedInput&) {
    }
  }
  CHECK(decoded > 1000);
}

TEST_CASE("fuzz: decoder only ever throws MalformedInput") {
  Rng rng(0xf022);
  for (int i = 0; i < 50000; ++i) {
    Bytes raw = testutil::gen_bytes(rng, 64);
    try {
      (void)bencode::decode(raw);
    } catch (const MalformedInput&) {
    }
  }
  // Mutations of valid encodings probe deeper paths than pure noise.
  for (int i = 0; i < 20000; ++i) {
    Bytes wire = bencode::encode(testutil::gen_bvalue(rng));
    if (wire.empty()) continue;
    size_t pos = rng.below(wire.size());
    wire[pos] = static_cast<char>(rng.below(256));
    try {
      (void)bencode::decode(wire);
    } catch (const MalformedInput&) {
    }
  }
  CHECK(true);
}
