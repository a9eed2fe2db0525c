#include <doctest.h>

#include "mbt/text.hpp"

using namespace mbt::text;

TEST_CASE("trim and collapse") {
  CHECK(trim("  a b \n") == "a b");
  CHECK(trim(" \t\n") == "");
  CHECK(collapse_whitespace("  a \n\n b\tc  ") == "a b c");
  CHECK(collapse_whitespace("") == "");
}

TEST_CASE("utf8 helpers") {
  CHECK(utf8_length("abc") == 3);
  CHECK(utf8_length("\xce\xbe_OT") == 4);  // greek xi + "_OT"
  const std::string s = "a\xce\xbe" "b";
  CHECK(utf8_floor(s, 2) == 1);
  CHECK(utf8_floor(s, 3) == 3);
  CHECK(utf8_floor(s, 99) == s.size());
  CHECK(to_lower_ascii("AbC\xce\xbe") == "abc\xce\xbe");
}
