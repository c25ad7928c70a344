#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "sisepi/io.hpp"

TEST_CASE("content hash matches the git blob convention") {
  // `git hash-object` of these exact contents
  REQUIRE(sisepi::content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  REQUIRE(sisepi::content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("csv reader reports line numbers on malformed input") {
  const std::string path = "test_io_tmp.csv";
  {
    std::ofstream f(path);
    f << "a,b\n1,2\nx,3\n";
  }
  sisepi::CsvReader reader(path);
  std::vector<std::string> fields;
  REQUIRE(reader.next(fields));  // header
  REQUIRE(reader.next(fields));
  REQUIRE(reader.to_int(fields[0]) == 1);
  REQUIRE(reader.next(fields));
  try {
    reader.to_int(fields[0]);
    FAIL("expected ParseError");
  } catch (const sisepi::ParseError& e) {
    REQUIRE(e.line_number == 3);
  }
  std::remove(path.c_str());
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
    REQUIRE(std::stod(sisepi::format_double(v)) == v);
  }
}
