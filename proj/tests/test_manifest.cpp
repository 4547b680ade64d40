#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "regimeflow/manifest.hpp"

using namespace regimeflow;

TEST_CASE("sha256 known answers") {
  CHECK(manifest::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(manifest::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic write leaves no temporary behind") {
  testing::TempDir dir("atomic");
  manifest::write_atomic(dir / "sub/a.txt", "hello");
  CHECK(manifest::sha256_file(dir / "sub/a.txt") == manifest::sha256_hex("hello"));
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "sub")) files += e.is_regular_file();
  CHECK(files == 1);
}

TEST_CASE("manifest records, merges and verifies") {
  testing::TempDir dir("manifest");
  manifest::write_atomic(dir / "in.csv", "x\n1\n");
  manifest::write_atomic(dir / "out.csv", "y\n2\n");
  manifest::Entry e;
  e.command = "ingest";
  e.seed = 7;
  e.inputs["in.csv"] = manifest::sha256_file(dir / "in.csv");
  e.outputs[manifest::relative_name(dir.path(), dir / "out.csv")] = manifest::sha256_file(dir / "out.csv");
  manifest::record(dir.path(), e);
  manifest::Entry f = e;
  f.command = "filter";
  manifest::record(dir.path(), f);

  CHECK(manifest::entries(dir.path()).size() == 2);
  const auto found = manifest::find(dir.path(), "ingest");
  REQUIRE(found);
  CHECK(found->seed == 7);
  CHECK(found->outputs.count("out.csv") == 1);
  CHECK(manifest::verify(dir.path()).ok);

  manifest::write_atomic(dir / "out.csv", "tampered\n");
  const auto v = manifest::verify(dir.path());
  CHECK_FALSE(v.ok);
  CHECK(v.problems.size() == 2);  // both commands list the file
  std::filesystem::remove(dir / "in.csv");
  CHECK(manifest::verify(dir.path()).problems.size() == 4);
}

TEST_CASE("library versions are reported") {
  const auto v = manifest::library_versions();
  for (const char* lib : {"regimeflow", "eigen", "gsl", "boost", "openssl"}) CHECK(v.count(lib) == 1);
}
