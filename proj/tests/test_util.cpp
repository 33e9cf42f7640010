#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <set>

#include "support.hpp"
#include "vtstyle/error.hpp"
#include "vtstyle/util.hpp"

using namespace vts;
namespace fs = std::filesystem;

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const Bytes abc = {'a', 'b', 'c'};
  CHECK(sha256_hex(abc) == sha256_hex(std::string_view("abc")));
}

TEST_CASE("base64 padding cases") {
  auto enc = [](std::string_view s) { return base64_encode(Bytes(s.begin(), s.end())); };
  CHECK(enc("") == "");
  CHECK(enc("M") == "TQ==");
  CHECK(enc("Ma") == "TWE=");
  CHECK(enc("Man") == "TWFu");
  CHECK(enc("hello world") == "aGVsbG8gd29ybGQ=");
}

TEST_CASE("derive_seed is stable and separates part boundaries") {
  const auto a = derive_seed(7, {"bengal", "Vera", "0"});
  CHECK(a == derive_seed(7, {"bengal", "Vera", "0"}));
  CHECK(a != derive_seed(8, {"bengal", "Vera", "0"}));
  CHECK(a != derive_seed(7, {"bengal", "Vera", "1"}));
  CHECK(derive_seed(7, {"ab", "c"}) != derive_seed(7, {"a", "bc"}));
  CHECK(derive_seed(7, {"a", "b"}) != derive_seed(7, {"b", "a"}));
}

TEST_CASE("uniform_below stays in range and covers it") {
  std::mt19937_64 rng(123);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = uniform_below(rng, 5);
    REQUIRE(v < 5);
    ++hits[v];
  }
  for (int h : hits) CHECK(h > 850);
  CHECK_THROWS_AS(uniform_below(rng, 0), ValidationError);
  std::mt19937_64 one(1);
  CHECK(uniform_below(one, 1) == 0);
}

TEST_CASE("write_atomic creates parents and leaves no temp files") {
  testing::TempDir dir("util");
  const fs::path target = dir / "a/b/c.txt";
  write_atomic(target, std::string_view("first"));
  write_atomic(target, std::string_view("second"));
  CHECK(read_text(target) == "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(target.parent_path())) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS_AS(read_text(dir / "missing.txt"), IoError);
}

TEST_CASE("jsonl round trip keeps field order and skips blank lines") {
  testing::TempDir dir("jsonl");
  nlohmann::ordered_json a;
  a["z"] = 1;
  a["a"] = "x";
  write_jsonl(dir / "x.jsonl", {a, a});
  CHECK(read_text(dir / "x.jsonl") == "{\"z\":1,\"a\":\"x\"}\n{\"z\":1,\"a\":\"x\"}\n");
  write_atomic(dir / "y.jsonl", std::string_view("{\"k\":1}\n\n{\"k\":2}\n"));
  const auto lines = read_jsonl(dir / "y.jsonl");
  REQUIRE(lines.size() == 2);
  CHECK(lines[1]["k"] == 2);
  write_atomic(dir / "bad.jsonl", std::string_view("{\"k\":1}\n{oops\n"));
  CHECK_THROWS_AS(read_jsonl(dir / "bad.jsonl"), IoError);
}

TEST_CASE("string helpers") {
  CHECK(slugify("Staffordshire Bull Terrier") == "staffordshire_bull_terrier");
  CHECK(slugify("  Lucida  Handwriting! ") == "lucida_handwriting");
  CHECK(slugify("Gill-Sans 2") == "gill_sans_2");
  CHECK(trim("\t hi \n") == "hi");
  CHECK(to_lower("BeNgAl") == "bengal");
  CHECK(format_sig(0.1 + 0.2, 6) == "0.3");
  CHECK(format_sig(6.666666666, 5) == "6.6667");
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (unsigned threads : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> seen(100);
    parallel_for(seen.size(), threads, [&](std::size_t i) { ++seen[i]; });
    for (auto& s : seen) CHECK(s.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(50, 4,
                               [](std::size_t i) {
                                 if (i == 17) throw IoError("boom");
                               }),
                  IoError);
  parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}
