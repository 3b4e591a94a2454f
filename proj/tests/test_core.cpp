#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "cadalign/core/hash.hpp"
#include "cadalign/core/image.hpp"
#include "cadalign/core/rng.hpp"
#include "cadalign/core/tensorfile.hpp"

using namespace cadalign;

TEST_CASE("rng streams are deterministic and label-separated") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  const auto s1 = Rng::stream(7, {streams::kView, 3, streams::kScaleSample, 0});
  const auto s2 = Rng::stream(7, {streams::kView, 3, streams::kScaleSample, 0});
  const auto s3 = Rng::stream(7, {streams::kView, 3, streams::kScaleSample, 1});
  REQUIRE(s1 == s2);
  REQUIRE(s1 != s3);
}

TEST_CASE("rng normal moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng uniform_index bounds and sample_without_replacement distinctness") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) REQUIRE(rng.uniform_index(17) < 17);
  auto idx = rng.sample_without_replacement(100, 50);
  std::sort(idx.begin(), idx.end());
  REQUIRE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  for (int i : idx) {
    REQUIRE(i >= 0);
    REQUIRE(i < 100);
  }
}

TEST_CASE("fnv1a hash is stable") {
  REQUIRE(hash_string_hex("") == "cbf29ce484222325");
  REQUIRE(hash_string_hex("a") != hash_string_hex("b"));
}

TEST_CASE("tensorfile round trip is bit exact") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "cadalign_test_container.ctr";

  Rng rng(9);
  std::vector<float> depth(64 * 48);
  for (auto& v : depth) v = static_cast<float>(rng.uniform(0.0, 5.0));
  std::vector<std::uint16_t> mask(64 * 48);
  for (auto& v : mask) v = static_cast<std::uint16_t>(rng.uniform_index(4));

  TensorFile tf;
  tf.add<float>("depth_gt", {48, 64}, depth);
  tf.add<std::uint16_t>("mask", {48, 64}, mask);
  tf.save(path.string());

  const TensorFile back = TensorFile::load(path.string());
  REQUIRE(back.names() == std::vector<std::string>{"depth_gt", "mask"});
  REQUIRE(back.entry("depth_gt").as<float>() == depth);
  REQUIRE(back.entry("mask").as<std::uint16_t>() == mask);
  REQUIRE(back.entry("depth_gt").dims == std::vector<std::uint32_t>{48, 64});
  fs::remove(path);
}

TEST_CASE("image indexing") {
  Image<float> img(4, 3, 2);
  img.at(2, 1, 1) = 7.5f;
  REQUIRE(img.at(2, 1, 1) == 7.5f);
  REQUIRE(img.raw()[(1 * 4 + 2) * 2 + 1] == 7.5f);
  REQUIRE_THROWS_AS(Image<float>(-1, 2, 1), std::invalid_argument);
}
