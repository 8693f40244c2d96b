#include <random>
#include <string>

#include "doctest.h"
#include "gsf/checkpoint.hpp"
#include "test_support.hpp"

using namespace gsf;
using namespace gsf::testing;

namespace {

std::string load_error(const std::filesystem::path& p) {
  try {
    load_checkpoint(p.string());
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is exact for f32 values and byte-stable") {
    const auto dir = scratch_dir("ckpt");
    std::mt19937_64 rng(1);
    std::vector<NamedTensor> ts{{"a.w", to_f32(random_tensor({3, 4}, rng))},
                                {"b", to_f32(random_tensor({5}, rng))},
                                {"conv.w", to_f32(random_tensor({2, 3, 3, 3}, rng))},
                                {"scalar", Tensor({1}, 0.5)}};
    save_checkpoint((dir / "a.gswt").string(), ts);
    const auto back = load_checkpoint((dir / "a.gswt").string());
    REQUIRE(back.size() == ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      CHECK(back[i].name == ts[i].name);
      CHECK(back[i].value == ts[i].value);
    }
    save_checkpoint((dir / "b.gswt").string(), back);
    CHECK(slurp(dir / "a.gswt") == slurp(dir / "b.gswt"));
  }

  TEST_CASE("malformed files produce errors with byte offsets") {
    const auto dir = scratch_dir("ckpt_bad");
    save_checkpoint((dir / "ok.gswt").string(), {{"w", Tensor({2, 2}, 1.0)}});
    const std::string good = slurp(dir / "ok.gswt");

    spit(dir / "magic.gswt", "XXXX" + good.substr(4));
    CHECK(load_error(dir / "magic.gswt").find("bad magic at byte offset 0") != std::string::npos);

    std::string version = good;
    version[4] = 9;
    spit(dir / "version.gswt", version);
    CHECK(load_error(dir / "version.gswt").find("unsupported version 9") != std::string::npos);

    spit(dir / "short.gswt", good.substr(0, good.size() - 3));
    const std::string e = load_error(dir / "short.gswt");
    CHECK(e.find("truncated") != std::string::npos);
    CHECK(e.find("byte offset") != std::string::npos);

    spit(dir / "long.gswt", good + "zz");
    CHECK(load_error(dir / "long.gswt").find("2 trailing bytes") != std::string::npos);
  }

  TEST_CASE("assign_by_name checks presence and shape") {
    std::vector<NamedTensor> dest{{"a", Tensor({2})}, {"b", Tensor({3})}};
    assign_by_name(dest, {{"b", Tensor({3}, 2.0)}, {"a", Tensor({2}, 1.0)}, {"extra", Tensor({1})}});
    CHECK(dest[0].value == Tensor({2}, 1.0));
    CHECK(dest[1].value == Tensor({3}, 2.0));
    CHECK_THROWS_AS(assign_by_name(dest, {{"a", Tensor({2})}}), std::runtime_error);
    CHECK_THROWS_AS(assign_by_name(dest, {{"a", Tensor({3})}, {"b", Tensor({3})}}), std::runtime_error);
  }
}
