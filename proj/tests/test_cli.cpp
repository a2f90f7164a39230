#include <array>
#include <cstdio>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "test_helpers.hpp"
#include "tokgeo/shuffle.hpp"

using nlohmann::json;
using tokgeo::testing::TempDir;

namespace {

struct Output {
  int status = -1;
  std::string out;
};

Output run(const std::string& args, const std::string& stdin_text = "") {
  TempDir dir("cli_in");
  const auto in = dir / "stdin";
  std::ofstream(in) << stdin_text;
  const std::string cmd = std::string(TOKGEO_CLI) + " " + args + " < " + in.string() + " 2>/dev/null";
  Output o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) o.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

}  // namespace

TEST_CASE("shuffle reads and writes JSON arrays") {
  const auto o = run("shuffle --s 1 --seed 7", "[0,1,2,3,4,5,6,7]");
  REQUIRE(o.status == 0);
  const auto out = json::parse(o.out);
  std::vector<int> src{0, 1, 2, 3, 4, 5, 6, 7};
  const auto expected = tokgeo::shuffle_tokens<int>(src, {1, 7});
  CHECK(out.get<std::vector<int>>() == expected);

  const auto same = run("shuffle --s 0 --seed 7", "[\"a\",\"b\",\"c\"]");
  CHECK(json::parse(same.out) == json::parse("[\"a\",\"b\",\"c\"]"));
  CHECK(run("shuffle --s 1 --seed 7", "{\"not\":1}").status == 2);
  CHECK(run("shuffle --s 1 --seed 7", "[1, 2").status == 2);
}

TEST_CASE("toy prints a result document") {
  const auto o = run("toy --model dirichlet --d 10 --samples 1000 --seed 1");
  REQUIRE(o.status == 0);
  const auto j = json::parse(o.out);
  CHECK(j["model"] == "dirichlet");
  CHECK(j["reference"].get<double>() == doctest::Approx(1.9289682539682538));
  CHECK(run("toy --model cube --d 3").status == 2);
  CHECK(run("toy --model unit-box --d 0").status == 2);
}

TEST_CASE("synth followed by analyze and correlate") {
  TempDir dir("cli_pipeline");
  const std::string data = (dir / "data").string();
  REQUIRE(run("synth --latent-dims 2,4,2 --ambient 12 --points 128 --prompts 4 --vocab 16 --seed 3 --out " + data)
              .status == 0);
  const std::string out = (dir / "out").string();
  const auto a = run("analyze --manifest " + data + "/manifest.json --out " + out + " --format csv");
  CHECK(a.status == 0);
  CHECK(std::filesystem::exists(dir / "out" / "summary.json"));
  CHECK(std::filesystem::exists(dir / "out" / "figures" / "id_twonn.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "entropy"));
  const auto c = run("correlate --manifest " + data + "/manifest.json --out " + out + " --bootstrap 20");
  CHECK(c.status == 0);
  CHECK(std::filesystem::exists(dir / "out" / "correlation.json"));

  const auto missing = run("compare-shuffles --manifest " + data + "/manifest.json --out " + out);
  CHECK(missing.status == 1);
  CHECK(run("analyze --manifest " + data + "/manifest.json --knn 0 --out " + out).status == 2);
  CHECK(run("analyze --manifest /nonexistent/manifest.json").status == 2);
  CHECK(run("frobnicate").status == 2);
}
