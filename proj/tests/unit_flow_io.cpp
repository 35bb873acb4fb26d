#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "segflow/errors.hpp"
#include "segflow/flow_color.hpp"
#include "segflow/flow_io.hpp"
#include "segflow/rng.hpp"

using namespace segflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "segflow_flow_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

FlowField random_field(int w, int h, Rng& rng) {
  FlowField f;
  f.width = w;
  f.height = h;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  f.u.resize(n);
  f.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.u[i] = static_cast<float>(10.0 * rng.normal());
    f.v[i] = static_cast<float>(10.0 * rng.normal());
  }
  return f;
}

}  // namespace

TEST_CASE("flo round-trip is bitwise identity") {
  Rng rng(1);
  const fs::path path = temp_file("roundtrip.flo");
  const FlowField f = random_field(7, 5, rng);
  write_flo(f, path);
  const FlowField g = read_flo(path);
  REQUIRE(g.width == 7);
  REQUIRE(g.height == 5);
  CHECK(std::memcmp(f.u.data(), g.u.data(), f.u.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(f.v.data(), g.v.data(), f.v.size() * sizeof(float)) == 0);
}

TEST_CASE("flo hand-assembled byte layout") {
  // 2x1 field u=[1,2], v=[3,4]: magic, width, height, then interleaved
  // u,v per pixel in row-major order.
  const fs::path path = temp_file("bytes.flo");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const float magic = 202021.25f;
    const std::int32_t w = 2, h = 1;
    const float body[4] = {1.0f, 3.0f, 2.0f, 4.0f};
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(body), sizeof(body));
  }
  const FlowField f = read_flo(path);
  REQUIRE(f.width == 2);
  REQUIRE(f.height == 1);
  CHECK(f.u[0] == 1.0f);
  CHECK(f.u[1] == 2.0f);
  CHECK(f.v[0] == 3.0f);
  CHECK(f.v[1] == 4.0f);

  // And the writer produces exactly those bytes.
  const fs::path out_path = temp_file("bytes_out.flo");
  write_flo(f, out_path);
  std::ifstream a(path, std::ios::binary), b(out_path, std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
}

TEST_CASE("flo reader rejects malformed files with distinct errors") {
  const fs::path bad_magic = temp_file("bad_magic.flo");
  {
    std::ofstream out(bad_magic, std::ios::binary);
    const float magic = 0.0f;
    const std::int32_t w = 1, h = 1;
    const float body[2] = {0, 0};
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(body), sizeof(body));
  }
  CHECK_THROWS_WITH_AS(read_flo(bad_magic), doctest::Contains("bad magic"), IoError);

  const fs::path truncated = temp_file("truncated.flo");
  {
    std::ofstream out(truncated, std::ios::binary);
    const float magic = 202021.25f;
    const std::int32_t w = 4, h = 4;
    const float one = 1.0f;
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&one), 4);  // far too short
  }
  CHECK_THROWS_WITH_AS(read_flo(truncated), doctest::Contains("truncated payload"), IoError);

  const fs::path negative = temp_file("negative.flo");
  {
    std::ofstream out(negative, std::ios::binary);
    const float magic = 202021.25f;
    const std::int32_t w = -3, h = 2;
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
  }
  CHECK_THROWS_WITH_AS(read_flo(negative), doctest::Contains("nonpositive"), IoError);

  CHECK_THROWS_AS(read_flo(temp_file("does_not_exist.flo")), IoError);
}

TEST_CASE("sentinel values map to invalid pixels and back") {
  Tensor flow({2, 2, 2});
  flow.at(0, 0, 0) = 1.5;
  flow.at(1, 0, 0) = -2.5;
  Tensor valid = Tensor::full({2, 2}, 1.0);
  valid.at(1, 1) = 0.0;

  const FlowField field = flow_to_field(flow, &valid);
  CHECK(field.u[3] == kUnknownFlowValue);
  CHECK(field.v[3] == kUnknownFlowValue);

  Tensor flow2, valid2;
  field_to_flow(field, flow2, valid2);
  CHECK(valid2.at(1, 1) == 0.0);
  CHECK(valid2.at(0, 0) == 1.0);
  CHECK(flow2.at(0, 0, 0) == 1.5);
  CHECK(flow2.at(1, 0, 0) == -2.5);
  CHECK(flow2.at(0, 1, 1) == 0.0);  // invalid pixels read as zero motion
}

TEST_CASE("flow_to_color conventions") {
  // Zero field renders white.
  const Tensor zero({2, 4, 4});
  const Tensor white = flow_to_color(zero);
  for (std::size_t i = 0; i < white.size(); ++i) CHECK(white[i] == 1.0);

  // Opposite vectors give complementary hues; equal-magnitude scaling of
  // the whole field leaves hue untouched.
  Tensor f({2, 1, 2});
  f.at(0, 0, 0) = 2.0;   // east
  f.at(0, 0, 1) = -2.0;  // west
  const Tensor colors = flow_to_color(f);
  // Hue separation shows up as distinct dominant channels.
  CHECK(colors.at(0, 0, 0) == doctest::Approx(1.0));   // east is red-dominant
  CHECK(colors.at(1, 0, 1) > colors.at(0, 0, 1));      // west leans cyan

  Tensor f2 = f;
  f2 *= 3.0;
  const Tensor c1 = flow_to_color(f, 10.0);
  const Tensor c2 = flow_to_color(f2, 30.0);
  CHECK(max_abs_diff(c1, c2) < 1e-9);  // same saturation, same hue
}
