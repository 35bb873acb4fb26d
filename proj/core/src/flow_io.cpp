#include "segflow/flow_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "segflow/errors.hpp"

namespace segflow {

namespace {

// The sandbox targets are little-endian; the layout below is the on-disk
// byte order, so these helpers are plain memcpy round-trips.
void put_f32(std::ofstream& out, float v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

void put_i32(std::ofstream& out, std::int32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

}  // namespace

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_flo: cannot open " + path.string());
  float magic = 0.0f;
  in.read(reinterpret_cast<char*>(&magic), 4);
  if (!in) throw IoError("read_flo: truncated header in " + path.string());
  if (magic != kFloMagic) throw IoError("read_flo: bad magic in " + path.string());
  std::int32_t width = 0, height = 0;
  in.read(reinterpret_cast<char*>(&width), 4);
  in.read(reinterpret_cast<char*>(&height), 4);
  if (!in) throw IoError("read_flo: truncated header in " + path.string());
  if (width <= 0 || height <= 0)
    throw IoError("read_flo: nonpositive dimensions in " + path.string());

  FlowField field;
  field.width = width;
  field.height = height;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  field.u.resize(n);
  field.v.resize(n);
  std::vector<float> interleaved(2 * n);
  in.read(reinterpret_cast<char*>(interleaved.data()),
          static_cast<std::streamsize>(interleaved.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != interleaved.size() * sizeof(float))
    throw IoError("read_flo: truncated payload in " + path.string());
  for (std::size_t i = 0; i < n; ++i) {
    field.u[i] = interleaved[2 * i];
    field.v[i] = interleaved[2 * i + 1];
  }
  return field;
}

void write_flo(const FlowField& field, const std::filesystem::path& path) {
  if (field.width <= 0 || field.height <= 0)
    throw IoError("write_flo: nonpositive dimensions");
  const std::size_t n =
      static_cast<std::size_t>(field.width) * static_cast<std::size_t>(field.height);
  if (field.u.size() != n || field.v.size() != n)
    throw IoError("write_flo: component size does not match dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_flo: cannot open " + path.string());
  put_f32(out, kFloMagic);
  put_i32(out, field.width);
  put_i32(out, field.height);
  for (std::size_t i = 0; i < n; ++i) {
    put_f32(out, field.u[i]);
    put_f32(out, field.v[i]);
  }
  if (!out) throw IoError("write_flo: short write to " + path.string());
}

FlowField flow_to_field(const Tensor& flow, const Tensor* flow_valid) {
  if (flow.rank() != 3 || flow.dim(0) != 2) throw ShapeError("flow_to_field: flow must be (2,H,W)");
  FlowField field;
  field.height = flow.dim(1);
  field.width = flow.dim(2);
  const std::size_t n = static_cast<std::size_t>(field.width) * field.height;
  field.u.resize(n);
  field.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool valid = flow_valid == nullptr || (*flow_valid)[i] == 1.0;
    field.u[i] = valid ? static_cast<float>(flow[i]) : kUnknownFlowValue;
    field.v[i] = valid ? static_cast<float>(flow[n + i]) : kUnknownFlowValue;
  }
  return field;
}

void field_to_flow(const FlowField& field, Tensor& flow, Tensor& flow_valid) {
  const int h = field.height, w = field.width;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (field.u.size() != n || field.v.size() != n)
    throw IoError("field_to_flow: inconsistent component sizes");
  flow = Tensor({2, h, w});
  flow_valid = Tensor({h, w});
  for (std::size_t i = 0; i < n; ++i) {
    const bool unknown = std::fabs(field.u[i]) > kUnknownFlowThreshold ||
                         std::fabs(field.v[i]) > kUnknownFlowThreshold ||
                         !std::isfinite(field.u[i]) || !std::isfinite(field.v[i]);
    flow[i] = unknown ? 0.0 : static_cast<double>(field.u[i]);
    flow[n + i] = unknown ? 0.0 : static_cast<double>(field.v[i]);
    flow_valid[i] = unknown ? 0.0 : 1.0;
  }
}

}  // namespace segflow
