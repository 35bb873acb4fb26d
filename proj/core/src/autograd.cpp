#include "segflow/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "segflow/errors.hpp"

namespace segflow::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Var make_node(Tensor value, std::vector<Var> inputs) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs) n->needs_grad = n->needs_grad || in->needs_grad;
  return n;
}

// Unrolls x (C,H,W) into a (C*KH*KW) x (OH*OW) row-major matrix.
void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int oh, int ow,
            std::vector<double>& col) {
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  col.assign(static_cast<std::size_t>(c_in) * kh * kw * oh * ow, 0.0);
  double* dst = col.data();
  for (int c = 0; c < c_in; ++c) {
    const double* plane = x.data() + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * stride + ki - pad;
          if (y < 0 || y >= h) {
            dst += ow;
            continue;
          }
          const double* row = plane + static_cast<std::size_t>(y) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int px = ox * stride + kj - pad;
            *dst++ = (px >= 0 && px < w) ? row[px] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_accumulate(const std::vector<double>& col, int c_in, int h, int w, int kh, int kw,
                       int stride, int pad, int oh, int ow, Tensor& dx) {
  const double* src = col.data();
  for (int c = 0; c < c_in; ++c) {
    double* plane = dx.data() + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * stride + ki - pad;
          if (y < 0 || y >= h) {
            src += ow;
            continue;
          }
          double* row = plane + static_cast<std::size_t>(y) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int px = ox * stride + kj - pad;
            const double v = *src++;
            if (px >= 0 && px < w) row[px] += v;
          }
        }
      }
    }
  }
}

struct ResampleAxis {
  std::vector<int> lo, hi;
  std::vector<double> t;
};

// Half-pixel mapping src = (dst + 0.5) * in/out - 0.5, clamped to the
// valid range; exact identity when in == out.
ResampleAxis make_axis(int in, int out) {
  ResampleAxis a;
  a.lo.resize(out);
  a.hi.resize(out);
  a.t.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int d = 0; d < out; ++d) {
    double s = (d + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(s));
    a.lo[d] = lo;
    a.hi[d] = std::min(lo + 1, in - 1);
    a.t[d] = s - lo;
  }
  return a;
}

}  // namespace

Var leaf(Tensor value, bool needs_grad, int param_index) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->needs_grad = needs_grad;
  n->param_index = param_index;
  return n;
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& xt = x->value;
  const Tensor& wt = w->value;
  if (xt.rank() != 3 || wt.rank() != 4 || b->value.rank() != 1)
    throw ShapeError("conv2d: expected x(C,H,W), w(O,C,KH,KW), b(O)");
  if (wt.dim(1) != xt.dim(0)) throw ShapeError("conv2d: input channel mismatch");
  const int c_in = xt.dim(0), h = xt.dim(1), win = xt.dim(2);
  const int c_out = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (win + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: empty output");
  const int k = c_in * kh * kw;
  const int n_out = oh * ow;

  auto col = std::make_shared<std::vector<double>>();
  im2col(xt, kh, kw, stride, pad, oh, ow, *col);

  Tensor out({c_out, oh, ow});
  {
    ConstMapMat wm(wt.data(), c_out, k);
    ConstMapMat cm(col->data(), k, n_out);
    MapMat om(out.data(), c_out, n_out);
    om.noalias() = wm * cm;
    for (int o = 0; o < c_out; ++o) om.row(o).array() += b->value[static_cast<std::size_t>(o)];
  }

  auto node = make_node(std::move(out), {x, w, b});
  if (node->needs_grad) {
    node->backfn = [stride, pad, c_in, h, win, c_out, kh, kw, oh, ow, k, n_out,
                    col](Node& self) {
      Var xin = self.inputs[0], win_v = self.inputs[1], bin = self.inputs[2];
      ConstMapMat dout(self.grad.data(), c_out, n_out);
      if (win_v->needs_grad) {
        win_v->ensure_grad();
        MapMat dw(win_v->grad.data(), c_out, k);
        ConstMapMat cm(col->data(), k, n_out);
        dw.noalias() += dout * cm.transpose();
      }
      if (bin->needs_grad) {
        bin->ensure_grad();
        for (int o = 0; o < c_out; ++o) bin->grad[static_cast<std::size_t>(o)] += dout.row(o).sum();
      }
      if (xin->needs_grad) {
        xin->ensure_grad();
        std::vector<double> dcol(static_cast<std::size_t>(k) * n_out);
        MapMat dcm(dcol.data(), k, n_out);
        ConstMapMat wm(win_v->value.data(), c_out, k);
        dcm.noalias() = wm.transpose() * dout;
        col2im_accumulate(dcol, c_in, h, win, kh, kw, stride, pad, oh, ow, xin->grad);
      }
    };
  }
  return node;
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
  auto node = make_node(std::move(out), {x});
  if (node->needs_grad) {
    node->backfn = [](Node& self) {
      Var in = self.inputs[0];
      in->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (in->value[i] > 0.0) in->grad[i] += self.grad[i];
    };
  }
  return node;
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const Tensor& xt = x->value;
  if (xt.rank() != 3) throw ShapeError("resize_bilinear: expected (C,H,W)");
  const int c = xt.dim(0), h = xt.dim(1), w = xt.dim(2);
  if (h == out_h && w == out_w) return x;

  auto ay = std::make_shared<ResampleAxis>(make_axis(h, out_h));
  auto ax = std::make_shared<ResampleAxis>(make_axis(w, out_w));

  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = xt.data() + static_cast<std::size_t>(ch) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(ch) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const int y0 = ay->lo[oy], y1 = ay->hi[oy];
      const double ty = ay->t[oy];
      for (int ox = 0; ox < out_w; ++ox) {
        const int x0 = ax->lo[ox], x1 = ax->hi[ox];
        const double tx = ax->t[ox];
        const double v00 = src[static_cast<std::size_t>(y0) * w + x0];
        const double v01 = src[static_cast<std::size_t>(y0) * w + x1];
        const double v10 = src[static_cast<std::size_t>(y1) * w + x0];
        const double v11 = src[static_cast<std::size_t>(y1) * w + x1];
        dst[static_cast<std::size_t>(oy) * out_w + ox] =
            (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
      }
    }
  }

  auto node = make_node(std::move(out), {x});
  if (node->needs_grad) {
    node->backfn = [c, h, w, out_h, out_w, ay, ax](Node& self) {
      Var in = self.inputs[0];
      in->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double* dst = in->grad.data() + static_cast<std::size_t>(ch) * h * w;
        const double* g = self.grad.data() + static_cast<std::size_t>(ch) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
          const int y0 = ay->lo[oy], y1 = ay->hi[oy];
          const double ty = ay->t[oy];
          for (int ox = 0; ox < out_w; ++ox) {
            const int x0 = ax->lo[ox], x1 = ax->hi[ox];
            const double tx = ax->t[ox];
            const double gv = g[static_cast<std::size_t>(oy) * out_w + ox];
            dst[static_cast<std::size_t>(y0) * w + x0] += (1 - ty) * (1 - tx) * gv;
            dst[static_cast<std::size_t>(y0) * w + x1] += (1 - ty) * tx * gv;
            dst[static_cast<std::size_t>(y1) * w + x0] += ty * (1 - tx) * gv;
            dst[static_cast<std::size_t>(y1) * w + x1] += ty * tx * gv;
          }
        }
      }
    };
  }
  return node;
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& at = a->value;
  const Tensor& bt = b->value;
  if (at.rank() != 3 || bt.rank() != 3 || at.dim(1) != bt.dim(1) || at.dim(2) != bt.dim(2))
    throw ShapeError("concat_channels: spatial shapes must match");
  const int ca = at.dim(0), cb = bt.dim(0), h = at.dim(1), w = at.dim(2);
  Tensor out({ca + cb, h, w});
  std::copy(at.data(), at.data() + at.size(), out.data());
  std::copy(bt.data(), bt.data() + bt.size(), out.data() + at.size());
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad) {
    const std::size_t na = at.size();
    node->backfn = [na](Node& self) {
      Var a_in = self.inputs[0], b_in = self.inputs[1];
      if (a_in->needs_grad) {
        a_in->ensure_grad();
        for (std::size_t i = 0; i < na; ++i) a_in->grad[i] += self.grad[i];
      }
      if (b_in->needs_grad) {
        b_in->ensure_grad();
        const std::size_t nb = self.grad.size() - na;
        for (std::size_t i = 0; i < nb; ++i) b_in->grad[i] += self.grad[na + i];
      }
    };
  }
  return node;
}

Var add(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("add: shape mismatch");
  Tensor out = a->value;
  out += b->value;
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad) {
    node->backfn = [](Node& self) {
      for (auto& in : self.inputs) {
        if (!in->needs_grad) continue;
        in->ensure_grad();
        in->grad += self.grad;
      }
    };
  }
  return node;
}

Var add_scaled(const Var& a, const Var& b, double s) {
  if (!a->value.same_shape(b->value)) throw ShapeError("add_scaled: shape mismatch");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * b->value[i];
  auto node = make_node(std::move(out), {a, b});
  if (node->needs_grad) {
    node->backfn = [s](Node& self) {
      Var a_in = self.inputs[0], b_in = self.inputs[1];
      if (a_in->needs_grad) {
        a_in->ensure_grad();
        a_in->grad += self.grad;
      }
      if (b_in->needs_grad) {
        b_in->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) b_in->grad[i] += s * self.grad[i];
      }
    };
  }
  return node;
}

void backward(const Var& root) {
  if (root->value.size() != 1) throw ShapeError("backward: root must be scalar");
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->needs_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backfn && !n->grad.empty()) n->backfn(*n);
  }
}

}  // namespace segflow::ag
