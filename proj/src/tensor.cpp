#include "freqgan/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace freqgan {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

long shape_size(const Shape& s) {
  long n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape shape, Array values) {
  if (shape.empty()) throw ShapeError("empty shape");
  if (shape_size(shape) != values.size())
    throw ShapeError("shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  d_ = std::make_shared<detail::TensorData>();
  d_->shape = std::move(shape);
  d_->value = std::move(values);
}

Tensor Tensor::zeros(const Shape& shape) {
  return Tensor(shape, Array::Zero(shape_size(shape)));
}

Tensor Tensor::full(const Shape& shape, double value) {
  return Tensor(shape, Array::Constant(shape_size(shape), value));
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values) {
  return Tensor(shape, Eigen::Map<const Array>(values.data(),
                                               static_cast<long>(values.size())));
}

double Tensor::value() const {
  if (size() != 1) throw ContractError("value() requires a scalar tensor");
  return d_->value(0);
}

Tensor& Tensor::set_requires_grad(bool v) {
  d_->requires_grad = v;
  return *this;
}

Array Tensor::grad() const {
  if (d_->grad.size() == d_->value.size()) return d_->grad;
  return Array::Zero(d_->value.size());
}

void Tensor::zero_grad() {
  if (d_->grad.size() == d_->value.size()) d_->grad.setZero();
}

// ---- tape machinery ---------------------------------------------------------

namespace {
thread_local std::vector<GradientTape*> g_tape_stack;
}

GradientTape::GradientTape() { g_tape_stack.push_back(this); }

GradientTape::~GradientTape() {
  // Pausing pushes nullptr, so pop our own entry specifically.
  for (auto it = g_tape_stack.rbegin(); it != g_tape_stack.rend(); ++it) {
    if (*it == this) {
      g_tape_stack.erase(std::next(it).base());
      break;
    }
  }
}

GradientTape* GradientTape::active() {
  return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void GradientTape::backward(const Tensor& root) {
  if (used_) throw ContractError("backward() may run once per tape");
  used_ = true;
  if (!root.defined() || root.size() != 1)
    throw ContractError("backward root must be a scalar tensor");
  root.data()->grad_ref()(0) += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

TapePause::TapePause() { g_tape_stack.push_back(nullptr); }
TapePause::~TapePause() { g_tape_stack.pop_back(); }

void detail_record_node(std::function<void()> fn) {
  g_tape_stack.back()->nodes_.push_back(std::move(fn));
}

namespace detail {

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (GradientTape::active() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->data()->wants_grad()) return true;
  return false;
}

void record(const Tensor& out, std::function<void()> backward) {
  out.data()->tracked = true;
  detail_record_node(std::move(backward));
}

void accumulate(TensorData* t, const Array& g) {
  if (!t->wants_grad()) return;
  t->grad_ref() += g;
}

// Output gradient of a node, or nullptr if the node is off the path to root.
const Array* out_grad(const TensorData* o) {
  if (o->grad.size() != o->value.size()) return nullptr;
  return &o->grad;
}

}  // namespace detail

namespace {

using detail::TensorData;
using DPtr = std::shared_ptr<TensorData>;

Tensor make_out(Shape shape, Array value) {
  return Tensor(std::move(shape), std::move(value));
}

}  // namespace

// ---- arithmetic -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  enum class Mode { kSame, kScalarB, kScalarA, kRowBias, kChannelBias };
  Mode mode;
  Array out;
  if (shape_eq(sa, sb)) {
    mode = Mode::kSame;
    out = a.array() + b.array();
  } else if (b.size() == 1) {
    mode = Mode::kScalarB;
    out = a.array() + b.at(0);
  } else if (a.size() == 1) {
    mode = Mode::kScalarA;
    out = b.array() + a.at(0);
  } else if (sa.size() == 2 && sb.size() == 1 && sb[0] == sa[1]) {
    mode = Mode::kRowBias;
    out = a.array();
    const int B = sa[0], N = sa[1];
    for (int r = 0; r < B; ++r) out.segment(long(r) * N, N) += b.array();
  } else if (sa.size() == 4 && sb.size() == 1 && sb[0] == sa[1]) {
    mode = Mode::kChannelBias;
    out = a.array();
    const int B = sa[0], C = sa[1];
    const long hw = long(sa[2]) * sa[3];
    for (int i = 0; i < B; ++i)
      for (int c = 0; c < C; ++c)
        out.segment((long(i) * C + c) * hw, hw) += b.at(c);
  } else {
    throw ShapeError("add: incompatible shapes " + shape_str(sa) + " vs " +
                     shape_str(sb));
  }
  Tensor r = make_out(mode == Mode::kScalarA ? sb : sa, std::move(out));
  if (detail::recording({&a, &b})) {
    DPtr ad = a.handle(), bd = b.handle(), od = r.handle();
    detail::record(r, [ad, bd, od, mode] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      switch (mode) {
        case Mode::kSame:
          detail::accumulate(ad.get(), *g);
          detail::accumulate(bd.get(), *g);
          break;
        case Mode::kScalarB:
          detail::accumulate(ad.get(), *g);
          if (bd->wants_grad()) bd->grad_ref()(0) += g->sum();
          break;
        case Mode::kScalarA:
          detail::accumulate(bd.get(), *g);
          if (ad->wants_grad()) ad->grad_ref()(0) += g->sum();
          break;
        case Mode::kRowBias: {
          detail::accumulate(ad.get(), *g);
          if (bd->wants_grad()) {
            Array& gb = bd->grad_ref();
            const int B = ad->shape[0], N = ad->shape[1];
            for (int r2 = 0; r2 < B; ++r2) gb += g->segment(long(r2) * N, N);
          }
          break;
        }
        case Mode::kChannelBias: {
          detail::accumulate(ad.get(), *g);
          if (bd->wants_grad()) {
            Array& gb = bd->grad_ref();
            const int B = ad->shape[0], C = ad->shape[1];
            const long hw = long(ad->shape[2]) * ad->shape[3];
            for (int i = 0; i < B; ++i)
              for (int c = 0; c < C; ++c)
                gb(c) += g->segment((long(i) * C + c) * hw, hw).sum();
          }
          break;
        }
      }
    });
  }
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const bool scalar_b = b.size() == 1 && !shape_eq(a.shape(), b.shape());
  const bool scalar_a = a.size() == 1 && !shape_eq(a.shape(), b.shape());
  Array out;
  if (shape_eq(a.shape(), b.shape()))
    out = a.array() - b.array();
  else if (scalar_b)
    out = a.array() - b.at(0);
  else if (scalar_a)
    out = a.at(0) - b.array();
  else
    throw ShapeError("sub: incompatible shapes " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  Tensor r = make_out(scalar_a ? b.shape() : a.shape(), std::move(out));
  if (detail::recording({&a, &b})) {
    DPtr ad = a.handle(), bd = b.handle(), od = r.handle();
    detail::record(r, [ad, bd, od, scalar_a, scalar_b] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (scalar_a) {
        if (ad->wants_grad()) ad->grad_ref()(0) += g->sum();
      } else {
        detail::accumulate(ad.get(), *g);
      }
      if (scalar_b) {
        if (bd->wants_grad()) bd->grad_ref()(0) -= g->sum();
      } else if (bd->wants_grad()) {
        bd->grad_ref() -= *g;
      }
    });
  }
  return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  enum class Mode { kSame, kScalarB, kScalarA, kMask };
  Mode mode;
  Array out;
  long planes = 0, hw = 0;
  if (shape_eq(sa, sb)) {
    mode = Mode::kSame;
    out = a.array() * b.array();
  } else if (b.size() == 1) {
    mode = Mode::kScalarB;
    out = a.array() * b.at(0);
  } else if (a.size() == 1) {
    mode = Mode::kScalarA;
    out = b.array() * a.at(0);
  } else if (sb.size() == 2 && sa.size() >= 2 && sa[sa.size() - 2] == sb[0] &&
             sa[sa.size() - 1] == sb[1]) {
    mode = Mode::kMask;
    hw = long(sb[0]) * sb[1];
    planes = a.size() / hw;
    out = a.array();
    for (long p = 0; p < planes; ++p) out.segment(p * hw, hw) *= b.array();
  } else {
    throw ShapeError("mul: incompatible shapes " + shape_str(sa) + " vs " +
                     shape_str(sb));
  }
  Tensor r = make_out(mode == Mode::kScalarA ? sb : sa, std::move(out));
  if (detail::recording({&a, &b})) {
    DPtr ad = a.handle(), bd = b.handle(), od = r.handle();
    detail::record(r, [ad, bd, od, mode, planes, hw] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      switch (mode) {
        case Mode::kSame:
          if (ad->wants_grad()) ad->grad_ref() += *g * bd->value;
          if (bd->wants_grad()) bd->grad_ref() += *g * ad->value;
          break;
        case Mode::kScalarB:
          if (ad->wants_grad()) ad->grad_ref() += *g * bd->value(0);
          if (bd->wants_grad()) bd->grad_ref()(0) += (*g * ad->value).sum();
          break;
        case Mode::kScalarA:
          if (bd->wants_grad()) bd->grad_ref() += *g * ad->value(0);
          if (ad->wants_grad()) ad->grad_ref()(0) += (*g * bd->value).sum();
          break;
        case Mode::kMask:
          if (ad->wants_grad()) {
            Array& ga = ad->grad_ref();
            for (long p = 0; p < planes; ++p)
              ga.segment(p * hw, hw) += g->segment(p * hw, hw) * bd->value;
          }
          if (bd->wants_grad()) {
            Array& gb = bd->grad_ref();
            for (long p = 0; p < planes; ++p)
              gb += g->segment(p * hw, hw) * ad->value.segment(p * hw, hw);
          }
          break;
      }
    });
  }
  return r;
}

Tensor div(const Tensor& a, const Tensor& b) {
  const bool scalar_b = b.size() == 1 && !shape_eq(a.shape(), b.shape());
  Array out;
  if (shape_eq(a.shape(), b.shape()))
    out = a.array() / b.array();
  else if (scalar_b)
    out = a.array() / b.at(0);
  else
    throw ShapeError("div: incompatible shapes " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  Tensor r = make_out(a.shape(), std::move(out));
  if (detail::recording({&a, &b})) {
    DPtr ad = a.handle(), bd = b.handle(), od = r.handle();
    detail::record(r, [ad, bd, od, scalar_b] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (scalar_b) {
        const double bv = bd->value(0);
        if (ad->wants_grad()) ad->grad_ref() += *g / bv;
        if (bd->wants_grad())
          bd->grad_ref()(0) += -(*g * ad->value).sum() / (bv * bv);
      } else {
        if (ad->wants_grad()) ad->grad_ref() += *g / bd->value;
        if (bd->wants_grad())
          bd->grad_ref() += -(*g * ad->value) / (bd->value * bd->value);
      }
    });
  }
  return r;
}

Tensor smul(const Tensor& a, double c) {
  Tensor r = make_out(a.shape(), a.array() * c);
  if (detail::recording({&a})) {
    DPtr ad = a.handle(), od = r.handle();
    detail::record(r, [ad, od, c] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (ad->wants_grad()) ad->grad_ref() += *g * c;
    });
  }
  return r;
}

Tensor neg(const Tensor& a) { return smul(a, -1.0); }

// ---- matmul -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: expects rank-2 tensors");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  Array out(long(m) * n);
  {
    CMapM am(a.array().data(), m, k);
    CMapM bm(b.array().data(), k, n);
    MapM om(out.data(), m, n);
    // row-wise products keep each row's arithmetic independent of m
    for (int i = 0; i < m; ++i) om.row(i).noalias() = am.row(i) * bm;
  }
  Tensor r = make_out({m, n}, std::move(out));
  if (detail::recording({&a, &b})) {
    DPtr ad = a.handle(), bd = b.handle(), od = r.handle();
    detail::record(r, [ad, bd, od, m, k, n] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      CMapM gm(g->data(), m, n);
      if (ad->wants_grad()) {
        MapM ga(ad->grad_ref().data(), m, k);
        CMapM bm(bd->value.data(), k, n);
        for (int i = 0; i < m; ++i) ga.row(i).noalias() += gm.row(i) * bm.transpose();
      }
      if (bd->wants_grad()) {
        MapM gb(bd->grad_ref().data(), k, n);
        CMapM am(ad->value.data(), m, k);
        gb.noalias() += am.transpose() * gm;
      }
    });
  }
  return r;
}

// ---- convolution ------------------------------------------------------------

namespace {

struct ConvGeom {
  int C, H, W, kh, kw, stride, pad, Ho, Wo;
  long ck() const { return long(C) * kh * kw; }
  long p() const { return long(Ho) * Wo; }
};

// col[ck, p] with ck = (c*kh + di)*kw + dj, p = oy*Wo + ox.
void im2col(const double* src, const ConvGeom& g, double* col) {
  for (int c = 0; c < g.C; ++c)
    for (int di = 0; di < g.kh; ++di)
      for (int dj = 0; dj < g.kw; ++dj) {
        double* row = col + ((long(c) * g.kh + di) * g.kw + dj) * g.p();
        for (int oy = 0; oy < g.Ho; ++oy) {
          const int iy = oy * g.stride - g.pad + di;
          for (int ox = 0; ox < g.Wo; ++ox) {
            const int ix = ox * g.stride - g.pad + dj;
            row[long(oy) * g.Wo + ox] =
                (iy >= 0 && iy < g.H && ix >= 0 && ix < g.W)
                    ? src[(long(c) * g.H + iy) * g.W + ix]
                    : 0.0;
          }
        }
      }
}

// adjoint of im2col: scatter-add columns back into the [C,H,W] image
void col2im_add(const double* col, const ConvGeom& g, double* dst) {
  for (int c = 0; c < g.C; ++c)
    for (int di = 0; di < g.kh; ++di)
      for (int dj = 0; dj < g.kw; ++dj) {
        const double* row = col + ((long(c) * g.kh + di) * g.kw + dj) * g.p();
        for (int oy = 0; oy < g.Ho; ++oy) {
          const int iy = oy * g.stride - g.pad + di;
          if (iy < 0 || iy >= g.H) continue;
          for (int ox = 0; ox < g.Wo; ++ox) {
            const int ix = ox * g.stride - g.pad + dj;
            if (ix < 0 || ix >= g.W) continue;
            dst[(long(c) * g.H + iy) * g.W + ix] += row[long(oy) * g.Wo + ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv2d: expects x [B,C,H,W] and w [Cout,Cin,kh,kw]");
  if (stride < 1 || padding < 0) throw ContractError("conv2d: bad stride/pad");
  const int B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != Ci) throw ShapeError("conv2d: channel mismatch");
  if (H + 2 * padding < kh || W + 2 * padding < kw)
    throw ShapeError("conv2d: kernel larger than padded input");
  ConvGeom g{Ci, H, W, kh, kw, stride, padding,
             (H + 2 * padding - kh) / stride + 1,
             (W + 2 * padding - kw) / stride + 1};
  const long ck = g.ck(), pn = g.p();
  Array out(long(B) * Co * pn);
  Array col(ck * pn);
  CMapM wm(w.array().data(), Co, ck);
  for (int i = 0; i < B; ++i) {
    im2col(x.array().data() + long(i) * Ci * H * W, g, col.data());
    CMapM cm(col.data(), ck, pn);
    MapM om(out.data() + long(i) * Co * pn, Co, pn);
    om.noalias() = wm * cm;
  }
  Tensor r = make_out({B, Co, g.Ho, g.Wo}, std::move(out));
  if (detail::recording({&x, &w})) {
    DPtr xd = x.handle(), wd = w.handle(), od = r.handle();
    detail::record(r, [xd, wd, od, g, B, Ci, Co, H, W] {
      const Array* gr = detail::out_grad(od.get());
      if (!gr) return;
      const long ck = g.ck(), pn = g.p();
      Array col(ck * pn);
      CMapM wm(wd->value.data(), Co, ck);
      for (int i = 0; i < B; ++i) {
        CMapM gm(gr->data() + long(i) * Co * pn, Co, pn);
        if (wd->wants_grad() ) {
          im2col(xd->value.data() + long(i) * Ci * H * W, g, col.data());
          CMapM cm(col.data(), ck, pn);
          MapM gw(wd->grad_ref().data(), Co, ck);
          gw.noalias() += gm * cm.transpose();
        }
        if (xd->wants_grad()) {
          Array dcol(ck * pn);
          MapM dc(dcol.data(), ck, pn);
          dc.noalias() = wm.transpose() * gm;
          col2im_add(dcol.data(), g, xd->grad_ref().data() + long(i) * Ci * H * W);
        }
      }
    });
  }
  return r;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride,
                        int padding) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv_transpose2d: expects x [B,C,H,W] and w [Cin,Cout,kh,kw]");
  if (stride < 1 || padding < 0)
    throw ContractError("conv_transpose2d: bad stride/pad");
  const int B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(0) != Ci) throw ShapeError("conv_transpose2d: channel mismatch");
  const int Ho = (H - 1) * stride + kh - 2 * padding;
  const int Wo = (W - 1) * stride + kw - 2 * padding;
  if (Ho <= 0 || Wo <= 0) throw ShapeError("conv_transpose2d: empty output");
  // geometry of the adjoint convolution: image is the [Co,Ho,Wo] output
  ConvGeom g{Co, Ho, Wo, kh, kw, stride, padding, H, W};
  const long ck = g.ck(), pn = g.p();  // ck = Co*kh*kw, pn = H*W
  Array out = Array::Zero(long(B) * Co * Ho * Wo);
  Array tmp(ck * pn);
  CMapM wm(w.array().data(), Ci, ck);
  for (int i = 0; i < B; ++i) {
    CMapM xm(x.array().data() + long(i) * Ci * pn, Ci, pn);
    MapM tm(tmp.data(), ck, pn);
    tm.noalias() = wm.transpose() * xm;
    col2im_add(tmp.data(), g, out.data() + long(i) * Co * Ho * Wo);
  }
  Tensor r = make_out({B, Co, Ho, Wo}, std::move(out));
  if (detail::recording({&x, &w})) {
    DPtr xd = x.handle(), wd = w.handle(), od = r.handle();
    detail::record(r, [xd, wd, od, g, B, Ci, Co, Ho, Wo] {
      const Array* gr = detail::out_grad(od.get());
      if (!gr) return;
      const long ck = g.ck(), pn = g.p();
      Array col(ck * pn);
      CMapM wm(wd->value.data(), Ci, ck);
      for (int i = 0; i < B; ++i) {
        im2col(gr->data() + long(i) * Co * Ho * Wo, g, col.data());
        CMapM cm(col.data(), ck, pn);
        if (xd->wants_grad()) {
          MapM gx(xd->grad_ref().data() + long(i) * Ci * pn, Ci, pn);
          gx.noalias() += wm * cm;
        }
        if (wd->wants_grad()) {
          CMapM xm(xd->value.data() + long(i) * Ci * pn, Ci, pn);
          MapM gw(wd->grad_ref().data(), Ci, ck);
          gw.noalias() += xm * cm.transpose();
        }
      }
    });
  }
  return r;
}

// ---- structural ops ----------------------------------------------------------

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_size(shape) != x.size())
    throw ShapeError("reshape: size mismatch " + shape_str(x.shape()) +
                     " -> " + shape_str(shape));
  Tensor r = make_out(shape, x.array());
  if (detail::recording({&x})) {
    DPtr xd = x.handle(), od = r.handle();
    detail::record(r, [xd, od] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      detail::accumulate(xd.get(), *g);
    });
  }
  return r;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Array out(a.size() + b.size());
  out.head(a.size()) = a.array();
  out.tail(b.size()) = b.array();
  Tensor r = make_out({static_cast<int>(a.size() + b.size())}, std::move(out));
  if (detail::recording({&a, &b})) {
    DPtr ad = a.handle(), bd = b.handle(), od = r.handle();
    const long na = a.size(), nb = b.size();
    detail::record(r, [ad, bd, od, na, nb] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (ad->wants_grad()) ad->grad_ref() += g->head(na);
      if (bd->wants_grad()) bd->grad_ref() += g->tail(nb);
    });
  }
  return r;
}

Tensor slice0(const Tensor& x, int i) {
  if (x.rank() < 2) throw ShapeError("slice0: expects rank >= 2");
  const int B = x.dim(0);
  if (i < 0 || i >= B) throw ContractError("slice0: index out of range");
  Shape rest(x.shape().begin() + 1, x.shape().end());
  const long n = shape_size(rest);
  Tensor r = make_out(rest, x.array().segment(long(i) * n, n));
  if (detail::recording({&x})) {
    DPtr xd = x.handle(), od = r.handle();
    detail::record(r, [xd, od, i, n] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (xd->wants_grad()) xd->grad_ref().segment(long(i) * n, n) += *g;
    });
  }
  return r;
}

Tensor take(const Tensor& x, long flat_index) {
  if (flat_index < 0 || flat_index >= x.size())
    throw ContractError("take: index out of range");
  Tensor r = Tensor::scalar(x.at(flat_index));
  if (detail::recording({&x})) {
    DPtr xd = x.handle(), od = r.handle();
    detail::record(r, [xd, od, flat_index] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (xd->wants_grad()) xd->grad_ref()(flat_index) += (*g)(0);
    });
  }
  return r;
}

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& x) {
  Tensor r = Tensor::scalar(x.array().sum());
  if (detail::recording({&x})) {
    DPtr xd = x.handle(), od = r.handle();
    detail::record(r, [xd, od] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (xd->wants_grad()) xd->grad_ref() += (*g)(0);
    });
  }
  return r;
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  Tensor r = Tensor::scalar(x.array().sum() / n);
  if (detail::recording({&x})) {
    DPtr xd = x.handle(), od = r.handle();
    detail::record(r, [xd, od, n] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (xd->wants_grad()) xd->grad_ref() += (*g)(0) / n;
    });
  }
  return r;
}

Tensor mean0(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("mean0: expects rank >= 2");
  const int B = x.dim(0);
  Shape rest(x.shape().begin() + 1, x.shape().end());
  const long n = shape_size(rest);
  Array out = Array::Zero(n);
  for (int i = 0; i < B; ++i) out += x.array().segment(long(i) * n, n);
  out /= double(B);
  Tensor r = make_out(rest, std::move(out));
  if (detail::recording({&x})) {
    DPtr xd = x.handle(), od = r.handle();
    detail::record(r, [xd, od, B, n] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (xd->wants_grad()) {
        Array& gx = xd->grad_ref();
        for (int i = 0; i < B; ++i)
          gx.segment(long(i) * n, n) += *g / double(B);
      }
    });
  }
  return r;
}

// ---- elementwise nonlinearities -----------------------------------------------

namespace {

template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& x, Fwd fwd, Bwd bwd) {
  Tensor r = Tensor(x.shape(), fwd(x.array()));
  if (detail::recording({&x})) {
    DPtr xd = x.handle(), od = r.handle();
    detail::record(r, [xd, od, bwd] {
      const Array* g = detail::out_grad(od.get());
      if (!g) return;
      if (xd->wants_grad()) xd->grad_ref() += bwd(*g, xd->value, od->value);
    });
  }
  return r;
}

}  // namespace

Tensor abs(const Tensor& x) {
  return unary_op(
      x, [](const Array& v) { return Array(v.abs()); },
      [](const Array& g, const Array& v, const Array&) {
        return Array(g * v.sign());
      });
}

Tensor square(const Tensor& x) {
  return unary_op(
      x, [](const Array& v) { return Array(v.square()); },
      [](const Array& g, const Array& v, const Array&) {
        return Array(g * 2.0 * v);
      });
}

Tensor sqrt(const Tensor& x) {
  if ((x.array() < 0.0).any()) throw DomainError("sqrt of negative value");
  return unary_op(
      x, [](const Array& v) { return Array(v.sqrt()); },
      [](const Array& g, const Array&, const Array& y) {
        return Array(g * 0.5 / y);
      });
}

Tensor log(const Tensor& x) {
  if ((x.array() <= 0.0).any()) throw DomainError("log of non-positive value");
  return unary_op(
      x, [](const Array& v) { return Array(v.log()); },
      [](const Array& g, const Array& v, const Array&) { return Array(g / v); });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](const Array& v) { return Array(v.exp()); },
      [](const Array& g, const Array&, const Array& y) { return Array(g * y); });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, [](const Array& v) { return Array(v.tanh()); },
      [](const Array& g, const Array&, const Array& y) {
        return Array(g * (1.0 - y.square()));
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x,
      [](const Array& v) {
        Array y(v.size());
        for (long i = 0; i < v.size(); ++i) {
          const double t = v(i);
          if (t >= 0.0) {
            y(i) = 1.0 / (1.0 + std::exp(-t));
          } else {
            const double e = std::exp(t);
            y(i) = e / (1.0 + e);
          }
        }
        return y;
      },
      [](const Array& g, const Array&, const Array& y) {
        return Array(g * y * (1.0 - y));
      });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary_op(
      x,
      [slope](const Array& v) {
        return Array((v > 0.0).select(v, v * slope));
      },
      [slope](const Array& g, const Array& v, const Array&) {
        return Array((v > 0.0).select(g, g * slope));
      });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary_op(
      x,
      [lo, hi](const Array& v) { return Array(v.max(lo).min(hi)); },
      [lo, hi](const Array& g, const Array& v, const Array&) {
        return Array((v >= lo && v <= hi).select(g, Array::Zero(g.size())));
      });
}

Tensor stack0(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("stack0: empty list");
  const Shape& s0 = parts.front().shape();
  const long n = parts.front().size();
  Array out(long(parts.size()) * n);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!shape_eq(parts[i].shape(), s0))
      throw ShapeError("stack0: mismatched element shapes");
    out.segment(long(i) * n, n) = parts[i].array();
  }
  Shape shape;
  shape.push_back(static_cast<int>(parts.size()));
  shape.insert(shape.end(), s0.begin(), s0.end());
  return Tensor(std::move(shape), std::move(out));
}

}  // namespace freqgan
