#include "freqgan/spectral.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>

namespace freqgan {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;
using MatC = Eigen::MatrixXcd;

namespace {

// Orthonormal DCT-II basis: row u is sqrt(2/N)*alpha(u)*cos((2i+1)u pi / 2N).
MatRM dct_basis(int n) {
  static std::map<int, MatRM> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  MatRM t(n, n);
  const double pi = std::numbers::pi;
  for (int u = 0; u < n; ++u) {
    const double alpha = (u == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i)
      t(u, i) = alpha * std::cos((2.0 * i + 1.0) * u * pi / (2.0 * n));
  }
  cache.emplace(n, t);
  return t;
}

// Unnormalized DFT basis: W(u,i) = exp(-2 pi j u i / N).
MatC dft_basis(int n) {
  static std::map<int, MatC> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  MatC w(n, n);
  const double pi = std::numbers::pi;
  for (int u = 0; u < n; ++u)
    for (int i = 0; i < n; ++i) {
      const double phase = -2.0 * pi * double(u) * double(i) / double(n);
      w(u, i) = std::complex<double>(std::cos(phase), std::sin(phase));
    }
  cache.emplace(n, w);
  return w;
}

struct PlaneDims {
  int H, W;
  long planes;
};

PlaneDims plane_dims(const Tensor& x, const char* op) {
  const Shape& s = x.shape();
  if (s.size() < 2)
    throw ShapeError(std::string(op) + ": expects trailing [H,W] axes, got " +
                     shape_str(s));
  const int H = s[s.size() - 2], W = s[s.size() - 1];
  return {H, W, x.size() / (long(H) * W)};
}

// out_plane = th * in_plane * tw^T, applied plane by plane
Array apply_separable(const Array& in, const PlaneDims& d, const MatRM& th,
                      const MatRM& tw) {
  Array out(in.size());
  const long hw = long(d.H) * d.W;
  for (long p = 0; p < d.planes; ++p) {
    CMapM x(in.data() + p * hw, d.H, d.W);
    MapM y(out.data() + p * hw, d.H, d.W);
    y.noalias() = th * x * tw.transpose();
  }
  return out;
}

}  // namespace

Tensor dct2(const Tensor& image) {
  const PlaneDims d = plane_dims(image, "dct2");
  const MatRM th = dct_basis(d.H), tw = dct_basis(d.W);
  Tensor r(image.shape(), apply_separable(image.array(), d, th, tw));
  if (detail::recording({&image})) {
    auto xd = image.handle();
    auto od = r.handle();
    detail::record(r, [xd, od, d, th, tw] {
      if (od->grad.size() != od->value.size()) return;
      if (!xd->wants_grad()) return;
      // adjoint of an orthonormal transform is its inverse
      xd->grad_ref() +=
          apply_separable(od->grad, d, th.transpose(), tw.transpose());
    });
  }
  return r;
}

Tensor idct2(const Tensor& spectrum) {
  const PlaneDims d = plane_dims(spectrum, "idct2");
  const MatRM th = dct_basis(d.H), tw = dct_basis(d.W);
  Tensor r(spectrum.shape(),
           apply_separable(spectrum.array(), d, th.transpose(), tw.transpose()));
  if (detail::recording({&spectrum})) {
    auto xd = spectrum.handle();
    auto od = r.handle();
    detail::record(r, [xd, od, d, th, tw] {
      if (od->grad.size() != od->value.size()) return;
      if (!xd->wants_grad()) return;
      xd->grad_ref() += apply_separable(od->grad, d, th, tw);
    });
  }
  return r;
}

ComplexSpectrum dft2(const Tensor& image) {
  const PlaneDims d = plane_dims(image, "dft2");
  const MatC wh = dft_basis(d.H), ww = dft_basis(d.W);
  Array re(image.size()), im(image.size());
  const long hw = long(d.H) * d.W;
  for (long p = 0; p < d.planes; ++p) {
    CMapM x(image.array().data() + p * hw, d.H, d.W);
    MatC f = wh * x.cast<std::complex<double>>() * ww.transpose();
    for (int u = 0; u < d.H; ++u)
      for (int v = 0; v < d.W; ++v) {
        re(p * hw + long(u) * d.W + v) = f(u, v).real();
        im(p * hw + long(u) * d.W + v) = f(u, v).imag();
      }
  }
  return {Tensor(image.shape(), std::move(re)),
          Tensor(image.shape(), std::move(im))};
}

namespace {

// fftshift index map: shifted[k] = orig[(k + n - n/2) % n]
int unshift_index(int k, int n) { return (k + n - n / 2) % n; }

}  // namespace

Tensor dft2_magnitude(const Tensor& image, bool centered) {
  const PlaneDims d = plane_dims(image, "dft2_magnitude");
  const MatC wh = dft_basis(d.H), ww = dft_basis(d.W);
  const long hw = long(d.H) * d.W;
  auto spectra = std::make_shared<std::vector<MatC>>();
  spectra->reserve(d.planes);
  Array mag(image.size());
  for (long p = 0; p < d.planes; ++p) {
    CMapM x(image.array().data() + p * hw, d.H, d.W);
    spectra->push_back(wh * x.cast<std::complex<double>>() * ww.transpose());
    const MatC& f = spectra->back();
    for (int u = 0; u < d.H; ++u)
      for (int v = 0; v < d.W; ++v) {
        const int su = centered ? unshift_index(u, d.H) : u;
        const int sv = centered ? unshift_index(v, d.W) : v;
        mag(p * hw + long(u) * d.W + v) = std::abs(f(su, sv));
      }
  }
  Tensor r(image.shape(), std::move(mag));
  if (detail::recording({&image})) {
    auto xd = image.handle();
    auto od = r.handle();
    detail::record(r, [xd, od, d, wh, ww, spectra, centered, hw] {
      if (od->grad.size() != od->value.size()) return;
      if (!xd->wants_grad()) return;
      Array& gx = xd->grad_ref();
      for (long p = 0; p < d.planes; ++p) {
        const MatC& f = (*spectra)[p];
        MatC g = MatC::Zero(d.H, d.W);
        for (int u = 0; u < d.H; ++u)
          for (int v = 0; v < d.W; ++v) {
            const int su = centered ? unshift_index(u, d.H) : u;
            const int sv = centered ? unshift_index(v, d.W) : v;
            const double m = std::abs(f(su, sv));
            if (m > 0.0)
              g(su, sv) = od->grad(p * hw + long(u) * d.W + v) * f(su, sv) / m;
          }
        const MatC dx = wh.adjoint() * g * ww.conjugate();
        for (int i = 0; i < d.H; ++i)
          for (int j = 0; j < d.W; ++j)
            gx(p * hw + long(i) * d.W + j) += dx(i, j).real();
      }
    });
  }
  return r;
}

Tensor build_mask(double gamma, int H, int W) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ContractError("build_mask: gamma must lie in [0,1]");
  if (H < 1 || W < 1) throw ContractError("build_mask: empty dimensions");
  const double threshold =
      gamma * std::sqrt(double(H) * H + double(W) * W);
  Array m(long(H) * W);
  for (int u = 0; u < H; ++u)
    for (int v = 0; v < W; ++v)
      m(long(u) * W + v) =
          (std::sqrt(double(u) * u + double(v) * v) <= threshold) ? 1.0 : 0.0;
  return Tensor({H, W}, std::move(m));
}

long& fdrop_invocations() {
  thread_local long count = 0;
  return count;
}

Tensor f_drop(const Tensor& image, double gamma) {
  const PlaneDims d = plane_dims(image, "f_drop");
  Tensor mask = build_mask(gamma, d.H, d.W);
  ++fdrop_invocations();
  return idct2(mul(dct2(image), mask));
}

}  // namespace freqgan
