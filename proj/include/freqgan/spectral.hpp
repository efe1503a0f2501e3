#pragma once

#include "freqgan/tensor.hpp"

namespace freqgan {

/// Complex spectrum of a real image, one (re, im) pair per channel plane.
struct ComplexSpectrum {
  Tensor re;
  Tensor im;
};

/// Orthonormal 2-D DCT-II over the trailing [H,W] axes ([H,W], [C,H,W] or
/// [B,C,H,W]); each channel transforms independently. Linear, differentiable,
/// and energy-preserving per plane.
Tensor dct2(const Tensor& image);

/// Inverse of dct2.
Tensor idct2(const Tensor& spectrum);

/// Unnormalized forward DFT per trailing plane. Direct evaluation through the
/// basis matrices; not recorded on the tape.
ComplexSpectrum dft2(const Tensor& image);

/// Per-plane DFT magnitude |F(u,v)|; differentiable with respect to the
/// image. `centered` applies the half-period shift that moves the DC bin to
/// the plane center before returning.
Tensor dft2_magnitude(const Tensor& image, bool centered = false);

/// Binary low-pass mask: entry (u,v) is 1 iff
/// sqrt(u^2+v^2) <= gamma*sqrt(H^2+W^2); the boundary tie is kept.
Tensor build_mask(double gamma, int H, int W);

/// idct2(dct2(x) .* mask(gamma)), the mask broadcast across channels.
/// Differentiable; gamma=1 reproduces the input up to roundoff.
Tensor f_drop(const Tensor& image, double gamma);

/// Thread-local count of f_drop applications (instrumentation hook).
long& fdrop_invocations();

}  // namespace freqgan
