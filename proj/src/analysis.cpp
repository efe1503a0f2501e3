#include "freqgan/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <thread>

#include "freqgan/objectives.hpp"
#include "freqgan/optim.hpp"
#include "freqgan/rng.hpp"
#include "freqgan/spectral.hpp"

namespace freqgan {

namespace {

constexpr std::uint64_t kSplitRealTag = 0x73707230ull;
constexpr std::uint64_t kSplitFakeTag = 0x73707231ull;
constexpr std::uint64_t kEpochTag = 0x65706f63ull;

void check_image_set(const std::vector<Tensor>& set, const char* name) {
  if (set.empty()) throw ContractError(std::string(name) + ": empty image set");
  const Shape& s = set.front().shape();
  if (s.size() != 3)
    throw ShapeError(std::string(name) + ": images must be [C,H,W]");
  for (const Tensor& t : set)
    if (!shape_eq(t.shape(), s))
      throw ShapeError(std::string(name) + ": mixed image shapes");
}

}  // namespace

Tensor sfa_delta(int u, int v, double epsilon, int H, double* imag_residue) {
  if (H < 1) throw ContractError("sfa_delta: H must be >= 1");
  if (u < 0 || u >= H || v < 0 || v >= H)
    throw ContractError("sfa_delta: frequency indices out of range");
  // canonical member of the conjugate pair
  int cu = u, cv = v;
  const int u2 = (H - u) % H, v2 = (H - v) % H;
  if (u2 < cu || (u2 == cu && v2 < cv)) {
    cu = u2;
    cv = v2;
  }
  const int ru = (H - cu) % H, rv = (H - cv) % H;
  const double pi = std::numbers::pi;
  const std::complex<double> plus(1.0, 1.0), minus(1.0, -1.0);
  Array out(long(H) * H);
  double residue = 0.0;
  for (int i = 0; i < H; ++i)
    for (int k = 0; k < H; ++k) {
      const double p1 = -2.0 * pi * (double(cu) * i + double(cv) * k) / H;
      const double p2 = -2.0 * pi * (double(ru) * i + double(rv) * k) / H;
      const std::complex<double> val =
          epsilon * (plus * std::complex<double>(std::cos(p1), std::sin(p1)) +
                     minus * std::complex<double>(std::cos(p2), std::sin(p2)));
      residue = std::max(residue, std::abs(val.imag()));
      out(long(i) * H + k) = val.real();
    }
  if (imag_residue) *imag_residue = residue;
  return Tensor({H, H}, std::move(out));
}

SensitivityMap sfa_sensitivity_map(const GanModel& model,
                                   const std::vector<Tensor>& images,
                                   double epsilon, double gamma) {
  check_image_set(images, "sfa_sensitivity_map");
  const Shape& s = images.front().shape();
  const int C = s[0], H = s[1];
  if (s[1] != s[2])
    throw ContractError("sfa_sensitivity_map: images must be square");
  const bool filtered = gamma < 1.0;

  TapePause pause;
  Tensor batch = stack0(images);
  auto run = [&](const Tensor& b) {
    return discriminate(model, filtered ? f_drop(b, gamma) : b);
  };
  const Array base = run(batch).array();
  const int n = static_cast<int>(images.size());
  const long chw = long(C) * H * H, hh = long(H) * H;

  Array map_values(hh);
  auto compute_cell = [&](int u, int v) {
    Tensor delta = sfa_delta(u, v, 2.0 * epsilon, H);
    Tensor shifted = Tensor(batch.shape(), batch.array());
    for (long img = 0; img < n; ++img)
      for (int c = 0; c < C; ++c)
        shifted.array().segment(img * chw + long(c) * hh, hh) += delta.array();
    const Array probs = run(shifted).array();
    map_values(long(u) * H + v) = (probs - base).abs().mean();
  };

  const unsigned workers =
      std::min(4u, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1 || H < 4) {
    for (int u = 0; u < H; ++u)
      for (int v = 0; v < H; ++v) compute_cell(u, v);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int u = static_cast<int>(w); u < H; u += static_cast<int>(workers))
          for (int v = 0; v < H; ++v) compute_cell(u, v);
      });
    for (auto& t : pool) t.join();
  }
  return {Tensor({H, H}, std::move(map_values)), epsilon, n};
}

Tensor mean_dct_signed(const std::vector<Tensor>& images) {
  check_image_set(images, "mean_dct_signed");
  Array acc = Array::Zero(images.front().size());
  for (const Tensor& img : images) acc += dct2(img).array();
  acc /= double(images.size());
  return Tensor(images.front().shape(), std::move(acc));
}

GapReport frequency_gap(const std::vector<Tensor>& real_set,
                        const std::vector<Tensor>& fake_set,
                        std::optional<double> gamma) {
  check_image_set(real_set, "frequency_gap(real)");
  check_image_set(fake_set, "frequency_gap(fake)");
  if (!shape_eq(real_set.front().shape(), fake_set.front().shape()))
    throw ShapeError("frequency_gap: image shapes differ between sets");
  Tensor mr = mean_dct_signed(real_set);
  Tensor mf = mean_dct_signed(fake_set);
  GapReport report;
  report.n_real = static_cast<int>(real_set.size());
  report.n_fake = static_cast<int>(fake_set.size());
  report.all_band_gap = (mr.array() - mf.array()).abs().mean();
  if (gamma) {
    const Shape& s = mr.shape();
    Tensor mask = build_mask(*gamma, s[1], s[2]);
    Tensor lr = mul(mr, mask);
    Tensor lf = mul(mf, mask);
    report.lower_band_gap = (lr.array() - lf.array()).abs().mean();
    report.gamma_used = *gamma;
  }
  return report;
}

MeanSpectrum mean_spectrum(const std::vector<Tensor>& images) {
  check_image_set(images, "mean_spectrum");
  const Shape& s = images.front().shape();
  const int C = s[0], H = s[1], W = s[2];
  const long hw = long(H) * W;
  Array acc = Array::Zero(hw);
  for (const Tensor& img : images) {
    Array coef = dct2(img).array().abs();
    for (int c = 0; c < C; ++c) acc += coef.segment(long(c) * hw, hw);
  }
  acc /= double(images.size()) * C;
  Tensor values({H, W}, std::move(acc));
  Tensor display({H, W}, Array((1.0 + values.array()).log()));
  return {values, display};
}

// ---- linear fake-detection probe ----------------------------------------------

namespace {

Array probe_features(const Tensor& image, ProbeDomain domain) {
  return domain == ProbeDomain::kSpatial ? image.array()
                                         : dct2(image).array();
}

std::vector<int> seeded_permutation(int n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[static_cast<int>(rng.uniform_int(i + 1))]);
  return idx;
}

}  // namespace

ProbeResult fake_detection_probe(const std::vector<Tensor>& real_set,
                                 const std::vector<Tensor>& fake_set,
                                 ProbeDomain domain, std::uint64_t split_seed) {
  check_image_set(real_set, "fake_detection_probe(real)");
  check_image_set(fake_set, "fake_detection_probe(fake)");
  if (!shape_eq(real_set.front().shape(), fake_set.front().shape()))
    throw ShapeError("fake_detection_probe: image shapes differ");
  if (real_set.size() < 20 || fake_set.size() < 20)
    throw ContractError("fake_detection_probe: both sets need >= 20 images");

  const long F = real_set.front().size();
  struct Split {
    std::vector<int> train, test;
  };
  auto split_class = [&](int n, std::uint64_t tag) {
    Rng rng(mix_seed(split_seed, tag));
    std::vector<int> idx = seeded_permutation(n, rng);
    const int train_n = (4 * n) / 5;
    if (train_n < 1 || n - train_n < 1)
      throw ContractError("fake_detection_probe: degenerate split");
    Split s;
    s.train.assign(idx.begin(), idx.begin() + train_n);
    s.test.assign(idx.begin() + train_n, idx.end());
    return s;
  };
  const Split sr = split_class(static_cast<int>(real_set.size()), kSplitRealTag);
  const Split sf = split_class(static_cast<int>(fake_set.size()), kSplitFakeTag);

  const int n_train = static_cast<int>(sr.train.size() + sf.train.size());
  const int n_test = static_cast<int>(sr.test.size() + sf.test.size());
  Array xs(long(n_train + n_test) * F);
  Array ys(n_train + n_test);
  long row = 0;
  auto append = [&](const std::vector<Tensor>& set, const std::vector<int>& idx,
                    double label) {
    for (int i : idx) {
      xs.segment(row * F, F) = probe_features(set[i], domain);
      ys(row) = label;
      ++row;
    }
  };
  append(real_set, sr.train, 0.0);  // train block first
  append(fake_set, sf.train, 1.0);
  append(real_set, sr.test, 0.0);
  append(fake_set, sf.test, 1.0);

  // per-feature standardization fitted on the training block
  Array mu = Array::Zero(F), var = Array::Zero(F);
  for (int r = 0; r < n_train; ++r) mu += xs.segment(long(r) * F, F);
  mu /= double(n_train);
  for (int r = 0; r < n_train; ++r)
    var += (xs.segment(long(r) * F, F) - mu).square();
  var /= double(n_train);
  Array sd = var.sqrt().max(1e-8);
  for (int r = 0; r < n_train + n_test; ++r)
    xs.segment(long(r) * F, F) = (xs.segment(long(r) * F, F) - mu) / sd;

  Tensor w = Tensor::zeros({static_cast<int>(F), 1}).set_requires_grad(true);
  Tensor b = Tensor::zeros({1}).set_requires_grad(true);
  std::vector<Tensor> params{w, b};
  AdamState adam;
  adam.lr = 1e-3;
  adam.beta1 = 0.0;
  adam.beta2 = 0.9;

  Rng epoch_rng(mix_seed(split_seed, kEpochTag));
  const int batch = 64;
  for (int epoch = 0; epoch < 100; ++epoch) {
    std::vector<int> order = seeded_permutation(n_train, epoch_rng);
    for (int start = 0; start < n_train; start += batch) {
      const int bn = std::min(batch, n_train - start);
      Tensor xb = Tensor::zeros({bn, static_cast<int>(F)});
      Tensor yb = Tensor::zeros({bn});
      for (int i = 0; i < bn; ++i) {
        const int r = order[start + i];
        xb.array().segment(long(i) * F, F) = xs.segment(long(r) * F, F);
        yb.array()(i) = ys(r);
      }
      w.zero_grad();
      b.zero_grad();
      GradientTape tape;
      Tensor p = clamp(sigmoid(reshape(add(matmul(xb, w), b), {bn})), 1e-7,
                       1.0 - 1e-7);
      Tensor one = Tensor::full({bn}, 1.0);
      Tensor loss =
          neg(mean(add(mul(yb, log(p)), mul(sub(one, yb), log(sub(one, p))))));
      tape.backward(loss);
      adam_step(params, adam);
    }
  }

  auto accuracy = [&](int first, int count) {
    int correct = 0;
    for (int r = first; r < first + count; ++r) {
      const double z =
          (Eigen::Map<const Eigen::VectorXd>(xs.data() + long(r) * F, F)
               .dot(Eigen::Map<const Eigen::VectorXd>(w.array().data(), F))) +
          b.at(0);
      const int pred = z > 0.0 ? 1 : 0;
      if (pred == static_cast<int>(ys(r))) ++correct;
    }
    return double(correct) / count;
  };
  return {accuracy(0, n_train), accuracy(n_train, n_test)};
}

}  // namespace freqgan
