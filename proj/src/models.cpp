#include "freqgan/models.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "freqgan/rng.hpp"

namespace freqgan {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ull;  // "init"
constexpr double kWeightStd = 0.02;

int upsample_stages(int image_size) {
  switch (image_size) {
    case 16:
      return 2;
    case 32:
      return 3;
    default:
      throw ContractError("unsupported image_size (use 16 or 32)");
  }
}

void validate_arch(const GanArch& a) {
  if (a.latent_dim < 1) throw ContractError("latent_dim must be >= 1");
  if (a.base_channels < 1) throw ContractError("base_channels must be >= 1");
  if (a.image_channels < 1) throw ContractError("image_channels must be >= 1");
  upsample_stages(a.image_size);
}

Tensor normal_param(const Shape& shape, Rng& rng, double std_dev) {
  Tensor t = Tensor::zeros(shape);
  for (long i = 0; i < t.size(); ++i) t.array()(i) = std_dev * rng.normal();
  t.set_requires_grad();
  return t;
}

Tensor zero_param(const Shape& shape) {
  return Tensor::zeros(shape).set_requires_grad(true);
}

}  // namespace

std::vector<Tensor> GanModel::all_params() const {
  std::vector<Tensor> all = gen_params;
  all.insert(all.end(), disc_params.begin(), disc_params.end());
  return all;
}

void GanModel::zero_grad() {
  for (Tensor& t : gen_params) t.zero_grad();
  for (Tensor& t : disc_params) t.zero_grad();
}

GanModel GanModel::clone() const {
  GanModel copy;
  copy.arch = arch;
  copy.seed = seed;
  copy.gen_names = gen_names;
  copy.disc_names = disc_names;
  for (const Tensor& t : gen_params)
    copy.gen_params.push_back(
        Tensor(t.shape(), t.array()).set_requires_grad(true));
  for (const Tensor& t : disc_params)
    copy.disc_params.push_back(
        Tensor(t.shape(), t.array()).set_requires_grad(true));
  return copy;
}

GanModel init_model(const GanArch& arch, std::uint64_t seed) {
  validate_arch(arch);
  const int stages = upsample_stages(arch.image_size);
  GanModel m;
  m.arch = arch;
  m.seed = seed;
  Rng rng(mix_seed(seed, kInitTag));

  auto push = [](std::vector<std::string>& names, std::vector<Tensor>& params,
                 const std::string& name, Tensor t) {
    names.push_back(name);
    params.push_back(std::move(t));
  };

  // generator: dense seed into [ch0,4,4], then stride-2 upsampling stages
  const int ch0 = arch.base_channels << (stages - 1);
  push(m.gen_names, m.gen_params, "gen.dense.w",
       normal_param({arch.latent_dim, ch0 * 16}, rng, kWeightStd));
  push(m.gen_names, m.gen_params, "gen.dense.b", zero_param({ch0 * 16}));
  int ch = ch0;
  for (int s = 0; s < stages; ++s) {
    const bool last = s == stages - 1;
    const int out = last ? arch.image_channels : ch / 2;
    const std::string base = "gen.up" + std::to_string(s + 1);
    push(m.gen_names, m.gen_params, base + ".w",
         normal_param({ch, out, 4, 4}, rng, kWeightStd));
    push(m.gen_names, m.gen_params, base + ".b", zero_param({out}));
    ch = out;
  }

  // discriminator: mirrored stride-2 convolutions and a dense head
  int in = arch.image_channels;
  for (int s = 0; s < stages; ++s) {
    const int out = arch.base_channels << s;
    const std::string base = "disc.conv" + std::to_string(s + 1);
    push(m.disc_names, m.disc_params, base + ".w",
         normal_param({out, in, 4, 4}, rng, kWeightStd));
    push(m.disc_names, m.disc_params, base + ".b", zero_param({out}));
    in = out;
  }
  push(m.disc_names, m.disc_params, "disc.dense.w",
       normal_param({in * 16, 1}, rng, kWeightStd));
  push(m.disc_names, m.disc_params, "disc.dense.b", zero_param({1}));
  return m;
}

Tensor generate(const GanModel& model, const Tensor& z) {
  const GanArch& a = model.arch;
  if (z.rank() != 2 || z.dim(1) != a.latent_dim)
    throw ContractError("generate: latent size mismatch, expected [B," +
                        std::to_string(a.latent_dim) + "]");
  const int stages = upsample_stages(a.image_size);
  const int ch0 = a.base_channels << (stages - 1);
  const int B = z.dim(0);
  Tensor h = add(matmul(z, model.gen_params[0]), model.gen_params[1]);
  h = leaky_relu(reshape(h, {B, ch0, 4, 4}), 0.2);
  for (int s = 0; s < stages; ++s) {
    const Tensor& w = model.gen_params[2 + 2 * s];
    const Tensor& b = model.gen_params[3 + 2 * s];
    h = add(conv_transpose2d(h, w, 2, 1), b);
    h = (s == stages - 1) ? tanh(h) : leaky_relu(h, 0.2);
  }
  return h;
}

Tensor discriminate(const GanModel& model, const Tensor& x) {
  const GanArch& a = model.arch;
  if (x.rank() != 4 || x.dim(1) != a.image_channels ||
      x.dim(2) != a.image_size || x.dim(3) != a.image_size)
    throw ShapeError("discriminate: expected [B," +
                     std::to_string(a.image_channels) + "," +
                     std::to_string(a.image_size) + "," +
                     std::to_string(a.image_size) + "], got " +
                     shape_str(x.shape()));
  const int stages = upsample_stages(a.image_size);
  const int B = x.dim(0);
  Tensor h = x;
  for (int s = 0; s < stages; ++s) {
    const Tensor& w = model.disc_params[2 * s];
    const Tensor& b = model.disc_params[2 * s + 1];
    h = leaky_relu(add(conv2d(h, w, 2, 1), b), 0.2);
  }
  const int feat = (a.base_channels << (stages - 1)) * 16;
  h = reshape(h, {B, feat});
  h = add(matmul(h, model.disc_params[2 * stages]),
          model.disc_params[2 * stages + 1]);
  return reshape(sigmoid(h), {B});
}

// ---- checkpoint container ----------------------------------------------------

namespace {
constexpr char kMagic[6] = {'F', 'G', 'C', 'K', '1', '\n'};
}

void save_checkpoint(const GanModel& model, long iteration,
                     const std::string& path) {
  nlohmann::json header;
  header["arch"] = {{"latent_dim", model.arch.latent_dim},
                    {"base_channels", model.arch.base_channels},
                    {"image_size", model.arch.image_size},
                    {"image_channels", model.arch.image_channels}};
  header["seed"] = model.seed;
  header["iteration"] = iteration;
  nlohmann::json params = nlohmann::json::array();
  long offset = 0;
  auto describe = [&](const std::vector<std::string>& names,
                      const std::vector<Tensor>& ts) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      params.push_back({{"name", names[i]},
                        {"shape", ts[i].shape()},
                        {"offset", offset},
                        {"count", ts[i].size()}});
      offset += ts[i].size();
    }
  };
  describe(model.gen_names, model.gen_params);
  describe(model.disc_names, model.disc_params);
  header["params"] = params;
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  auto dump = [&](const std::vector<Tensor>& ts) {
    for (const Tensor& t : ts)
      out.write(reinterpret_cast<const char*>(t.array().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
  };
  dump(model.gen_params);
  dump(model.disc_params);
  if (!out) throw IngestError("checkpoint write failed: " + path);
}

GanModel load_checkpoint(const std::string& path, long* iteration) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint: " + path);
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IngestError("not a checkpoint file: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw IngestError("truncated checkpoint header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("bad checkpoint header in " + path + ": " + e.what());
  }
  GanArch arch{header["arch"]["latent_dim"], header["arch"]["base_channels"],
               header["arch"]["image_size"], header["arch"]["image_channels"]};
  GanModel m = init_model(arch, header["seed"].get<std::uint64_t>());
  if (iteration) *iteration = header["iteration"].get<long>();

  std::vector<Tensor> all = m.gen_params;
  all.insert(all.end(), m.disc_params.begin(), m.disc_params.end());
  const auto& params = header["params"];
  if (params.size() != all.size())
    throw IngestError("checkpoint parameter count mismatch: " + path);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Shape shape = params[i]["shape"].get<Shape>();
    if (!shape_eq(shape, all[i].shape()))
      throw IngestError("checkpoint parameter shape mismatch at " +
                        params[i]["name"].get<std::string>());
    in.read(reinterpret_cast<char*>(all[i].array().data()),
            static_cast<std::streamsize>(all[i].size() * sizeof(double)));
  }
  if (!in) throw IngestError("truncated checkpoint data: " + path);
  return m;
}

}  // namespace freqgan
