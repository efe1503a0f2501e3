#include "freqgan/config_json.hpp"

#include <fstream>
#include <set>

namespace freqgan {

std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::kNone:
      return "none";
    case Regularizer::kFMatch:
      return "fmatch";
    case Regularizer::kSpectral:
      return "sr";
  }
  throw ContractError("unknown regularizer");
}

Regularizer regularizer_from_string(const std::string& s) {
  if (s == "none") return Regularizer::kNone;
  if (s == "fmatch") return Regularizer::kFMatch;
  if (s == "sr") return Regularizer::kSpectral;
  throw ContractError("unknown regularizer: " + s);
}

std::string to_string(MatchTransform t) {
  switch (t) {
    case MatchTransform::kDct:
      return "dct";
    case MatchTransform::kDftMagnitude:
      return "dft";
    case MatchTransform::kPixel:
      return "pixel";
  }
  throw ContractError("unknown match transform");
}

MatchTransform match_transform_from_string(const std::string& s) {
  if (s == "dct") return MatchTransform::kDct;
  if (s == "dft") return MatchTransform::kDftMagnitude;
  if (s == "pixel") return MatchTransform::kPixel;
  throw ContractError("unknown match transform: " + s);
}

std::string to_string(MatchDistance d) {
  switch (d) {
    case MatchDistance::kMse:
      return "mse";
    case MatchDistance::kMae:
      return "mae";
    case MatchDistance::kMkl:
      return "mkl";
    case MatchDistance::kMsse:
      return "msse";
  }
  throw ContractError("unknown match distance");
}

MatchDistance match_distance_from_string(const std::string& s) {
  if (s == "mse") return MatchDistance::kMse;
  if (s == "mae") return MatchDistance::kMae;
  if (s == "mkl") return MatchDistance::kMkl;
  if (s == "msse") return MatchDistance::kMsse;
  throw ContractError("unknown match distance: " + s);
}

namespace {

class StrictReader {
 public:
  StrictReader(const nlohmann::json& j, std::string scope)
      : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object())
      throw ConfigError("config: " + scope_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: bad value for field '" + scope_ + key + "'");
    }
  }

  void get_enum(const char* key, std::string& out) { get<std::string>(key, out); }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key()))
        throw ConfigError("config: unknown field '" + scope_ + it.key() +
                            "'");
  }

 private:
  const nlohmann::json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {
      {"gamma", c.gamma},
      {"lambda", c.lambda},
      {"match_transform", to_string(c.match_variant.transform)},
      {"match_distance", to_string(c.match_variant.distance)},
      {"regularizer", to_string(c.regularizer)},
      {"batch_size", c.batch_size},
      {"critics", c.critics},
      {"lr_g", c.lr_g},
      {"lr_d", c.lr_d},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"iterations", c.iterations},
      {"seed", c.seed},
      {"eval_every", c.eval_every},
      {"dataset",
       {{"source", to_string(c.dataset.source)},
        {"image_size", c.dataset.image_size},
        {"channels", c.dataset.channels},
        {"count", c.dataset.count},
        {"seed", c.dataset.seed},
        {"dir_path", c.dataset.dir_path},
        {"band_limit", c.dataset.band_limit},
        {"noise", c.dataset.noise}}},
      {"arch",
       {{"latent_dim", c.arch.latent_dim},
        {"base_channels", c.arch.base_channels},
        {"image_size", c.arch.image_size},
        {"image_channels", c.arch.image_channels}}},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  StrictReader top(j, "");
  top.get("gamma", c.gamma);
  top.get("lambda", c.lambda);
  std::string transform = to_string(c.match_variant.transform);
  std::string distance = to_string(c.match_variant.distance);
  std::string reg = to_string(c.regularizer);
  top.get_enum("match_transform", transform);
  top.get_enum("match_distance", distance);
  top.get_enum("regularizer", reg);
  try {
    c.match_variant.transform = match_transform_from_string(transform);
    c.match_variant.distance = match_distance_from_string(distance);
    c.regularizer = regularizer_from_string(reg);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  top.get("batch_size", c.batch_size);
  top.get("critics", c.critics);
  top.get("lr_g", c.lr_g);
  top.get("lr_d", c.lr_d);
  top.get("beta1", c.beta1);
  top.get("beta2", c.beta2);
  top.get("iterations", c.iterations);
  top.get("seed", c.seed);
  top.get("eval_every", c.eval_every);
  if (const nlohmann::json* d = top.child("dataset")) {
    StrictReader ds(*d, "dataset.");
    std::string source = to_string(c.dataset.source);
    ds.get_enum("source", source);
    try {
      c.dataset.source = dataset_source_from_string(source);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    ds.get("image_size", c.dataset.image_size);
    ds.get("channels", c.dataset.channels);
    ds.get("count", c.dataset.count);
    ds.get("seed", c.dataset.seed);
    ds.get("dir_path", c.dataset.dir_path);
    ds.get("band_limit", c.dataset.band_limit);
    ds.get("noise", c.dataset.noise);
    ds.finish();
  }
  if (const nlohmann::json* a = top.child("arch")) {
    StrictReader ar(*a, "arch.");
    ar.get("latent_dim", c.arch.latent_dim);
    ar.get("base_channels", c.arch.base_channels);
    ar.get("image_size", c.arch.image_size);
    ar.get("image_channels", c.arch.image_channels);
    ar.finish();
  } else {
    // keep the generator/discriminator geometry aligned with the data
    c.arch.image_size = c.dataset.image_size;
    c.arch.image_channels = c.dataset.channels;
  }
  top.finish();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse failure in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace freqgan
