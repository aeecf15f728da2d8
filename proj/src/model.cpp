#include "asr/model.hpp"

#include <sstream>

#include "asr/binary_io.hpp"
#include "asr/config.hpp"
#include "asr/errors.hpp"

namespace asr {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x43525341;  // "ASRC"

std::string field(const std::map<std::string, std::string>& f, const std::string& key) {
  auto it = f.find(key);
  if (it == f.end()) throw IoError("checkpoint header is missing '" + key + "'");
  return it->second;
}

std::string encode_header(const std::map<std::string, std::string>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractViolation("checkpoint header entry cannot contain '=' or newlines: " + k);
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> decode_header(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("checkpoint header line without '='");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

void put_matrix(io::ByteWriter& w, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) w.put<double>(static_cast<double>(m.data()[i]));
}

void get_matrix(io::ByteReader& r, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Real>(r.get<double>());
}

}  // namespace

Variant parse_variant(const std::string& s) {
  if (s == "air") return Variant::Air;
  if (s == "air-pprior") return Variant::AirPPrior;
  if (s == "air-asr") return Variant::AirAsr;
  throw ConfigError("unknown model variant '" + s + "' (expected air, air-pprior or air-asr)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Air: return "air";
    case Variant::AirPPrior: return "air-pprior";
    case Variant::AirAsr: return "air-asr";
  }
  return "?";
}

AsrModel::AsrModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  gen_ = std::make_unique<GenerativeModel>(cfg_, store_, rng);
  rec_ = std::make_unique<RecognitionModel>(cfg_, store_, rng);
}

std::map<std::string, std::string> model_config_fields(const ModelConfig& c) {
  return {
      {"S", std::to_string(c.S)},
      {"G", std::to_string(c.G)},
      {"A", std::to_string(c.A)},
      {"K", std::to_string(c.K)},
      {"lstm_hidden", std::to_string(c.lstm_hidden)},
      {"image_hidden", std::to_string(c.image_hidden)},
      {"app_encoder", format_int_list(c.app_encoder)},
      {"app_decoder", format_int_list(c.app_decoder)},
      {"noise", to_string(c.noise)},
      {"sigma", format_double(c.sigma)},
      {"bernoulli_clamp", format_double(c.bernoulli_clamp)},
      {"prior", to_string(c.prior)},
      {"fixed_continue_prob", format_double(c.fixed_continue_prob)},
      {"fixed_loc_std", format_double(c.fixed_loc_std)},
      {"fixed_scale_mean", format_double(c.fixed_scale_mean)},
      {"fixed_scale_std", format_double(c.fixed_scale_std)},
      {"loc_gain", format_double(c.loc_gain)},
      {"scale_offset", format_double(c.scale_offset)},
      {"scale_gain", format_double(c.scale_gain)},
      {"posterior_logvar_offset", format_double(c.posterior_logvar_offset)},
      {"init_continue_bias", format_double(c.init_continue_bias)},
      {"head_init_gain", format_double(c.head_init_gain)},
      {"fixed_steps", c.fixed_steps ? "true" : "false"},
      {"init_seed", std::to_string(c.init_seed)},
  };
}

ModelConfig model_config_from_fields(const std::map<std::string, std::string>& f) {
  ModelConfig c;
  c.S = parse_int(field(f, "S"), "S");
  c.G = parse_int(field(f, "G"), "G");
  c.A = parse_int(field(f, "A"), "A");
  c.K = parse_int(field(f, "K"), "K");
  c.lstm_hidden = parse_int(field(f, "lstm_hidden"), "lstm_hidden");
  c.image_hidden = parse_int(field(f, "image_hidden"), "image_hidden");
  c.app_encoder = parse_int_list(field(f, "app_encoder"), "app_encoder");
  c.app_decoder = parse_int_list(field(f, "app_decoder"), "app_decoder");
  c.noise = parse_noise_model(field(f, "noise"));
  c.sigma = parse_double(field(f, "sigma"), "sigma");
  c.bernoulli_clamp = parse_double(field(f, "bernoulli_clamp"), "bernoulli_clamp");
  c.prior = parse_prior_kind(field(f, "prior"));
  c.fixed_continue_prob = parse_double(field(f, "fixed_continue_prob"), "fixed_continue_prob");
  c.fixed_loc_std = parse_double(field(f, "fixed_loc_std"), "fixed_loc_std");
  c.fixed_scale_mean = parse_double(field(f, "fixed_scale_mean"), "fixed_scale_mean");
  c.fixed_scale_std = parse_double(field(f, "fixed_scale_std"), "fixed_scale_std");
  c.loc_gain = parse_double(field(f, "loc_gain"), "loc_gain");
  c.scale_offset = parse_double(field(f, "scale_offset"), "scale_offset");
  c.scale_gain = parse_double(field(f, "scale_gain"), "scale_gain");
  c.posterior_logvar_offset = parse_double(field(f, "posterior_logvar_offset"), "posterior_logvar_offset");
  c.init_continue_bias = parse_double(field(f, "init_continue_bias"), "init_continue_bias");
  c.head_init_gain = parse_double(field(f, "head_init_gain"), "head_init_gain");
  c.fixed_steps = parse_bool(field(f, "fixed_steps"), "fixed_steps");
  c.init_seed = parse_u64(field(f, "init_seed"), "init_seed");
  c.validate();
  return c;
}

void save_checkpoint(const std::string& path, const AsrModel& model, const TrainingState& state) {
  std::map<std::string, std::string> header;
  for (const auto& [k, v] : model_config_fields(model.config())) header["model." + k] = v;
  for (const auto& [k, v] : state.info) header["info." + k] = v;
  header["state.epoch"] = std::to_string(state.epoch);
  header["state.adam_steps"] = std::to_string(state.adam_steps);
  header["state.baseline_ready"] = state.baseline.ready ? "true" : "false";
  std::string base;
  for (std::size_t i = 0; i < state.baseline.values.size(); ++i) base += (i ? "," : "") + format_double(state.baseline.values[i]);
  header["state.baseline"] = base;

  io::ByteWriter w;
  w.put<std::uint32_t>(kCheckpointMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(encode_header(header));
  const auto params = model.store().all();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const ad::Parameter* p : params) {
    w.put_string(p->name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.cols()));
    put_matrix(w, p->value);
    put_matrix(w, p->m);
    put_matrix(w, p->v);
  }
  w.seal();
  io::write_file(path, w.bytes());
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::vector<unsigned char> bytes = io::read_file(path);
  const std::size_t n = io::verify_sealed(bytes, path);
  io::ByteReader r(bytes.data(), n, path);
  if (r.get<std::uint32_t>() != kCheckpointMagic) throw IoError(path + ": not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != static_cast<std::uint32_t>(kCheckpointVersion)) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header = decode_header(r.get_string());
  std::map<std::string, std::string> model_fields;
  Checkpoint ck;
  for (const auto& [k, v] : header) {
    if (k.rfind("model.", 0) == 0) model_fields[k.substr(6)] = v;
    if (k.rfind("info.", 0) == 0) ck.state.info[k.substr(5)] = v;
  }
  try {
    ck.model = std::make_unique<AsrModel>(model_config_from_fields(model_fields));
    ck.state.epoch = parse_int(field(header, "state.epoch"), "state.epoch");
    ck.state.adam_steps = static_cast<std::int64_t>(parse_u64(field(header, "state.adam_steps"), "state.adam_steps"));
    ck.state.baseline.ready = parse_bool(field(header, "state.baseline_ready"), "state.baseline_ready");
    std::stringstream ss(field(header, "state.baseline"));
    std::string item;
    while (std::getline(ss, item, ',')) ck.state.baseline.values.push_back(parse_double(item, "state.baseline"));
  } catch (const ConfigError& e) {
    throw IoError(path + ": corrupt checkpoint header: " + e.what());
  }

  nn::ParamStore& store = ck.model->store();
  const auto count = r.get<std::uint32_t>();
  if (count != store.size()) throw IoError(path + ": parameter count does not match the model configuration");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string();
    if (!store.contains(name)) throw IoError(path + ": unknown parameter " + name);
    ad::Parameter& p = store.get(name);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows != p.value.rows() || cols != p.value.cols()) throw IoError(path + ": shape mismatch for " + name);
    get_matrix(r, p.value);
    p.m.setZero(rows, cols);
    p.v.setZero(rows, cols);
    get_matrix(r, p.m);
    get_matrix(r, p.v);
  }
  if (r.remaining() != 0) throw IoError(path + ": trailing bytes in checkpoint");
  return ck;
}

}  // namespace asr
