#include "asr/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "asr/errors.hpp"

namespace asr {

namespace {

/// Reads a path key, resolves it against `base`, and stores the absolute
/// form back into `cfg`.
std::string path_key(Config& cfg, const std::string& key, const std::string& base) {
  const std::string raw = cfg.get_string(key, "");
  if (raw.empty()) return raw;
  std::filesystem::path p(raw);
  if (p.is_relative()) p = std::filesystem::path(base.empty() ? "." : base) / p;
  const std::string abs = std::filesystem::absolute(p).lexically_normal().string();
  cfg.set(key, abs);
  return abs;
}

std::pair<int, int> parse_range(const std::string& s, const std::string& what) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError(what + ": expected begin:end, got '" + s + "'");
  return {parse_int(s.substr(0, colon), what), parse_int(s.substr(colon + 1), what)};
}

}  // namespace

RenderMode parse_render_mode(const std::string& s) {
  if (s == "reconstruct") return RenderMode::Reconstruct;
  if (s == "generate") return RenderMode::Generate;
  if (s == "ground_truth") return RenderMode::GroundTruth;
  throw ConfigError("unknown render mode '" + s + "' (expected reconstruct, generate or ground_truth)");
}

std::vector<std::pair<int, int>> parse_count_spec(const std::string& s, const std::string& what) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) continue;
    out.push_back(parse_range(item.substr(b, e - b + 1), what));
  }
  if (out.empty()) throw ConfigError(what + ": no counts given");
  return out;
}

RunSettings load_run_settings(Config& cfg, const std::string& base_dir) {
  if (const char* env = std::getenv("ASR_SEED"); env != nullptr && *env != '\0') {
    parse_u64(env, "ASR_SEED");
    cfg.set("seed", env);
  }
  RunSettings rs;
  rs.seed = cfg.get_u64("seed", 0);

  // model
  ModelConfig& m = rs.model;
  m.S = cfg.get_int("model.S", m.S);
  m.G = cfg.get_int("model.G", m.G);
  m.A = cfg.get_int("model.A", m.A);
  m.K = cfg.get_int("model.K", m.K);
  m.lstm_hidden = cfg.get_int("model.lstm_hidden", m.lstm_hidden);
  m.image_hidden = cfg.get_int("model.image_hidden", m.image_hidden);
  m.app_encoder = cfg.get_int_list("model.app_encoder", m.app_encoder);
  m.app_decoder = cfg.get_int_list("model.app_decoder", m.app_decoder);
  m.noise = parse_noise_model(cfg.get_string("model.noise", to_string(m.noise)));
  m.sigma = cfg.get_double("model.sigma", m.sigma);
  m.bernoulli_clamp = cfg.get_double("model.bernoulli_clamp", m.bernoulli_clamp);
  m.fixed_continue_prob = cfg.get_double("model.fixed_continue_prob", m.fixed_continue_prob);
  m.fixed_loc_std = cfg.get_double("model.fixed_loc_std", m.fixed_loc_std);
  m.fixed_scale_mean = cfg.get_double("model.fixed_scale_mean", m.fixed_scale_mean);
  m.fixed_scale_std = cfg.get_double("model.fixed_scale_std", m.fixed_scale_std);
  m.loc_gain = cfg.get_double("model.loc_gain", m.loc_gain);
  m.scale_offset = cfg.get_double("model.scale_offset", m.scale_offset);
  m.scale_gain = cfg.get_double("model.scale_gain", m.scale_gain);
  m.posterior_logvar_offset = cfg.get_double("model.posterior_logvar_offset", m.posterior_logvar_offset);
  m.init_continue_bias = cfg.get_double("model.init_continue_bias", m.init_continue_bias);
  m.head_init_gain = cfg.get_double("model.head_init_gain", m.head_init_gain);
  m.fixed_steps = cfg.get_bool("model.fixed_steps", m.fixed_steps);
  m.init_seed = cfg.get_u64("model.init_seed", rs.seed);

  // training
  TrainConfig& t = rs.train;
  t.variant = parse_variant(cfg.get_string("train.variant", to_string(t.variant)));
  m.prior = t.variant == Variant::Air ? PriorKind::Fixed : PriorKind::Learned;
  t.adam.lr = cfg.get_double("train.lr", t.adam.lr);
  t.adam.beta1 = cfg.get_double("train.beta1", t.adam.beta1);
  t.adam.beta2 = cfg.get_double("train.beta2", t.adam.beta2);
  t.epochs = cfg.get_int("train.epochs", t.epochs);
  t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
  t.seed = rs.seed;
  t.baseline_decay = cfg.get_double("train.baseline_decay", t.baseline_decay);
  t.clip_norm = cfg.get_double("train.clip_norm", t.clip_norm);
  t.analytic_kl = cfg.get_bool("train.analytic_kl", t.analytic_kl);
  t.teacher_forcing = cfg.get_bool("train.teacher_forcing", t.teacher_forcing);
  t.nan_policy = parse_nan_policy(cfg.get_string("train.nan_policy", "halt"));
  t.checkpoint_every = cfg.get_int("train.checkpoint_every", t.checkpoint_every);
  t.eval_every = cfg.get_int("train.eval_every", t.eval_every);
  t.log_wall_clock = cfg.get_bool("log.wall_clock", t.log_wall_clock);
  for (const auto& [id, w] : cfg.with_prefix("constraint.")) {
    if (!is_builtin_term(id)) throw ConfigError("unknown constraint id: " + id);
    t.lambda[id] = parse_double(w, "constraint." + id);
  }
  t.scene.S = m.S;
  t.scene.K = m.K;
  t.scene.c_min = cfg.get_double("scene.c_min", t.scene.c_min);
  t.scene.c_max = cfg.get_double("scene.c_max", t.scene.c_max);
  t.scene.eps = cfg.get_double("scene.eps", t.scene.eps);
  t.scene.allowed_counts = cfg.get_int_list("scene.allowed_counts", t.scene.allowed_counts);

  // evaluation
  rs.eval.samples = cfg.get_int("eval.samples", rs.eval.samples);
  rs.eval.batch_size = cfg.get_int("eval.batch_size", rs.eval.batch_size);
  rs.eval.seed = cfg.get_u64("eval.seed", rs.seed);
  t.eval_samples = rs.eval.samples;

  // data
  DatasetSpec d;
  d.source = parse_glyph_source(cfg.get_string("data.source", to_string(d.source)));
  d.S = m.S;
  d.glyph_side = cfg.get_int("data.glyph_side", d.glyph_side);
  d.non_overlap = cfg.get_bool("data.non_overlap", d.non_overlap);
  d.mnist_path = path_key(cfg, "data.mnist_path", base_dir);
  d.max_attempts = cfg.get_int("data.max_attempts", d.max_attempts);
  d.sum_composite = cfg.get_bool("data.sum_composite", d.sum_composite);
  const std::uint64_t data_seed = cfg.get_u64("data.seed", 0);
  rs.train_data = d;
  rs.train_data.seed = data_seed;
  rs.train_data.counts = parse_count_spec(cfg.get_string("data.train_counts", "1:10,3:10"), "data.train_counts");
  std::tie(rs.train_data.digit_begin, rs.train_data.digit_end) =
      parse_range(cfg.get_string("data.train_digits", "0:-1"), "data.train_digits");
  rs.test_data = d;
  rs.test_data.seed = cfg.get_u64("data.test_seed", data_seed + 1);
  rs.test_data.counts = parse_count_spec(cfg.get_string("data.test_counts", "1:5,3:5"), "data.test_counts");
  std::tie(rs.test_data.digit_begin, rs.test_data.digit_end) =
      parse_range(cfg.get_string("data.test_digits", "0:-1"), "data.test_digits");
  rs.train_archive = path_key(cfg, "data.train_path", base_dir);
  rs.test_archive = path_key(cfg, "data.test_path", base_dir);

  // rendering
  rs.render.mode = parse_render_mode(cfg.get_string("render.mode", "reconstruct"));
  rs.render.n_images = cfg.get_int("render.n_images", rs.render.n_images);
  rs.render.columns = cfg.get_int("render.columns", rs.render.columns);
  rs.render.zoom = cfg.get_int("render.zoom", rs.render.zoom);

  cfg.reject_unused();
  try {
    m.validate();
    rs.train_data.validate();
    rs.test_data.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  t.validate();
  if (rs.eval.samples < 1 || rs.eval.batch_size < 1) throw ConfigError("eval.samples and eval.batch_size must be >= 1");
  if (rs.render.n_images < 1 || rs.render.columns < 1 || rs.render.zoom < 1) {
    throw ConfigError("render.n_images, render.columns and render.zoom must be >= 1");
  }
  return rs;
}

Dataset obtain_dataset(const DatasetSpec& spec, const std::string& archive) {
  if (!archive.empty()) return read_dataset(archive);
  return synth_dataset(spec);
}

}  // namespace asr
