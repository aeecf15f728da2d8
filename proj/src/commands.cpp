#include "asr/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "asr/errors.hpp"
#include "asr/image.hpp"
#include "asr/run_config.hpp"

#ifndef ASR_VERSION
#define ASR_VERSION "dev"
#endif

namespace asr {

namespace fs = std::filesystem;

namespace {

struct Loaded {
  Config config;
  RunSettings settings;
};

Loaded load(const CommandArgs& args) {
  if (args.config_path.empty()) throw ConfigError("--config is required");
  Loaded l{Config::load(args.config_path), {}};
  for (const auto& o : args.overrides) l.config.set_assignment(o);
  l.settings = load_run_settings(l.config, fs::path(args.config_path).parent_path().string());
  return l;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Creates the output directory and records the effective configuration.
fs::path prepare_out(const CommandArgs& args, const Loaded& l, const std::string& command) {
  if (args.out_dir.empty()) throw ConfigError("--out is required");
  fs::path out(args.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  const Config eff = l.config.effective();
  write_text(out / "config.effective.txt", eff.dump());
  std::string manifest;
  manifest += "command = " + command + "\n";
  manifest += "config_hash = " + hex64(eff.hash()) + "\n";
  manifest += "seed = " + std::to_string(l.settings.seed) + "\n";
  manifest += "code_version = " + code_version() + "\n";
  write_text(out / "manifest.txt", manifest);
  return out;
}

std::string histogram_text(const Dataset& d) {
  std::string s;
  for (const auto& [n, c] : d.histogram()) s += "  " + std::to_string(n) + " objects: " + std::to_string(c) + "\n";
  return s;
}

Dataset heldout_data(const CommandArgs& args, const RunSettings& rs) {
  if (!args.dataset.empty()) return read_dataset(args.dataset);
  return obtain_dataset(rs.test_data, rs.test_archive);
}

void check_dataset(const Dataset& d, const AsrModel& model) {
  if (d.S != model.config().S) {
    throw IoError("dataset canvas size " + std::to_string(d.S) + " does not match the checkpoint's " +
                  std::to_string(model.config().S));
  }
}

}  // namespace

std::string code_version() {
#ifdef ASR_REAL_FLOAT
  return std::string(ASR_VERSION) + " (float)";
#else
  return std::string(ASR_VERSION) + " (double)";
#endif
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ContractViolation*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const InfeasibleLayout*>(&e)) return 3;
  return 1;
}

void cmd_synth(const CommandArgs& args, std::ostream& out) {
  Loaded l = load(args);
  const RunSettings& rs = l.settings;
  fs::path dir = prepare_out(args, l, "synth");
  for (const auto& [name, spec] : {std::pair{"train", rs.train_data}, std::pair{"test", rs.test_data}}) {
    Dataset d = synth_dataset(spec);
    const fs::path path = dir / (std::string(name) + ".asrd");
    write_dataset(path.string(), d);
    out << name << ": " << d.size() << " images -> " << path.string() << "\n" << histogram_text(d);
    if (spec.non_overlap) {
      FeasibilityAudit a = audit_dataset(d);
      out << "  audit: max overlap " << a.max_overlap << ", max containment " << a.max_containment << "\n";
      if (!a.feasible()) throw NumericError("non-overlap audit failed for " + path.string());
    }
  }
}

void cmd_train(const CommandArgs& args, std::ostream& out) {
  Loaded l = load(args);
  const RunSettings& rs = l.settings;
  fs::path dir = prepare_out(args, l, "train");
  Dataset train = obtain_dataset(rs.train_data, rs.train_archive);
  Dataset test = heldout_data(args, rs);

  std::unique_ptr<AsrModel> model;
  TrainingState state;
  const fs::path last = dir / "checkpoint_last.ckpt";
  if (args.resume && fs::exists(last)) {
    Checkpoint ck = load_checkpoint(last.string());
    if (model_config_fields(ck.model->config()) != model_config_fields(rs.model)) {
      throw ConfigError("cannot resume: the checkpoint's model settings differ from the configuration");
    }
    model = std::move(ck.model);
    state = std::move(ck.state);
    out << "resuming after epoch " << state.epoch << "\n";
  } else {
    model = std::make_unique<AsrModel>(rs.model);
  }
  state.info["variant"] = to_string(rs.train.variant);
  state.info["config_hash"] = hex64(l.config.effective().hash());
  state.info["seed"] = std::to_string(rs.seed);

  TrainConfig tc = rs.train;
  tc.out_dir = dir.string();
  check_dataset(train, *model);
  check_dataset(test, *model);
  out << "training " << to_string(tc.variant) << " on " << train.size() << " images (" << model->store().num_scalars()
      << " parameters)\n";
  Trainer trainer(*model, tc, state);
  out << kLogHeader << "\n";
  auto rows = trainer.train(train, &test);
  for (const auto& r : rows) out << format_log_row(r) << "\n";
}

void cmd_eval(const CommandArgs& args, std::ostream& out) {
  Loaded l = load(args);
  if (args.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  fs::path dir = prepare_out(args, l, "eval");
  Checkpoint ck = load_checkpoint(args.checkpoint);
  Dataset data = heldout_data(args, l.settings);
  check_dataset(data, *ck.model);
  EvalReport rep = evaluate(*ck.model, data, l.settings.eval);
  {
    std::ofstream csv(dir / "eval.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / "eval.csv").string());
    rep.write_csv(csv);
  }
  write_text(dir / "summary.txt", rep.summary());
  out << rep.summary();
}

void cmd_render(const CommandArgs& args, std::ostream& out) {
  Loaded l = load(args);
  const RunSettings& rs = l.settings;
  const RenderOptions& ro = rs.render;
  fs::path dir = prepare_out(args, l, "render");
  std::vector<RgbImage> cells;

  if (ro.mode == RenderMode::Generate) {
    if (args.checkpoint.empty()) throw ConfigError("--checkpoint is required for generate mode");
    Checkpoint ck = load_checkpoint(args.checkpoint);
    const GenerativeModel& gen = ck.model->gen();
    ad::Tape tape;
    Rng rng = Rng::derive(rs.seed, {0x52454E44ULL});
    Trajectory p = gen.sample(tape, ro.n_images, rng);
    const Matrix mean = gen.render_mean(tape, p).value();
    const int S = ck.model->config().S;
    for (int i = 0; i < ro.n_images; ++i) {
      RgbImage img = canvas_to_rgb(Canvas::from_flat(mean.row(i), S), ro.zoom);
      for (int t = 0; t < p.K(); ++t) {
        const StepSample& s = p.steps[static_cast<std::size_t>(t)];
        if (s.mask(i, 0) < 0.5) continue;
        const BoundingBox b = box_from_latent({static_cast<double>(s.loc.value()(i, 0)),
                                               static_cast<double>(s.loc.value()(i, 1)),
                                               static_cast<double>(s.scale.value()(i, 0)), {}});
        draw_box(img, b, ro.zoom, step_color(t));
      }
      cells.push_back(std::move(img));
    }
  } else {
    Dataset data = heldout_data(args, rs);
    int n = ro.n_images;
    if (static_cast<std::size_t>(n) > data.size()) {
      out << "warning: render.n_images = " << n << " exceeds the dataset size; using " << data.size() << "\n";
      n = static_cast<int>(data.size());
    }
    data.examples.resize(static_cast<std::size_t>(n));
    if (ro.mode == RenderMode::GroundTruth) {
      for (const auto& ex : data.examples) {
        RgbImage img = canvas_to_rgb(ex.image, ro.zoom);
        for (std::size_t t = 0; t < ex.gt_boxes.size(); ++t) {
          draw_box(img, ex.gt_boxes[t], ro.zoom, step_color(static_cast<int>(t)));
        }
        cells.push_back(std::move(img));
      }
    } else {
      if (args.checkpoint.empty()) throw ConfigError("--checkpoint is required for reconstruct mode");
      Checkpoint ck = load_checkpoint(args.checkpoint);
      check_dataset(data, *ck.model);
      std::vector<Inference> inf;
      evaluate(*ck.model, data, rs.eval, &inf);
      for (int i = 0; i < n; ++i) {
        const auto& ex = data.examples[static_cast<std::size_t>(i)];
        RgbImage left = canvas_to_rgb(ex.image, ro.zoom);
        RgbImage right = canvas_to_rgb(inf[static_cast<std::size_t>(i)].recon, ro.zoom);
        const auto& boxes = inf[static_cast<std::size_t>(i)].boxes;
        for (std::size_t t = 0; t < boxes.size(); ++t) draw_box(right, boxes[t], ro.zoom, step_color(static_cast<int>(t)));
        cells.push_back(side_by_side(left, right, ro.zoom));
      }
    }
  }
  const fs::path path = dir / "grid.png";
  write_png(path.string(), tile(cells, ro.columns, 2 * ro.zoom));
  out << "wrote " << cells.size() << " cells to " << path.string() << "\n";
}

}  // namespace asr
