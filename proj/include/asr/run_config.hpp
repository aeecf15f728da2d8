// Maps a run configuration file onto the dataset, model, training,
// evaluation, and rendering settings of one run.
#pragma once

#include <cstdint>
#include <string>

#include "asr/config.hpp"
#include "asr/data.hpp"
#include "asr/evaluation.hpp"
#include "asr/model.hpp"
#include "asr/training.hpp"

namespace asr {

enum class RenderMode { Reconstruct, Generate, GroundTruth };
RenderMode parse_render_mode(const std::string& s);

struct RenderOptions {
  RenderMode mode = RenderMode::Reconstruct;
  int n_images = 16;
  int columns = 4;
  int zoom = 4;
};

struct RunSettings {
  std::uint64_t seed = 0;
  DatasetSpec train_data;
  DatasetSpec test_data;
  /// Dataset archives; when empty the datasets are synthesized from the specs.
  std::string train_archive;
  std::string test_archive;
  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;
  RenderOptions render;
};

/// Reads every recognized key (recording defaults), then rejects unknown
/// keys. Relative paths resolve against `base_dir`. The environment variable
/// ASR_SEED, when set, replaces the `seed` key first.
RunSettings load_run_settings(Config& cfg, const std::string& base_dir);

/// "1:2500,3:2500" -> {{1, 2500}, {3, 2500}}.
std::vector<std::pair<int, int>> parse_count_spec(const std::string& s, const std::string& what);

/// Loads the archive when given, otherwise synthesizes from the dataset description.
Dataset obtain_dataset(const DatasetSpec& spec, const std::string& archive);

}  // namespace asr
