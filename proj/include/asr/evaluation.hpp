// Dataset-level evaluation of a trained model.
#pragma once

#include <cstdint>
#include <vector>

#include "asr/data.hpp"
#include "asr/metrics.hpp"
#include "asr/model.hpp"

namespace asr {

struct EvalOptions {
  /// Posterior trajectories per image.
  int samples = 1;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

/// What the model inferred for one image.
struct Inference {
  CountDistribution counts;  // averaged over samples
  int num_inf = 0;           // most probable count
  std::vector<BoundingBox> boxes;
  Canvas recon;
};

/// nELBO is -(Rec - KL) averaged over samples (no penalty). The count is the
/// mode of the averaged count distribution; boxes and the reconstruction come
/// from the posterior means with presence pinned to that count.
EvalReport evaluate(const AsrModel& model, const Dataset& data, const EvalOptions& opts,
                    std::vector<Inference>* details = nullptr);

}  // namespace asr
