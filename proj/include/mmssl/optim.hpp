#pragma once

#include <cstdint>

#include "mmssl/encoder.hpp"

namespace mmssl {

struct AdamConfig {
  double base_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 0.1;
  /// Epochs between learning-rate drops.
  std::int64_t decay_every = 1000;

  void validate() const;
};

/// Adam moments for one EncoderParams instance.
struct AdamState {
  AdamConfig config;
  EncoderGrads first_moment;
  EncoderGrads second_moment;
  std::int64_t step_count = 0;

  static AdamState for_params(const EncoderParams& params, AdamConfig config = {});
};

/// base_lr * decay_factor ^ floor(epoch / decay_every).
double lr_at(const AdamConfig& config, std::int64_t epoch);
inline double lr_at(const AdamState& state, std::int64_t epoch) { return lr_at(state.config, epoch); }

/// One bias-corrected Adam update at the learning rate scheduled for `epoch`.
void adam_step(AdamState& state, EncoderParams& params, const EncoderGrads& grads, std::int64_t epoch);

}  // namespace mmssl
