#include "mmssl/optim.hpp"

#include <cmath>
#include <string>

#include "mmssl/error.hpp"

namespace mmssl {

void AdamConfig::validate() const {
  if (!(base_lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "Adam eps must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "decay_factor must lie in (0, 1]");
  }
  if (decay_every < 1) throw Error(ErrorCode::InvalidConfig, "decay_every must be >= 1");
}

AdamState AdamState::for_params(const EncoderParams& params, AdamConfig config) {
  config.validate();
  return AdamState{config, EncoderGrads::zeros_like(params), EncoderGrads::zeros_like(params), 0};
}

double lr_at(const AdamConfig& config, std::int64_t epoch) {
  if (epoch < 0) throw Error(ErrorCode::InvalidConfig, "negative epoch");
  const auto drops = epoch / config.decay_every;
  return config.base_lr * std::pow(config.decay_factor, static_cast<double>(drops));
}

void adam_step(AdamState& state, EncoderParams& params, const EncoderGrads& grads,
               std::int64_t epoch) {
  const std::size_t layers = params.num_layers();
  const auto congruent = [&](const EncoderGrads& g) {
    if (g.weights.size() != layers || g.biases.size() != layers) return false;
    for (std::size_t l = 0; l < layers; ++l) {
      if (g.weights[l].rows() != params.weights[l].rows() ||
          g.weights[l].cols() != params.weights[l].cols() ||
          g.biases[l].size() != params.biases[l].size())
        return false;
    }
    return true;
  };
  if (!congruent(grads) || !congruent(state.first_moment) || !congruent(state.second_moment)) {
    throw Error(ErrorCode::ShapeMismatch, "Adam state, gradients and parameters disagree");
  }

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double lr = lr_at(c, epoch);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  const auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t x = 0; x < p.size(); ++x) {
      m[x] = c.beta1 * m[x] + (1.0 - c.beta1) * g[x];
      v[x] = c.beta2 * v[x] + (1.0 - c.beta2) * g[x] * g[x];
      const double m_hat = m[x] / correction1;
      const double v_hat = v[x] / correction2;
      p[x] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  };
  for (std::size_t l = 0; l < layers; ++l) {
    update(params.weights[l].values(), grads.weights[l].values(),
           state.first_moment.weights[l].values(), state.second_moment.weights[l].values());
    update(params.biases[l], grads.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

}  // namespace mmssl
