#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mmssl/linalg.hpp"

namespace mmssl {

/// Feed-forward embedding network. Hidden layers apply a rectifier, the
/// output layer is affine, and every output row is l2-normalized.
struct EncoderParams {
  std::vector<std::size_t> layer_dims;  // [D_in, h1, ..., d]
  std::vector<Mat> weights;             // weights[l] is dims[l+1] x dims[l]
  std::vector<Vec> biases;              // biases[l] has dims[l+1] entries

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_parameters() const;

  /// Throws InvalidDims if shapes are inconsistent.
  void validate() const;

  bool operator==(const EncoderParams&) const = default;
};

/// Gradients, shape-congruent with EncoderParams.
struct EncoderGrads {
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  static EncoderGrads zeros_like(const EncoderParams& params);
  void add(const EncoderGrads& other);
};

/// Intermediate values kept by forward() for backward().
struct ForwardTrace {
  Mat input;
  std::vector<Mat> pre_activations;  // one per layer, before the rectifier
  std::vector<Mat> activations;      // rectified hidden outputs
  Vec output_norms;                  // ||z|| of each row before normalization
  Mat embeddings;

  bool empty() const { return pre_activations.empty(); }
};

struct ForwardResult {
  Mat embeddings;
  ForwardTrace trace;
};

inline const std::vector<std::size_t> kDefaultEncoderDims = {256, 128, 128};

/// Zero-mean normal weights with variance 2 / fan_in, zero biases.
EncoderParams init_params(const std::vector<std::size_t>& layer_dims, SeededRng& rng);

/// Embeds each row of `inputs`. With keep_trace the returned trace can be fed
/// to backward().
ForwardResult forward(const EncoderParams& params, const Mat& inputs, bool keep_trace);

/// Parameter gradients given dL/dE for the embeddings of a traced forward pass.
EncoderGrads backward(const EncoderParams& params, const ForwardTrace& trace, const Mat& d_embeddings);

void save_params(const EncoderParams& params, const std::string& path);
EncoderParams load_params(const std::string& path);

/// Parses "256,128,128".
std::vector<std::size_t> parse_dims(const std::string& text);
std::string format_dims(const std::vector<std::size_t>& dims);

}  // namespace mmssl
