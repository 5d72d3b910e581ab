#include "mmssl/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mmssl/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "parameter files are written as little-endian doubles");

namespace mmssl {

namespace {

constexpr char kParamMagic[8] = {'M', 'M', 'S', 'S', 'L', 'E', 'N', 'C'};
constexpr std::uint32_t kParamVersion = 1;

template <typename T>
void write_raw(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const std::string& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::FormatError, path + ": truncated at offset " +
                                            std::to_string(static_cast<long long>(is.tellg())));
  }
  return value;
}

}  // namespace

std::size_t EncoderParams::num_parameters() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) total += weights[l].size() + biases[l].size();
  return total;
}

void EncoderParams::validate() const {
  if (layer_dims.size() < 2) throw Error(ErrorCode::InvalidDims, "need at least two layer sizes");
  if (layer_dims.back() < 2) throw Error(ErrorCode::InvalidDims, "embedding dimension must be >= 2");
  if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size()) {
    throw Error(ErrorCode::InvalidDims, "layer count does not match layer_dims");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l] ||
        biases[l].size() != layer_dims[l + 1]) {
      throw Error(ErrorCode::InvalidDims, "layer " + std::to_string(l) + " shape mismatch");
    }
  }
}

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& params) {
  EncoderGrads g;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    g.weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

void EncoderGrads::add(const EncoderGrads& other) {
  if (other.weights.size() != weights.size()) throw Error(ErrorCode::ShapeMismatch, "grad add");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l].values();
    const auto& ow = other.weights[l].values();
    if (w.size() != ow.size() || biases[l].size() != other.biases[l].size()) {
      throw Error(ErrorCode::ShapeMismatch, "grad add layer " + std::to_string(l));
    }
    for (std::size_t x = 0; x < w.size(); ++x) w[x] += ow[x];
    for (std::size_t x = 0; x < biases[l].size(); ++x) biases[l][x] += other.biases[l][x];
  }
}

EncoderParams init_params(const std::vector<std::size_t>& layer_dims, SeededRng& rng) {
  if (layer_dims.size() < 2) throw Error(ErrorCode::InvalidDims, "need at least two layer sizes");
  for (std::size_t d : layer_dims)
    if (d == 0) throw Error(ErrorCode::InvalidDims, "layer sizes must be >= 1");
  if (layer_dims.back() < 2) throw Error(ErrorCode::InvalidDims, "embedding dimension must be >= 2");
  EncoderParams p;
  p.layer_dims = layer_dims;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
    Mat w(layer_dims[l + 1], fan_in);
    for (double& v : w.values()) v = rng.normal(0.0, sigma);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(layer_dims[l + 1], 0.0);
  }
  return p;
}

ForwardResult forward(const EncoderParams& params, const Mat& inputs, bool keep_trace) {
  params.validate();
  if (inputs.cols() != params.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(inputs.cols()) +
                                                  " columns, encoder expects " +
                                                  std::to_string(params.input_dim()));
  }
  ForwardResult result;
  ForwardTrace& trace = result.trace;
  const std::size_t layers = params.num_layers();

  Mat current = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    Mat z = matmul_abt(current, params.weights[l]);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += params.biases[l][c];
    }
    if (keep_trace) trace.pre_activations.push_back(z);
    if (l + 1 < layers) {
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
      if (keep_trace) trace.activations.push_back(z);
    }
    current = std::move(z);
  }

  Vec norms(current.rows());
  for (std::size_t r = 0; r < current.rows(); ++r) {
    auto row = current.row(r);
    const double n = norm2(row);
    if (!(n > kZeroNormEps)) {
      throw Error(ErrorCode::ZeroVector, "encoder output row " + std::to_string(r) +
                                             " has norm " + std::to_string(n));
    }
    norms[r] = n;
    for (double& v : row) v /= n;
  }
  if (keep_trace) {
    trace.input = inputs;
    trace.output_norms = std::move(norms);
    trace.embeddings = current;
  }
  result.embeddings = std::move(current);
  return result;
}

EncoderGrads backward(const EncoderParams& params, const ForwardTrace& trace,
                      const Mat& d_embeddings) {
  params.validate();
  const std::size_t layers = params.num_layers();
  if (trace.pre_activations.size() != layers || trace.activations.size() + 1 != layers ||
      trace.embeddings.rows() != d_embeddings.rows() ||
      trace.embeddings.cols() != d_embeddings.cols() ||
      trace.input.cols() != params.input_dim()) {
    throw Error(ErrorCode::TraceMismatch, "trace does not match parameters or gradient shape");
  }
  const std::size_t rows = d_embeddings.rows();

  // Through e = z / ||z||:  dz = (de - e (e . de)) / ||z||.
  Mat delta(rows, params.output_dim());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto e = trace.embeddings.row(r);
    const auto de = d_embeddings.row(r);
    const double proj = dot(e, de);
    auto out = delta.row(r);
    for (std::size_t c = 0; c < out.size(); ++c)
      out[c] = (de[c] - e[c] * proj) / trace.output_norms[r];
  }

  EncoderGrads grads = EncoderGrads::zeros_like(params);
  for (std::size_t l = layers; l-- > 0;) {
    const Mat& layer_input = l == 0 ? trace.input : trace.activations[l - 1];
    Mat& gw = grads.weights[l];
    Vec& gb = grads.biases[l];
    for (std::size_t r = 0; r < rows; ++r) {
      const auto dr = delta.row(r);
      const auto xr = layer_input.row(r);
      for (std::size_t o = 0; o < dr.size(); ++o) {
        const double g = dr[o];
        if (g == 0.0) continue;
        gb[o] += g;
        auto gw_row = gw.row(o);
        for (std::size_t i = 0; i < xr.size(); ++i) gw_row[i] += g * xr[i];
      }
    }
    if (l == 0) break;
    // Back through W and the rectifier of layer l-1; subgradient 0 at 0.
    const Mat& w = params.weights[l];
    const Mat& pre = trace.pre_activations[l - 1];
    Mat next(rows, w.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      const auto dr = delta.row(r);
      auto nr = next.row(r);
      for (std::size_t o = 0; o < dr.size(); ++o) {
        const double g = dr[o];
        if (g == 0.0) continue;
        const auto w_row = w.row(o);
        for (std::size_t i = 0; i < nr.size(); ++i) nr[i] += g * w_row[i];
      }
      const auto pr = pre.row(r);
      for (std::size_t i = 0; i < nr.size(); ++i)
        if (!(pr[i] > 0.0)) nr[i] = 0.0;
    }
    delta = std::move(next);
  }
  return grads;
}

void save_params(const EncoderParams& params, const std::string& path) {
  params.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  os.write(kParamMagic, sizeof(kParamMagic));
  write_raw(os, kParamVersion);
  write_raw(os, static_cast<std::uint32_t>(params.layer_dims.size()));
  for (std::size_t d : params.layer_dims) write_raw(os, static_cast<std::uint64_t>(d));
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    for (double v : params.weights[l].values()) write_raw(os, v);
    for (double v : params.biases[l]) write_raw(os, v);
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

EncoderParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  char magic[sizeof(kParamMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::FormatError, path + ": not an encoder parameter file (bad magic)");
  }
  const auto version = read_raw<std::uint32_t>(is, path);
  if (version != kParamVersion) {
    throw Error(ErrorCode::FormatError, path + ": unsupported version " + std::to_string(version));
  }
  const auto count = read_raw<std::uint32_t>(is, path);
  if (count < 2 || count > 64) {
    throw Error(ErrorCode::FormatError, path + ": implausible layer count " + std::to_string(count));
  }
  EncoderParams p;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto d = read_raw<std::uint64_t>(is, path);
    if (d == 0 || d > (1u << 24)) {
      throw Error(ErrorCode::FormatError, path + ": implausible layer size " + std::to_string(d));
    }
    p.layer_dims.push_back(static_cast<std::size_t>(d));
  }
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    Mat w(p.layer_dims[l + 1], p.layer_dims[l]);
    for (double& v : w.values()) v = read_raw<double>(is, path);
    Vec b(p.layer_dims[l + 1]);
    for (double& v : b) v = read_raw<double>(is, path);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::FormatError, path + ": trailing bytes after parameters");
  }
  return p;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (v <= 0 || item.find_first_not_of(" \t", used) != std::string::npos) throw 0;
      dims.push_back(static_cast<std::size_t>(v));
    } catch (...) {
      throw Error(ErrorCode::InvalidDims, "bad layer size '" + item + "' in '" + text + "'");
    }
  }
  if (dims.size() < 2) throw Error(ErrorCode::InvalidDims, "need at least two sizes: '" + text + "'");
  return dims;
}

std::string format_dims(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

}  // namespace mmssl
