#include "mmssl/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "mmssl/error.hpp"

namespace mmssl {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Zero-mean smooth random field: a handful of Gaussian blobs of random sign,
// centre and width.
std::vector<double> smooth_random_field(std::size_t h, std::size_t w, SeededRng& rng) {
  constexpr int kBlobs = 6;
  std::vector<double> field(h * w, 0.0);
  for (int b = 0; b < kBlobs; ++b) {
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double radius = rng.uniform(0.12, 0.3) * static_cast<double>(std::min(h, w));
    const double amp = rng.bernoulli(0.5) ? 1.0 : -1.0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (static_cast<double>(y) + 0.5 - cy) / radius;
        const double dx = (static_cast<double>(x) + 0.5 - cx) / radius;
        field[y * w + x] += amp * std::exp(-0.5 * (dx * dx + dy * dy));
      }
  }
  double mean = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  for (double& v : field) v -= mean;
  return field;
}

// Class prototypes: mid-grey plus mutually orthogonal smooth fields, each
// scaled to a peak deviation of cfg.class_contrast.
std::vector<Image> class_prototypes(const SyntheticConfig& cfg) {
  const double kPrototypeContrast = cfg.class_contrast;
  SeededRng rng(cfg.class_pattern_seed);
  std::vector<std::vector<double>> basis;
  std::vector<Image> out;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    std::vector<double> f = smooth_random_field(cfg.height, cfg.width, rng);
    // Orthogonalize while the basis still has room; beyond H*W - 1 classes
    // the fields are used as drawn.
    if (c + 1 < cfg.height * cfg.width) {
      for (const auto& q : basis) {
        const double p = dot(f, q);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] -= p * q[i];
      }
      const double n = norm2(f);
      if (n > 1e-12) {
        std::vector<double> unit = f;
        for (double& v : unit) v /= n;
        basis.push_back(std::move(unit));
      }
    }
    double peak = 0.0;
    for (double v : f) peak = std::max(peak, std::abs(v));
    Image img(cfg.height, cfg.width);
    for (std::size_t i = 0; i < f.size(); ++i)
      img.pixels[i] = 0.5 + (peak > 0.0 ? kPrototypeContrast * f[i] / peak : 0.0);
    out.push_back(std::move(img));
  }
  return out;
}

double bilinear(const Image& img, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
  const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

void check_range(double lo, double hi, const char* what) {
  if (!(lo <= hi)) throw Error(ErrorCode::InvalidConfig, std::string(what) + " range is not ordered");
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + " must lie in [0, 1]");
  }
}

// Stationary Gaussian field with unit per-pixel variance (away from borders)
// and Gaussian autocorrelation of the given length.
std::vector<double> correlated_noise(std::size_t h, std::size_t w, double length, SeededRng& rng) {
  std::vector<double> white(h * w);
  for (double& v : white) v = rng.normal();
  if (length <= 0.0) return white;
  // Blur with a Gaussian of std length / sqrt(2); the kernel is normalized to
  // unit energy so the output variance stays 1.
  const double s = length / std::sqrt(2.0);
  const int radius = static_cast<int>(std::ceil(3.0 * s));
  std::vector<double> kernel(2 * radius + 1);
  double energy = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (s * s));
  }
  for (double a : kernel)
    for (double b : kernel) energy += a * a * b * b;
  const double scale = 1.0 / std::sqrt(energy);
  std::vector<double> out(h * w, 0.0);
  const auto H = static_cast<long>(h), W = static_cast<long>(w);
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          // Periodic wrap keeps the variance uniform.
          const long yy = ((y + dy) % H + H) % H;
          const long xx = ((x + dx) % W + W) % W;
          acc += kernel[dy + radius] * kernel[dx + radius] * white[yy * W + xx];
        }
      out[y * W + x] = acc * scale;
    }
  return out;
}

}  // namespace

void Dataset::validate() const {
  std::set<std::int64_t> ids;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& p = samples[s];
    if (!ids.insert(p.patient_id).second) {
      throw Error(ErrorCode::FormatError, "duplicate patient id " + std::to_string(p.patient_id));
    }
    if (p.label >= n_classes) {
      throw Error(ErrorCode::FormatError, "patient " + std::to_string(p.patient_id) + " label " +
                                              std::to_string(p.label) + " >= n_classes");
    }
    for (const Image* img : {&p.fundus, &p.modality}) {
      if (img->height != height || img->width != width || img->pixels.size() != height * width) {
        throw Error(ErrorCode::FormatError,
                    "patient " + std::to_string(p.patient_id) + " image shape mismatch");
      }
      for (double v : img->pixels) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw Error(ErrorCode::FormatError,
                      "patient " + std::to_string(p.patient_id) + " has a pixel outside [0, 1]");
        }
      }
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out{{}, height, width, n_classes};
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= samples.size()) throw Error(ErrorCode::IndexOutOfRange, "dataset subset");
    out.samples.push_back(samples[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

void SyntheticConfig::validate() const {
  if (n_classes == 0 || patients_per_class == 0 || height == 0 || width == 0) {
    throw Error(ErrorCode::InvalidConfig, "synthetic sizes must be positive");
  }
  for (double s : {within_class_noise_sigma, modality_noise_sigma}) {
    if (!(s >= 0.0 && s < 0.5)) throw Error(ErrorCode::InvalidConfig, "noise sigma must lie in [0, 0.5)");
  }
  if (!(class_contrast >= 0.0 && class_contrast <= 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "class_contrast must lie in [0, 0.5]");
  }
  check_prob(eye_flip_prob, "eye_flip_prob");
  if (!(noise_correlation_length >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "noise_correlation_length must be >= 0");
  }
  check_range(illumination_min, illumination_max, "illumination");
  if (!(illumination_min > 0.0)) throw Error(ErrorCode::InvalidConfig, "illumination must be positive");
  if (!(brightness_offset >= 0.0 && brightness_offset < 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "brightness_offset must lie in [0, 0.5)");
  }
}

void AugmentConfig::validate() const {
  check_range(crop_scale_min, crop_scale_max, "crop scale");
  if (!(crop_scale_min > 0.0 && crop_scale_max <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "crop scale must lie in (0, 1]");
  }
  check_prob(flip_prob, "flip_prob");
  check_prob(grayscale_prob, "grayscale_prob");
  check_range(jitter_min, jitter_max, "jitter");
  if (!(jitter_min >= 0.0)) throw Error(ErrorCode::InvalidConfig, "jitter must be non-negative");
}

std::vector<std::vector<std::int64_t>> FoldSplit::folds() const {
  std::vector<std::vector<std::int64_t>> out(k);
  for (const auto& [id, fold] : assignments) out.at(fold).push_back(id);
  return out;
}

Dataset generate_synthetic(const SyntheticConfig& cfg, SeededRng& rng) {
  cfg.validate();
  const std::vector<Image> prototypes = class_prototypes(cfg);

  Dataset ds{{}, cfg.height, cfg.width, cfg.n_classes};
  std::int64_t next_id = 0;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    for (std::size_t p = 0; p < cfg.patients_per_class; ++p) {
      PatientSample s;
      s.patient_id = next_id++;
      s.label = c;
      const bool flip = rng.bernoulli(cfg.eye_flip_prob);
      const double gain = rng.uniform(cfg.illumination_min, cfg.illumination_max);
      const double offset = rng.uniform(-cfg.brightness_offset, cfg.brightness_offset);
      // The anatomy is shared by both modalities; gain and offset belong to
      // the fundus acquisition only.
      const Image& proto = prototypes[c];
      Image anatomy = flip ? flip_horizontal(proto) : proto;
      Image fundus = anatomy;
      const std::vector<double> noise =
          correlated_noise(cfg.height, cfg.width, cfg.noise_correlation_length, rng);
      for (std::size_t i = 0; i < noise.size(); ++i) {
        const double shape = cfg.within_class_noise_sigma * noise[i];
        fundus.pixels[i] = clamp01(gain * anatomy.pixels[i] + offset + shape);
        anatomy.pixels[i] = clamp01(anatomy.pixels[i] + shape);
      }
      Image modality = synthesize_modality(anatomy);
      for (double& v : modality.pixels) v = clamp01(v + rng.normal(0.0, cfg.modality_noise_sigma));
      s.fundus = std::move(fundus);
      s.modality = std::move(modality);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

Image synthesize_modality(const Image& fundus) {
  static constexpr double kKernel[3][3] = {{1.0 / 16, 2.0 / 16, 1.0 / 16},
                                           {2.0 / 16, 4.0 / 16, 2.0 / 16},
                                           {1.0 / 16, 2.0 / 16, 1.0 / 16}};
  const auto h = static_cast<long>(fundus.height);
  const auto w = static_cast<long>(fundus.width);
  Image out(fundus.height, fundus.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double s = 0.0;
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          // Edge pixels are replicated.
          const long yy = std::clamp(y + dy, 0L, h - 1);
          const long xx = std::clamp(x + dx, 0L, w - 1);
          s += kKernel[dy + 1][dx + 1] * fundus.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
        }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = clamp01(1.0 - s);
    }
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x) out.at(y, x) = image.at(y, image.width - 1 - x);
  return out;
}

AugmentDraw draw_augment(const AugmentConfig& cfg, std::size_t height, std::size_t width,
                         SeededRng& rng) {
  cfg.validate();
  AugmentDraw d;
  d.crop_scale = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
  const double side = std::sqrt(d.crop_scale);
  d.crop_height = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(side * static_cast<double>(height))));
  d.crop_width = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(side * static_cast<double>(width))));
  d.crop_y = static_cast<std::size_t>(rng.below(height - d.crop_height + 1));
  d.crop_x = static_cast<std::size_t>(rng.below(width - d.crop_width + 1));
  d.flip = rng.bernoulli(cfg.flip_prob);
  d.grayscale = rng.bernoulli(cfg.grayscale_prob);
  d.contrast = rng.uniform(cfg.jitter_min, cfg.jitter_max);
  d.brightness = rng.uniform(cfg.jitter_min, cfg.jitter_max);
  return d;
}

Image apply_augment(const Image& image, const AugmentDraw& draw) {
  if (draw.crop_height == 0 || draw.crop_width == 0 || draw.crop_y + draw.crop_height > image.height ||
      draw.crop_x + draw.crop_width > image.width) {
    throw Error(ErrorCode::InvalidConfig, "crop window outside the image");
  }
  Image crop(draw.crop_height, draw.crop_width);
  for (std::size_t y = 0; y < crop.height; ++y)
    for (std::size_t x = 0; x < crop.width; ++x) crop.at(y, x) = image.at(draw.crop_y + y, draw.crop_x + x);

  // Half-pixel-centre bilinear resize back to the input size.
  Image out(image.height, image.width);
  const double sy = static_cast<double>(crop.height) / static_cast<double>(image.height);
  const double sx = static_cast<double>(crop.width) / static_cast<double>(image.width);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      out.at(y, x) = bilinear(crop, (static_cast<double>(y) + 0.5) * sy - 0.5,
                              (static_cast<double>(x) + 0.5) * sx - 0.5);

  if (draw.flip) out = flip_horizontal(out);
  // draw.grayscale: single-channel images are already grey.

  double mean = 0.0;
  for (double v : out.pixels) mean += v;
  mean /= static_cast<double>(out.pixels.size());
  for (double& v : out.pixels) v = clamp01(draw.contrast * (v - mean) + draw.brightness * mean);
  return out;
}

Image augment(const Image& image, const AugmentConfig& cfg, SeededRng& rng) {
  return apply_augment(image, draw_augment(cfg, image.height, image.width, rng));
}

std::vector<double> flatten_image(const Image& image) {
  std::vector<double> out(image.pixels.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = 2.0 * image.pixels[p] - 1.0;
  return out;
}

Mat flatten_images(const std::vector<Image>& images) {
  if (images.empty()) return Mat();
  const std::size_t cols = images.front().pixels.size();
  std::vector<double> values;
  values.reserve(images.size() * cols);
  for (const Image& img : images) {
    if (img.pixels.size() != cols) throw Error(ErrorCode::DimensionMismatch, "image sizes differ");
    const auto flat = flatten_image(img);
    values.insert(values.end(), flat.begin(), flat.end());
  }
  return Mat(images.size(), cols, std::move(values));
}

namespace {

std::vector<std::size_t> sample_patients(const Dataset& dataset, std::size_t n, SeededRng& rng) {
  if (n == 0 || n > dataset.size()) {
    throw Error(ErrorCode::InsufficientPatients, "batch of " + std::to_string(n) +
                                                     " patients from a dataset of " +
                                                     std::to_string(dataset.size()));
  }
  // Partial Fisher-Yates: the first n positions are a uniform sample.
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(n);
  return order;
}

}  // namespace

TripletInputs make_batch(const Dataset& dataset, std::size_t n, const AugmentConfig& cfg,
                         SeededRng& rng) {
  return make_mode_batch(dataset, n, LossMode::Ours, cfg, rng);
}

TripletInputs make_mode_batch(const Dataset& dataset, std::size_t n, LossMode mode,
                              const AugmentConfig& cfg, SeededRng& rng) {
  cfg.validate();
  TripletInputs out;
  out.sample_indices = sample_patients(dataset, n, rng);
  std::vector<Image> first, second, third;
  switch (mode) {
    case LossMode::Ours:
      for (std::size_t idx : out.sample_indices) {
        const auto& s = dataset.samples[idx];
        first.push_back(augment(s.fundus, cfg, rng));
        second.push_back(augment(s.fundus, cfg, rng));
        third.push_back(augment(s.modality, cfg, rng));
      }
      break;
    case LossMode::EnlargedData:
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t idx : out.sample_indices) {
          const auto& s = dataset.samples[idx];
          const Image& src = pass == 0 ? s.fundus : s.modality;
          first.push_back(augment(src, cfg, rng));
          second.push_back(augment(src, cfg, rng));
        }
      third = second;
      break;
    case LossMode::AsAugmentation:
      for (std::size_t idx : out.sample_indices) {
        const auto& s = dataset.samples[idx];
        first.push_back(augment(s.fundus, cfg, rng));
        const bool use_modality = rng.bernoulli(0.5);
        second.push_back(augment(use_modality ? s.modality : s.fundus, cfg, rng));
      }
      third = second;
      break;
  }
  out.fundus = flatten_images(first);
  out.augmented = flatten_images(second);
  out.modality = flatten_images(third);
  return out;
}

FoldSplit make_folds(const std::vector<std::int64_t>& patient_ids, std::size_t k, SeededRng& rng,
                     const std::vector<std::size_t>& labels) {
  if (k < 2 || k > patient_ids.size()) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " for " +
                                         std::to_string(patient_ids.size()) + " patients");
  }
  if (!labels.empty() && labels.size() != patient_ids.size()) {
    throw Error(ErrorCode::LengthMismatch, "fold labels vs patient ids");
  }
  // (id, label) pairs in id order, so the result does not depend on input order.
  std::vector<std::pair<std::int64_t, std::size_t>> items;
  for (std::size_t i = 0; i < patient_ids.size(); ++i)
    items.emplace_back(patient_ids[i], labels.empty() ? 0 : labels[i]);
  std::sort(items.begin(), items.end());
  for (std::size_t i = 1; i < items.size(); ++i)
    if (items[i].first == items[i - 1].first) throw Error(ErrorCode::InvalidK, "duplicate patient ids");
  shuffle(items, rng);
  if (!labels.empty()) {
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
  }
  FoldSplit split;
  split.k = k;
  for (std::size_t i = 0; i < items.size(); ++i) split.assignments[items[i].first] = i % k;
  return split;
}

// ---------------------------------------------------------------------------
// Dataset files.
//
// Text:   SSLDS v1 <H> <W> <n_classes> <n_samples>
//         P <patient_id> <label>
//         F <H*W reals>
//         M <H*W reals>
// Binary: "SSLDSBv1", u64 H, u64 W, u64 n_classes, u64 n_samples, then per
//         sample i64 id, u64 label, H*W f64 fundus, H*W f64 modality.
//         Little-endian throughout.

namespace {

constexpr char kBinaryMagic[8] = {'S', 'S', 'L', 'D', 'S', 'B', 'v', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  const auto offset = static_cast<long long>(is.tellg());
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(ErrorCode::FormatError, path + ": truncated at byte offset " + std::to_string(offset));
  }
  return v;
}

void write_pixels(std::ostream& os, char tag, const Image& img) {
  os << tag;
  for (double v : img.pixels) os << ' ' << format_double(v);
  os << '\n';
}

class LineReader {
 public:
  LineReader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

  std::istringstream next(const char* expecting) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    fail(std::string("unexpected end of file, expecting ") + expecting);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::FormatError, path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& is_;
  std::string path_;
  std::size_t line_no_ = 0;
};

std::string expect_tag(std::istringstream& ss, const LineReader& reader, const std::string& tag) {
  std::string got;
  ss >> got;
  if (got != tag) reader.fail("expected '" + tag + "', found '" + got + "'");
  return got;
}

void read_pixels(std::istringstream& ss, const LineReader& reader, Image& img, const char* tag) {
  for (double& v : img.pixels) {
    std::string tok;
    if (!(ss >> tok)) reader.fail(std::string("too few values on ") + tag + " line");
    try {
      std::size_t used = 0;
      v = std::stod(tok, &used);
      if (used != tok.size()) throw 0;
    } catch (...) {
      reader.fail("bad number '" + tok + "'");
    }
    if (!(v >= 0.0 && v <= 1.0)) reader.fail("pixel value " + tok + " outside [0, 1]");
  }
  std::string extra;
  if (ss >> extra) reader.fail(std::string("too many values on ") + tag + " line");
}

Dataset load_text(std::istream& is, const std::string& path) {
  LineReader reader(is, path);
  auto header = reader.next("header");
  std::string magic, version;
  long long h = -1, w = -1, classes = -1, count = -1;
  header >> magic >> version >> h >> w >> classes >> count;
  if (magic != "SSLDS" || version != "v1") reader.fail("expected 'SSLDS v1' header");
  if (!header || h <= 0 || w <= 0 || classes < 0 || count < 0) reader.fail("malformed header");
  Dataset ds{{}, static_cast<std::size_t>(h), static_cast<std::size_t>(w),
             static_cast<std::size_t>(classes)};
  for (long long s = 0; s < count; ++s) {
    PatientSample p;
    auto pl = reader.next("P line");
    expect_tag(pl, reader, "P");
    long long id = 0, label = -1;
    if (!(pl >> id >> label) || label < 0) reader.fail("malformed P line");
    p.patient_id = id;
    p.label = static_cast<std::size_t>(label);
    p.fundus = Image(ds.height, ds.width);
    p.modality = Image(ds.height, ds.width);
    auto fl = reader.next("F line");
    expect_tag(fl, reader, "F");
    read_pixels(fl, reader, p.fundus, "F");
    auto ml = reader.next("M line");
    expect_tag(ml, reader, "M");
    read_pixels(ml, reader, p.modality, "M");
    ds.samples.push_back(std::move(p));
  }
  std::string rest;
  while (std::getline(is, rest))
    if (rest.find_first_not_of(" \t\r") != std::string::npos) reader.fail("trailing content after last sample");
  return ds;
}

Dataset load_binary(std::istream& is, const std::string& path) {
  Dataset ds;
  ds.height = get<std::uint64_t>(is, path);
  ds.width = get<std::uint64_t>(is, path);
  ds.n_classes = get<std::uint64_t>(is, path);
  const auto count = get<std::uint64_t>(is, path);
  if (ds.height == 0 || ds.width == 0 || ds.height * ds.width > (1u << 24)) {
    throw Error(ErrorCode::FormatError, path + ": implausible image size");
  }
  for (std::uint64_t s = 0; s < count; ++s) {
    PatientSample p;
    p.patient_id = get<std::int64_t>(is, path);
    p.label = get<std::uint64_t>(is, path);
    p.fundus = Image(ds.height, ds.width);
    p.modality = Image(ds.height, ds.width);
    for (double& v : p.fundus.pixels) v = get<double>(is, path);
    for (double& v : p.modality.pixels) v = get<double>(is, path);
    ds.samples.push_back(std::move(p));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::FormatError, path + ": trailing bytes after last sample");
  }
  return ds;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path, bool binary) {
  static_assert(std::endian::native == std::endian::little);
  dataset.validate();
  std::ofstream os(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  if (binary) {
    os.write(kBinaryMagic, sizeof(kBinaryMagic));
    put<std::uint64_t>(os, dataset.height);
    put<std::uint64_t>(os, dataset.width);
    put<std::uint64_t>(os, dataset.n_classes);
    put<std::uint64_t>(os, dataset.samples.size());
    for (const auto& s : dataset.samples) {
      put<std::int64_t>(os, s.patient_id);
      put<std::uint64_t>(os, s.label);
      for (double v : s.fundus.pixels) put(os, v);
      for (double v : s.modality.pixels) put(os, v);
    }
  } else {
    os << "SSLDS v1 " << dataset.height << ' ' << dataset.width << ' ' << dataset.n_classes << ' '
       << dataset.samples.size() << '\n';
    for (const auto& s : dataset.samples) {
      os << "P " << s.patient_id << ' ' << s.label << '\n';
      write_pixels(os, 'F', s.fundus);
      write_pixels(os, 'M', s.modality);
    }
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  char magic[sizeof(kBinaryMagic)] = {};
  is.read(magic, sizeof(magic));
  const bool binary = is.gcount() == sizeof(magic) && std::memcmp(magic, kBinaryMagic, sizeof(magic)) == 0;
  Dataset ds;
  if (binary) {
    ds = load_binary(is, path);
  } else {
    is.clear();
    is.seekg(0);
    ds = load_text(is, path);
  }
  ds.validate();
  return ds;
}

}  // namespace mmssl
