#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmssl/linalg.hpp"
#include "mmssl/loss.hpp"

namespace mmssl {

/// Single-channel image, row-major, values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  bool operator==(const Image&) const = default;
};

struct PatientSample {
  std::int64_t patient_id = 0;
  /// Used only for evaluation, never by self-supervised training.
  std::size_t label = 0;
  Image fundus;
  Image modality;

  bool operator==(const PatientSample&) const = default;
};

struct Dataset {
  std::vector<PatientSample> samples;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_classes = 0;

  std::size_t size() const noexcept { return samples.size(); }
  /// Unique ids, labels below n_classes, image shapes consistent.
  void validate() const;
  /// Samples at the given positions, same image geometry and class count.
  Dataset subset(const std::vector<std::size_t>& indices) const;
  std::vector<std::size_t> labels() const;

  bool operator==(const Dataset&) const = default;
};

struct SyntheticConfig {
  std::size_t n_classes = 4;
  std::size_t patients_per_class = 50;
  std::size_t height = 16;
  std::size_t width = 16;
  std::uint64_t class_pattern_seed = 2020;
  /// Peak deviation of each class prototype from mid-grey.
  double class_contrast = 0.22;
  double within_class_noise_sigma = 0.03;
  double modality_noise_sigma = 0.02;
  /// Correlation length (pixels) of the per-patient fundus noise; the noise
  /// field keeps a per-pixel standard deviation of within_class_noise_sigma.
  /// 0 gives independent pixels.
  double noise_correlation_length = 4.0;
  /// Probability of a horizontal flip (left/right eye); applies to both
  /// modalities.
  double eye_flip_prob = 0.5;
  /// Fundus-only illumination gain, drawn uniformly from this range ...
  double illumination_min = 0.3;
  double illumination_max = 1.7;
  /// ... and fundus-only additive brightness shift, drawn uniformly from
  /// [-brightness_offset, brightness_offset]. The modality image is
  /// synthesized from the fundus before gain and shift.
  double brightness_offset = 0.0;

  void validate() const;
};

struct AugmentConfig {
  double crop_scale_min = 0.2;
  double crop_scale_max = 1.0;
  double flip_prob = 0.5;
  /// Kept for parity with colour pipelines; a no-op on single-channel data.
  double grayscale_prob = 0.2;
  double jitter_min = 0.6;
  double jitter_max = 1.4;

  void validate() const;
};

/// Every random choice one augment() call makes, in draw order.
struct AugmentDraw {
  double crop_scale = 1.0;
  std::size_t crop_height = 0;
  std::size_t crop_width = 0;
  std::size_t crop_y = 0;
  std::size_t crop_x = 0;
  bool flip = false;
  bool grayscale = false;
  double contrast = 1.0;
  double brightness = 1.0;
};

struct FoldSplit {
  std::size_t k = 0;
  std::map<std::int64_t, std::size_t> assignments;

  /// Patient ids of each fold, in ascending id order.
  std::vector<std::vector<std::int64_t>> folds() const;
};

/// Raw encoder inputs for one training step: row i of each matrix comes from
/// the same instance.
struct TripletInputs {
  Mat fundus;
  Mat augmented;
  Mat modality;
  std::vector<std::size_t> sample_indices;  // dataset positions of the n patients
};

inline constexpr std::size_t kDefaultBatchPatients = 75;

Dataset generate_synthetic(const SyntheticConfig& cfg, SeededRng& rng);

/// Deterministic second-modality stand-in: 1 - (3x3 binomial blur), clamped.
Image synthesize_modality(const Image& fundus);

AugmentDraw draw_augment(const AugmentConfig& cfg, std::size_t height, std::size_t width, SeededRng& rng);
Image apply_augment(const Image& image, const AugmentDraw& draw);
/// Square area-fraction crop resized back bilinearly, horizontal flip, then
/// brightness/contrast jitter.
Image augment(const Image& image, const AugmentConfig& cfg, SeededRng& rng);

Image flip_horizontal(const Image& image);

/// Encoder input for an image: pixels mapped from [0, 1] to [-1, 1].
std::vector<double> flatten_image(const Image& image);
Mat flatten_images(const std::vector<Image>& images);

TripletInputs make_batch(const Dataset& dataset, std::size_t n, const AugmentConfig& cfg, SeededRng& rng);

/// Training inputs for the given mode. Ours is make_batch(). EnlargedData
/// turns n patients into 2n single-modality instances, each contributing two
/// augmented views. AsAugmentation draws the second view from the modality
/// image with probability 1/2. For the two baselines the modality slot holds
/// a copy of the second view.
TripletInputs make_mode_batch(const Dataset& dataset, std::size_t n, LossMode mode,
                              const AugmentConfig& cfg, SeededRng& rng);

/// Seeded shuffle, then round-robin assignment. When `labels` (parallel to
/// patient_ids) is non-empty the shuffled ids are grouped by label before
/// dealing, so every fold gets a near-equal share of each class.
FoldSplit make_folds(const std::vector<std::int64_t>& patient_ids, std::size_t k, SeededRng& rng,
                     const std::vector<std::size_t>& labels = {});

/// Text format unless `binary`; load_dataset() detects which.
void save_dataset(const Dataset& dataset, const std::string& path, bool binary = false);
Dataset load_dataset(const std::string& path);

}  // namespace mmssl
