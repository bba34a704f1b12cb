#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "analognas/nn/tensor.hpp"
#include "analognas/rng.hpp"

namespace analognas::nn {

enum class Split { train, test };
std::string_view split_name(Split s);

// Images stored NCHW, one contiguous C*H*W block per sample.
struct Dataset {
  int channels = 0;
  int height = 0;
  int width = 0;
  int num_classes = 0;
  Split split = Split::train;
  std::vector<float> images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t image_elems() const { return static_cast<std::size_t>(channels) * height * width; }
  std::span<const float> image(std::size_t i) const { return {images.data() + i * image_elems(), image_elems()}; }

  // Throws RangeError on label or size inconsistencies.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset take(std::size_t n) const;
};

// Class-conditional pattern data: each class owns a smooth random prototype;
// a sample is margin * shifted(prototype) + (1 - margin) * N(0, 1) noise.
// margin = 1 gives noise-free (linearly separable) data.
struct SynthSpec {
  int num_classes = 10;
  int side = 16;
  int channels = 3;
  int train_size = 1000;
  int test_size = 500;
  double margin = 0.5;
  int max_shift = 2;  // circular shift in pixels, uniform per sample and axis

  void validate() const;
  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// Deterministic per seed; train and test are drawn from independent streams.
DatasetPair synth_dataset(const SynthSpec& spec, std::uint64_t seed);

// CIFAR-10 binary batch: 3073-byte records (label byte, then 3072 pixel bytes
// R, G, B planes of 32x32 row-major). Pixels scaled to [0, 1].
Dataset load_cifar10_binary(const std::filesystem::path& path, Split split);
Dataset load_cifar10_binary(std::span<const std::filesystem::path> paths, Split split);

struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> stddev;
};
ChannelStats channel_stats(const Dataset& d);
void normalize_channels(Dataset& d, const ChannelStats& stats);

struct Augmentation {
  double flip_probability = 0.0;
  int pad_crop = 0;  // random crop back to size after zero-padding by this many pixels

  bool active() const { return flip_probability > 0.0 || pad_crop > 0; }
  friend bool operator==(const Augmentation&, const Augmentation&) = default;
};

// Gathers samples into a channel-major batch tensor; rng is consumed only
// when the augmentation is active.
template <typename T>
Tensor4<T> make_batch(const Dataset& d, std::span<const std::size_t> indices, const Augmentation& aug, Rng& rng);
template <typename T>
Tensor4<T> make_batch(const Dataset& d, std::span<const std::size_t> indices);

}  // namespace analognas::nn
