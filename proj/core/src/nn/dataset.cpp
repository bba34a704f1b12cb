#include "analognas/nn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "analognas/errors.hpp"

namespace analognas::nn {

std::string_view split_name(Split s) { return s == Split::train ? "train" : "test"; }

void Dataset::validate() const {
  if (channels < 1 || height < 1 || width < 1) throw RangeError("dataset has an empty image shape");
  if (num_classes < 2) throw RangeError("dataset needs at least two classes");
  if (images.size() != labels.size() * image_elems())
    throw RangeError("dataset image buffer does not match label count");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw RangeError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) + " outside [0, " +
                       std::to_string(num_classes) + ")");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{channels, height, width, num_classes, split, {}, {}};
  out.images.reserve(indices.size() * image_elems());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto img = image(i);
    out.images.insert(out.images.end(), img.begin(), img.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::take(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw RangeError("synthetic.num_classes must be >= 2");
  if (side < 4) throw RangeError("synthetic.side must be >= 4");
  if (channels < 1) throw RangeError("synthetic.channels must be >= 1");
  if (train_size < 1 || test_size < 1) throw RangeError("synthetic split sizes must be >= 1");
  if (!(margin > 0.0 && margin <= 1.0)) throw RangeError("synthetic.margin must lie in (0, 1]");
  if (max_shift < 0 || max_shift >= side) throw RangeError("synthetic.max_shift must lie in [0, side)");
}

namespace {

std::vector<float> make_prototypes(const SynthSpec& spec, Rng& rng) {
  const int side = spec.side;
  const std::size_t elems = static_cast<std::size_t>(spec.channels) * side * side;
  std::vector<float> protos(static_cast<std::size_t>(spec.num_classes) * elems, 0.0f);
  std::uniform_real_distribution<double> pos(0.0, side);
  std::uniform_real_distribution<double> width(1.5, 4.0);
  for (int k = 0; k < spec.num_classes; ++k) {
    float* p = protos.data() + static_cast<std::size_t>(k) * elems;
    for (int c = 0; c < spec.channels; ++c)
      for (int blob = 0; blob < 3; ++blob) {
        const double cy = pos(rng), cx = pos(rng), s = width(rng);
        const double amp = (rng() & 1U) ? 1.0 : -1.0;
        for (int y = 0; y < side; ++y)
          for (int x = 0; x < side; ++x) {
            // Wrap-around distance keeps prototypes consistent with circular shifts.
            double dy = std::abs(y - cy), dx = std::abs(x - cx);
            dy = std::min(dy, side - dy);
            dx = std::min(dx, side - dx);
            p[(static_cast<std::size_t>(c) * side + y) * side + x] +=
                static_cast<float>(amp * std::exp(-(dy * dy + dx * dx) / (2 * s * s)));
          }
      }
    double mean = 0.0;
    for (std::size_t i = 0; i < elems; ++i) mean += p[i];
    mean /= static_cast<double>(elems);
    double sq = 0.0;
    for (std::size_t i = 0; i < elems; ++i) sq += (p[i] - mean) * (p[i] - mean);
    const double rms = std::sqrt(sq / static_cast<double>(elems));
    for (std::size_t i = 0; i < elems; ++i) p[i] = static_cast<float>((p[i] - mean) / (rms > 0 ? rms : 1.0));
  }
  return protos;
}

Dataset sample_split(const SynthSpec& spec, const std::vector<float>& protos, int count, Split split, Rng& rng) {
  const int side = spec.side;
  Dataset d{spec.channels, side, side, spec.num_classes, split, {}, {}};
  const std::size_t elems = d.image_elems();
  d.images.resize(static_cast<std::size_t>(count) * elems);
  d.labels.resize(static_cast<std::size_t>(count));
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto shifts = static_cast<std::uint64_t>(2 * spec.max_shift + 1);
  for (int i = 0; i < count; ++i) {
    const int label = i % spec.num_classes;
    d.labels[static_cast<std::size_t>(i)] = label;
    const int sy = static_cast<int>(uniform_index(rng, shifts)) - spec.max_shift;
    const int sx = static_cast<int>(uniform_index(rng, shifts)) - spec.max_shift;
    const float* p = protos.data() + static_cast<std::size_t>(label) * elems;
    float* out = d.images.data() + static_cast<std::size_t>(i) * elems;
    for (int c = 0; c < spec.channels; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const int py = ((y - sy) % side + side) % side, px = ((x - sx) % side + side) % side;
          const double signal = p[(static_cast<std::size_t>(c) * side + py) * side + px];
          const double n = spec.margin < 1.0 ? noise(rng) : 0.0;
          out[(static_cast<std::size_t>(c) * side + y) * side + x] =
              static_cast<float>(spec.margin * signal + (1.0 - spec.margin) * n);
        }
  }
  return d;
}

}  // namespace

DatasetPair synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng proto_rng(derive_seed(seed, {0}));
  const auto protos = make_prototypes(spec, proto_rng);
  Rng train_rng(derive_seed(seed, {1}));
  Rng test_rng(derive_seed(seed, {2}));
  DatasetPair out{sample_split(spec, protos, spec.train_size, Split::train, train_rng),
                  sample_split(spec, protos, spec.test_size, Split::test, test_rng)};
  return out;
}

Dataset load_cifar10_binary(const std::filesystem::path& path, Split split) {
  return load_cifar10_binary(std::span<const std::filesystem::path>(&path, 1), split);
}

Dataset load_cifar10_binary(std::span<const std::filesystem::path> paths, Split split) {
  constexpr std::size_t kRecord = 3073, kPixels = 3072;
  Dataset d{3, 32, 32, 10, split, {}, {}};
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError("cannot open CIFAR-10 file " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t full = bytes.size() / kRecord;
    if (bytes.size() % kRecord != 0)
      throw FormatError(path.string() + ": truncated record (file size " + std::to_string(bytes.size()) +
                            " is not a multiple of 3073)",
                        full * kRecord);
    d.images.reserve(d.images.size() + full * kPixels);
    for (std::size_t r = 0; r < full; ++r) {
      const std::size_t off = r * kRecord;
      const int label = bytes[off];
      if (label >= 10) throw FormatError(path.string() + ": label byte " + std::to_string(label) + " outside [0, 10)", off);
      d.labels.push_back(label);
      for (std::size_t i = 0; i < kPixels; ++i) d.images.push_back(static_cast<float>(bytes[off + 1 + i]) / 255.0f);
    }
  }
  return d;
}

ChannelStats channel_stats(const Dataset& d) {
  ChannelStats s;
  const std::size_t plane = static_cast<std::size_t>(d.height) * d.width;
  for (int c = 0; c < d.channels; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const float* p = d.images.data() + i * d.image_elems() + static_cast<std::size_t>(c) * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        sum += p[j];
        sq += static_cast<double>(p[j]) * p[j];
      }
    }
    const double n = static_cast<double>(d.size() * plane);
    const double mean = sum / n;
    const double var = std::max(sq / n - mean * mean, 0.0);
    s.mean.push_back(static_cast<float>(mean));
    s.stddev.push_back(static_cast<float>(var > 0 ? std::sqrt(var) : 1.0));
  }
  return s;
}

void normalize_channels(Dataset& d, const ChannelStats& stats) {
  const std::size_t plane = static_cast<std::size_t>(d.height) * d.width;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int c = 0; c < d.channels; ++c) {
      float* p = d.images.data() + i * d.image_elems() + static_cast<std::size_t>(c) * plane;
      const float m = stats.mean[static_cast<std::size_t>(c)], s = stats.stddev[static_cast<std::size_t>(c)];
      for (std::size_t j = 0; j < plane; ++j) p[j] = (p[j] - m) / s;
    }
}

template <typename T>
Tensor4<T> make_batch(const Dataset& d, std::span<const std::size_t> indices, const Augmentation& aug, Rng& rng) {
  const int n = static_cast<int>(indices.size()), h = d.height, w = d.width;
  Tensor4<T> batch(n, d.channels, h, w);
  for (int b = 0; b < n; ++b) {
    const auto img = d.image(indices[static_cast<std::size_t>(b)]);
    bool flip = false;
    int oy = 0, ox = 0;
    if (aug.active()) {
      flip = aug.flip_probability > 0.0 && uniform01(rng) < aug.flip_probability;
      if (aug.pad_crop > 0) {
        const auto range = static_cast<std::uint64_t>(2 * aug.pad_crop + 1);
        oy = static_cast<int>(uniform_index(rng, range)) - aug.pad_crop;
        ox = static_cast<int>(uniform_index(rng, range)) - aug.pad_crop;
      }
    }
    for (int c = 0; c < d.channels; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const int sy = y + oy;
          int sx = x + ox;
          if (flip) sx = w - 1 - sx;
          T v{0};
          if (sy >= 0 && sy < h && sx >= 0 && sx < w)
            v = static_cast<T>(img[(static_cast<std::size_t>(c) * h + sy) * w + sx]);
          batch.at(b, c, y, x) = v;
        }
  }
  return batch;
}

template <typename T>
Tensor4<T> make_batch(const Dataset& d, std::span<const std::size_t> indices) {
  Rng unused(0);
  return make_batch<T>(d, indices, Augmentation{}, unused);
}

template Tensor4<float> make_batch<float>(const Dataset&, std::span<const std::size_t>, const Augmentation&, Rng&);
template Tensor4<double> make_batch<double>(const Dataset&, std::span<const std::size_t>, const Augmentation&, Rng&);
template Tensor4<float> make_batch<float>(const Dataset&, std::span<const std::size_t>);
template Tensor4<double> make_batch<double>(const Dataset&, std::span<const std::size_t>);

}  // namespace analognas::nn
