#ifndef PA_DATASET_HPP
#define PA_DATASET_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pa/tensor.hpp"

namespace pa::data {

enum class Format { Idx, CifarBinary };

/// Per-channel standardisation constants.
struct Normalization {
  std::vector<float> mean;
  std::vector<float> std;

  static Normalization mnist();
  static Normalization cifar10();
};

/// Images as (count, C, H, W) scaled to [0, 1] and standardised; labels in [0, classes).
struct Dataset {
  std::string name;
  Tensor images;
  std::vector<std::uint8_t> labels;
  std::size_t classes = 10;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const { return {1, images.dim(1), images.dim(2), images.dim(3)}; }
  /// Gathers the given samples into a batch.
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<std::uint8_t> batch_labels(std::span<const std::size_t> indices) const;
  /// Keeps the first `count` samples (no-op if count is 0 or too large).
  void truncate(std::size_t count);
};

/// IDX pair: images (magic 0x00000803, u8 pixels) and labels (magic 0x00000801).
Dataset load_idx(const std::string& images_path, const std::string& labels_path, const Normalization& norm);
/// CIFAR-10 binary batches: 3073-byte records (label, 1024 R, 1024 G, 1024 B).
Dataset load_cifar_binary(const std::vector<std::string>& paths, const Normalization& norm);

/// Standard file names under `dir`: MNIST {train,t10k}-{images-idx3,labels-idx1}-ubyte,
/// CIFAR-10 data_batch_{1..5}.bin / test_batch.bin (optionally inside cifar-10-batches-bin/).
Dataset load_dataset(const std::string& dir, const std::string& kind, bool train);
Format format_of(const std::string& kind);

/// Random horizontal flip plus a random crop from a zero-padded (pad-pixel) canvas.
void augment_flip_crop(Tensor& batch, std::size_t pad, std::mt19937_64& rng);

}  // namespace pa::data

#endif  // PA_DATASET_HPP
