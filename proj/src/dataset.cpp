#include "pa/dataset.hpp"

#include <filesystem>
#include <stdexcept>

#include "pa/binary_io.hpp"

namespace pa::data {

Normalization Normalization::mnist() { return {{0.1307f}, {0.3081f}}; }

Normalization Normalization::cifar10() {
  return {{0.4914f, 0.4822f, 0.4465f}, {0.2470f, 0.2435f, 0.2616f}};
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t per = images.dim(1) * images.dim(2) * images.dim(3);
  Tensor out({indices.size(), images.dim(1), images.dim(2), images.dim(3)});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw std::out_of_range("sample index " + std::to_string(indices[b]));
    std::copy_n(images.data() + indices[b] * per, per, out.data() + b * per);
  }
  return out;
}

std::vector<std::uint8_t> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<std::uint8_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

void Dataset::truncate(std::size_t count) {
  if (count == 0 || count >= size()) return;
  const std::size_t per = images.dim(1) * images.dim(2) * images.dim(3);
  std::vector<float> kept(images.data(), images.data() + count * per);
  images = Tensor({count, images.dim(1), images.dim(2), images.dim(3)}, std::move(kept));
  labels.resize(count);
}

namespace {

void standardize(Tensor& images, const Normalization& norm) {
  const std::size_t channels = images.dim(1), spatial = images.dim(2) * images.dim(3);
  if (norm.mean.size() != channels || norm.std.size() != channels) {
    throw std::invalid_argument("normalization constants do not match " + std::to_string(channels) + " channels");
  }
  for (std::size_t n = 0; n < images.dim(0); ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      float* p = images.data() + (n * channels + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) p[s] = (p[s] - norm.mean[c]) / norm.std[c];
    }
}

void check_labels(const std::vector<std::uint8_t>& labels, std::size_t classes, const std::string& origin) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= classes) {
      throw std::runtime_error(origin + ": label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                               " outside 0.." + std::to_string(classes - 1));
    }
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path, const Normalization& norm) {
  io::Reader img = io::Reader::open(images_path);
  if (img.u32_big_endian() != 0x00000803u) {
    throw std::runtime_error(images_path + ": bad magic, expected 0x00000803 at byte offset 0");
  }
  const std::uint32_t count = img.u32_big_endian();
  const std::uint32_t rows = img.u32_big_endian();
  const std::uint32_t cols = img.u32_big_endian();
  const auto pixels = img.take(static_cast<std::size_t>(count) * rows * cols);

  io::Reader lab = io::Reader::open(labels_path);
  if (lab.u32_big_endian() != 0x00000801u) {
    throw std::runtime_error(labels_path + ": bad magic, expected 0x00000801 at byte offset 0");
  }
  const std::uint32_t label_count = lab.u32_big_endian();
  if (label_count != count) {
    throw std::runtime_error(labels_path + ": " + std::to_string(label_count) + " labels for " +
                             std::to_string(count) + " images at byte offset 4");
  }
  const auto raw_labels = lab.take(label_count);

  Dataset ds;
  ds.name = "idx";
  ds.images = Tensor({count, 1, rows, cols});
  for (std::size_t i = 0; i < pixels.size(); ++i) ds.images[i] = static_cast<float>(pixels[i]) / 255.0f;
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  check_labels(ds.labels, ds.classes, labels_path);
  standardize(ds.images, norm);
  return ds;
}

Dataset load_cifar_binary(const std::vector<std::string>& paths, const Normalization& norm) {
  constexpr std::size_t kRecord = 3073, kPixels = 3072;
  std::vector<float> pixels;
  std::vector<std::uint8_t> labels;
  for (const auto& path : paths) {
    io::Reader r = io::Reader::open(path);
    if (r.remaining() == 0 || r.remaining() % kRecord != 0) {
      throw std::runtime_error(path + ": size " + std::to_string(r.remaining()) + " is not a multiple of " +
                               std::to_string(kRecord) + "-byte records; truncated at byte offset " +
                               std::to_string(r.remaining() - r.remaining() % kRecord));
    }
    while (r.remaining() > 0) {
      labels.push_back(r.u8());
      for (std::uint8_t p : r.take(kPixels)) pixels.push_back(static_cast<float>(p) / 255.0f);
    }
    check_labels(labels, 10, path);
  }
  Dataset ds;
  ds.name = "cifar10";
  ds.images = Tensor({labels.size(), 3, 32, 32}, std::move(pixels));
  ds.labels = std::move(labels);
  standardize(ds.images, norm);
  return ds;
}

Format format_of(const std::string& kind) {
  if (kind == "mnist" || kind == "idx") return Format::Idx;
  if (kind == "cifar10" || kind == "cifar-binary") return Format::CifarBinary;
  throw std::invalid_argument("unknown dataset '" + kind + "'; known: mnist (idx), cifar10 (cifar-binary)");
}

Dataset load_dataset(const std::string& dir, const std::string& kind, bool train) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory " + dir + " does not exist");
  if (format_of(kind) == Format::Idx) {
    const std::string prefix = train ? "train" : "t10k";
    Dataset ds = load_idx((fs::path(dir) / (prefix + "-images-idx3-ubyte")).string(),
                          (fs::path(dir) / (prefix + "-labels-idx1-ubyte")).string(), Normalization::mnist());
    ds.name = "mnist";
    return ds;
  }
  fs::path root(dir);
  if (fs::is_directory(root / "cifar-10-batches-bin")) root /= "cifar-10-batches-bin";
  std::vector<std::string> files;
  if (train) {
    for (int i = 1; i <= 5; ++i) files.push_back((root / ("data_batch_" + std::to_string(i) + ".bin")).string());
  } else {
    files.push_back((root / "test_batch.bin").string());
  }
  return load_cifar_binary(files, Normalization::cifar10());
}

void augment_flip_crop(Tensor& batch, std::size_t pad, std::mt19937_64& rng) {
  const std::size_t c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  std::uniform_int_distribution<std::size_t> shift(0, 2 * pad);
  std::bernoulli_distribution flip(0.5);
  std::vector<float> src(c * h * w);
  for (std::size_t n = 0; n < batch.dim(0); ++n) {
    float* img = batch.data() + n * c * h * w;
    std::copy_n(img, src.size(), src.begin());
    const bool mirror = flip(rng);
    const long dy = static_cast<long>(shift(rng)) - static_cast<long>(pad);
    const long dx = static_cast<long>(shift(rng)) - static_cast<long>(pad);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const long sy = static_cast<long>(y) + dy;
          const long sx0 = static_cast<long>(mirror ? w - 1 - x : x) + dx;
          const bool inside = sy >= 0 && sx0 >= 0 && sy < static_cast<long>(h) && sx0 < static_cast<long>(w);
          img[(ch * h + y) * w + x] =
              inside ? src[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx0)] : 0.0f;
        }
  }
}

}  // namespace pa::data
