#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cyclet/errors.hpp"
#include "cyclet/rng.hpp"
#include "cyclet/tensor.hpp"

namespace cyclet {

inline constexpr int kImageSize = 32;

/// Raw 8-bit RGB image, row-major, channels interleaved.
struct Image {
  int width = kImageSize;
  int height = kImageSize;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  std::uint8_t& at(int y, int x, int c) {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  std::uint8_t at(int y, int x, int c) const {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
};

enum class Domain { A, B };

inline const char* to_string(Domain d) { return d == Domain::A ? "A" : "B"; }

/// Construction record of one synthetic sample, for dataset statistics.
struct SampleMeta {
  std::array<int, 3> background{};  // jittered base color
  int cx = 0, cy = 0, ax = 0, ay = 0;
  bool inside(int x, int y) const {
    const double dx = (x - cx) / static_cast<double>(ax);
    const double dy = (y - cy) / static_cast<double>(ay);
    return dx * dx + dy * dy <= 1.0;
  }
};

namespace detail {

inline constexpr std::uint64_t domain_tag(Domain d) { return d == Domain::A ? 0xA1 : 0xB2; }

inline std::uint8_t clamp_byte(int v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

inline int ellipse_coverage(const SampleMeta& m) {
  int n = 0;
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      if (m.inside(x, y)) ++n;
  return n;
}

}  // namespace detail

/// Deterministic 32x32 sample. Domain A: yellow-tinted background with a
/// striped ellipse (2 px dark / 2 px light vertical bands keyed on absolute
/// x, so luminance along any row inside the ellipse has period 4). Domain B:
/// green-tinted background with a solid mid-gray ellipse. The ellipse covers
/// 10-60% of the pixels.
inline Image synth_sample_with_meta(Domain domain, std::uint64_t seed, SampleMeta* meta_out) {
  SplitMix64 rng(mix_seed(seed, {detail::domain_tag(domain), 0x5EED5EEDULL}));

  SampleMeta meta;
  const std::array<int, 3> base = domain == Domain::A ? std::array<int, 3>{185, 150, 70}
                                                      : std::array<int, 3>{90, 175, 85};
  for (int c = 0; c < 3; ++c) meta.background[static_cast<std::size_t>(c)] =
      base[static_cast<std::size_t>(c)] + rng.next_int(-18, 18);

  // Coverage target is 10-60% of 1024 px; these ranges land inside it on the
  // first draw almost always, the loop is a guard.
  for (int attempt = 0; attempt < 100; ++attempt) {
    meta.cx = rng.next_int(12, 19);
    meta.cy = rng.next_int(12, 19);
    meta.ax = rng.next_int(7, 13);
    meta.ay = rng.next_int(7, 13);
    const int cover = detail::ellipse_coverage(meta);
    if (cover >= 103 && cover <= 614) break;
  }

  std::array<int, 3> dark{35, 30, 30}, light{225, 222, 218}, fill{128, 128, 128};
  const int tone_jitter = rng.next_int(-10, 10);
  for (auto& v : dark) v += tone_jitter;
  for (auto& v : light) v += tone_jitter;
  for (auto& v : fill) v += tone_jitter;

  Image img;
  img.rgb.resize(static_cast<std::size_t>(kImageSize) * kImageSize * 3);
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      const std::array<int, 3>* color = &meta.background;
      if (meta.inside(x, y))
        color = domain == Domain::A ? ((x / 2) % 2 == 0 ? &dark : &light) : &fill;
      for (int c = 0; c < 3; ++c) {
        const int noise = rng.next_int(-4, 4);
        img.at(y, x, c) = detail::clamp_byte((*color)[static_cast<std::size_t>(c)] + noise);
      }
    }
  }
  if (meta_out != nullptr) *meta_out = meta;
  return img;
}

inline Image synth_sample(Domain domain, std::uint64_t seed) {
  return synth_sample_with_meta(domain, seed, nullptr);
}

// ---------------------------------------------------------------------------
// PPM P6 I/O, bit exact.
// ---------------------------------------------------------------------------

inline void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_ppm: cannot open " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw IoError("write_ppm: write failed for " + path);
}

inline Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_ppm: cannot open " + path);

  std::string magic;
  in >> magic;
  if (!in || magic.size() != 2 || magic[0] != 'P')
    throw PpmError(PpmError::Kind::malformed_header, "read_ppm: no magic in " + path);
  if (magic != "P6")
    throw PpmError(PpmError::Kind::unsupported_format,
                   "read_ppm: unsupported format " + magic + " in " + path);

  int width = 0, height = 0, maxval = 0;
  in >> width >> height >> maxval;
  if (!in || width <= 0 || height <= 0)
    throw PpmError(PpmError::Kind::malformed_header, "read_ppm: bad header in " + path);
  if (maxval != 255)
    throw PpmError(PpmError::Kind::bad_maxval,
                   "read_ppm: maxval " + std::to_string(maxval) + " unsupported in " + path);
  in.get();  // single whitespace after maxval

  Image img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size()))
    throw PpmError(PpmError::Kind::truncated, "read_ppm: truncated payload in " + path);
  return img;
}

/// Sorted *.ppm files of a directory.
inline std::vector<Image> load_image_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("load_image_dir: not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<Image> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(read_ppm(f));
  return images;
}

// ---------------------------------------------------------------------------
// Byte <-> model range [-1, 1]
// ---------------------------------------------------------------------------

/// byte / 127.5 - 1, planarized to a [1,3,H,W] tensor.
inline Tensor to_model_range(const Image& img) {
  Tensor t = Tensor::zeros({1, 3, img.height, img.width});
  auto v = t.values_mut();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        v[static_cast<std::size_t>((c * img.height + y) * img.width + x)] =
            static_cast<double>(img.at(y, x, c)) / 127.5 - 1.0;
  return t;
}

/// round((v + 1) * 127.5) clamped to [0, 255]. Accepts [1,3,H,W] or [3,H,W].
inline Image from_model_range(const Tensor& t) {
  Shape s = t.shape();
  if (s.size() == 4) {
    if (s[0] != 1 || s[1] != 3)
      throw ShapeError("from_model_range: expected [1,3,H,W], got " + shape_str(s));
    s = {s[1], s[2], s[3]};
  }
  if (s.size() != 3 || s[0] != 3)
    throw ShapeError("from_model_range: expected [3,H,W], got " + shape_str(t.shape()));
  Image img;
  img.height = s[1];
  img.width = s[2];
  img.rgb.resize(static_cast<std::size_t>(img.height) * img.width * 3);
  auto v = t.values();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double val = v[static_cast<std::size_t>((c * img.height + y) * img.width + x)];
        img.at(y, x, c) = detail::clamp_byte(
            static_cast<int>(std::lround((val + 1.0) * 127.5)));
      }
  return img;
}

// ---------------------------------------------------------------------------
// Unpaired epoch batching
// ---------------------------------------------------------------------------

/// A batch in model range with the source seeds that produced each sample.
struct ImageBatch {
  Tensor images;  // [B,3,32,32]
  std::vector<std::uint64_t> seeds;
};

/// Content seed of sample `index` in a deterministic dataset.
inline std::uint64_t sample_seed(std::uint64_t dataset_seed, Domain domain, bool test_split,
                                 int index) {
  return mix_seed(dataset_seed, {detail::domain_tag(domain), test_split ? 0x7E57ULL : 0x7124ULL,
                                 static_cast<std::uint64_t>(index)});
}

namespace detail {

inline std::vector<int> shuffled_indices(int n, std::uint64_t key) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  SplitMix64 rng(key);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

inline Tensor stack_images(const std::vector<const Image*>& imgs) {
  const int h = imgs.front()->height, w = imgs.front()->width;
  Tensor t = Tensor::zeros({static_cast<int>(imgs.size()), 3, h, w});
  auto v = t.values_mut();
  std::size_t off = 0;
  for (const Image* img : imgs) {
    Tensor one = to_model_range(*img);
    std::copy(one.values().begin(), one.values().end(), v.begin() + static_cast<std::ptrdiff_t>(off));
    off += static_cast<std::size_t>(one.size());
  }
  return t;
}

}  // namespace detail

/// Batches over preloaded images with a fresh deterministic shuffle per
/// (epoch_seed, epoch, domain).
inline std::vector<ImageBatch> make_epoch_batches(const std::vector<Image>& images,
                                                  int batch_size, std::uint64_t epoch_seed,
                                                  int epoch, Domain domain) {
  const int count = static_cast<int>(images.size());
  if (batch_size < 1 || count % batch_size != 0)
    throw ValueError("make_epoch_batches: batch_size " + std::to_string(batch_size) +
                     " must divide sample count " + std::to_string(count));
  const auto order = detail::shuffled_indices(
      count, mix_seed(epoch_seed, {detail::domain_tag(domain), 0x0DE4ULL,
                                   static_cast<std::uint64_t>(epoch)}));
  std::vector<ImageBatch> batches;
  batches.reserve(static_cast<std::size_t>(count / batch_size));
  for (int start = 0; start < count; start += batch_size) {
    std::vector<const Image*> members;
    ImageBatch b;
    for (int i = 0; i < batch_size; ++i) {
      const int src = order[static_cast<std::size_t>(start + i)];
      members.push_back(&images[static_cast<std::size_t>(src)]);
      b.seeds.push_back(static_cast<std::uint64_t>(src));
    }
    b.images = detail::stack_images(members);
    batches.push_back(std::move(b));
  }
  return batches;
}

/// Procedural dataset of `count` deterministic samples.
inline std::vector<Image> synth_dataset(Domain domain, int count, std::uint64_t dataset_seed,
                                        bool test_split = false) {
  std::vector<Image> images;
  images.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    images.push_back(synth_sample(domain, sample_seed(dataset_seed, domain, test_split, i)));
  return images;
}

/// Procedural variant: the dataset content and the per-epoch order both
/// derive from epoch_seed, so (epoch_seed, epoch) fully determines output.
inline std::vector<ImageBatch> make_epoch_batches(Domain domain, int count, int batch_size,
                                                  std::uint64_t epoch_seed, int epoch) {
  if (batch_size < 1 || count % batch_size != 0)
    throw ValueError("make_epoch_batches: batch_size " + std::to_string(batch_size) +
                     " must divide sample count " + std::to_string(count));
  auto images = synth_dataset(domain, count, epoch_seed);
  auto batches = make_epoch_batches(images, batch_size, epoch_seed, epoch, domain);
  for (auto& b : batches)
    for (auto& s : b.seeds) s = sample_seed(epoch_seed, domain, false, static_cast<int>(s));
  return batches;
}

}  // namespace cyclet
