#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gateprune/tensor.hpp"

namespace gateprune {

class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr float kMnistMean = 0.1307f;
inline constexpr float kMnistStd = 0.3081f;
inline constexpr int kIdxImageMagic = 2051;
inline constexpr int kIdxLabelMagic = 2049;

struct Dataset {
    Tensor images;            // [N,1,H,W], mean-std normalized
    std::vector<int> labels;  // in [0,10)

    int size() const { return images.defined() ? images.dim(0) : 0; }
};

// Parses one big-endian IDX image/label file pair. Files may be raw or
// gzip-compressed (detected by content). Pixels are scaled by 1/255 and then
// mean-std normalized.
Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path);

// Loads train-images-idx3-ubyte / train-labels-idx1-ubyte / t10k-... from a
// directory, accepting either the raw files or their .gz forms.
std::pair<Dataset, Dataset> load_mnist(const std::filesystem::path& dir);

// First n samples (n == 0 keeps everything); handy for fast smoke runs.
Dataset dataset_head(const Dataset& d, int n);

// Gathers the given sample indices into a fresh batch tensor.
Tensor gather_images(const Dataset& d, std::span<const int> indices);
std::vector<int> gather_labels(const Dataset& d, std::span<const int> indices);

}  // namespace gateprune
