#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgcn/png_io.hpp"
#include "mgcn/tensor.hpp"

namespace mgcn {

inline constexpr const char* kPositiveDir = "COVID";
inline constexpr const char* kNegativeDir = "NORMAL";

struct PreprocessConfig {
    std::size_t img_size = 128;
    std::size_t channels = 1;  ///< 1, or 3 to replicate the gray channel
};

struct ImageRecord {
    Tensor pixels;  ///< (H, W, C), values in [0, 1]
    int label = 0;  ///< 1 = COVID, 0 = non-COVID
    std::string source_path;
};

struct Dataset {
    std::vector<ImageRecord> records;
    /// Indexed by label.
    std::array<std::string, 2> class_names{kNegativeDir, kPositiveDir};
    std::size_t img_size = 0;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::size_t channels() const;
    std::size_t count(int label) const;
};

/// Resize (bilinear, half-pixel centers) -> grayscale (BT.601) -> (H,W,1)
/// -> divide by 255, then replicate to cfg.channels. Computed in double.
Tensor preprocess(const Image& raw, const PreprocessConfig& cfg);

/// Reads `<root>/COVID/*.png` (label 1) and `<root>/NORMAL/*.png` (label 0).
/// Records come out ordered by label, then filename.
Dataset load_directory(const std::filesystem::path& root, const PreprocessConfig& cfg);

/// Stratified, seeded split. Each partition keeps dataset order.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

struct Batch {
    Tensor images;  ///< (N, C, H, W)
    Tensor labels;  ///< (N)
};

/// Record indices per batch: a seeded permutation when a seed is given,
/// otherwise dataset order. The final partial batch is kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t count, std::size_t batch_size,
                                                    std::optional<std::uint64_t> shuffle_seed);

/// Packs records into an NCHW batch.
Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed);

/// Desk-scale stand-in: label 1 = bright centered disk on a dark background,
/// label 0 = the inverse contrast, plus N(0, 0.05) noise clamped to [0,1].
/// Gray (H,W,1) records, label-0 block first.
Dataset synth_dataset(std::size_t n_per_class, std::size_t img_size, std::uint64_t seed);

/// Same records with the gray channel replicated to `channels`.
Dataset with_channels(const Dataset& ds, std::size_t channels);

/// Writes records as 8-bit gray PNGs in the COVID/NORMAL layout.
void export_directory(const Dataset& ds, const std::filesystem::path& root);

/// Fisher-Yates with a 64-bit Mersenne Twister; identical on every platform.
void seeded_shuffle(std::span<std::size_t> values, std::uint64_t seed);

}  // namespace mgcn
