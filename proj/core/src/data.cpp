#include "mgcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "mgcn/errors.hpp"
#include "mgcn/random.hpp"
#include "mgcn/threads.hpp"

namespace mgcn {

namespace fs = std::filesystem;

std::size_t Dataset::channels() const { return records.empty() ? 0 : records.front().pixels.dim(2); }

std::size_t Dataset::count(int label) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [label](const ImageRecord& r) { return r.label == label; }));
}

namespace {

// Bilinear sampling of one channel with half-pixel centers.
std::vector<double> resize_channel(const Image& img, std::size_t channel, std::size_t size) {
    std::vector<double> out(size * size);
    const double sy = static_cast<double>(img.height) / static_cast<double>(size);
    const double sx = static_cast<double>(img.width) / static_cast<double>(size);
    const auto coord = [](std::size_t dst, double scale, std::size_t extent, std::size_t& i0, std::size_t& i1,
                          double& frac) {
        double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
        i0 = static_cast<std::size_t>(src);
        i1 = std::min(i0 + 1, extent - 1);
        frac = src - static_cast<double>(i0);
    };
    for (std::size_t y = 0; y < size; ++y) {
        std::size_t y0, y1;
        double fy;
        coord(y, sy, img.height, y0, y1, fy);
        for (std::size_t x = 0; x < size; ++x) {
            std::size_t x0, x1;
            double fx;
            coord(x, sx, img.width, x0, x1, fx);
            const double top = img.at(y0, x0, channel) * (1.0 - fx) + img.at(y0, x1, channel) * fx;
            const double bottom = img.at(y1, x0, channel) * (1.0 - fx) + img.at(y1, x1, channel) * fx;
            out[y * size + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

Tensor replicate(const std::vector<float>& gray, std::size_t size, std::size_t channels) {
    Tensor t(Shape{size, size, channels});
    auto d = t.mutable_data();
    for (std::size_t p = 0; p < gray.size(); ++p) {
        for (std::size_t c = 0; c < channels; ++c) d[p * channels + c] = gray[p];
    }
    return t;
}

std::vector<fs::path> png_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

// Standard normal via Box-Muller on 53-bit uniforms.
double standard_normal(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.class_names = ds.class_names;
    out.img_size = ds.img_size;
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(ds.records[i]);
    return out;
}

}  // namespace

void seeded_shuffle(std::span<std::size_t> values, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(values[i - 1], values[j]);
    }
}

Tensor preprocess(const Image& raw, const PreprocessConfig& cfg) {
    if (raw.width == 0 || raw.height == 0 || raw.pixels.empty()) throw DataError("preprocess: empty image");
    if (raw.channels != 1 && raw.channels != 3) throw DataError("preprocess: expected 1 or 3 channels");
    if (cfg.img_size == 0) throw ConfigError("preprocess: img_size must be positive");
    if (cfg.channels != 1 && cfg.channels != 3) throw ConfigError("preprocess: channels must be 1 or 3");

    const std::size_t size = cfg.img_size;
    std::vector<double> gray;
    if (raw.channels == 1) {
        gray = resize_channel(raw, 0, size);
    } else {
        const auto r = resize_channel(raw, 0, size);
        const auto g = resize_channel(raw, 1, size);
        const auto b = resize_channel(raw, 2, size);
        gray.resize(r.size());
        for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    }
    std::vector<float> scaled(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        scaled[i] = static_cast<float>(std::clamp(gray[i] / 255.0, 0.0, 1.0));
    }
    return replicate(scaled, size, cfg.channels);
}

Dataset load_directory(const fs::path& root, const PreprocessConfig& cfg) {
    const auto negatives = png_files(root / kNegativeDir);
    const auto positives = png_files(root / kPositiveDir);

    std::vector<std::pair<fs::path, int>> files;
    for (const auto& p : negatives) files.emplace_back(p, 0);
    for (const auto& p : positives) files.emplace_back(p, 1);

    Dataset ds;
    ds.img_size = cfg.img_size;
    ds.records.resize(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        const auto& [path, label] = files[i];
        ds.records[i] = ImageRecord{preprocess(read_png(path), cfg), label, path.string()};
    });
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("split: train fraction must lie in (0,1), got " + std::to_string(train_fraction));
    }
    std::vector<std::size_t> train_idx, test_idx;
    for (int label = 0; label <= 1; ++label) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            if (ds.records[i].label == label) members.push_back(i);
        }
        if (members.empty()) throw DataError("split: class '" + ds.class_names[label] + "' has no records");
        seeded_shuffle(members, mix_seed(seed, static_cast<std::uint64_t>(label)));
        const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(members.size())));
        train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {subset(ds, train_idx), subset(ds, test_idx)};
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t count, std::size_t batch_size,
                                                    std::optional<std::uint64_t> shuffle_seed) {
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    if (count == 0) throw DataError("cannot batch an empty dataset");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    if (shuffle_seed) seeded_shuffle(order, *shuffle_seed);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) throw DataError("make_batch: no indices");
    const Shape& s = ds.records.at(indices.front()).pixels.shape();
    const std::size_t h = s[0], w = s[1], c = s[2];
    Batch batch{Tensor(Shape{indices.size(), c, h, w}), Tensor(Shape{indices.size()})};
    auto img = batch.images.mutable_data();
    auto lab = batch.labels.mutable_data();
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const ImageRecord& rec = ds.records.at(indices[n]);
        if (rec.pixels.shape() != s) {
            throw ShapeError("make_batch: record " + std::to_string(indices[n]) + " has shape " +
                             shape_to_string(rec.pixels.shape()) + ", expected " + shape_to_string(s));
        }
        const auto px = rec.pixels.data();
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    img[((n * c + ch) * h + y) * w + x] = px[(y * w + x) * c + ch];
                }
            }
        }
        lab[n] = static_cast<float>(rec.label);
    }
    return batch;
}

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed) {
    std::vector<Batch> out;
    for (const auto& idx : batch_indices(ds.size(), batch_size, shuffle_seed)) out.push_back(make_batch(ds, idx));
    return out;
}

Dataset synth_dataset(std::size_t n_per_class, std::size_t img_size, std::uint64_t seed) {
    if (n_per_class == 0) throw ConfigError("synth_dataset: n_per_class must be at least 1");
    if (img_size == 0) throw ConfigError("synth_dataset: img_size must be positive");
    constexpr double background = 0.2, disk = 0.9, noise_sigma = 0.05;
    const double center = static_cast<double>(img_size) / 2.0;
    const double radius = std::max(1.0, static_cast<double>(img_size) / 4.0);

    Dataset ds;
    ds.img_size = img_size;
    for (int label = 0; label <= 1; ++label) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(label) * n_per_class + i));
            Tensor px(Shape{img_size, img_size, 1});
            auto d = px.mutable_data();
            for (std::size_t y = 0; y < img_size; ++y) {
                for (std::size_t x = 0; x < img_size; ++x) {
                    const double dy = static_cast<double>(y) + 0.5 - center;
                    const double dx = static_cast<double>(x) + 0.5 - center;
                    double v = dx * dx + dy * dy <= radius * radius ? disk : background;
                    if (label == 0) v = 1.0 - v;
                    v += noise_sigma * standard_normal(rng);
                    d[y * img_size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
            ds.records.push_back(ImageRecord{px, label, {}});
        }
    }
    return ds;
}

Dataset with_channels(const Dataset& ds, std::size_t channels) {
    if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
    if (ds.channels() == channels) return ds;
    Dataset out;
    out.class_names = ds.class_names;
    out.img_size = ds.img_size;
    out.records.reserve(ds.size());
    for (const auto& rec : ds.records) {
        const Shape& s = rec.pixels.shape();
        const std::size_t pixels = s[0] * s[1];
        const std::size_t from = s[2];
        std::vector<float> gray(pixels);
        const auto d = rec.pixels.data();
        for (std::size_t p = 0; p < pixels; ++p) gray[p] = d[p * from];
        out.records.push_back(ImageRecord{replicate(gray, s[0], channels), rec.label, rec.source_path});
    }
    return out;
}

void export_directory(const Dataset& ds, const fs::path& root) {
    std::error_code ec;
    for (const char* dir : {kPositiveDir, kNegativeDir}) {
        fs::create_directories(root / dir, ec);
        if (ec) throw DataError("cannot create " + (root / dir).string() + ": " + ec.message());
    }
    std::array<std::size_t, 2> next{0, 0};
    for (const auto& rec : ds.records) {
        const Shape& s = rec.pixels.shape();
        Image img{s[1], s[0], 1, std::vector<std::uint8_t>(s[0] * s[1])};
        const auto d = rec.pixels.data();
        for (std::size_t p = 0; p < img.pixels.size(); ++p) {
            img.pixels[p] = static_cast<std::uint8_t>(std::lround(std::clamp(d[p * s[2]], 0.0f, 1.0f) * 255.0f));
        }
        const bool positive = rec.label == 1;
        char name[32];
        std::snprintf(name, sizeof name, "%s_%05zu.png", positive ? "covid" : "normal", next[rec.label]++);
        write_png(root / (positive ? kPositiveDir : kNegativeDir) / name, img);
    }
}

}  // namespace mgcn
