#pragma once

// Dataset ingestion (IDX files), a procedural shapes corpus for offline
// runs, and bit-exact serialization: RLDM model archives, PGM maps and
// CSV metric curves.

#include "rld/numkit.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace rld {

struct ImageShape {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 1;

    std::size_t pixels() const { return h * w; }
    std::size_t flat() const { return h * w * c; }
};

/// Immutable image corpus: N x H x W x C pixels in [0,1] plus integer labels.
struct ImageDataset {
    DenseTensor images;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t count() const { return images.rank() == 4 ? images.shape[0] : 0; }
    ImageShape shape() const;

    /// Flat copy of image i (length h*w*c).
    DenseTensor image(std::size_t i) const;
};

/// Reads big-endian IDX image/label files (the MNIST container format).
/// Pixels are scaled from bytes to [0,1].
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Inverse of load_idx; pixels are written as round(255 * value).
void write_idx(const ImageDataset& dataset, const std::string& images_path,
               const std::string& labels_path);

/// Procedural dataset: class c renders shape family c (square, circle,
/// cross, triangle, bar) at random position and scale, with additive
/// Gaussian noise (sigma 0.05) clamped to [0,1]. Classes are interleaved
/// so any prefix is balanced up to rounding. k must be in {2..5} and
/// h, w >= 16.
ImageDataset synth_shapes(std::size_t n, std::size_t h, std::size_t w, int k, Rng& rng);

// --------------------------------------------------------- model archive

/// One named float32 tensor inside an RLDM archive.
struct ArchiveSection {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<float> values;
};

/// Container persisted as: magic "RLDM", version u16, section count u32,
/// then per section: name length u16, name, dtype u8 (1 = float32),
/// rank u8, dims u32 each, payload length u32, payload. All integers
/// little-endian; round-trips are byte-identical.
struct ModelArchive {
    std::uint16_t version = 1;
    std::vector<ArchiveSection> sections;

    void add(const std::string& name, const DenseTensor& t);
    void add_scalar(const std::string& name, float v);
    bool has(const std::string& name) const;
    DenseTensor tensor(const std::string& name) const;
    float scalar(const std::string& name) const;
};

void save_model(const ModelArchive& archive, const std::string& path);
ModelArchive load_model(const std::string& path);

/// Binary PGM (P5, maxval 255) of an H x W map with values in [0,1];
/// bytes are round(255 * value), half rounded up.
void write_pgm(const DenseTensor& map, const std::string& path);

/// CSV with header "fraction,probability", six decimals, LF endings.
/// Fractions must be nondecreasing.
void write_curve_csv(const std::vector<std::pair<double, double>>& points,
                     const std::string& path);

} // namespace rld
