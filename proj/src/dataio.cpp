#include "rld/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace rld {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint16_t kArchiveVersion = 1;
const char kArchiveMagic[4] = {'R', 'L', 'D', 'M'};

std::uint32_t read_u32_be(std::istream& in, const std::string& path, const char* field) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw FormatError(path + ": truncated while reading " + field);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

template <typename T>
T read_le(std::istream& in, const std::string& path, const char* field) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw FormatError(path + ": truncated while reading " + field);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open file");
    return in;
}

} // namespace

// --------------------------------------------------------------- dataset

ImageShape ImageDataset::shape() const {
    if (images.rank() != 4)
        throw ShapeError("dataset images must be rank-4, got " + shape_str(images.shape));
    return ImageShape{images.shape[1], images.shape[2], images.shape[3]};
}

DenseTensor ImageDataset::image(std::size_t i) const {
    const std::size_t d = shape().flat();
    if (i >= count())
        throw ParamError("image index " + std::to_string(i) + " out of range for dataset of " +
                         std::to_string(count()));
    std::vector<float> out(images.data.begin() + i * d, images.data.begin() + (i + 1) * d);
    return DenseTensor({d}, std::move(out));
}

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs = open_binary(images_path);
    const std::uint32_t magic = read_u32_be(imgs, images_path, "magic");
    if (magic != kIdxImagesMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "0x%08x", magic);
        throw FormatError(images_path + ": bad image magic " + buf);
    }
    const std::uint32_t n = read_u32_be(imgs, images_path, "count");
    const std::uint32_t h = read_u32_be(imgs, images_path, "rows");
    const std::uint32_t w = read_u32_be(imgs, images_path, "cols");
    std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * h * w);
    if (!imgs.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
        throw FormatError(images_path + ": truncated image payload");

    std::ifstream lbls = open_binary(labels_path);
    const std::uint32_t lmagic = read_u32_be(lbls, labels_path, "magic");
    if (lmagic != kIdxLabelsMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "0x%08x", lmagic);
        throw FormatError(labels_path + ": bad label magic " + buf);
    }
    const std::uint32_t ln = read_u32_be(lbls, labels_path, "count");
    if (ln != n)
        throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                          " does not match image count " + std::to_string(n));
    std::vector<unsigned char> raw_labels(ln);
    if (!lbls.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(ln)))
        throw FormatError(labels_path + ": truncated label payload");

    ImageDataset ds;
    ds.images = DenseTensor::zeros({n, h, w, 1});
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.images.data[i] = static_cast<float>(pixels[i]) / 255.0f;
    ds.labels.resize(ln);
    int max_label = 0;
    for (std::size_t i = 0; i < ln; ++i) {
        ds.labels[i] = static_cast<int>(raw_labels[i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

void write_idx(const ImageDataset& dataset, const std::string& images_path,
               const std::string& labels_path) {
    const ImageShape s = dataset.shape();
    if (s.c != 1) throw ParamError("write_idx: only single-channel datasets are supported");
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError(images_path + ": cannot open for writing");
    write_u32_be(imgs, kIdxImagesMagic);
    write_u32_be(imgs, static_cast<std::uint32_t>(dataset.count()));
    write_u32_be(imgs, static_cast<std::uint32_t>(s.h));
    write_u32_be(imgs, static_cast<std::uint32_t>(s.w));
    std::vector<unsigned char> pixels(dataset.images.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const float v = std::clamp(dataset.images.data[i], 0.0f, 1.0f);
        pixels[i] = static_cast<unsigned char>(std::floor(255.0f * v + 0.5f));
    }
    imgs.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));

    std::ofstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw FormatError(labels_path + ": cannot open for writing");
    write_u32_be(lbls, kIdxLabelsMagic);
    write_u32_be(lbls, static_cast<std::uint32_t>(dataset.count()));
    for (int label : dataset.labels) lbls.put(static_cast<char>(label));
}

// ---------------------------------------------------------------- shapes

namespace {

// Fill pixels where the predicate on (dy, dx) from the shape center holds.
template <typename Inside>
void rasterize(float* img, std::size_t h, std::size_t w, double cy, double cx, Inside inside) {
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if (inside(static_cast<double>(y) - cy, static_cast<double>(x) - cx))
                img[y * w + x] = 1.0f;
}

void draw_shape(float* img, std::size_t h, std::size_t w, int family, Rng& rng) {
    const double span = static_cast<double>(std::min(h, w));
    const double r = (0.18 + 0.12 * rng.next_unit()) * span; // half-extent
    const double cy = r + rng.next_unit() * (static_cast<double>(h) - 2.0 * r);
    const double cx = r + rng.next_unit() * (static_cast<double>(w) - 2.0 * r);
    const double t = std::max(1.0, r / 3.0); // bar/cross thickness

    switch (family) {
    case 0: // filled square
        rasterize(img, h, w, cy, cx, [&](double dy, double dx) {
            return std::abs(dy) <= r && std::abs(dx) <= r;
        });
        break;
    case 1: // circle
        rasterize(img, h, w, cy, cx, [&](double dy, double dx) {
            return dy * dy + dx * dx <= r * r;
        });
        break;
    case 2: // cross
        rasterize(img, h, w, cy, cx, [&](double dy, double dx) {
            return (std::abs(dy) <= t && std::abs(dx) <= r) ||
                   (std::abs(dx) <= t && std::abs(dy) <= r);
        });
        break;
    case 3: // triangle pointing up
        rasterize(img, h, w, cy, cx, [&](double dy, double dx) {
            if (dy < -r || dy > r) return false;
            return std::abs(dx) <= (dy + r) * 0.5;
        });
        break;
    default: // horizontal bar
        rasterize(img, h, w, cy, cx, [&](double dy, double dx) {
            return std::abs(dy) <= t && std::abs(dx) <= r;
        });
        break;
    }
}

} // namespace

ImageDataset synth_shapes(std::size_t n, std::size_t h, std::size_t w, int k, Rng& rng) {
    if (k < 2 || k > 5)
        throw ParamError("synth_shapes: class count must be in {2..5}, got " + std::to_string(k));
    if (h < 16 || w < 16)
        throw ParamError("synth_shapes: image sides must be >= 16, got " + std::to_string(h) +
                         "x" + std::to_string(w));
    if (n == 0) throw ParamError("synth_shapes: need at least one image");

    ImageDataset ds;
    ds.images = DenseTensor::zeros({n, h, w, 1});
    ds.labels.resize(n);
    ds.num_classes = k;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(k));
        ds.labels[i] = label;
        float* img = &ds.images.data[i * h * w];
        draw_shape(img, h, w, label, rng);
        for (std::size_t p = 0; p < h * w; ++p) {
            const float v = img[p] + 0.05f * rng.next_normal();
            img[p] = std::clamp(v, 0.0f, 1.0f);
        }
    }
    return ds;
}

// --------------------------------------------------------- model archive

void ModelArchive::add(const std::string& name, const DenseTensor& t) {
    for (const auto& s : sections)
        if (s.name == name) throw ParamError("archive: duplicate section name '" + name + "'");
    sections.push_back(ArchiveSection{name, t.shape, t.data});
}

void ModelArchive::add_scalar(const std::string& name, float v) {
    add(name, DenseTensor({1}, {v}));
}

bool ModelArchive::has(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return true;
    return false;
}

DenseTensor ModelArchive::tensor(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return DenseTensor(s.dims, s.values);
    throw FormatError("archive: missing section '" + name + "'");
}

float ModelArchive::scalar(const std::string& name) const {
    const DenseTensor t = tensor(name);
    if (t.size() != 1)
        throw FormatError("archive: section '" + name + "' is not a scalar");
    return t.data[0];
}

void save_model(const ModelArchive& archive, const std::string& path) {
    for (std::size_t i = 0; i < archive.sections.size(); ++i) {
        const auto& s = archive.sections[i];
        if (s.values.size() != shape_product(s.dims))
            throw ParamError("archive: section '" + s.name + "' payload does not match dims");
        for (std::size_t j = i + 1; j < archive.sections.size(); ++j)
            if (archive.sections[j].name == s.name)
                throw ParamError("archive: duplicate section name '" + s.name + "'");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out.write(kArchiveMagic, 4);
    write_le<std::uint16_t>(out, archive.version);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.sections.size()));
    for (const auto& s : archive.sections) {
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.name.size()));
        out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
        out.put(static_cast<char>(kDtypeF32));
        out.put(static_cast<char>(s.dims.size()));
        for (std::size_t d : s.dims) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(4 * s.values.size()));
        for (float v : s.values) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            write_le<std::uint32_t>(out, bits);
        }
    }
    if (!out) throw FormatError(path + ": write failed");
}

ModelArchive load_model(const std::string& path) {
    std::ifstream in = open_binary(path);
    char magic[4];
    if (!in.read(magic, 4)) throw FormatError(path + ": truncated while reading magic");
    if (std::memcmp(magic, kArchiveMagic, 4) != 0)
        throw FormatError(path + ": bad archive magic '" + std::string(magic, 4) + "'");
    ModelArchive archive;
    archive.version = read_le<std::uint16_t>(in, path, "version");
    if (archive.version != kArchiveVersion)
        throw FormatError(path + ": unsupported archive version " +
                          std::to_string(archive.version));
    const std::uint32_t count = read_le<std::uint32_t>(in, path, "section count");
    archive.sections.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ArchiveSection s;
        const std::uint16_t name_len = read_le<std::uint16_t>(in, path, "name length");
        s.name.resize(name_len);
        if (!in.read(s.name.data(), name_len))
            throw FormatError(path + ": truncated while reading section name");
        const int dtype = in.get();
        if (dtype != kDtypeF32)
            throw FormatError(path + ": unknown dtype tag " + std::to_string(dtype) +
                              " in section '" + s.name + "'");
        const int rank = in.get();
        if (rank < 0) throw FormatError(path + ": truncated while reading rank");
        s.dims.resize(static_cast<std::size_t>(rank));
        for (auto& d : s.dims) d = read_le<std::uint32_t>(in, path, "dimension");
        const std::uint32_t payload_bytes = read_le<std::uint32_t>(in, path, "payload length");
        const std::size_t expected = 4 * shape_product(s.dims);
        if (payload_bytes != expected)
            throw FormatError(path + ": section '" + s.name + "' declares " +
                              std::to_string(payload_bytes) + " payload bytes, dims require " +
                              std::to_string(expected));
        s.values.resize(payload_bytes / 4);
        for (auto& v : s.values) {
            const std::uint32_t bits = read_le<std::uint32_t>(in, path, "payload");
            std::memcpy(&v, &bits, 4);
        }
        for (const auto& prev : archive.sections)
            if (prev.name == s.name)
                throw FormatError(path + ": duplicate section name '" + s.name + "'");
        archive.sections.push_back(std::move(s));
    }
    return archive;
}

// ----------------------------------------------------------- mapexports

void write_pgm(const DenseTensor& map, const std::string& path) {
    if (map.rank() != 2)
        throw ShapeError("write_pgm: map must be rank-2, got " + shape_str(map.shape));
    for (float v : map.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw ParamError("write_pgm: value " + std::to_string(v) + " outside [0,1]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "P5\n" << map.shape[1] << " " << map.shape[0] << "\n255\n";
    for (float v : map.data)
        out.put(static_cast<char>(static_cast<unsigned char>(std::floor(255.0f * v + 0.5f))));
    if (!out) throw FormatError(path + ": write failed");
}

void write_curve_csv(const std::vector<std::pair<double, double>>& points,
                     const std::string& path) {
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        if (points[i + 1].first < points[i].first)
            throw ParamError("write_curve_csv: fractions must be nondecreasing");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "fraction,probability\n";
    char line[80];
    for (const auto& [fraction, probability] : points) {
        std::snprintf(line, sizeof(line), "%.6f,%.6f\n", fraction, probability);
        out << line;
    }
    if (!out) throw FormatError(path + ": write failed");
}

} // namespace rld
