#include "rld/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace rld {

namespace {

void require_permutation(const std::vector<std::size_t>& ordering, std::size_t pixels) {
    if (ordering.size() != pixels)
        throw ParamError("ordering has " + std::to_string(ordering.size()) +
                         " entries, image has " + std::to_string(pixels) + " pixels");
    std::vector<bool> seen(pixels, false);
    for (std::size_t p : ordering) {
        if (p >= pixels || seen[p])
            throw ParamError("ordering is not a permutation of pixel indices");
        seen[p] = true;
    }
}

void set_pixel(DenseTensor& image, const ImageShape& shape, std::size_t pixel, const float* src,
               float baseline, bool from_source) {
    for (std::size_t ch = 0; ch < shape.c; ++ch)
        image.data[pixel * shape.c + ch] = from_source ? src[pixel * shape.c + ch] : baseline;
}

double anchor_prob(const TeacherModel& teacher, const DenseTensor& image, int anchor_class) {
    const DenseTensor proba = predict_proba(teacher, image);
    return proba.data[static_cast<std::size_t>(anchor_class)];
}

PerturbationCurve walk_curve(const TeacherModel& teacher, const DenseTensor& anchor,
                             const ImageShape& shape, const std::vector<std::size_t>& ordering,
                             double step_fraction, float baseline_value, bool deletion) {
    if (anchor.size() != shape.flat())
        throw ShapeError("curve: anchor has " + std::to_string(anchor.size()) +
                         " values, shape expects " + std::to_string(shape.flat()));
    if (!(step_fraction > 0.0 && step_fraction <= 1.0))
        throw ParamError("curve: step_fraction must be in (0, 1]");
    const std::size_t pixels = shape.pixels();
    require_permutation(ordering, pixels);

    const int anchor_class = predict(teacher, anchor);
    // Deletion starts at the clean image, insertion at the all-baseline one.
    DenseTensor image =
        deletion ? anchor : DenseTensor::full(anchor.shape, baseline_value);

    PerturbationCurve curve;
    curve.points.emplace_back(0.0, anchor_prob(teacher, image, anchor_class));
    std::size_t changed = 0;
    for (std::size_t step = 1; changed < pixels; ++step) {
        std::size_t target = static_cast<std::size_t>(
            std::llround(static_cast<double>(step) * step_fraction * static_cast<double>(pixels)));
        target = std::clamp(target, changed + 1, pixels);
        while (changed < target) {
            set_pixel(image, shape, ordering[changed], anchor.data.data(), baseline_value,
                      /*from_source=*/!deletion);
            ++changed;
        }
        curve.points.emplace_back(static_cast<double>(changed) / static_cast<double>(pixels),
                                  anchor_prob(teacher, image, anchor_class));
    }
    curve.auc = auc_trapezoid(curve.points);
    return curve;
}

} // namespace

PerturbationCurve deletion_curve(const TeacherModel& teacher, const DenseTensor& anchor,
                                 const ImageShape& shape, const std::vector<std::size_t>& ordering,
                                 double step_fraction, float baseline_value) {
    return walk_curve(teacher, anchor, shape, ordering, step_fraction, baseline_value, true);
}

PerturbationCurve insertion_curve(const TeacherModel& teacher, const DenseTensor& anchor,
                                  const ImageShape& shape, const std::vector<std::size_t>& ordering,
                                  double step_fraction, float baseline_value) {
    return walk_curve(teacher, anchor, shape, ordering, step_fraction, baseline_value, false);
}

double auc_trapezoid(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2)
        throw ParamError("auc_trapezoid: need at least 2 points, got " +
                         std::to_string(points.size()));
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const double df = points[i + 1].first - points[i].first;
        if (df <= 0.0) throw ParamError("auc_trapezoid: fractions must be strictly increasing");
        area += df * 0.5 * (points[i].second + points[i + 1].second);
    }
    return area;
}

SaliencyMap occlusion_saliency(const TeacherModel& teacher, const DenseTensor& anchor,
                               const ImageShape& shape, std::size_t window, std::size_t stride,
                               float baseline_value) {
    if (anchor.size() != shape.flat())
        throw ShapeError("occlusion: anchor has " + std::to_string(anchor.size()) +
                         " values, shape expects " + std::to_string(shape.flat()));
    if (window % 2 == 0) throw ParamError("occlusion: window size must be odd");
    if (window > std::min(shape.h, shape.w))
        throw ParamError("occlusion: window exceeds image side");
    if (stride == 0) throw ParamError("occlusion: stride must be positive");

    const int anchor_class = predict(teacher, anchor);
    const double p0 = anchor_prob(teacher, anchor, anchor_class);

    // Window origins at multiples of the stride, with the flush-right and
    // flush-bottom origins appended so every pixel is covered.
    auto origins = [&](std::size_t extent) {
        std::vector<std::size_t> out;
        for (std::size_t o = 0; o + window <= extent; o += stride) out.push_back(o);
        if (out.empty() || out.back() != extent - window) out.push_back(extent - window);
        return out;
    };

    DenseTensor sum = DenseTensor::zeros({shape.h, shape.w});
    DenseTensor hits = DenseTensor::zeros({shape.h, shape.w});
    DenseTensor image = anchor;
    for (std::size_t oy : origins(shape.h)) {
        for (std::size_t ox : origins(shape.w)) {
            for (std::size_t y = oy; y < oy + window; ++y)
                for (std::size_t x = ox; x < ox + window; ++x)
                    set_pixel(image, shape, y * shape.w + x, nullptr, baseline_value, false);
            const double drop = p0 - anchor_prob(teacher, image, anchor_class);
            for (std::size_t y = oy; y < oy + window; ++y)
                for (std::size_t x = ox; x < ox + window; ++x) {
                    const std::size_t pixel = y * shape.w + x;
                    sum.data[pixel] += static_cast<float>(drop);
                    hits.data[pixel] += 1.0f;
                    set_pixel(image, shape, pixel, anchor.data.data(), 0.0f, true);
                }
        }
    }

    DenseTensor per_channel = DenseTensor::zeros({shape.flat()});
    for (std::size_t p = 0; p < shape.pixels(); ++p) {
        const float value = hits.data[p] > 0.0f ? sum.data[p] / hits.data[p] : 0.0f;
        per_channel.data[p * shape.c] = value; // channel 0 carries the pixel value
    }
    return saliency_from_weights(per_channel, shape);
}

std::vector<std::size_t> random_ordering(std::size_t h, std::size_t w, Rng& rng) {
    std::vector<std::size_t> order(h * w);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);
    return order;
}

} // namespace rld
