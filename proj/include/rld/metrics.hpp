#pragma once

// Faithfulness evaluation: deletion/insertion curves with trapezoidal AUC,
// plus occlusion-sensitivity and random-order baselines.

#include "rld/dataio.hpp"
#include "rld/explain.hpp"
#include "rld/numkit.hpp"
#include "rld/teacher.hpp"

#include <utility>
#include <vector>

namespace rld {

/// Teacher probability of the anchor class as a function of the fraction
/// of pixels replaced (deletion) or revealed (insertion).
struct PerturbationCurve {
    std::vector<std::pair<double, double>> points;
    double auc = 0.0;
};

/// Progressively replaces the most salient pixels (per ordering, all
/// channels) with baseline_value and tracks p(anchor class). The first
/// point is the unperturbed probability, the last has every pixel
/// replaced. Lower AUC means a more faithful ordering.
PerturbationCurve deletion_curve(const TeacherModel& teacher, const DenseTensor& anchor,
                                 const ImageShape& shape, const std::vector<std::size_t>& ordering,
                                 double step_fraction, float baseline_value);

/// Starts from an all-baseline image and progressively reveals the most
/// salient pixels; the last point is the unperturbed probability. Higher
/// AUC means a more faithful ordering.
PerturbationCurve insertion_curve(const TeacherModel& teacher, const DenseTensor& anchor,
                                  const ImageShape& shape, const std::vector<std::size_t>& ordering,
                                  double step_fraction, float baseline_value);

/// Trapezoidal integral over the fraction axis; needs >= 2 points with
/// strictly increasing fractions.
double auc_trapezoid(const std::vector<std::pair<double, double>>& points);

/// Slides an odd-sized window set to baseline_value across the image and
/// credits every covered pixel with the drop in p(anchor class); the
/// credit of overlapping windows is averaged.
SaliencyMap occlusion_saliency(const TeacherModel& teacher, const DenseTensor& anchor,
                               const ImageShape& shape, std::size_t window, std::size_t stride,
                               float baseline_value);

/// Uniform random pixel permutation, the control ordering.
std::vector<std::size_t> random_ordering(std::size_t h, std::size_t w, Rng& rng);

} // namespace rld
