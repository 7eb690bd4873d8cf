#pragma once

// The re-label distillation pipeline: sample a synthetic neighborhood
// around the anchor, re-label it with the teacher into "prediction kept"
// (1) vs "prediction shifted" (0), distill into a two-class linear
// student, and read per-pixel saliency off the student's weights.

#include "rld/dataio.hpp"
#include "rld/numkit.hpp"
#include "rld/teacher.hpp"
#include "rld/vae.hpp"

#include <array>
#include <vector>

namespace rld {

/// Synthetic samples around one anchor with the teacher's verdicts on
/// each: a two-class soft target and a binary hard label that is 1 exactly
/// when the teacher's argmax on the sample equals the anchor's class.
struct Neighborhood {
    DenseTensor anchor;
    int anchor_class = 0;
    std::vector<DenseTensor> samples;
    std::vector<std::array<float, 2>> soft_targets;
    std::vector<int> hard_labels;
    float tau_used = 1.0f;

    std::size_t size() const { return samples.size(); }
    std::size_t count_label(int label) const;
};

/// Single-logit logistic model over flattened pixels; the weight vector is
/// the saliency signal.
struct LinearStudent {
    DenseTensor w;
    float b = 0.0f;

    double final_loss = 0.0;
    double relabel_accuracy = 0.0;

    /// Probability that the prediction is kept: sigmoid(w . x + b).
    float prob_keep(const DenseTensor& x) const;
};

/// Per-pixel importance. raw is the signed H x W map (channels summed),
/// normalized is min-max rescaled to [0,1] (all 0.5 when flat), ordering
/// lists every pixel index by descending raw value.
struct SaliencyMap {
    DenseTensor raw;
    DenseTensor normalized;
    std::vector<std::size_t> ordering;
};

struct StudentConfig {
    float lr = 0.1f;
    std::size_t epochs = 200;
    float lambda1 = 0.7f;
    float lambda2 = 0.3f;
};

struct ExplainConfig {
    std::size_t n_samples = 1000;
    float tau = 1.0f;
    StudentConfig student;
    // Neighborhoods where either re-label class holds under 5% of the
    // samples are widened (tau *= 1.5) and resampled, at most 5 times.
    float degenerate_min_frac = 0.05f;
    int max_retries = 5;
};

struct ExplainResult {
    LinearStudent student;
    SaliencyMap saliency;
    Neighborhood neighborhood;
    int retries = 0;
    bool degenerate_warning = false;
};

/// Classifies every sample with the teacher and records hard labels and
/// collapsed two-class soft targets relative to the anchor's class.
Neighborhood relabel(const TeacherModel& teacher, const DenseTensor& anchor,
                     std::vector<DenseTensor> samples);

/// [p_c, 1 - p_c] where p_c is the probability of the anchor class.
std::array<float, 2> collapse_soft_target(const DenseTensor& proba, int anchor_class);

struct DistillResult {
    double loss = 0.0;
    DenseTensor grad_w;
    float grad_b = 0.0f;
};

/// Distillation loss summed over the neighborhood: per sample,
/// lambda1 * ||[p, 1-p] - soft_target||_2 + lambda2 * |p - hard_label|,
/// with the Euclidean norm smoothed as sqrt(. + 1e-12). Gradients are
/// with respect to the student's weights and bias.
DistillResult distill_loss(const LinearStudent& student, const Neighborhood& neighborhood,
                           float lambda1, float lambda2);

/// Full-batch gradient descent on the mean distillation loss from a zero
/// initialization; records the final summed loss and the re-label accuracy.
LinearStudent train_student(const Neighborhood& neighborhood, const StudentConfig& config);

/// Signed per-pixel map from a weight vector of length h*w*c: channels are
/// summed, ordering is by descending value with index ties kept stable.
SaliencyMap saliency_from_weights(const DenseTensor& w, const ImageShape& shape);

/// End-to-end explanation of the teacher's prediction on the anchor.
ExplainResult explain(const TeacherModel& teacher, const VaeModel& vae,
                      const DenseTensor& anchor, const ImageShape& shape,
                      const ExplainConfig& config, Rng& rng);

} // namespace rld
