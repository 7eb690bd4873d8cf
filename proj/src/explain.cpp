#include "rld/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rld {

std::size_t Neighborhood::count_label(int label) const {
    return static_cast<std::size_t>(std::count(hard_labels.begin(), hard_labels.end(), label));
}

float LinearStudent::prob_keep(const DenseTensor& x) const {
    if (x.size() != w.size())
        throw ShapeError("student: image has " + std::to_string(x.size()) +
                         " values, weights have " + std::to_string(w.size()));
    double acc = b;
    for (std::size_t i = 0; i < w.size(); ++i)
        acc += static_cast<double>(w.data[i]) * x.data[i];
    return sigmoid_scalar(static_cast<float>(acc));
}

std::array<float, 2> collapse_soft_target(const DenseTensor& proba, int anchor_class) {
    if (anchor_class < 0 || static_cast<std::size_t>(anchor_class) >= proba.size())
        throw ParamError("collapse_soft_target: class " + std::to_string(anchor_class) +
                         " out of range for " + std::to_string(proba.size()) + " classes");
    const float p = proba.data[static_cast<std::size_t>(anchor_class)];
    return {p, 1.0f - p};
}

Neighborhood relabel(const TeacherModel& teacher, const DenseTensor& anchor,
                     std::vector<DenseTensor> samples) {
    if (samples.empty()) throw ParamError("relabel: neighborhood is empty");
    if (!teacher.trained()) throw ParamError("relabel: teacher has not been trained");
    Neighborhood nb;
    nb.anchor = anchor;
    nb.anchor_class = predict(teacher, anchor);
    nb.samples = std::move(samples);
    nb.soft_targets.reserve(nb.samples.size());
    nb.hard_labels.reserve(nb.samples.size());
    for (const DenseTensor& sample : nb.samples) {
        const DenseTensor proba = predict_proba(teacher, sample);
        std::size_t argmax = 0;
        for (std::size_t j = 1; j < proba.size(); ++j)
            if (proba.data[j] > proba.data[argmax]) argmax = j;
        nb.hard_labels.push_back(argmax == static_cast<std::size_t>(nb.anchor_class) ? 1 : 0);
        nb.soft_targets.push_back(collapse_soft_target(proba, nb.anchor_class));
    }
    return nb;
}

DistillResult distill_loss(const LinearStudent& student, const Neighborhood& neighborhood,
                           float lambda1, float lambda2) {
    if (lambda1 < 0.0f || lambda2 < 0.0f)
        throw ParamError("distill_loss: loss coefficients must be >= 0");
    if (neighborhood.size() == 0) throw ParamError("distill_loss: neighborhood is empty");

    DistillResult result;
    result.grad_w = DenseTensor::zeros(student.w.shape);
    double loss = 0.0;
    double grad_b = 0.0;
    std::vector<double> coeff(neighborhood.size());

    for (std::size_t i = 0; i < neighborhood.size(); ++i) {
        const DenseTensor& x = neighborhood.samples[i];
        const double p = student.prob_keep(x);
        const auto& target = neighborhood.soft_targets[i];
        const double d0 = p - target[0];
        const double d1 = (1.0 - p) - target[1];
        const double soft = std::sqrt(d0 * d0 + d1 * d1 + 1e-12);
        const double y = neighborhood.hard_labels[i];
        const double hard = std::abs(p - y);

        loss += lambda1 * soft + lambda2 * hard;

        // d soft / dp and d hard / dp; p is strictly inside (0,1) so the
        // L1 term is differentiable whenever y is 0 or 1.
        const double dsoft = (d0 - d1) / soft;
        const double dhard = p > y ? 1.0 : (p < y ? -1.0 : 0.0);
        coeff[i] = (lambda1 * dsoft + lambda2 * dhard) * p * (1.0 - p);
        grad_b += coeff[i];
    }

    for (std::size_t i = 0; i < neighborhood.size(); ++i) {
        const float c = static_cast<float>(coeff[i]);
        if (c == 0.0f) continue;
        const DenseTensor& x = neighborhood.samples[i];
        for (std::size_t j = 0; j < result.grad_w.size(); ++j)
            result.grad_w.data[j] += c * x.data[j];
    }

    result.loss = loss;
    result.grad_b = static_cast<float>(grad_b);
    return result;
}

LinearStudent train_student(const Neighborhood& neighborhood, const StudentConfig& config) {
    if (neighborhood.size() < 2)
        throw ParamError("train_student: need at least 2 neighborhood samples");
    const std::size_t d = neighborhood.samples.front().size();
    LinearStudent student;
    student.w = DenseTensor::zeros({d});
    student.b = 0.0f;

    const float scale = config.lr / static_cast<float>(neighborhood.size());
    DistillResult res;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        res = distill_loss(student, neighborhood, config.lambda1, config.lambda2);
        if (!std::isfinite(res.loss))
            throw TrainError("student training diverged at epoch " + std::to_string(epoch + 1) +
                             ": loss is not finite");
        for (std::size_t j = 0; j < d; ++j) student.w.data[j] -= scale * res.grad_w.data[j];
        student.b -= scale * res.grad_b;
    }

    student.final_loss =
        distill_loss(student, neighborhood, config.lambda1, config.lambda2).loss;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < neighborhood.size(); ++i) {
        const int predicted = student.prob_keep(neighborhood.samples[i]) >= 0.5f ? 1 : 0;
        if (predicted == neighborhood.hard_labels[i]) ++correct;
    }
    student.relabel_accuracy = static_cast<double>(correct) / neighborhood.size();
    return student;
}

SaliencyMap saliency_from_weights(const DenseTensor& w, const ImageShape& shape) {
    if (w.size() != shape.flat())
        throw ShapeError("saliency: weight length " + std::to_string(w.size()) +
                         " does not match image shape " + std::to_string(shape.h) + "x" +
                         std::to_string(shape.w) + "x" + std::to_string(shape.c));
    SaliencyMap map;
    map.raw = DenseTensor::zeros({shape.h, shape.w});
    for (std::size_t p = 0; p < shape.pixels(); ++p) {
        float acc = 0.0f;
        for (std::size_t ch = 0; ch < shape.c; ++ch) acc += w.data[p * shape.c + ch];
        map.raw.data[p] = acc;
    }

    const auto [lo, hi] = std::minmax_element(map.raw.data.begin(), map.raw.data.end());
    map.normalized = map.raw;
    if (*hi > *lo) {
        const float span = *hi - *lo;
        for (float& v : map.normalized.data) v = (v - *lo) / span;
    } else {
        for (float& v : map.normalized.data) v = 0.5f;
    }

    map.ordering.resize(shape.pixels());
    std::iota(map.ordering.begin(), map.ordering.end(), std::size_t{0});
    std::stable_sort(map.ordering.begin(), map.ordering.end(),
                     [&](std::size_t a, std::size_t b) { return map.raw.data[a] > map.raw.data[b]; });
    return map;
}

ExplainResult explain(const TeacherModel& teacher, const VaeModel& vae,
                      const DenseTensor& anchor, const ImageShape& shape,
                      const ExplainConfig& config, Rng& rng) {
    if (anchor.size() != shape.flat())
        throw ShapeError("explain: anchor has " + std::to_string(anchor.size()) +
                         " values, shape expects " + std::to_string(shape.flat()));

    ExplainResult result;
    float tau = config.tau;
    const std::size_t min_count = static_cast<std::size_t>(
        std::ceil(config.degenerate_min_frac * static_cast<float>(config.n_samples)));

    for (int attempt = 0;; ++attempt) {
        std::vector<DenseTensor> samples =
            sample_neighborhood(vae, anchor, config.n_samples, tau, rng);
        result.neighborhood = relabel(teacher, anchor, std::move(samples));
        result.neighborhood.tau_used = tau;
        result.retries = attempt;
        const std::size_t kept = result.neighborhood.count_label(1);
        const std::size_t shifted = result.neighborhood.count_label(0);
        if (kept >= min_count && shifted >= min_count) {
            result.degenerate_warning = false;
            break;
        }
        if (attempt == config.max_retries) {
            result.degenerate_warning = true;
            break;
        }
        tau *= 1.5f;
    }

    result.student = train_student(result.neighborhood, config.student);
    result.saliency = saliency_from_weights(result.student.w, shape);
    return result;
}

} // namespace rld
