#include "rld/teacher.hpp"

#include <algorithm>
#include <cmath>

namespace rld {

TeacherModel make_teacher(std::size_t input_dim, int num_classes, const TeacherConfig& config,
                          Rng& rng) {
    if (num_classes < 2)
        throw ParamError("teacher: need at least 2 classes, got " + std::to_string(num_classes));
    TeacherModel model;
    model.input_dim = input_dim;
    model.num_classes = num_classes;
    model.l1 = Affine::init(input_dim, config.hidden_dim, rng);
    model.l2 = Affine::init(config.hidden_dim, static_cast<std::size_t>(num_classes), rng);
    return model;
}

TeacherModel train_teacher(const ImageDataset& dataset, const TeacherConfig& config, Rng& rng) {
    if (dataset.count() == 0) throw ParamError("train_teacher: dataset is empty");
    for (int label : dataset.labels)
        if (label < 0 || label >= dataset.num_classes)
            throw ParamError("train_teacher: label " + std::to_string(label) +
                             " outside [0, " + std::to_string(dataset.num_classes) + ")");
    const std::size_t input_dim = dataset.shape().flat();
    TeacherModel model = make_teacher(input_dim, dataset.num_classes, config, rng);
    const std::size_t n = dataset.count();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t bn = std::min(config.batch_size, n - start);
            DenseTensor xb = DenseTensor::zeros({bn, input_dim});
            std::vector<int> yb(bn);
            for (std::size_t r = 0; r < bn; ++r) {
                const DenseTensor img = dataset.image(order[start + r]);
                std::copy(img.data.begin(), img.data.end(), xb.data.begin() + r * input_dim);
                yb[r] = dataset.labels[order[start + r]];
            }
            const DenseTensor a1 = model.l1.forward(xb);
            const DenseTensor h = relu_forward(a1);
            const DenseTensor logits = model.l2.forward(h);
            DenseTensor dlogits;
            const double batch_loss = softmax_cross_entropy(logits, yb, &dlogits);
            if (!std::isfinite(batch_loss))
                throw TrainError("teacher training diverged at epoch " +
                                 std::to_string(epoch + 1) + ": loss is not finite");
            const DenseTensor dh = model.l2.backward(h, dlogits);
            model.l1.backward(xb, relu_backward(a1, dh));
            model.l1.step(config.lr);
            model.l2.step(config.lr);
            epoch_loss += batch_loss * bn;
        }
        model.epoch_losses.push_back(epoch_loss / n);
    }
    model.epochs_trained = config.epochs;

    if (config.epochs > 0) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (predict(model, dataset.image(i)) == dataset.labels[i]) ++correct;
        model.train_accuracy = static_cast<double>(correct) / n;
    }
    return model;
}

DenseTensor teacher_logits(const TeacherModel& model, const DenseTensor& x) {
    if (x.size() != model.input_dim)
        throw ShapeError("teacher: image has " + std::to_string(x.size()) +
                         " values, model expects " + std::to_string(model.input_dim));
    DenseTensor row = x;
    row.shape = {1, model.input_dim};
    DenseTensor logits = model.l2.forward(relu_forward(model.l1.forward(row)));
    logits.shape = {static_cast<std::size_t>(model.num_classes)};
    return logits;
}

int predict(const TeacherModel& model, const DenseTensor& x) {
    const DenseTensor logits = teacher_logits(model, x);
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j)
        if (logits.data[j] > logits.data[best]) best = j;
    return static_cast<int>(best);
}

DenseTensor predict_proba(const TeacherModel& model, const DenseTensor& x) {
    return softmax(teacher_logits(model, x));
}

ModelArchive teacher_to_archive(const TeacherModel& model) {
    ModelArchive archive;
    archive.add("t.w1", model.l1.w);
    archive.add("t.b1", model.l1.b);
    archive.add("t.w2", model.l2.w);
    archive.add("t.b2", model.l2.b);
    archive.add_scalar("meta.epochs", static_cast<float>(model.epochs_trained));
    archive.add_scalar("meta.accuracy", static_cast<float>(model.train_accuracy));
    return archive;
}

TeacherModel teacher_from_archive(const ModelArchive& archive) {
    TeacherModel model;
    model.l1.w = archive.tensor("t.w1");
    model.l1.b = archive.tensor("t.b1");
    model.l2.w = archive.tensor("t.w2");
    model.l2.b = archive.tensor("t.b2");
    model.input_dim = model.l1.w.shape[0];
    model.num_classes = static_cast<int>(model.l2.w.shape[1]);
    model.epochs_trained = archive.has("meta.epochs")
                               ? static_cast<std::size_t>(archive.scalar("meta.epochs"))
                               : 1;
    model.train_accuracy = archive.has("meta.accuracy") ? archive.scalar("meta.accuracy") : 0.0;
    model.l1.zero_grad();
    model.l2.zero_grad();
    return model;
}

} // namespace rld
