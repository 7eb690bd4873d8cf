#pragma once

// The classifier being explained: a small feed-forward network exposing
// hard predictions and soft probability distributions. It is trained once
// and treated as a black box afterwards.

#include "rld/dataio.hpp"
#include "rld/numkit.hpp"

#include <vector>

namespace rld {

struct TeacherConfig {
    std::size_t hidden_dim = 128;
    std::size_t epochs = 40;
    std::size_t batch_size = 64;
    float lr = 0.1f;
};

struct TeacherModel {
    Affine l1; // input -> hidden, ReLU
    Affine l2; // hidden -> classes
    std::size_t input_dim = 0;
    int num_classes = 0;

    std::size_t epochs_trained = 0;
    double train_accuracy = 0.0;
    std::vector<double> epoch_losses;

    bool trained() const { return epochs_trained > 0; }
};

TeacherModel make_teacher(std::size_t input_dim, int num_classes, const TeacherConfig& config,
                          Rng& rng);

/// Minibatch SGD on softmax cross-entropy; records train accuracy.
TeacherModel train_teacher(const ImageDataset& dataset, const TeacherConfig& config, Rng& rng);

DenseTensor teacher_logits(const TeacherModel& model, const DenseTensor& x);

/// Argmax of the logits; ties break toward the lowest class index.
int predict(const TeacherModel& model, const DenseTensor& x);

/// Softmax of the logits.
DenseTensor predict_proba(const TeacherModel& model, const DenseTensor& x);

ModelArchive teacher_to_archive(const TeacherModel& model);
TeacherModel teacher_from_archive(const ModelArchive& archive);

} // namespace rld
