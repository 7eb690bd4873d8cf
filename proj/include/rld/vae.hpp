#pragma once

// Variational autoencoder used as the neighborhood generator: encode an
// anchor image, perturb the latent vector, decode synthetic images.
// Dense layers only: encoder D -> hidden (tanh) with mean/log-variance
// heads, decoder latent -> hidden (tanh) -> D with a sigmoid output.

#include "rld/dataio.hpp"
#include "rld/numkit.hpp"

#include <vector>

namespace rld {

struct VaeConfig {
    std::size_t latent_dim = 16;
    std::size_t hidden_dim = 128;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    float lr = 1e-3f;
};

/// Approximate posterior parameters for one image. Log-variance entries
/// are clamped to [-10, 10].
struct LatentStats {
    DenseTensor mu;
    DenseTensor logvar;
};

struct VaeModel {
    Affine enc1;
    Affine mu_head;
    Affine lv_head;
    Affine dec1;
    Affine dec2;
    std::size_t input_dim = 0;
    std::size_t latent_dim = 0;

    std::size_t epochs_trained = 0;
    double final_loss = 0.0;
    std::vector<double> epoch_losses;

    bool trained() const { return epochs_trained > 0; }
};

/// Freshly initialized (untrained) model; weight draws come from rng.
VaeModel make_vae(std::size_t input_dim, const VaeConfig& config, Rng& rng);

/// Posterior (mu, logvar) of an image whose flattened length is input_dim.
LatentStats encode(const VaeModel& model, const DenseTensor& x);

/// z = mu + tau * eps (.) exp(0.5 * logvar).
DenseTensor reparameterize(const LatentStats& stats, const DenseTensor& eps, float tau);

/// Synthetic image for latent z; all entries in (0,1).
DenseTensor decode(const VaeModel& model, const DenseTensor& z);

/// Negative ELBO, mean per example over the batch: pixelwise binary
/// cross-entropy of the reconstruction plus the KL term. x is batch x D
/// (or a single flat image), eps is a matching standard-normal batch with
/// latent_dim columns. Gradients of the mean loss accumulate into the
/// model's layer buffers.
double elbo_loss(VaeModel& model, const DenseTensor& x, const DenseTensor& eps);

/// Minibatch SGD on elbo_loss; records the per-epoch mean loss. Throws
/// TrainError naming the epoch if the loss turns non-finite.
VaeModel train_vae(const ImageDataset& dataset, const VaeConfig& config, Rng& rng);

/// n decoded perturbations of the anchor's latent representation, each
/// with an independent noise draw. Requires a trained model and n >= 2.
std::vector<DenseTensor> sample_neighborhood(const VaeModel& model, const DenseTensor& anchor,
                                             std::size_t n, float tau, Rng& rng);

ModelArchive vae_to_archive(const VaeModel& model);
VaeModel vae_from_archive(const ModelArchive& archive);

} // namespace rld
