#include "rld/vae.hpp"

#include <algorithm>
#include <cmath>

namespace rld {

namespace {

constexpr float kLogvarClamp = 10.0f;

DenseTensor as_row_batch(const DenseTensor& x, std::size_t dim, const char* what) {
    if (x.rank() == 2 && x.shape[1] == dim) return x;
    if (x.size() == dim) {
        DenseTensor out = x;
        out.shape = {1, dim};
        return out;
    }
    throw ShapeError(std::string(what) + ": input " + shape_str(x.shape) +
                     " does not match row length " + std::to_string(dim));
}

} // namespace

VaeModel make_vae(std::size_t input_dim, const VaeConfig& config, Rng& rng) {
    VaeModel model;
    model.input_dim = input_dim;
    model.latent_dim = config.latent_dim;
    model.enc1 = Affine::init(input_dim, config.hidden_dim, rng);
    model.mu_head = Affine::init(config.hidden_dim, config.latent_dim, rng);
    model.lv_head = Affine::init(config.hidden_dim, config.latent_dim, rng);
    model.dec1 = Affine::init(config.latent_dim, config.hidden_dim, rng);
    model.dec2 = Affine::init(config.hidden_dim, input_dim, rng);
    return model;
}

LatentStats encode(const VaeModel& model, const DenseTensor& x) {
    if (x.size() != model.input_dim)
        throw ShapeError("encode: image has " + std::to_string(x.size()) +
                         " values, model expects " + std::to_string(model.input_dim));
    DenseTensor row = x;
    row.shape = {1, model.input_dim};
    const DenseTensor h = tanh_forward(model.enc1.forward(row));
    DenseTensor mu = model.mu_head.forward(h);
    DenseTensor lv = model.lv_head.forward(h);
    mu.shape = {model.latent_dim};
    lv.shape = {model.latent_dim};
    for (float& v : lv.data) v = std::clamp(v, -kLogvarClamp, kLogvarClamp);
    return LatentStats{std::move(mu), std::move(lv)};
}

DenseTensor reparameterize(const LatentStats& stats, const DenseTensor& eps, float tau) {
    require_same_shape(stats.mu, stats.logvar, "reparameterize");
    if (eps.size() != stats.mu.size())
        throw ShapeError("reparameterize: noise length " + std::to_string(eps.size()) +
                         " does not match latent length " + std::to_string(stats.mu.size()));
    if (tau < 0.0f) throw ParamError("reparameterize: tau must be >= 0");
    DenseTensor z = stats.mu;
    for (std::size_t i = 0; i < z.size(); ++i)
        z.data[i] += tau * eps.data[i] * std::exp(0.5f * stats.logvar.data[i]);
    return z;
}

DenseTensor decode(const VaeModel& model, const DenseTensor& z) {
    if (z.size() != model.latent_dim)
        throw ShapeError("decode: latent has " + std::to_string(z.size()) +
                         " values, model expects " + std::to_string(model.latent_dim));
    DenseTensor row = z;
    row.shape = {1, model.latent_dim};
    const DenseTensor d = tanh_forward(model.dec1.forward(row));
    DenseTensor out = sigmoid(model.dec2.forward(d));
    out.shape = {model.input_dim};
    return out;
}

double elbo_loss(VaeModel& model, const DenseTensor& x, const DenseTensor& eps) {
    const DenseTensor xb = as_row_batch(x, model.input_dim, "elbo_loss");
    const DenseTensor eb = as_row_batch(eps, model.latent_dim, "elbo_loss noise");
    const std::size_t n = xb.shape[0];
    if (eb.shape[0] != n)
        throw ShapeError("elbo_loss: " + std::to_string(n) + " images but " +
                         std::to_string(eb.shape[0]) + " noise rows");
    const float inv_n = 1.0f / static_cast<float>(n);

    // forward, reparameterized with tau = 1
    const DenseTensor h = tanh_forward(model.enc1.forward(xb));
    const DenseTensor mu = model.mu_head.forward(h);
    const DenseTensor lv_raw = model.lv_head.forward(h);
    DenseTensor lv = lv_raw;
    for (float& v : lv.data) v = std::clamp(v, -kLogvarClamp, kLogvarClamp);
    DenseTensor sd = lv; // exp(0.5 * logvar)
    for (float& v : sd.data) v = std::exp(0.5f * v);
    DenseTensor z = mu;
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] += eb.data[i] * sd.data[i];
    const DenseTensor d = tanh_forward(model.dec1.forward(z));
    const DenseTensor logits = model.dec2.forward(d);

    DenseTensor dlogits;
    double loss = bce_with_logits(logits, xb, &dlogits);
    loss += kl_diag_gaussian_to_standard(mu, lv);
    const double mean_loss = loss / n;

    // backward
    for (float& v : dlogits.data) v *= inv_n;
    DenseTensor dd = model.dec2.backward(d, dlogits);
    dd = tanh_backward(d, dd);
    DenseTensor dz = model.dec1.backward(z, dd);

    // reparameterization plus KL term
    DenseTensor dmu = dz;
    DenseTensor dlv = DenseTensor::zeros(lv.shape);
    for (std::size_t i = 0; i < dz.size(); ++i) {
        dlv.data[i] = dz.data[i] * eb.data[i] * 0.5f * sd.data[i];
        dmu.data[i] += inv_n * mu.data[i];
        dlv.data[i] += inv_n * 0.5f * (std::exp(lv.data[i]) - 1.0f);
        if (std::abs(lv_raw.data[i]) >= kLogvarClamp) dlv.data[i] = 0.0f; // clamp gate
    }

    DenseTensor dh = model.mu_head.backward(h, dmu);
    const DenseTensor dh2 = model.lv_head.backward(h, dlv);
    for (std::size_t i = 0; i < dh.size(); ++i) dh.data[i] += dh2.data[i];
    model.enc1.backward(xb, tanh_backward(h, dh));
    return mean_loss;
}

VaeModel train_vae(const ImageDataset& dataset, const VaeConfig& config, Rng& rng) {
    if (dataset.count() == 0) throw ParamError("train_vae: dataset is empty");
    const std::size_t input_dim = dataset.shape().flat();
    VaeModel model = make_vae(input_dim, config, rng);
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
            for (std::size_t r = 0; r < bn; ++r) {
                const DenseTensor img = dataset.image(order[start + r]);
                std::copy(img.data.begin(), img.data.end(), xb.data.begin() + r * input_dim);
            }
            const DenseTensor eb = rng_normal(rng, {bn, config.latent_dim});
            const double batch_loss = elbo_loss(model, xb, eb);
            if (!std::isfinite(batch_loss))
                throw TrainError("vae training diverged at epoch " + std::to_string(epoch + 1) +
                                 ": loss is not finite");
            epoch_loss += batch_loss * bn;
            model.enc1.step(config.lr);
            model.mu_head.step(config.lr);
            model.lv_head.step(config.lr);
            model.dec1.step(config.lr);
            model.dec2.step(config.lr);
        }
        model.epoch_losses.push_back(epoch_loss / n);
    }
    model.epochs_trained = config.epochs;
    model.final_loss = model.epoch_losses.empty() ? 0.0 : model.epoch_losses.back();
    return model;
}

std::vector<DenseTensor> sample_neighborhood(const VaeModel& model, const DenseTensor& anchor,
                                             std::size_t n, float tau, Rng& rng) {
    if (n < 2) throw ParamError("sample_neighborhood: need at least 2 samples");
    if (!model.trained()) throw ParamError("sample_neighborhood: model has not been trained");
    const LatentStats stats = encode(model, anchor);
    std::vector<DenseTensor> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const DenseTensor eps = rng_normal(rng, {model.latent_dim});
        samples.push_back(decode(model, reparameterize(stats, eps, tau)));
    }
    return samples;
}

ModelArchive vae_to_archive(const VaeModel& model) {
    ModelArchive archive;
    archive.add("enc.w1", model.enc1.w);
    archive.add("enc.b1", model.enc1.b);
    archive.add("enc.mu.w", model.mu_head.w);
    archive.add("enc.mu.b", model.mu_head.b);
    archive.add("enc.lv.w", model.lv_head.w);
    archive.add("enc.lv.b", model.lv_head.b);
    archive.add("dec.w1", model.dec1.w);
    archive.add("dec.b1", model.dec1.b);
    archive.add("dec.w2", model.dec2.w);
    archive.add("dec.b2", model.dec2.b);
    archive.add_scalar("meta.epochs", static_cast<float>(model.epochs_trained));
    archive.add_scalar("meta.final_loss", static_cast<float>(model.final_loss));
    return archive;
}

VaeModel vae_from_archive(const ModelArchive& archive) {
    VaeModel model;
    model.enc1.w = archive.tensor("enc.w1");
    model.enc1.b = archive.tensor("enc.b1");
    model.mu_head.w = archive.tensor("enc.mu.w");
    model.mu_head.b = archive.tensor("enc.mu.b");
    model.lv_head.w = archive.tensor("enc.lv.w");
    model.lv_head.b = archive.tensor("enc.lv.b");
    model.dec1.w = archive.tensor("dec.w1");
    model.dec1.b = archive.tensor("dec.b1");
    model.dec2.w = archive.tensor("dec.w2");
    model.dec2.b = archive.tensor("dec.b2");
    model.input_dim = model.enc1.w.shape[0];
    model.latent_dim = model.mu_head.w.shape[1];
    // Archives without metadata are treated as trained checkpoints.
    model.epochs_trained = archive.has("meta.epochs")
                               ? static_cast<std::size_t>(archive.scalar("meta.epochs"))
                               : 1;
    model.final_loss = archive.has("meta.final_loss") ? archive.scalar("meta.final_loss") : 0.0;
    model.enc1.zero_grad();
    model.mu_head.zero_grad();
    model.lv_head.zero_grad();
    model.dec1.zero_grad();
    model.dec2.zero_grad();
    return model;
}

} // namespace rld
