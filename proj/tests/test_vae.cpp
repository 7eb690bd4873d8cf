#include "doctest.h"

#include "helpers.hpp"
#include "rld/dataio.hpp"
#include "rld/vae.hpp"

#include <cmath>

using namespace rld;
using rldtest::fd_mismatch;
using rldtest::temp_dir;

namespace {

VaeConfig tiny_config() {
    VaeConfig config;
    config.latent_dim = 3;
    config.hidden_dim = 8;
    config.epochs = 4;
    config.batch_size = 8;
    return config;
}

ImageDataset tiny_dataset(std::uint64_t seed, std::size_t n = 24) {
    Rng rng(seed);
    return synth_shapes(n, 16, 16, 2, rng);
}

} // namespace

TEST_SUITE("vae") {

TEST_CASE("encode clamps logvar, is deterministic, and checks shape") {
    Rng rng(8);
    const VaeModel model = make_vae(16, tiny_config(), rng);
    const DenseTensor x = DenseTensor::full({16}, 0.0f);
    const LatentStats a = encode(model, x);
    const LatentStats b = encode(model, x);
    CHECK(a.mu.data == b.mu.data);
    CHECK(a.logvar.data == b.logvar.data);
    for (float v : a.logvar.data) {
        CHECK(v >= -10.0f);
        CHECK(v <= 10.0f);
        CHECK(std::isfinite(v));
    }
    for (float v : a.mu.data) CHECK(std::isfinite(v));
    CHECK(a.mu.size() == 3);
    CHECK_THROWS_AS(encode(model, DenseTensor::zeros({5})), ShapeError);
}

TEST_CASE("reparameterize closed forms") {
    const LatentStats stats{DenseTensor({1}, {1.0f}), DenseTensor({1}, {0.0f})};
    const DenseTensor eps({1}, {2.0f});
    CHECK(reparameterize(stats, eps, 1.0f).data[0] == 3.0f);
    CHECK(reparameterize(stats, DenseTensor({1}, {0.0f}), 1.0f).data[0] == 1.0f);
    CHECK(reparameterize(stats, eps, 0.0f).data[0] == 1.0f);
    CHECK_THROWS_AS(reparameterize(stats, DenseTensor::zeros({2}), 1.0f), ShapeError);
}

TEST_CASE("reparameterize is affine in eps for power-of-two scales") {
    Rng rng(12);
    const LatentStats stats{rng_normal(rng, {5}), rng_normal(rng, {5})};
    const DenseTensor eps = rng_normal(rng, {5});
    DenseTensor eps2 = eps;
    for (float& v : eps2.data) v *= 2.0f;
    const DenseTensor z1 = reparameterize(stats, eps, 1.0f);
    const DenseTensor z2 = reparameterize(stats, eps2, 1.0f);
    // the offsets double up to the rounding of the final mu addition
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(std::abs(z2.data[i] - stats.mu.data[i] -
                       2.0f * (z1.data[i] - stats.mu.data[i])) <= 1e-5f);
}

TEST_CASE("decode stays strictly inside (0,1)") {
    Rng rng(9);
    const VaeModel model = make_vae(16, tiny_config(), rng);
    const DenseTensor z = rng_normal(rng, {3});
    const DenseTensor x1 = decode(model, z);
    const DenseTensor x2 = decode(model, z);
    CHECK(x1.data == x2.data);
    CHECK(x1.size() == 16);
    for (float v : x1.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    CHECK_THROWS_AS(decode(model, DenseTensor::zeros({2})), ShapeError);
}

TEST_CASE("elbo is nonnegative and its gradients match finite differences") {
    Rng rng(21);
    VaeModel model = make_vae(16, tiny_config(), rng);
    DenseTensor x = rng_normal(rng, {2, 16});
    for (float& v : x.data) v = 1.0f / (1.0f + std::exp(-v)); // pixels in (0,1)
    const DenseTensor eps = rng_normal(rng, {2, 3});

    Affine* layers[5] = {&model.enc1, &model.mu_head, &model.lv_head, &model.dec1, &model.dec2};
    for (Affine* l : layers) l->zero_grad();
    const double loss = elbo_loss(model, x, eps);
    CHECK(loss >= 0.0);
    CHECK(std::isfinite(loss));

    // snapshot every accumulator before the probe calls start adding to them;
    // atol sits above the float32 finite-difference noise floor of this loss
    std::vector<DenseTensor> gws, gbs;
    for (Affine* l : layers) {
        gws.push_back(l->gw);
        gbs.push_back(l->gb);
    }
    auto recompute = [&] { return elbo_loss(model, x, eps); };
    for (std::size_t li = 0; li < 5; ++li) {
        Affine* l = layers[li];
        auto issue_w = fd_mismatch(l->w.data.data(), gws[li].data.data(), l->w.size(), recompute,
                                   1e-3, 1e-3, 1e-3);
        CHECK(!issue_w.has_value());
        auto issue_b = fd_mismatch(l->b.data.data(), gbs[li].data.data(), l->b.size(), recompute,
                                   1e-3, 1e-3, 1e-3);
        CHECK(!issue_b.has_value());
    }
}

TEST_CASE("train_vae learns, repeats per seed, and honors zero epochs") {
    const ImageDataset data = tiny_dataset(31);
    VaeConfig config = tiny_config();
    config.epochs = 6;

    Rng r1(77);
    const VaeModel m1 = train_vae(data, config, r1);
    CHECK(m1.epochs_trained == 6);
    REQUIRE(m1.epoch_losses.size() == 6);
    CHECK(m1.epoch_losses.back() < m1.epoch_losses.front());
    CHECK(m1.final_loss == m1.epoch_losses.back());
    CHECK(m1.trained());

    Rng r2(77);
    const VaeModel m2 = train_vae(data, config, r2);
    CHECK(m1.enc1.w.data == m2.enc1.w.data);
    CHECK(m1.dec2.b.data == m2.dec2.b.data);

    VaeConfig zero = config;
    zero.epochs = 0;
    Rng r3(77), r4(77);
    const VaeModel untrained = train_vae(data, zero, r3);
    const VaeModel fresh = make_vae(data.shape().flat(), zero, r4);
    CHECK_FALSE(untrained.trained());
    CHECK(untrained.enc1.w.data == fresh.enc1.w.data);
    CHECK(untrained.dec1.w.data == fresh.dec1.w.data);

    Rng r5(1);
    CHECK_THROWS_AS(train_vae(ImageDataset{}, config, r5), ParamError);
}

TEST_CASE("training diverges loudly at an absurd learning rate") {
    const ImageDataset data = tiny_dataset(32);
    VaeConfig config = tiny_config();
    config.lr = 1e10f;
    config.epochs = 8;
    Rng rng(5);
    CHECK_THROWS_WITH_AS(train_vae(data, config, rng), doctest::Contains("epoch"), TrainError);
}

TEST_CASE("sample_neighborhood spreads with tau and needs a trained model") {
    const ImageDataset data = tiny_dataset(33);
    VaeConfig config = tiny_config();
    Rng rng(42);
    const VaeModel model = train_vae(data, config, rng);
    const DenseTensor anchor = data.image(0);

    Rng s1(9), s2(9);
    const auto a = sample_neighborhood(model, anchor, 8, 1.0f, s1);
    const auto b = sample_neighborhood(model, anchor, 8, 1.0f, s2);
    REQUIRE(a.size() == 8);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].data == b[i].data);

    // tau = 0 collapses every sample onto decode(mu)
    Rng s3(9);
    const auto frozen = sample_neighborhood(model, anchor, 4, 0.0f, s3);
    const DenseTensor center = decode(model, encode(model, anchor).mu);
    for (const auto& s : frozen)
        for (std::size_t i = 0; i < s.size(); ++i)
            CHECK(s.data[i] == doctest::Approx(center.data[i]).epsilon(1e-6));

    // mean pairwise distance grows with tau
    auto mean_pairwise = [](const std::vector<DenseTensor>& xs) {
        double total = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::size_t j = i + 1; j < xs.size(); ++j) {
                double d2 = 0.0;
                for (std::size_t p = 0; p < xs[i].size(); ++p) {
                    const double d = xs[i].data[p] - xs[j].data[p];
                    d2 += d * d;
                }
                total += std::sqrt(d2);
                ++pairs;
            }
        return total / static_cast<double>(pairs);
    };
    Rng s4(11), s5(11);
    const auto narrow = sample_neighborhood(model, anchor, 24, 0.5f, s4);
    const auto wide = sample_neighborhood(model, anchor, 24, 2.0f, s5);
    CHECK(mean_pairwise(wide) > mean_pairwise(narrow));

    Rng s6(1);
    CHECK_THROWS_AS(sample_neighborhood(model, anchor, 1, 1.0f, s6), ParamError);
    VaeModel raw = make_vae(data.shape().flat(), config, s6);
    CHECK_THROWS_AS(sample_neighborhood(raw, anchor, 4, 1.0f, s6), ParamError);
}

TEST_CASE("vae archive round-trip preserves parameters and metadata") {
    const ImageDataset data = tiny_dataset(34);
    Rng rng(13);
    const VaeModel model = train_vae(data, tiny_config(), rng);
    const ModelArchive archive = vae_to_archive(model);
    const char* names[] = {"enc.w1", "enc.b1", "enc.mu.w", "enc.mu.b", "enc.lv.w",
                           "enc.lv.b", "dec.w1", "dec.b1", "dec.w2", "dec.b2"};
    for (const char* name : names) CHECK(archive.has(name));

    const std::string dir = temp_dir("vae_archive");
    save_model(archive, dir + "/v.rldm");
    const VaeModel back = vae_from_archive(load_model(dir + "/v.rldm"));
    CHECK(back.input_dim == model.input_dim);
    CHECK(back.latent_dim == model.latent_dim);
    CHECK(back.trained());
    CHECK(back.enc1.w.data == model.enc1.w.data);
    CHECK(back.mu_head.b.data == model.mu_head.b.data);
    CHECK(back.lv_head.w.data == model.lv_head.w.data);
    CHECK(back.dec2.w.data == model.dec2.w.data);

    const DenseTensor anchor = data.image(1);
    const LatentStats s1 = encode(model, anchor);
    const LatentStats s2 = encode(back, anchor);
    CHECK(s1.mu.data == s2.mu.data);
}

} // TEST_SUITE
