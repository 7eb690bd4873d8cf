#pragma once

// Dense numeric kernel: tensors, a seeded PRNG, activations, losses and
// plain SGD. Everything is float32 with double accumulation in reductions,
// single-threaded and deterministic for a fixed seed.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rld {

// ---------------------------------------------------------------- errors

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParamError : std::runtime_error {
    explicit ParamError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------- tensor

/// Shape-tagged contiguous row-major array of float32.
struct DenseTensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    DenseTensor() = default;
    DenseTensor(std::vector<std::size_t> shape_, std::vector<float> data_);

    static DenseTensor zeros(std::vector<std::size_t> shape_);
    static DenseTensor full(std::vector<std::size_t> shape_, float value);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    // rank-2 element access
    float& operator()(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool same_shape(const DenseTensor& other) const { return shape == other.shape; }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

/// Throws ShapeError naming both shapes when they differ.
void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* what);

/// Throws TrainError if any entry is NaN or infinite.
void require_finite(const DenseTensor& t, const char* what);

// ------------------------------------------------------------------- rng

/// xoshiro256++ seeded via splitmix64 expansion of a 64-bit seed.
/// Identical seeds reproduce identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Disjoint substream: reseeds from the master seed and applies
    /// (stream_id + 1) xoshiro256 long-jumps, so distinct stream ids
    /// never overlap for any realistic draw count.
    Rng derive(std::uint64_t stream_id) const;

    std::uint64_t next_u64();

    /// Uniform in [0,1) with 53 random bits.
    double next_unit();

    /// Uniform in {0, ..., n-1}; n must be positive.
    std::uint64_t next_below(std::uint64_t n);

    /// Standard normal via Box-Muller (two uniforms per draw, no cache).
    float next_normal();

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> s_{};

    void seed_state(std::uint64_t seed);
    void long_jump();
};

/// Tensor of i.i.d. standard normals drawn from rng.
DenseTensor rng_normal(Rng& rng, std::vector<std::size_t> shape);

// ------------------------------------------------------------ operations

/// Row-major matrix product of two rank-2 tensors.
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);
/// a * b^T
DenseTensor matmul_nt(const DenseTensor& a, const DenseTensor& b);
/// a^T * b
DenseTensor matmul_tn(const DenseTensor& a, const DenseTensor& b);

/// Elementwise 1/(1+exp(-x)), stable for |x| up to a few hundred.
DenseTensor sigmoid(const DenseTensor& x);
float sigmoid_scalar(float x);

/// Shift-invariant softmax over a rank-1 tensor.
DenseTensor softmax(const DenseTensor& logits);

/// KL(N(mu, diag(exp(logvar))) || N(0, I)), summed over dimensions.
double kl_diag_gaussian_to_standard(const DenseTensor& mu, const DenseTensor& logvar);

/// In-place params -= lr * grads.
void sgd_step(DenseTensor& params, const DenseTensor& grads, float lr);

DenseTensor tanh_forward(const DenseTensor& x);
/// Given y = tanh(x) and dL/dy, returns dL/dx.
DenseTensor tanh_backward(const DenseTensor& y, const DenseTensor& dy);
DenseTensor relu_forward(const DenseTensor& x);
DenseTensor relu_backward(const DenseTensor& x, const DenseTensor& dy);

/// Pixelwise binary cross-entropy from pre-sigmoid logits, summed over all
/// entries. When dlogits is non-null it receives sigmoid(logits) - targets.
double bce_with_logits(const DenseTensor& logits, const DenseTensor& targets,
                       DenseTensor* dlogits);

/// Mean softmax cross-entropy over a batch of logit rows. When dlogits is
/// non-null it receives (softmax - onehot) / batch.
double softmax_cross_entropy(const DenseTensor& logits, const std::vector<int>& labels,
                             DenseTensor* dlogits);

// ---------------------------------------------------------- affine layer

/// Fully connected layer with gradient accumulators for hand-derived
/// backprop. Weights are in x out, row-major.
struct Affine {
    DenseTensor w;
    DenseTensor b;
    DenseTensor gw;
    DenseTensor gb;

    static Affine init(std::size_t in, std::size_t out, Rng& rng);

    /// x is batch x in; returns batch x out.
    DenseTensor forward(const DenseTensor& x) const;

    /// Accumulates gw += x^T dy and gb += column sums of dy; returns dx.
    DenseTensor backward(const DenseTensor& x, const DenseTensor& dy);

    void zero_grad();
    /// SGD update from the accumulated gradients, then clears them.
    void step(float lr);
};

} // namespace rld
