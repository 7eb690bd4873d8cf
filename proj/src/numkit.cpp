#include "rld/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rld {

// ---------------------------------------------------------------- tensor

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape_, std::vector<float> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    for (std::size_t d : shape)
        if (d == 0) throw ShapeError("tensor dimension must be positive, got " + shape_str(shape));
    if (data.size() != shape_product(shape))
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
}

DenseTensor DenseTensor::zeros(std::vector<std::size_t> shape_) {
    std::size_t n = shape_product(shape_);
    return DenseTensor(std::move(shape_), std::vector<float>(n, 0.0f));
}

DenseTensor DenseTensor::full(std::vector<std::size_t> shape_, float value) {
    std::size_t n = shape_product(shape_);
    return DenseTensor(std::move(shape_), std::vector<float>(n, value));
}

void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                         " vs " + shape_str(b.shape));
}

void require_finite(const DenseTensor& t, const char* what) {
    for (float v : t.data)
        if (!std::isfinite(v))
            throw TrainError(std::string(what) + ": non-finite value encountered");
}

// ------------------------------------------------------------------- rng

namespace {

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

Rng::Rng(std::uint64_t seed) {
    seed_state(seed);
}

void Rng::seed_state(std::uint64_t seed) {
    seed_ = seed;
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl64(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl64(s_[3], 45);
    return result;
}

void Rng::long_jump() {
    static const std::uint64_t kLongJump[4] = {0x76e15d3efefdcbbfULL, 0xc5004e441c522fb3ULL,
                                               0x77710069854ee241ULL, 0x39109bb02acbe635ULL};
    std::uint64_t s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    for (std::uint64_t word : kLongJump) {
        for (int bit = 0; bit < 64; ++bit) {
            if (word & (1ULL << bit)) {
                s0 ^= s_[0];
                s1 ^= s_[1];
                s2 ^= s_[2];
                s3 ^= s_[3];
            }
            next_u64();
        }
    }
    s_[0] = s0;
    s_[1] = s1;
    s_[2] = s2;
    s_[3] = s3;
}

Rng Rng::derive(std::uint64_t stream_id) const {
    Rng out(seed_);
    for (std::uint64_t i = 0; i <= stream_id; ++i) out.long_jump();
    // Tag the substream so further derivation stays deterministic.
    std::uint64_t sm = seed_ ^ rotl64(stream_id + 1, 32);
    out.seed_ = splitmix64(sm);
    return out;
}

double Rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) throw ParamError("next_below: bound must be positive");
    // Unbiased rejection from the top bits.
    const std::uint64_t threshold = (~n + 1) % n; // (2^64 - n) mod n
    for (;;) {
        std::uint64_t x = next_u64();
        if (x >= threshold) return x % n;
    }
}

float Rng::next_normal() {
    // Box-Muller, cosine branch only; u1 in (0,1] keeps the log finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return static_cast<float>(r * std::cos(2.0 * 3.141592653589793 * u2));
}

DenseTensor rng_normal(Rng& rng, std::vector<std::size_t> shape) {
    DenseTensor out = DenseTensor::zeros(std::move(shape));
    for (float& v : out.data) v = rng.next_normal();
    return out;
}

// ------------------------------------------------------------ operations

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: expects rank-2 tensors, got " + shape_str(a.shape) + " and " +
                         shape_str(b.shape));
    if (a.shape[1] != b.shape[0])
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    DenseTensor out = DenseTensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = &a.data[i * k];
        float* orow = &out.data[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const float av = arow[p];
            if (av == 0.0f) continue;
            const float* brow = &b.data[p * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

DenseTensor matmul_nt(const DenseTensor& a, const DenseTensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul_nt: expects rank-2 tensors");
    if (a.shape[1] != b.shape[1])
        throw ShapeError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape) + "^T");
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    DenseTensor out = DenseTensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = &a.data[i * k];
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = &b.data[j * k];
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * brow[p];
            out(i, j) = static_cast<float>(acc);
        }
    }
    return out;
}

DenseTensor matmul_tn(const DenseTensor& a, const DenseTensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul_tn: expects rank-2 tensors");
    if (a.shape[0] != b.shape[0])
        throw ShapeError("matmul_tn: inner dimensions disagree, " + shape_str(a.shape) +
                         "^T vs " + shape_str(b.shape));
    const std::size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
    DenseTensor out = DenseTensor::zeros({m, n});
    for (std::size_t p = 0; p < k; ++p) {
        const float* arow = &a.data[p * m];
        const float* brow = &b.data[p * n];
        for (std::size_t i = 0; i < m; ++i) {
            const float av = arow[i];
            if (av == 0.0f) continue;
            float* orow = &out.data[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

float sigmoid_scalar(float x) {
    if (x >= 0.0f) {
        const float e = std::exp(-x);
        return 1.0f / (1.0f + e);
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

DenseTensor sigmoid(const DenseTensor& x) {
    DenseTensor out = x;
    for (float& v : out.data) v = sigmoid_scalar(v);
    return out;
}

DenseTensor softmax(const DenseTensor& logits) {
    if (logits.rank() != 1 || logits.size() == 0)
        throw ShapeError("softmax: expects a nonempty rank-1 tensor, got " +
                         shape_str(logits.shape));
    DenseTensor out = logits;
    const float maxv = *std::max_element(out.data.begin(), out.data.end());
    double sum = 0.0;
    for (float& v : out.data) {
        v = std::exp(v - maxv);
        sum += v;
    }
    for (float& v : out.data) v = static_cast<float>(v / sum);
    return out;
}

double kl_diag_gaussian_to_standard(const DenseTensor& mu, const DenseTensor& logvar) {
    require_same_shape(mu, logvar, "kl_diag_gaussian_to_standard");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double m = mu.data[i];
        const double lv = logvar.data[i];
        acc += 0.5 * (std::exp(lv) + m * m - 1.0 - lv);
    }
    return acc;
}

void sgd_step(DenseTensor& params, const DenseTensor& grads, float lr) {
    require_same_shape(params, grads, "sgd_step");
    for (std::size_t i = 0; i < params.size(); ++i) params.data[i] -= lr * grads.data[i];
}

DenseTensor tanh_forward(const DenseTensor& x) {
    DenseTensor out = x;
    for (float& v : out.data) v = std::tanh(v);
    return out;
}

DenseTensor tanh_backward(const DenseTensor& y, const DenseTensor& dy) {
    require_same_shape(y, dy, "tanh_backward");
    DenseTensor out = dy;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= 1.0f - y.data[i] * y.data[i];
    return out;
}

DenseTensor relu_forward(const DenseTensor& x) {
    DenseTensor out = x;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

DenseTensor relu_backward(const DenseTensor& x, const DenseTensor& dy) {
    require_same_shape(x, dy, "relu_backward");
    DenseTensor out = dy;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (x.data[i] <= 0.0f) out.data[i] = 0.0f;
    return out;
}

double bce_with_logits(const DenseTensor& logits, const DenseTensor& targets,
                       DenseTensor* dlogits) {
    require_same_shape(logits, targets, "bce_with_logits");
    double loss = 0.0;
    if (dlogits) *dlogits = DenseTensor::zeros(logits.shape);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double a = logits.data[i];
        const double t = targets.data[i];
        // max(a,0) - a*t + log(1 + exp(-|a|))
        loss += std::max(a, 0.0) - a * t + std::log1p(std::exp(-std::abs(a)));
        if (dlogits) dlogits->data[i] = sigmoid_scalar(logits.data[i]) - targets.data[i];
    }
    return loss;
}

double softmax_cross_entropy(const DenseTensor& logits, const std::vector<int>& labels,
                             DenseTensor* dlogits) {
    if (logits.rank() != 2)
        throw ShapeError("softmax_cross_entropy: logits must be rank-2, got " +
                         shape_str(logits.shape));
    const std::size_t n = logits.shape[0], k = logits.shape[1];
    if (labels.size() != n)
        throw ShapeError("softmax_cross_entropy: batch has " + std::to_string(n) +
                         " rows but " + std::to_string(labels.size()) + " labels");
    if (dlogits) *dlogits = DenseTensor::zeros(logits.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw ParamError("softmax_cross_entropy: label " + std::to_string(label) +
                             " out of range for " + std::to_string(k) + " classes");
        const float* row = &logits.data[i * k];
        const float maxv = *std::max_element(row, row + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - maxv);
        const double logz = std::log(sum) + maxv;
        loss += logz - row[label];
        if (dlogits) {
            float* drow = &dlogits->data[i * k];
            for (std::size_t j = 0; j < k; ++j) {
                const double p = std::exp(static_cast<double>(row[j]) - logz);
                drow[j] = static_cast<float>((p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) / n);
            }
        }
    }
    return loss / n;
}

// ---------------------------------------------------------- affine layer

Affine Affine::init(std::size_t in, std::size_t out, Rng& rng) {
    Affine layer;
    layer.w = DenseTensor::zeros({in, out});
    const float scale = 1.0f / std::sqrt(static_cast<float>(in));
    for (float& v : layer.w.data) v = scale * rng.next_normal();
    layer.b = DenseTensor::zeros({out});
    layer.zero_grad();
    return layer;
}

DenseTensor Affine::forward(const DenseTensor& x) const {
    if (x.rank() != 2 || x.shape[1] != w.shape[0])
        throw ShapeError("affine forward: input " + shape_str(x.shape) +
                         " does not match weights " + shape_str(w.shape));
    DenseTensor y = matmul(x, w);
    const std::size_t n = y.shape[0], out = y.shape[1];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j) y(i, j) += b.data[j];
    return y;
}

DenseTensor Affine::backward(const DenseTensor& x, const DenseTensor& dy) {
    DenseTensor gw_new = matmul_tn(x, dy);
    for (std::size_t i = 0; i < gw.size(); ++i) gw.data[i] += gw_new.data[i];
    const std::size_t n = dy.shape[0], out = dy.shape[1];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j) gb.data[j] += dy(i, j);
    return matmul_nt(dy, w);
}

void Affine::zero_grad() {
    gw = DenseTensor::zeros(w.shape);
    gb = DenseTensor::zeros(b.shape);
}

void Affine::step(float lr) {
    sgd_step(w, gw, lr);
    sgd_step(b, gb, lr);
    zero_grad();
}

} // namespace rld
