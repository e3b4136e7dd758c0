#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace a3rl::nn {

/// Dense row-major float matrix. Rows are samples, columns are features.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    /// Grows by one row; `v` must have cols() entries.
    void append_row(std::span<const float> v);
    void reserve_rows(std::size_t n) { data_.reserve(n * cols_); }

    /// Single-row matrix holding a copy of `v`.
    static Matrix from_row(std::span<const float> v);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// Horizontal concatenation [a | b]; row counts must agree.
Matrix hconcat(const Matrix& a, const Matrix& b);

enum class HeadKind {
    Linear,             ///< raw affine output
    GaussianMeanLogStd, ///< first half mean, second half log-std clamped to [-20, 2]
    Softplus,           ///< softplus(raw) + 1e-6, strictly positive
};

std::string to_string(HeadKind head);
HeadKind head_from_string(const std::string& name);

inline constexpr float kLogStdMin = -20.0f;
inline constexpr float kLogStdMax = 2.0f;
inline constexpr float kSoftplusFloor = 1e-6f;
inline constexpr float kLayerNormEps = 1e-5f;

/// Architecture of a DenseNet. `widths` = {input, hidden..., output}; any
/// number of hidden layers, including zero.
struct NetSpec {
    std::vector<int> widths;
    bool layer_norm = false;
    HeadKind head = HeadKind::Linear;

    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    std::size_t num_layers() const { return widths.size() - 1; }
    std::size_t param_count() const;

    bool operator==(const NetSpec&) const = default;
};

/// Offsets of one linear layer (and its optional LayerNorm) in the flat
/// parameter vector. Weights are stored input-major: W[i * out + j].
struct LayerSlots {
    int in = 0;
    int out = 0;
    std::size_t weight = 0;
    std::size_t bias = 0;
    bool has_norm = false;
    std::size_t gain = 0;
    std::size_t shift = 0;
};

/// Flat gradient storage, same layout as DenseNet::params().
using GradBuffer = std::vector<float>;

/// Activations recorded by a batched forward pass, consumed by backward.
struct Tape {
    std::vector<Matrix> inputs;     ///< input to each linear layer
    std::vector<Matrix> pre_norm;   ///< linear output of hidden layers
    std::vector<Matrix> normalized; ///< pre-affine LayerNorm output
    std::vector<std::vector<float>> inv_std;
    std::vector<Matrix> pre_act;    ///< input to ReLU
    Matrix raw_out;                 ///< final linear output, before the head
};

/// Multilayer perceptron: linear -> [LayerNorm] -> ReLU per hidden layer,
/// then a linear layer and an output head. Parameters live in one flat
/// vector so optimizers, EMA and checkpoints see a single block.
class DenseNet {
public:
    DenseNet() = default;
    explicit DenseNet(NetSpec spec);

    /// Glorot-uniform weights, zero biases, unit LayerNorm gains.
    static DenseNet initialized(NetSpec spec, std::uint64_t seed);

    const NetSpec& spec() const { return spec_; }
    const std::vector<LayerSlots>& layers() const { return layers_; }
    std::span<float> params() { return params_; }
    std::span<const float> params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    /// Batched forward. Records activations when `tape` is non-null.
    Matrix forward(const Matrix& x, Tape* tape = nullptr) const;

    /// Accumulates d(sum(upstream * out))/d(params) into `grads` and returns
    /// the gradient with respect to the network input.
    Matrix backward(const Tape& tape, const Matrix& upstream, GradBuffer& grads) const;

    GradBuffer zero_grads() const { return GradBuffer(params_.size(), 0.0f); }

private:
    NetSpec spec_;
    std::vector<LayerSlots> layers_;
    std::vector<float> params_;
};

/// Single-sample forward. Throws DimensionError / NumericalError.
std::vector<float> forward(const DenseNet& net, std::span<const float> x);

/// Gradient of upstream . forward(net, x) with respect to all parameters.
GradBuffer backward(const DenseNet& net, std::span<const float> x, std::span<const float> upstream);

/// LayerNorm with unit gain and zero shift (biased variance, eps inside the root).
std::vector<float> layer_norm(std::span<const float> x);

struct AdamConfig {
    float lr = 3e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct AdamState {
    AdamConfig config;
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t t = 0;

    AdamState() = default;
    AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0f), v(n, 0.0f) {}
};

/// Bias-corrected Adam step. Rejects the whole update (NumericalError,
/// parameters untouched) if any gradient entry is non-finite.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state);

/// target <- tau * target + (1 - tau) * source.
void polyak_average(std::span<float> target, std::span<const float> source, float tau);

bool all_finite(std::span<const float> v);

}  // namespace a3rl::nn
