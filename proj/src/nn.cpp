#include "a3rl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "a3rl/error.hpp"
#include "a3rl/rng.hpp"

namespace a3rl::nn {

namespace {

float softplus(float z) { return z > 20.0f ? z : std::log1p(std::exp(z)); }

float sigmoid(float z) { return 1.0f / (1.0f + std::exp(-z)); }

// out[r][j] = b[j] + sum_i x[r][i] * W[i][j], summed in ascending i.
void linear_forward(const Matrix& x, const float* w, const float* b, int out, Matrix& y) {
    const std::size_t in = x.cols();
    y = Matrix(x.rows(), static_cast<std::size_t>(out));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        float* yr = y.row(r).data();
        const float* xr = x.row(r).data();
        std::copy(b, b + out, yr);
        for (std::size_t i = 0; i < in; ++i) {
            const float xi = xr[i];
            const float* wi = w + i * out;
            for (int j = 0; j < out; ++j) yr[j] += xi * wi[j];
        }
    }
}

void layer_norm_rows(const Matrix& z, Matrix& xhat, std::vector<float>& inv_std) {
    const std::size_t n = z.cols();
    const float inv_n = 1.0f / static_cast<float>(n);
    xhat = Matrix(z.rows(), n);
    inv_std.assign(z.rows(), 0.0f);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const float* zr = z.row(r).data();
        float mean = 0.0f;
        for (std::size_t j = 0; j < n; ++j) mean += zr[j];
        mean *= inv_n;
        float var = 0.0f;
        for (std::size_t j = 0; j < n; ++j) {
            const float d = zr[j] - mean;
            var += d * d;
        }
        var *= inv_n;
        const float is = 1.0f / std::sqrt(var + kLayerNormEps);
        inv_std[r] = is;
        float* xr = xhat.row(r).data();
        for (std::size_t j = 0; j < n; ++j) xr[j] = (zr[j] - mean) * is;
    }
}

void check_finite(const Matrix& m, const char* what) {
    if (!all_finite(m.values())) throw NumericalError(std::string("non-finite values in ") + what);
}

}  // namespace

Matrix Matrix::from_row(std::span<const float> v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.values().begin());
    return m;
}

void Matrix::append_row(std::span<const float> v) {
    if (v.size() != cols_) throw DimensionError("append_row: row width mismatch");
    data_.insert(data_.end(), v.begin(), v.end());
    ++rows_;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("hconcat: row counts differ");
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
        std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

std::string to_string(HeadKind head) {
    switch (head) {
        case HeadKind::Linear: return "linear";
        case HeadKind::GaussianMeanLogStd: return "gaussian";
        case HeadKind::Softplus: return "softplus";
    }
    return "linear";
}

HeadKind head_from_string(const std::string& name) {
    if (name == "linear") return HeadKind::Linear;
    if (name == "gaussian") return HeadKind::GaussianMeanLogStd;
    if (name == "softplus") return HeadKind::Softplus;
    throw ConfigError("unknown head kind '" + name + "'");
}

std::size_t NetSpec::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto in = static_cast<std::size_t>(widths[l]);
        const auto out = static_cast<std::size_t>(widths[l + 1]);
        n += in * out + out;
        if (layer_norm && l + 2 < widths.size()) n += 2 * out;
    }
    return n;
}

DenseNet::DenseNet(NetSpec spec) : spec_(std::move(spec)) {
    if (spec_.widths.size() < 2) throw DimensionError("DenseNet needs at least input and output widths");
    for (int w : spec_.widths)
        if (w < 1) throw DimensionError("DenseNet widths must be positive");
    if (spec_.head == HeadKind::GaussianMeanLogStd && spec_.output_dim() % 2 != 0)
        throw DimensionError("gaussian head needs an even output width");

    std::size_t offset = 0;
    const std::size_t nl = spec_.num_layers();
    for (std::size_t l = 0; l < nl; ++l) {
        LayerSlots s;
        s.in = spec_.widths[l];
        s.out = spec_.widths[l + 1];
        s.weight = offset;
        offset += static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);
        s.bias = offset;
        offset += static_cast<std::size_t>(s.out);
        if (spec_.layer_norm && l + 1 < nl) {
            s.has_norm = true;
            s.gain = offset;
            offset += static_cast<std::size_t>(s.out);
            s.shift = offset;
            offset += static_cast<std::size_t>(s.out);
        }
        layers_.push_back(s);
    }
    params_.assign(offset, 0.0f);
}

DenseNet DenseNet::initialized(NetSpec spec, std::uint64_t seed) {
    DenseNet net(std::move(spec));
    Rng rng(seed);
    for (const auto& s : net.layers_) {
        const double bound = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        const std::size_t count = static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);
        for (std::size_t k = 0; k < count; ++k)
            net.params_[s.weight + k] = static_cast<float>(rng.uniform(-bound, bound));
        if (s.has_norm) std::fill_n(net.params_.begin() + static_cast<std::ptrdiff_t>(s.gain), s.out, 1.0f);
    }
    return net;
}

Matrix DenseNet::forward(const Matrix& x, Tape* tape) const {
    if (static_cast<int>(x.cols()) != spec_.input_dim()) {
        std::ostringstream msg;
        msg << "forward: input width " << x.cols() << " != " << spec_.input_dim();
        throw DimensionError(msg.str());
    }
    check_finite(x, "network input");

    const std::size_t nl = layers_.size();
    if (tape) {
        tape->inputs.assign(nl, Matrix());
        tape->pre_norm.assign(nl, Matrix());
        tape->normalized.assign(nl, Matrix());
        tape->inv_std.assign(nl, {});
        tape->pre_act.assign(nl, Matrix());
    }

    Matrix h = x;
    Matrix z;
    for (std::size_t l = 0; l < nl; ++l) {
        const auto& s = layers_[l];
        linear_forward(h, &params_[s.weight], &params_[s.bias], s.out, z);
        if (tape) tape->inputs[l] = h;
        if (l + 1 == nl) break;

        Matrix pre;
        if (s.has_norm) {
            Matrix xhat;
            std::vector<float> inv_std;
            layer_norm_rows(z, xhat, inv_std);
            pre = Matrix(z.rows(), z.cols());
            const float* g = &params_[s.gain];
            const float* b = &params_[s.shift];
            for (std::size_t r = 0; r < z.rows(); ++r) {
                float* pr = pre.row(r).data();
                const float* xr = xhat.row(r).data();
                for (int j = 0; j < s.out; ++j) pr[j] = g[j] * xr[j] + b[j];
            }
            if (tape) {
                tape->pre_norm[l] = z;
                tape->normalized[l] = std::move(xhat);
                tape->inv_std[l] = std::move(inv_std);
            }
        } else {
            pre = z;
        }
        h = Matrix(pre.rows(), pre.cols());
        for (std::size_t k = 0; k < pre.size(); ++k) h.values()[k] = std::max(pre.values()[k], 0.0f);
        if (tape) tape->pre_act[l] = std::move(pre);
    }

    Matrix out = z;
    switch (spec_.head) {
        case HeadKind::Linear: break;
        case HeadKind::GaussianMeanLogStd: {
            const std::size_t d = out.cols() / 2;
            for (std::size_t r = 0; r < out.rows(); ++r)
                for (std::size_t j = d; j < out.cols(); ++j)
                    out(r, j) = std::clamp(out(r, j), kLogStdMin, kLogStdMax);
            break;
        }
        case HeadKind::Softplus:
            for (auto& v : out.values()) v = softplus(v) + kSoftplusFloor;
            break;
    }
    if (tape) tape->raw_out = std::move(z);
    check_finite(out, "network output");
    return out;
}

Matrix DenseNet::backward(const Tape& tape, const Matrix& upstream, GradBuffer& grads) const {
    const Matrix& raw = tape.raw_out;
    if (upstream.rows() != raw.rows() || upstream.cols() != raw.cols())
        throw DimensionError("backward: upstream shape does not match forward output");
    if (grads.size() != params_.size()) throw DimensionError("backward: gradient buffer size mismatch");
    check_finite(upstream, "upstream gradient");

    Matrix dz = upstream;
    switch (spec_.head) {
        case HeadKind::Linear: break;
        case HeadKind::GaussianMeanLogStd: {
            const std::size_t d = dz.cols() / 2;
            for (std::size_t r = 0; r < dz.rows(); ++r)
                for (std::size_t j = d; j < dz.cols(); ++j) {
                    const float v = raw(r, j);
                    if (!(v > kLogStdMin && v < kLogStdMax)) dz(r, j) = 0.0f;
                }
            break;
        }
        case HeadKind::Softplus:
            for (std::size_t k = 0; k < dz.size(); ++k) dz.values()[k] *= sigmoid(raw.values()[k]);
            break;
    }

    const std::size_t nl = layers_.size();
    for (std::size_t li = nl; li-- > 0;) {
        const auto& s = layers_[li];
        const Matrix& x = tape.inputs[li];
        const std::size_t rows = x.rows();
        float* gw = &grads[s.weight];
        float* gb = &grads[s.bias];
        for (std::size_t r = 0; r < rows; ++r) {
            const float* xr = x.row(r).data();
            const float* dr = dz.row(r).data();
            for (int i = 0; i < s.in; ++i) {
                const float xi = xr[i];
                float* gwi = gw + static_cast<std::size_t>(i) * static_cast<std::size_t>(s.out);
                for (int j = 0; j < s.out; ++j) gwi[j] += xi * dr[j];
            }
            for (int j = 0; j < s.out; ++j) gb[j] += dr[j];
        }

        // dx[r][i] = sum_j dz[r][j] * W[i][j], accumulated in increasing j
        // through a transposed copy so the inner loop runs over i.
        const auto in = static_cast<std::size_t>(s.in);
        const auto out_w = static_cast<std::size_t>(s.out);
        const float* w = &params_[s.weight];
        std::vector<float> wt(in * out_w);
        for (std::size_t i = 0; i < in; ++i)
            for (std::size_t j = 0; j < out_w; ++j) wt[j * in + i] = w[i * out_w + j];
        Matrix dx(rows, in);
        for (std::size_t r = 0; r < rows; ++r) {
            const float* dr = dz.row(r).data();
            float* out = dx.row(r).data();
            for (std::size_t j = 0; j < out_w; ++j) {
                const float d = dr[j];
                const float* wj = &wt[j * in];
                for (std::size_t i = 0; i < in; ++i) out[i] += d * wj[i];
            }
        }
        if (li == 0) return dx;

        // Through ReLU and the LayerNorm of the previous hidden layer.
        const std::size_t prev = li - 1;
        const auto& ps = layers_[prev];
        const Matrix& pre = tape.pre_act[prev];
        for (std::size_t k = 0; k < dx.size(); ++k)
            if (!(pre.values()[k] > 0.0f)) dx.values()[k] = 0.0f;

        if (!ps.has_norm) {
            dz = std::move(dx);
            continue;
        }
        const Matrix& xhat = tape.normalized[prev];
        const auto& inv_std = tape.inv_std[prev];
        const float* g = &params_[ps.gain];
        float* gg = &grads[ps.gain];
        float* gs = &grads[ps.shift];
        const int n = ps.out;
        const float inv_n = 1.0f / static_cast<float>(n);
        dz = Matrix(rows, static_cast<std::size_t>(n));
        std::vector<float> dxhat(static_cast<std::size_t>(n));
        for (std::size_t r = 0; r < rows; ++r) {
            const float* dh = dx.row(r).data();
            const float* xr = xhat.row(r).data();
            float m1 = 0.0f;
            float m2 = 0.0f;
            for (int j = 0; j < n; ++j) {
                dxhat[j] = dh[j] * g[j];
                gg[j] += dh[j] * xr[j];
                gs[j] += dh[j];
                m1 += dxhat[j];
                m2 += dxhat[j] * xr[j];
            }
            m1 *= inv_n;
            m2 *= inv_n;
            float* out = dz.row(r).data();
            for (int j = 0; j < n; ++j) out[j] = inv_std[r] * (dxhat[j] - m1 - xr[j] * m2);
        }
    }
    return Matrix();
}

std::vector<float> forward(const DenseNet& net, std::span<const float> x) {
    if (static_cast<int>(x.size()) != net.spec().input_dim())
        throw DimensionError("forward: input length does not match network input width");
    const Matrix out = net.forward(Matrix::from_row(x));
    return out.values();
}

GradBuffer backward(const DenseNet& net, std::span<const float> x, std::span<const float> upstream) {
    if (static_cast<int>(upstream.size()) != net.spec().output_dim())
        throw DimensionError("backward: upstream length does not match network output width");
    Tape tape;
    net.forward(Matrix::from_row(x), &tape);
    GradBuffer grads = net.zero_grads();
    net.backward(tape, Matrix::from_row(upstream), grads);
    return grads;
}

std::vector<float> layer_norm(std::span<const float> x) {
    if (x.size() < 2) throw DimensionError("layer_norm needs at least two features");
    Matrix xhat;
    std::vector<float> inv_std;
    layer_norm_rows(Matrix::from_row(x), xhat, inv_std);
    return xhat.values();
}

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
    if (!all_finite(grads)) throw NumericalError("adam_step: non-finite gradient, update rejected");

    const auto& c = state.config;
    state.t += 1;
    const auto t = static_cast<double>(state.t);
    const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta1), t));
    const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta2), t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const float g = grads[k];
        state.m[k] = c.beta1 * state.m[k] + (1.0f - c.beta1) * g;
        state.v[k] = c.beta2 * state.v[k] + (1.0f - c.beta2) * g * g;
        const float mhat = state.m[k] / bc1;
        const float vhat = state.v[k] / bc2;
        params[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

void polyak_average(std::span<float> target, std::span<const float> source, float tau) {
    if (target.size() != source.size()) throw DimensionError("polyak_average: size mismatch");
    for (std::size_t k = 0; k < target.size(); ++k) target[k] = tau * target[k] + (1.0f - tau) * source[k];
}

bool all_finite(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace a3rl::nn
