#include "mpse/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mpse::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using StridedMatMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMatMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Upper bound on floats in one im2col tile.
constexpr std::size_t kIm2colBudget = std::size_t{1} << 22;

void expect_size(std::span<const float> s, std::size_t n, const char* what) {
    if (s.size() != n)
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                                    std::to_string(s.size()));
}

float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

// Y = X * W^T + b over all rows of a sequence batch.
RowMat affine_rows(const SequenceBatch& x, std::span<const float> weight, std::span<const float> bias, int out,
                   int in) {
    if (x.dim != in) throw std::invalid_argument("projection: input dim does not match weights");
    expect_size(weight, static_cast<std::size_t>(out) * in, "projection weight");
    expect_size(bias, static_cast<std::size_t>(out), "projection bias");
    ConstMatMap X(x.data.data(), x.rows(), in);
    ConstMatMap W(weight.data(), out, in);
    RowMat y(x.rows(), out);
    y.noalias() = X * W.transpose();
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.data(), out);
    return y;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
    FeatureMap out(a.batch, a.channels + b.channels, a.time, a.freq);
    const std::size_t plane = a.plane();
    for (int n = 0; n < a.batch; ++n) {
        std::copy_n(a.channel_data(n, 0), plane * a.channels, out.channel_data(n, 0));
        std::copy_n(b.channel_data(n, 0), plane * b.channels, out.channel_data(n, a.channels));
    }
    return out;
}

}  // namespace

int conv_out_size(int in, int kernel, int stride, int dilation, int pad) {
    return (in + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
}

FeatureMap conv2d(const FeatureMap& x, const ConvParams& p, const ConvGeometry& g) {
    if (x.channels != p.in_channels)
        throw std::invalid_argument("conv2d: input has " + std::to_string(x.channels) + " channels, weights expect " +
                                    std::to_string(p.in_channels));
    const int K = p.in_channels * p.kernel_t * p.kernel_f;
    expect_size(p.weight, static_cast<std::size_t>(p.out_channels) * K, "conv2d weight");
    if (!p.bias.empty()) expect_size(p.bias, static_cast<std::size_t>(p.out_channels), "conv2d bias");

    const int out_t = conv_out_size(x.time, p.kernel_t, g.stride_t, g.dilation_t, g.pad_t);
    const int out_f = conv_out_size(x.freq, p.kernel_f, g.stride_f, g.dilation_f, g.pad_f);
    if (out_t < 1 || out_f < 1) throw std::invalid_argument("conv2d: input smaller than the dilated kernel");

    FeatureMap y(x.batch, p.out_channels, out_t, out_f);
    ConstMatMap W(p.weight.data(), p.out_channels, K);

    const int tile = static_cast<int>(std::clamp<std::size_t>(
        kIm2colBudget / (static_cast<std::size_t>(K) * out_f), 1, static_cast<std::size_t>(out_t)));
    RowMat cols(K, static_cast<Eigen::Index>(tile) * out_f);

    for (int b = 0; b < x.batch; ++b) {
        for (int t0 = 0; t0 < out_t; t0 += tile) {
            const int rows = std::min(tile, out_t - t0);
            const int P = rows * out_f;
            for (int ci = 0; ci < p.in_channels; ++ci) {
                const float* src = x.channel_data(b, ci);
                for (int kt = 0; kt < p.kernel_t; ++kt)
                    for (int kf = 0; kf < p.kernel_f; ++kf) {
                        float* dst = cols.row((ci * p.kernel_t + kt) * p.kernel_f + kf).data();
                        for (int r = 0; r < rows; ++r) {
                            const int ti = (t0 + r) * g.stride_t - g.pad_t + kt * g.dilation_t;
                            float* d = dst + r * out_f;
                            if (ti < 0 || ti >= x.time) {
                                std::fill_n(d, out_f, 0.0f);
                                continue;
                            }
                            const float* s = src + static_cast<std::size_t>(ti) * x.freq;
                            for (int fo = 0; fo < out_f; ++fo) {
                                const int fi = fo * g.stride_f - g.pad_f + kf * g.dilation_f;
                                d[fo] = (fi >= 0 && fi < x.freq) ? s[fi] : 0.0f;
                            }
                        }
                    }
            }
            StridedMatMap out(y.channel_data(b, 0) + static_cast<std::size_t>(t0) * out_f, p.out_channels, P,
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(y.plane())));
            out.noalias() = W * cols.leftCols(P);
            if (!p.bias.empty())
                for (int co = 0; co < p.out_channels; ++co) out.row(co).array() += p.bias[static_cast<std::size_t>(co)];
        }
    }
    return y;
}

FeatureMap instance_norm(const FeatureMap& x, const AffineParams& p, float eps) {
    if (!p.weight.empty()) expect_size(p.weight, static_cast<std::size_t>(x.channels), "instance_norm weight");
    if (!p.bias.empty()) expect_size(p.bias, static_cast<std::size_t>(x.channels), "instance_norm bias");
    FeatureMap y(x.batch, x.channels, x.time, x.freq);
    const std::size_t n = x.plane();
    for (int b = 0; b < x.batch; ++b)
        for (int c = 0; c < x.channels; ++c) {
            const float* src = x.channel_data(b, c);
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += src[i];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = src[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n);
            const double inv = 1.0 / std::sqrt(var + eps);
            const double scale = p.weight.empty() ? 1.0 : p.weight[static_cast<std::size_t>(c)];
            const double shift = p.bias.empty() ? 0.0 : p.bias[static_cast<std::size_t>(c)];
            float* dst = y.channel_data(b, c);
            for (std::size_t i = 0; i < n; ++i)
                dst[i] = static_cast<float>((src[i] - mean) * inv * scale + shift);
        }
    return y;
}

FeatureMap prelu(FeatureMap x, std::span<const float> slope) {
    if (slope.size() != 1 && slope.size() != static_cast<std::size_t>(x.channels))
        throw std::invalid_argument("prelu: need one slope or one per channel");
    const std::size_t n = x.plane();
    for (int b = 0; b < x.batch; ++b)
        for (int c = 0; c < x.channels; ++c) {
            const float a = slope.size() == 1 ? slope[0] : slope[static_cast<std::size_t>(c)];
            float* d = x.channel_data(b, c);
            for (std::size_t i = 0; i < n; ++i)
                if (d[i] < 0.0f) d[i] *= a;
        }
    return x;
}

RealGrid lsigmoid(const RealGrid& x, std::span<const float> alpha, double beta) {
    expect_size(alpha, x.cols(), "lsigmoid alpha");
    RealGrid y(x.rows(), x.cols());
    for (std::size_t t = 0; t < x.rows(); ++t)
        for (std::size_t f = 0; f < x.cols(); ++f)
            y(t, f) = beta / (1.0 + std::exp(1.0 - static_cast<double>(alpha[f]) * x(t, f)));
    return y;
}

FeatureMap conv_block(const FeatureMap& x, const ConvBlockParams& p, const ConvGeometry& g) {
    return prelu(instance_norm(conv2d(x, p.conv, g), p.norm), p.slope);
}

FeatureMap dilated_densenet(const FeatureMap& x, const DenseNetParams& p) {
    if (p.stages.size() != p.dilations.size() || p.stages.empty())
        throw std::invalid_argument("dilated_densenet: need one dilation per stage");
    FeatureMap skip = x;
    FeatureMap out;
    for (std::size_t i = 0; i < p.stages.size(); ++i) {
        const auto& conv = p.stages[i].conv;
        if (conv.in_channels != x.channels * static_cast<int>(i + 1))
            throw std::invalid_argument("dilated_densenet: stage " + std::to_string(i) + " expects " +
                                        std::to_string(x.channels * (i + 1)) + " input channels");
        ConvGeometry g;
        g.dilation_t = p.dilations[i];
        g.pad_t = p.dilations[i] * (conv.kernel_t - 1) / 2;
        g.pad_f = (conv.kernel_f - 1) / 2;
        out = conv_block(skip, p.stages[i], g);
        // newest stage output first, block input last
        if (i + 1 < p.stages.size()) skip = concat_channels(out, skip);
    }
    return out;
}

FeatureMap pixel_shuffle_freq(const FeatureMap& x, int r) {
    if (r < 1 || x.channels % r != 0) throw std::invalid_argument("pixel_shuffle_freq: channels not divisible by r");
    const int c_out = x.channels / r;
    FeatureMap y(x.batch, c_out, x.time, x.freq * r);
    for (int b = 0; b < x.batch; ++b)
        for (int k = 0; k < r; ++k)
            for (int c = 0; c < c_out; ++c)
                for (int t = 0; t < x.time; ++t)
                    for (int w = 0; w < x.freq; ++w) y.at(b, c, t, w * r + k) = x.at(b, k * c_out + c, t, w);
    return y;
}

FeatureMap crop_freq(const FeatureMap& x, int width) {
    if (width < 1 || width > x.freq) throw std::invalid_argument("crop_freq: width out of range");
    FeatureMap y(x.batch, x.channels, x.time, width);
    for (int b = 0; b < x.batch; ++b)
        for (int c = 0; c < x.channels; ++c)
            for (int t = 0; t < x.time; ++t) std::copy_n(&x.data[x.index(b, c, t, 0)], width, &y.at(b, c, t, 0));
    return y;
}

SequenceBatch layer_norm(const SequenceBatch& x, const AffineParams& p, float eps) {
    expect_size(p.weight, static_cast<std::size_t>(x.dim), "layer_norm weight");
    expect_size(p.bias, static_cast<std::size_t>(x.dim), "layer_norm bias");
    SequenceBatch y(x.count, x.length, x.dim);
    for (int s = 0; s < x.count; ++s)
        for (int l = 0; l < x.length; ++l) {
            const float* src = x.token(s, l);
            double mean = 0.0;
            for (int d = 0; d < x.dim; ++d) mean += src[d];
            mean /= x.dim;
            double var = 0.0;
            for (int d = 0; d < x.dim; ++d) var += (src[d] - mean) * (src[d] - mean);
            var /= x.dim;
            const double inv = 1.0 / std::sqrt(var + eps);
            float* dst = y.token(s, l);
            for (int d = 0; d < x.dim; ++d)
                dst[d] = static_cast<float>((src[d] - mean) * inv * p.weight[static_cast<std::size_t>(d)] +
                                            p.bias[static_cast<std::size_t>(d)]);
        }
    return y;
}

SequenceBatch linear(const SequenceBatch& x, const LinearParams& p) {
    SequenceBatch y(x.count, x.length, p.out_features);
    MatMap(y.data.data(), y.rows(), p.out_features) = affine_rows(x, p.weight, p.bias, p.out_features, p.in_features);
    return y;
}

SequenceBatch relu(SequenceBatch x) {
    for (float& v : x.data) v = std::max(v, 0.0f);
    return x;
}

SequenceBatch gru(const SequenceBatch& x, const GruParams& p, bool reverse) {
    const int H = p.hidden_size;
    expect_size(p.weight_hh, static_cast<std::size_t>(3 * H) * H, "gru weight_hh");
    expect_size(p.bias_hh, static_cast<std::size_t>(3 * H), "gru bias_hh");
    const RowMat xi = affine_rows(x, p.weight_ih, p.bias_ih, 3 * H, p.input_size);
    ConstMatMap Whh(p.weight_hh.data(), 3 * H, H);
    const Eigen::Map<const Eigen::RowVectorXf> bhh(p.bias_hh.data(), 3 * H);

    SequenceBatch out(x.count, x.length, H);
    RowMat h = RowMat::Zero(x.count, H);
    RowMat hh(x.count, 3 * H);
    for (int step = 0; step < x.length; ++step) {
        const int l = reverse ? x.length - 1 - step : step;
        ConstStridedMatMap xl(xi.data() + static_cast<std::size_t>(l) * 3 * H, x.count, 3 * H,
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(x.length) * 3 * H));
        hh.noalias() = h * Whh.transpose();
        hh.rowwise() += bhh;
        for (int s = 0; s < x.count; ++s) {
            float* o = out.token(s, l);
            for (int j = 0; j < H; ++j) {
                const float r = sigmoid(xl(s, j) + hh(s, j));
                const float z = sigmoid(xl(s, H + j) + hh(s, H + j));
                const float n = std::tanh(xl(s, 2 * H + j) + r * hh(s, 2 * H + j));
                const float hn = (1.0f - z) * n + z * h(s, j);
                h(s, j) = hn;
                o[j] = hn;
            }
        }
    }
    return out;
}

SequenceBatch bigru(const SequenceBatch& x, const GruParams& forward, const GruParams& backward) {
    const SequenceBatch f = gru(x, forward, false);
    const SequenceBatch b = gru(x, backward, true);
    SequenceBatch y(x.count, x.length, f.dim + b.dim);
    for (int s = 0; s < x.count; ++s)
        for (int l = 0; l < x.length; ++l) {
            std::copy_n(f.token(s, l), f.dim, y.token(s, l));
            std::copy_n(b.token(s, l), b.dim, y.token(s, l) + f.dim);
        }
    return y;
}

SequenceBatch mhsa(const SequenceBatch& x, const AttentionParams& p) {
    const int D = p.dim;
    if (p.heads < 1 || D % p.heads != 0)
        throw std::invalid_argument("mhsa: dim " + std::to_string(D) + " not divisible by " +
                                    std::to_string(p.heads) + " heads");
    const int dh = D / p.heads;
    const RowMat qkv = affine_rows(x, p.in_weight, p.in_bias, 3 * D, D);
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    const int L = x.length;

    SequenceBatch ctx_seq(x.count, L, D);
    MatMap ctx(ctx_seq.data.data(), ctx_seq.rows(), D);
    RowMat scores(L, L);
    for (int s = 0; s < x.count; ++s) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(s) * L;
        for (int h = 0; h < p.heads; ++h) {
            const auto q = qkv.block(r0, h * dh, L, dh);
            const auto k = qkv.block(r0, D + h * dh, L, dh);
            const auto v = qkv.block(r0, 2 * D + h * dh, L, dh);
            scores.noalias() = (q * k.transpose()) * scale;
            for (int i = 0; i < L; ++i) {
                auto row = scores.row(i);
                const float m = row.maxCoeff();
                row = (row.array() - m).exp();
                row /= row.sum();
            }
            ctx.block(r0, h * dh, L, dh).noalias() = scores * v;
        }
    }
    SequenceBatch y(x.count, L, D);
    MatMap(y.data.data(), y.rows(), D) = affine_rows(ctx_seq, p.out_weight, p.out_bias, D, D);
    return y;
}

SequenceBatch transformer_layer(const SequenceBatch& x, const TransformerParams& p) {
    SequenceBatch y = mhsa(layer_norm(x, p.attn_norm), p.attn);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
    const SequenceBatch z =
        linear(relu(bigru(layer_norm(y, p.ffn_norm), p.gru_forward, p.gru_backward)), p.ffn_out);
    if (z.dim != y.dim) throw std::invalid_argument("transformer_layer: FFN output dim mismatch");
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += z.data[i];
    return y;
}

FeatureMap tf_transformer_block(const FeatureMap& x, const TransformerParams& time_layer,
                                const TransformerParams& freq_layer) {
    const SequenceBatch along_time = transformer_layer(to_sequences(x, SequenceAxis::time), time_layer);
    const FeatureMap mid = from_sequences(along_time, SequenceAxis::time, x);
    const SequenceBatch along_freq = transformer_layer(to_sequences(mid, SequenceAxis::freq), freq_layer);
    return from_sequences(along_freq, SequenceAxis::freq, x);
}

}  // namespace mpse::nn
