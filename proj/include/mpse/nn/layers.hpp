#pragma once

#include <span>
#include <vector>

#include "mpse/grid.hpp"
#include "mpse/nn/tensor.hpp"

namespace mpse::nn {

// Parameter views. Layers never own weights; they read spans into a WeightStore
// (or into test-local buffers).

struct ConvParams {
    std::span<const float> weight;  ///< [out, in, kernel_t, kernel_f]
    std::span<const float> bias;    ///< [out], or empty for no bias
    int out_channels = 0;
    int in_channels = 0;
    int kernel_t = 1;
    int kernel_f = 1;
};

struct ConvGeometry {
    int stride_t = 1;
    int stride_f = 1;
    int dilation_t = 1;
    int dilation_f = 1;
    int pad_t = 0;
    int pad_f = 0;
};

struct AffineParams {
    std::span<const float> weight;  ///< scale per channel / feature
    std::span<const float> bias;
};

struct LinearParams {
    std::span<const float> weight;  ///< [out, in]
    std::span<const float> bias;    ///< [out]
    int out_features = 0;
    int in_features = 0;
};

/// PyTorch gate layout: rows [reset; update; candidate] of size hidden each.
struct GruParams {
    std::span<const float> weight_ih;  ///< [3H, input]
    std::span<const float> weight_hh;  ///< [3H, H]
    std::span<const float> bias_ih;    ///< [3H]
    std::span<const float> bias_hh;    ///< [3H]
    int input_size = 0;
    int hidden_size = 0;
};

struct AttentionParams {
    std::span<const float> in_weight;   ///< [3D, D]; rows [query; key; value]
    std::span<const float> in_bias;     ///< [3D]
    std::span<const float> out_weight;  ///< [D, D]
    std::span<const float> out_bias;    ///< [D]
    int dim = 0;
    int heads = 1;
};

struct TransformerParams {
    AffineParams attn_norm;
    AttentionParams attn;
    AffineParams ffn_norm;
    GruParams gru_forward;
    GruParams gru_backward;
    LinearParams ffn_out;  ///< [D, 2H]
};

struct ConvBlockParams {
    ConvParams conv;
    AffineParams norm;
    std::span<const float> slope;  ///< PReLU, one per output channel
};

struct DenseNetParams {
    std::vector<ConvBlockParams> stages;  ///< stage i reads (i+1)*C channels
    std::vector<int> dilations;           ///< time-axis dilation per stage
};

inline constexpr float kNormEps = 1e-5f;

/// Output extent of a strided, dilated, padded convolution along one axis.
int conv_out_size(int in, int kernel, int stride, int dilation, int pad);

/// Cross-correlation with zero padding.
FeatureMap conv2d(const FeatureMap& x, const ConvParams& p, const ConvGeometry& g = {});

/// Per (batch, channel) standardization over time x frequency, then affine.
FeatureMap instance_norm(const FeatureMap& x, const AffineParams& p, float eps = kNormEps);

/// x if x >= 0, else slope[c] * x. A single slope broadcasts to all channels.
FeatureMap prelu(FeatureMap x, std::span<const float> slope);

/// beta / (1 + exp(1 - alpha[f] * x)) over a T x F grid, evaluated in double.
RealGrid lsigmoid(const RealGrid& x, std::span<const float> alpha, double beta);

/// conv2d -> instance_norm -> prelu
FeatureMap conv_block(const FeatureMap& x, const ConvBlockParams& p, const ConvGeometry& g);

/// Dense stack of 3x3 conv blocks, dilated along time; each stage consumes the
/// concatenation of the block input and all earlier stage outputs.
FeatureMap dilated_densenet(const FeatureMap& x, const DenseNetParams& p);

/// Channels C*r -> C, width W -> W*r: out[c][t][w*r + k] = in[k*C + c][t][w].
FeatureMap pixel_shuffle_freq(const FeatureMap& x, int r);

/// Keeps the first `width` frequency columns.
FeatureMap crop_freq(const FeatureMap& x, int width);

SequenceBatch layer_norm(const SequenceBatch& x, const AffineParams& p, float eps = kNormEps);
SequenceBatch linear(const SequenceBatch& x, const LinearParams& p);
SequenceBatch relu(SequenceBatch x);

/// Single-direction GRU from a zero state; `reverse` runs right to left and
/// returns outputs in original order.
SequenceBatch gru(const SequenceBatch& x, const GruParams& p, bool reverse);

/// Forward and reversed GRU outputs concatenated per step: [fwd | bwd].
SequenceBatch bigru(const SequenceBatch& x, const GruParams& forward, const GruParams& backward);

/// Multi-head scaled dot-product self-attention without positional encoding.
SequenceBatch mhsa(const SequenceBatch& x, const AttentionParams& p);

/// Pre-norm block: y = x + MHSA(LN(x)); out = y + Linear(ReLU(BiGRU(LN(y)))).
SequenceBatch transformer_layer(const SequenceBatch& x, const TransformerParams& p);

/// Time-axis transformer over (B*F, T, C), then frequency-axis transformer over (B*T, F, C).
FeatureMap tf_transformer_block(const FeatureMap& x, const TransformerParams& time_layer,
                                const TransformerParams& freq_layer);

}  // namespace mpse::nn
