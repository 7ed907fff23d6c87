#include "mpse/nn/tensor.hpp"

namespace mpse::nn {

std::string shape_string(const std::vector<int>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s.empty() ? "scalar" : s;
}

SequenceBatch to_sequences(const FeatureMap& x, SequenceAxis axis) {
    const bool time = axis == SequenceAxis::time;
    const int outer = time ? x.freq : x.time;
    const int length = time ? x.time : x.freq;
    SequenceBatch s(x.batch * outer, length, x.channels);
    for (int b = 0; b < x.batch; ++b)
        for (int c = 0; c < x.channels; ++c)
            for (int t = 0; t < x.time; ++t)
                for (int f = 0; f < x.freq; ++f) {
                    const int seq = b * outer + (time ? f : t);
                    const int pos = time ? t : f;
                    s.token(seq, pos)[c] = x.at(b, c, t, f);
                }
    return s;
}

FeatureMap from_sequences(const SequenceBatch& s, SequenceAxis axis, const FeatureMap& like) {
    const bool time = axis == SequenceAxis::time;
    const int outer = time ? like.freq : like.time;
    const int length = time ? like.time : like.freq;
    if (s.count != like.batch * outer || s.length != length || s.dim != like.channels)
        throw std::invalid_argument("from_sequences: sequence batch does not match target feature map");
    FeatureMap x(like.batch, like.channels, like.time, like.freq);
    for (int b = 0; b < x.batch; ++b)
        for (int c = 0; c < x.channels; ++c)
            for (int t = 0; t < x.time; ++t)
                for (int f = 0; f < x.freq; ++f) {
                    const int seq = b * outer + (time ? f : t);
                    const int pos = time ? t : f;
                    x.at(b, c, t, f) = s.token(seq, pos)[c];
                }
    return x;
}

}  // namespace mpse::nn
