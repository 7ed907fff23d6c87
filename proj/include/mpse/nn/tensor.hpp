#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpse::nn {

/// Shaped float array; the unit of storage in a WeightStore.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, float fill = 0.0f) : shape(std::move(s)), data(count(shape), fill) {}

    static std::size_t count(const std::vector<int>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1},
                               [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    }

    std::size_t size() const noexcept { return data.size(); }
    std::span<const float> view() const noexcept { return data; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string shape_string(const std::vector<int>& shape);

/// Batch x channel x time x frequency activation map.
struct FeatureMap {
    int batch = 0;
    int channels = 0;
    int time = 0;
    int freq = 0;
    std::vector<float> data;

    FeatureMap() = default;
    FeatureMap(int b, int c, int t, int f, float fill = 0.0f)
        : batch(b), channels(c), time(t), freq(f),
          data(static_cast<std::size_t>(b) * c * t * f, fill) {
        if (b < 1 || c < 1 || t < 1 || f < 1) throw std::invalid_argument("feature map axes must be >= 1");
    }

    std::size_t index(int b, int c, int t, int f) const noexcept {
        return ((static_cast<std::size_t>(b) * channels + c) * time + t) * freq + f;
    }
    float& at(int b, int c, int t, int f) noexcept { return data[index(b, c, t, f)]; }
    float at(int b, int c, int t, int f) const noexcept { return data[index(b, c, t, f)]; }

    std::size_t plane() const noexcept { return static_cast<std::size_t>(time) * freq; }
    float* channel_data(int b, int c) noexcept { return data.data() + index(b, c, 0, 0); }
    const float* channel_data(int b, int c) const noexcept { return data.data() + index(b, c, 0, 0); }

    bool same_shape(const FeatureMap& o) const noexcept {
        return batch == o.batch && channels == o.channels && time == o.time && freq == o.freq;
    }
};

/// A batch of equal-length vector sequences: count x length x dim, row-major.
struct SequenceBatch {
    int count = 0;
    int length = 0;
    int dim = 0;
    std::vector<float> data;

    SequenceBatch() = default;
    SequenceBatch(int n, int l, int d, float fill = 0.0f)
        : count(n), length(l), dim(d), data(static_cast<std::size_t>(n) * l * d, fill) {}

    int rows() const noexcept { return count * length; }
    float* token(int s, int l) noexcept { return data.data() + (static_cast<std::size_t>(s) * length + l) * dim; }
    const float* token(int s, int l) const noexcept {
        return data.data() + (static_cast<std::size_t>(s) * length + l) * dim;
    }
};

enum class SequenceAxis { time, freq };

/// (B,C,T,F) -> (B*F, T, C) for the time axis, (B*T, F, C) for the frequency axis.
SequenceBatch to_sequences(const FeatureMap& x, SequenceAxis axis);
/// Inverse of to_sequences into a map shaped like `like`.
FeatureMap from_sequences(const SequenceBatch& s, SequenceAxis axis, const FeatureMap& like);

}  // namespace mpse::nn
