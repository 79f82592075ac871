#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "latent/numerics.hpp"

namespace latent {

enum class Modality { Full, Reduced };
enum class Split { Train, Test };

std::string_view to_string(Modality m) noexcept;
std::string_view to_string(Split s) noexcept;
Modality parse_modality(std::string_view text);
Split parse_split(std::string_view text);

// One record: precomputed backbone features with a binary diagnosis label.
struct Sample {
    Vec features;
    int label = 0;
    std::string subject_id;
    Modality modality = Modality::Full;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
    std::vector<Sample> samples;
    Modality modality = Modality::Full;
    Split split = Split::Train;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    // Feature dimension; 0 for an empty dataset.
    std::size_t dim() const noexcept { return samples.empty() ? 0 : samples.front().features.size(); }

    // Throws InconsistentDim, InvalidArgument (labels, empty subject ids) or
    // DimensionMismatch when expected_dim is non-zero and differs.
    void validate(std::size_t expected_dim = 0) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Last-hidden-layer activations, parallel to the dataset they came from.
struct LatentSet {
    std::vector<Vec> vectors;
    std::vector<int> labels;
    std::vector<std::string> subject_ids;

    std::size_t size() const noexcept { return vectors.size(); }
    bool empty() const noexcept { return vectors.empty(); }
    std::size_t dim() const noexcept { return vectors.empty() ? 0 : vectors.front().size(); }

    friend bool operator==(const LatentSet&, const LatentSet&) = default;
};

// Predicted class for a sigmoid output.
inline int predict_label(double y) noexcept { return y >= 0.5 ? 1 : 0; }

}  // namespace latent
