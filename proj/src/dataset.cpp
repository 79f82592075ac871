#include "latent/dataset.hpp"

#include "latent/error.hpp"

namespace latent {

std::string_view to_string(Modality m) noexcept { return m == Modality::Full ? "full" : "reduced"; }
std::string_view to_string(Split s) noexcept { return s == Split::Train ? "train" : "test"; }

Modality parse_modality(std::string_view text) {
    if (text == "full") return Modality::Full;
    if (text == "reduced") return Modality::Reduced;
    fail(ErrorKind::InvalidArgument, "unknown modality '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "test") return Split::Test;
    fail(ErrorKind::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

void Dataset::validate(std::size_t expected_dim) const {
    const std::size_t d = dim();
    if (expected_dim != 0 && !samples.empty()) {
        require(d == expected_dim, ErrorKind::DimensionMismatch,
                "dataset feature dim " + std::to_string(d) + " != expected " + std::to_string(expected_dim));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        require(s.features.size() == d, ErrorKind::InconsistentDim,
                "sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) + " features, expected " +
                    std::to_string(d));
        require(s.label == 0 || s.label == 1, ErrorKind::InvalidArgument,
                "sample " + std::to_string(i) + " has non-binary label");
        require(!s.subject_id.empty(), ErrorKind::InvalidArgument, "sample " + std::to_string(i) + " has empty subject id");
        require(all_finite(s.features), ErrorKind::InvalidArgument, "sample " + std::to_string(i) + " has non-finite features");
    }
}

}  // namespace latent
