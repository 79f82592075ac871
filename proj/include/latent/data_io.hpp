#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "latent/dataset.hpp"

namespace latent {

// CSV layout:
//   # latent-atlas csv v1            (optional comment lines start with '#')
//   subject_id,label,f0,f1,...,f{d-1}
//   S01,1,0.25,...
// Labels must be 0 or 1 and features finite. ParseError carries the
// 1-based line number; rows with a different field count raise
// InconsistentDim.
Dataset read_csv(std::istream& in, Modality modality, Split split);
Dataset load_csv(const std::filesystem::path& path, Modality modality, Split split);
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const std::filesystem::path& path, const Dataset& data);

enum class PairingMode { PerCategory, PerSubject };
PairingMode parse_pairing_mode(std::string_view text);

// Builds full-modality records by concatenating an MRI feature vector with a
// DaT feature vector. PerCategory pairs every MRI record with every DaT
// record of the same label (training augmentation); PerSubject pairs only
// records sharing a subject id (test construction). Output rows keep the
// MRI record's subject id and follow MRI order, then DaT order.
// Throws EmptyGroup when a label or subject appears in only one input.
Dataset pair_augment(const Dataset& mri, const Dataset& dat, PairingMode mode);

struct SynthSpec {
    std::size_t n_subjects_per_class = 20;
    std::size_t test_subjects_per_class = 8;
    std::size_t records_per_subject = 12;
    std::size_t full_dim = 24;
    std::size_t reduced_dim = 12;
    double class_separation_full = 6.0;
    double class_separation_reduced = 1.2;
    std::size_t intra_class_modes = 3;
    double mode_spread = 2.0;
    double subject_sigma = 0.4;
    double noise_sigma = 1.0;
    std::uint64_t seed = 7;

    // Throws SpecInvalid.
    void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

struct SynthData {
    Dataset full_train;
    Dataset full_test;
    Dataset reduced_train;
    Dataset reduced_test;
};

// Gaussian-mixture benchmark with two views of the same records.
//
// Full features split into a shared block (the first reduced_dim
// coordinates) and an extra block. Class means differ by
// class_separation_reduced inside the shared block and by
// class_separation_full overall. Each class has intra_class_modes
// sub-clusters offset by mode_spread. Each subject belongs to one mode and
// carries its own offset (subject_sigma). Each record adds isotropic noise
// (noise_sigma). The reduced view of a record is its shared block plus fresh
// noise (noise_sigma). Subjects are split between train and test, so no
// subject id appears in both.
SynthData generate_synth(const SynthSpec& spec);

}  // namespace latent
