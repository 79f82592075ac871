#pragma once

// Command-line pipeline: synth | train | cluster | classify | retrain | adapt
// | report. Settings come from an optional JSON config file; flags override it.
//
// Every report carries a "generated_at" field. It is the only part of a
// report that may differ between two runs with identical inputs and seed;
// setting SOURCE_DATE_EPOCH pins it as well.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "latent/data_io.hpp"
#include "latent/dataset.hpp"

namespace latent {

struct PipelinePaths {
    std::filesystem::path data;
    std::filesystem::path test;
    std::filesystem::path model;
    std::filesystem::path atlas;
    std::filesystem::path out = ".";
};

struct RetrainSettings {
    std::filesystem::path new_data_path;
    double lambda = 1.0;
    double tol = 1e-6;
    std::size_t max_iter = 300;
    double clamp = 0.02;
};

struct AdaptSettings {
    double eta = 0.5;
    std::filesystem::path atlas_path;
    std::size_t epochs = 50;
    double lr = 0.05;
    std::size_t batch_size = 32;
    // Falls back to the root seed when absent.
    std::optional<std::uint64_t> seed;
    bool class_constrained = true;
};

struct PipelineConfig {
    std::uint64_t seed = 7;
    PipelinePaths paths;
    Modality modality = Modality::Full;
    std::vector<std::size_t> hidden_dims{32, 8};
    double learning_rate = 0.05;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::size_t k = 5;
    RetrainSettings retrain;
    AdaptSettings adapt;
    SynthSpec synth;

    // InvalidArgument on out-of-range values (eta outside [0, 1], k = 0, ...).
    void validate() const;
};

// Parses the JSON config document. Unknown keys are rejected. Relative paths
// are taken relative to base_dir. Throws ParseError or InvalidArgument.
PipelineConfig parse_pipeline_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Runs one command line. Returns the process exit code: 0 on success, 1 on a
// pipeline error (reported to err as a single JSON object), 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace latent
