#pragma once

// Seeded end-to-end benchmarks built on the synthetic generator, shared by the
// CLI, the tests and the acceptance runner.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "latent/data_io.hpp"
#include "latent/dense_head.hpp"
#include "latent/latent_atlas.hpp"
#include "latent/retrain.hpp"

namespace latent {

// Continual learning: a head trained on the full-modality training set, its
// atlas, and a batch of new label-1 records from a region the head scores as
// class 0. The region sits `offset` away from the class-0 mean along a random
// direction; records scatter around it with per-coordinate sigma `spread`.
struct ContinualSpec {
    std::uint64_t seed = 2;
    SynthSpec synth = default_synth();
    std::vector<std::size_t> hidden_dims{256, 16};
    double learning_rate = 0.05;
    std::size_t epochs = 60;
    std::size_t batch_size = 16;
    std::size_t k = 5;
    std::size_t new_samples = 30;
    double offset = 6.5;
    double spread = 0.5;
    double lambda = 10.0;

    static SynthSpec default_synth();
};

struct ContinualScenario {
    SynthData data;
    DenseHead base;
    ClusterResult clusters;
    Dataset new_data;
    RetrainProblem problem;
};

ContinualScenario make_continual_scenario(const ContinualSpec& spec);

// Two views of the same records: a full-modality head and its atlas, and a
// reduced-modality head trained from scratch with E_new at a chosen eta.
struct TwoDomainSpec {
    std::uint64_t seed = 1;
    SynthSpec synth = default_synth();
    std::vector<std::size_t> hidden_dims{64, 8};
    std::size_t full_epochs = 60;
    std::size_t reduced_epochs = 300;
    double learning_rate = 0.05;
    std::size_t batch_size = 16;
    std::size_t k = 5;

    static SynthSpec default_synth();
};

struct TwoDomainRun {
    double full_test_accuracy = 0.0;
    double reduced_test_accuracy = 0.0;
    double reduced_train_accuracy = 0.0;
    TrainReport report;
};

// The full head, atlas and data depend only on spec; eta only changes the
// reduced head's training, whose initial weights are the same for every eta.
TwoDomainRun run_two_domain(const TwoDomainSpec& spec, double eta);

}  // namespace latent
