#include "latent/scenarios.hpp"

#include <cmath>

#include "latent/domain_adapt.hpp"
#include "latent/error.hpp"
#include "latent/kernels/kernels.hpp"
#include "latent/rng.hpp"

namespace latent {

namespace {

Vec class_mean(const Dataset& data, int label) {
    Vec mean(data.dim(), 0.0);
    std::size_t count = 0;
    for (const Sample& s : data.samples) {
        if (s.label != label) continue;
        kernels::axpy(1.0, s.features, mean);
        ++count;
    }
    require(count > 0, ErrorKind::EmptyGroup, "scenario: no samples of class " + std::to_string(label));
    for (double& v : mean) v /= static_cast<double>(count);
    return mean;
}

}  // namespace

SynthSpec ContinualSpec::default_synth() {
    SynthSpec s;
    s.n_subjects_per_class = 16;
    s.test_subjects_per_class = 6;
    s.records_per_subject = 10;
    s.full_dim = 12;
    s.reduced_dim = 6;
    s.class_separation_full = 6.0;
    s.class_separation_reduced = 2.0;
    return s;
}

ContinualScenario make_continual_scenario(const ContinualSpec& spec) {
    SynthSpec synth = spec.synth;
    synth.seed = spec.seed;
    SynthData data = generate_synth(synth);

    DenseHead base(HeadConfig{synth.full_dim, spec.hidden_dims, spec.seed, spec.learning_rate, spec.epochs, spec.batch_size});
    train_mse(base, data.full_train);
    ClusterResult clusters = kmeans_pp(extract_latents(base, data.full_train), {spec.k, spec.seed, 300, 1e-9});

    Rng rng(derive_seed(spec.seed, Stream::Scenario));
    Vec direction(synth.full_dim);
    for (double& v : direction) v = rng.normal();
    const double length = norm(direction);
    Vec centre = class_mean(data.full_train, 0);
    kernels::axpy(spec.offset / length, direction, centre);

    Dataset new_data;
    new_data.modality = Modality::Full;
    new_data.split = Split::Train;
    for (std::size_t i = 0; i < spec.new_samples; ++i) {
        Sample s;
        s.label = 1;
        s.subject_id = "NEW";
        s.modality = Modality::Full;
        s.features = centre;
        for (double& v : s.features) v += spec.spread * rng.normal();
        new_data.samples.push_back(std::move(s));
    }

    RetrainProblem problem = make_retrain_problem(base, new_data, data.full_train, clusters.atlas, spec.lambda);
    return ContinualScenario{std::move(data), std::move(base), std::move(clusters), std::move(new_data), std::move(problem)};
}

SynthSpec TwoDomainSpec::default_synth() {
    SynthSpec s;
    s.n_subjects_per_class = 18;
    s.test_subjects_per_class = 10;
    s.records_per_subject = 10;
    s.full_dim = 48;
    s.reduced_dim = 24;
    s.class_separation_full = 6.0;
    s.class_separation_reduced = 2.0;
    return s;
}

TwoDomainRun run_two_domain(const TwoDomainSpec& spec, double eta) {
    SynthSpec synth = spec.synth;
    synth.seed = spec.seed;
    const SynthData data = generate_synth(synth);

    DenseHead full(HeadConfig{synth.full_dim, spec.hidden_dims, spec.seed, spec.learning_rate, spec.full_epochs, spec.batch_size});
    train_mse(full, data.full_train);
    const ClusterResult clusters = kmeans_pp(extract_latents(full, data.full_train), {spec.k, spec.seed, 300, 1e-9});

    DenseHead reduced(HeadConfig{synth.reduced_dim, spec.hidden_dims, derive_seed(spec.seed, Stream::AdaptInit),
                                 spec.learning_rate, spec.reduced_epochs, spec.batch_size});
    AdaptConfig config;
    config.eta = eta;
    config.atlas = clusters.atlas;

    TwoDomainRun run;
    run.report = train_adapted(reduced, data.reduced_train, config);
    run.full_test_accuracy = accuracy(full, data.full_test);
    run.reduced_test_accuracy = accuracy(reduced, data.reduced_test);
    run.reduced_train_accuracy = accuracy(reduced, data.reduced_train);
    return run;
}

}  // namespace latent
