#include <doctest.h>

#include <set>
#include <sstream>

#include "latent/data_io.hpp"
#include "latent/error.hpp"
#include "oracles.hpp"

using namespace latent;

namespace {

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in, Modality::Full, Split::Train);
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::Io;
}

std::size_t error_line(const std::string& text) {
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

Dataset records(const std::vector<std::pair<std::string, int>>& ids, std::size_t dim, double base) {
    Dataset d;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Sample s;
        s.subject_id = ids[i].first;
        s.label = ids[i].second;
        s.features.assign(dim, base + static_cast<double>(i));
        d.samples.push_back(s);
    }
    return d;
}

}  // namespace

TEST_CASE("csv round trip keeps every bit") {
    std::mt19937_64 gen(3);
    Dataset d = oracle::two_blobs(gen, 6, 5, 2.0);
    d.samples[0].subject_id = "with,comma";
    d.samples[0].features[1] = 1.0 / 3.0;
    std::stringstream s;
    write_csv(s, d);
    const Dataset back = read_csv(s, Modality::Full, Split::Train);
    CHECK(back == d);

    const auto dir = oracle::temp_dir("data_io");
    save_csv(dir / "d.csv", d);
    CHECK(load_csv(dir / "d.csv", Modality::Full, Split::Train) == d);
    std::filesystem::remove_all(dir);
}

TEST_CASE("csv errors") {
    const std::string header = "subject_id,label,f0,f1\n";
    CHECK(parse(header).empty());
    CHECK(parse("# comment\n" + header + "A,1,0.5,2\n").size() == 1);
    CHECK(error_line(header + "A,1,0.5,2\nB,2,0.5,2\n") == 3);
    CHECK(error_line(header + "A,1,zz,2\n") == 2);
    CHECK(error_line(header + "A,1,nan,2\n") == 2);
    CHECK(error_line(header + ",1,0.5,2\n") == 2);
    CHECK(kind_of([&] { parse(header + "A,1,0.5,2\nB,0,0.5\n"); }) == ErrorKind::InconsistentDim);
    CHECK(kind_of([] { load_csv("/no/such/file.csv", Modality::Full, Split::Train); }) == ErrorKind::Io);
}

TEST_CASE("pair_augment per category is the label-wise cross product") {
    for (std::size_t m0 = 1; m0 <= 3; ++m0) {
        for (std::size_t d0 = 1; d0 <= 3; ++d0) {
            std::vector<std::pair<std::string, int>> mri_ids, dat_ids;
            for (std::size_t i = 0; i < m0; ++i) mri_ids.push_back({"M" + std::to_string(i), 0});
            for (std::size_t i = 0; i < m0 + 1; ++i) mri_ids.push_back({"P" + std::to_string(i), 1});
            for (std::size_t i = 0; i < d0; ++i) dat_ids.push_back({"D" + std::to_string(i), 0});
            for (std::size_t i = 0; i < 2; ++i) dat_ids.push_back({"Q" + std::to_string(i), 1});
            const Dataset mri = records(mri_ids, 3, 0.0);
            const Dataset dat = records(dat_ids, 2, 100.0);
            const Dataset out = pair_augment(mri, dat, PairingMode::PerCategory);
            CHECK(out.size() == m0 * d0 + (m0 + 1) * 2);
            CHECK(out.dim() == 5);
            CHECK(out.samples[0].subject_id == "M0");
            CHECK(out.samples[0].features == Vec{0, 0, 0, 100, 100});
            if (d0 > 1) CHECK(out.samples[1].features == Vec{0, 0, 0, 101, 101});
            for (const Sample& s : out.samples) CHECK(s.label == (s.subject_id[0] == 'P' ? 1 : 0));
        }
    }
}

TEST_CASE("pair_augment per subject and empty groups") {
    const Dataset mri = records({{"A", 0}, {"A", 0}, {"B", 1}}, 2, 0.0);
    const Dataset dat = records({{"A", 0}, {"B", 1}, {"B", 1}}, 1, 10.0);
    const Dataset out = pair_augment(mri, dat, PairingMode::PerSubject);
    CHECK(out.size() == 2 + 2);
    CHECK(kind_of([&] { pair_augment(mri, records({{"A", 0}}, 1, 0.0), PairingMode::PerCategory); }) ==
          ErrorKind::EmptyGroup);
    CHECK(kind_of([&] { pair_augment(mri, records({{"A", 0}, {"C", 1}}, 1, 0.0), PairingMode::PerSubject); }) ==
          ErrorKind::EmptyGroup);
    CHECK(parse_pairing_mode("per_subject") == PairingMode::PerSubject);
}

TEST_CASE("synth spec json and validation") {
    SynthSpec s;
    s.seed = 123;
    s.full_dim = 30;
    s.reduced_dim = 10;
    const SynthSpec back = synth_spec_from_json(synth_spec_to_json(s));
    CHECK(back.seed == 123);
    CHECK(back.full_dim == 30);
    CHECK(back.reduced_dim == 10);
    CHECK(back.class_separation_reduced == s.class_separation_reduced);

    SynthSpec bad = s;
    bad.reduced_dim = 40;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::SpecInvalid);
    bad = s;
    bad.records_per_subject = 0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::SpecInvalid);
    bad = s;
    bad.test_subjects_per_class = s.n_subjects_per_class;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::SpecInvalid);
}

TEST_CASE("generate_synth shapes, determinism and subject split") {
    SynthSpec s;
    s.n_subjects_per_class = 6;
    s.test_subjects_per_class = 2;
    s.records_per_subject = 3;
    const SynthData a = generate_synth(s);
    const SynthData b = generate_synth(s);
    CHECK(a.full_train == b.full_train);
    CHECK(a.reduced_test == b.reduced_test);
    CHECK(a.full_train.size() == 2 * 4 * 3);
    CHECK(a.full_test.size() == 2 * 2 * 3);
    CHECK(a.reduced_train.size() == a.full_train.size());
    CHECK(a.full_train.dim() == s.full_dim);
    CHECK(a.reduced_train.dim() == s.reduced_dim);
    std::set<std::string> train_ids, test_ids;
    for (const Sample& x : a.full_train.samples) train_ids.insert(x.subject_id);
    for (const Sample& x : a.full_test.samples) test_ids.insert(x.subject_id);
    for (const std::string& id : test_ids) CHECK(train_ids.count(id) == 0);
    for (std::size_t i = 0; i < a.full_train.size(); ++i) {
        CHECK(a.full_train.samples[i].subject_id == a.reduced_train.samples[i].subject_id);
        CHECK(a.full_train.samples[i].label == a.reduced_train.samples[i].label);
    }
    s.seed = 8;
    CHECK_FALSE(generate_synth(s).full_train == a.full_train);
}
