#include "latent/data_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "json.hpp"
#include "latent/atlas_io.hpp"
#include "latent/error.hpp"
#include "latent/kernels/kernels.hpp"
#include "latent/rng.hpp"

namespace latent {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    if (quoted) throw ParseError(line_no, "unterminated quoted field");
    fields.push_back(std::move(current));
    return fields;
}

double parse_real(const std::string& text, std::size_t line_no) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) throw ParseError(line_no, "bad number '" + text + "'");
    if (!std::isfinite(value)) throw ParseError(line_no, "non-finite feature '" + text + "'");
    return value;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Dataset read_csv(std::istream& in, Modality modality, Split split) {
    Dataset data;
    data.modality = modality;
    data.split = split;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const std::vector<std::string> fields = split_csv_line(line, line_no);
        if (!have_header) {
            if (fields.size() < 3 || fields[0] != "subject_id" || fields[1] != "label") {
                throw ParseError(line_no, "header must be 'subject_id,label,f0,...'");
            }
            for (std::size_t i = 2; i < fields.size(); ++i) {
                if (fields[i] != "f" + std::to_string(i - 2)) throw ParseError(line_no, "unexpected column '" + fields[i] + "'");
            }
            dim = fields.size() - 2;
            have_header = true;
            continue;
        }
        if (fields.size() != dim + 2) {
            fail(ErrorKind::InconsistentDim, "line " + std::to_string(line_no) + ": expected " + std::to_string(dim + 2) +
                                                 " fields, found " + std::to_string(fields.size()));
        }
        Sample s;
        s.subject_id = fields[0];
        if (s.subject_id.empty()) throw ParseError(line_no, "empty subject_id");
        if (fields[1] == "0") {
            s.label = 0;
        } else if (fields[1] == "1") {
            s.label = 1;
        } else {
            throw ParseError(line_no, "label must be 0 or 1, found '" + fields[1] + "'");
        }
        s.modality = modality;
        s.features.reserve(dim);
        for (std::size_t i = 2; i < fields.size(); ++i) s.features.push_back(parse_real(fields[i], line_no));
        data.samples.push_back(std::move(s));
    }
    if (!have_header) throw ParseError(line_no == 0 ? 1 : line_no, "missing header row");
    return data;
}

Dataset load_csv(const std::filesystem::path& path, Modality modality, Split split) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open CSV file " + path.string());
    return read_csv(in, modality, split);
}

void write_csv(std::ostream& out, const Dataset& data) {
    data.validate();
    out << kCsvSchemaLine << '\n' << "subject_id,label";
    const std::size_t dim = data.dim();
    for (std::size_t i = 0; i < dim; ++i) out << ",f" << i;
    out << '\n';
    for (const Sample& s : data.samples) {
        out << csv_escape(s.subject_id) << ',' << s.label;
        for (double v : s.features) out << ',' << format_real(v);
        out << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write CSV file " + path.string());
    write_csv(out, data);
}

PairingMode parse_pairing_mode(std::string_view text) {
    if (text == "per_category") return PairingMode::PerCategory;
    if (text == "per_subject") return PairingMode::PerSubject;
    fail(ErrorKind::InvalidArgument, "unknown pairing mode '" + std::string(text) + "'");
}

Dataset pair_augment(const Dataset& mri, const Dataset& dat, PairingMode mode) {
    mri.validate();
    dat.validate();

    // Group keys in first-appearance order of the MRI input.
    auto key_of = [mode](const Sample& s) { return mode == PairingMode::PerCategory ? std::to_string(s.label) : s.subject_id; };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::size_t>> mri_groups;
    std::unordered_map<std::string, std::vector<std::size_t>> dat_groups;
    for (std::size_t i = 0; i < mri.size(); ++i) {
        const std::string key = key_of(mri.samples[i]);
        auto [it, inserted] = mri_groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(i);
    }
    for (std::size_t i = 0; i < dat.size(); ++i) dat_groups[key_of(dat.samples[i])].push_back(i);

    const std::string what = mode == PairingMode::PerCategory ? "class " : "subject ";
    for (const auto& [key, rows] : dat_groups) {
        require(mri_groups.contains(key), ErrorKind::EmptyGroup, what + key + " has DaT records but no MRI records");
    }
    for (const std::string& key : order) {
        require(dat_groups.contains(key), ErrorKind::EmptyGroup, what + key + " has MRI records but no DaT records");
    }

    Dataset out;
    out.modality = Modality::Full;
    out.split = mri.split;
    for (const std::string& key : order) {
        for (std::size_t mi : mri_groups[key]) {
            const Sample& m = mri.samples[mi];
            for (std::size_t di : dat_groups[key]) {
                const Sample& d = dat.samples[di];
                require(m.label == d.label, ErrorKind::InvalidArgument,
                        "subject " + m.subject_id + " has conflicting labels across inputs");
                Sample s;
                s.features = m.features;
                s.features.insert(s.features.end(), d.features.begin(), d.features.end());
                s.label = m.label;
                s.subject_id = m.subject_id;
                s.modality = Modality::Full;
                out.samples.push_back(std::move(s));
            }
        }
    }
    return out;
}

void SynthSpec::validate() const {
    auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::SpecInvalid, "synth spec: " + msg); };
    check(n_subjects_per_class >= 2, "n_subjects_per_class must be at least 2");
    check(test_subjects_per_class >= 1 && test_subjects_per_class < n_subjects_per_class,
          "test_subjects_per_class must be in [1, n_subjects_per_class)");
    check(records_per_subject >= 1, "records_per_subject must be positive");
    check(reduced_dim >= 1 && full_dim > reduced_dim, "need 1 <= reduced_dim < full_dim");
    check(class_separation_full >= 0.0 && class_separation_reduced >= 0.0, "separations must be non-negative");
    check(class_separation_full > class_separation_reduced || (class_separation_full == 0.0 && class_separation_reduced == 0.0),
          "class_separation_full must exceed class_separation_reduced");
    check(intra_class_modes >= 1, "intra_class_modes must be positive");
    check(mode_spread >= 0.0 && subject_sigma >= 0.0 && noise_sigma >= 0.0, "spreads must be non-negative");
    // The mode offsets are kept orthogonal to both class axes.
    check(full_dim >= 3, "full_dim must be at least 3");
}

SynthSpec synth_spec_from_json(const std::string& text) {
    SynthSpec spec;
    try {
        const nlohmann::json doc = nlohmann::json::parse(text);
        spec.n_subjects_per_class = doc.value("n_subjects_per_class", spec.n_subjects_per_class);
        spec.test_subjects_per_class = doc.value("test_subjects_per_class", spec.test_subjects_per_class);
        spec.records_per_subject = doc.value("records_per_subject", spec.records_per_subject);
        spec.full_dim = doc.value("full_dim", spec.full_dim);
        spec.reduced_dim = doc.value("reduced_dim", spec.reduced_dim);
        spec.class_separation_full = doc.value("class_separation_full", spec.class_separation_full);
        spec.class_separation_reduced = doc.value("class_separation_reduced", spec.class_separation_reduced);
        spec.intra_class_modes = doc.value("intra_class_modes", spec.intra_class_modes);
        spec.mode_spread = doc.value("mode_spread", spec.mode_spread);
        spec.subject_sigma = doc.value("subject_sigma", spec.subject_sigma);
        spec.noise_sigma = doc.value("noise_sigma", spec.noise_sigma);
        spec.seed = doc.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::SpecInvalid, std::string("synth spec JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
    nlohmann::json doc;
    doc["n_subjects_per_class"] = spec.n_subjects_per_class;
    doc["test_subjects_per_class"] = spec.test_subjects_per_class;
    doc["records_per_subject"] = spec.records_per_subject;
    doc["full_dim"] = spec.full_dim;
    doc["reduced_dim"] = spec.reduced_dim;
    doc["class_separation_full"] = spec.class_separation_full;
    doc["class_separation_reduced"] = spec.class_separation_reduced;
    doc["intra_class_modes"] = spec.intra_class_modes;
    doc["mode_spread"] = spec.mode_spread;
    doc["subject_sigma"] = spec.subject_sigma;
    doc["noise_sigma"] = spec.noise_sigma;
    doc["seed"] = spec.seed;
    return doc.dump(2);
}

namespace {

Vec random_unit(Rng& rng, std::size_t dim, std::size_t begin, std::size_t end, const std::vector<Vec>& avoid) {
    for (;;) {
        Vec v(dim, 0.0);
        for (std::size_t i = begin; i < end; ++i) v[i] = rng.normal();
        for (const Vec& a : avoid) kernels::axpy(-kernels::dot(a, v), a, v);
        const double n = norm(v);
        if (n > 1e-6) {
            for (double& x : v) x /= n;
            return v;
        }
    }
}

}  // namespace

SynthData generate_synth(const SynthSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, Stream::Synth));
    const std::size_t full = spec.full_dim;
    const std::size_t reduced = spec.reduced_dim;

    const Vec shared_axis = random_unit(rng, full, 0, reduced, {});
    const Vec extra_axis = random_unit(rng, full, reduced, full, {});
    const double shared_half = 0.5 * spec.class_separation_reduced;
    const double extra_half = 0.5 * std::sqrt(std::max(0.0, spec.class_separation_full * spec.class_separation_full -
                                                                 spec.class_separation_reduced * spec.class_separation_reduced));

    // modes[label][m]: centre of one sub-cluster.
    std::vector<std::vector<Vec>> modes(2);
    for (int label = 0; label < 2; ++label) {
        const double sign = label == 1 ? 1.0 : -1.0;
        for (std::size_t m = 0; m < spec.intra_class_modes; ++m) {
            Vec centre(full, 0.0);
            kernels::axpy(sign * shared_half, shared_axis, centre);
            kernels::axpy(sign * extra_half, extra_axis, centre);
            if (spec.intra_class_modes > 1) {
                const Vec offset = random_unit(rng, full, 0, full, {shared_axis, extra_axis});
                kernels::axpy(spec.mode_spread, offset, centre);
            }
            modes[label].push_back(std::move(centre));
        }
    }

    SynthData out;
    out.full_train = {{}, Modality::Full, Split::Train};
    out.full_test = {{}, Modality::Full, Split::Test};
    out.reduced_train = {{}, Modality::Reduced, Split::Train};
    out.reduced_test = {{}, Modality::Reduced, Split::Test};
    const std::size_t train_subjects = spec.n_subjects_per_class - spec.test_subjects_per_class;

    for (std::size_t s = 0; s < spec.n_subjects_per_class; ++s) {
        for (int label = 0; label < 2; ++label) {
            char id[32];
            std::snprintf(id, sizeof id, "%c%03zu", label == 1 ? 'P' : 'N', s);
            const Vec& centre = modes[label][s % spec.intra_class_modes];
            Vec subject = centre;
            for (double& v : subject) v += spec.subject_sigma * rng.normal();
            const bool is_test = s >= train_subjects;
            for (std::size_t r = 0; r < spec.records_per_subject; ++r) {
                Sample f;
                f.subject_id = id;
                f.label = label;
                f.modality = Modality::Full;
                f.features = subject;
                for (double& v : f.features) v += spec.noise_sigma * rng.normal();
                Sample g;
                g.subject_id = id;
                g.label = label;
                g.modality = Modality::Reduced;
                g.features.assign(f.features.begin(), f.features.begin() + static_cast<std::ptrdiff_t>(reduced));
                for (double& v : g.features) v += spec.noise_sigma * rng.normal();
                (is_test ? out.full_test : out.full_train).samples.push_back(std::move(f));
                (is_test ? out.reduced_test : out.reduced_train).samples.push_back(std::move(g));
            }
        }
    }
    return out;
}

}  // namespace latent
