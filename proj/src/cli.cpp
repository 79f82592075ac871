#include "latent/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "latent/atlas_io.hpp"
#include "latent/dense_head.hpp"
#include "latent/domain_adapt.hpp"
#include "latent/error.hpp"
#include "latent/latent_atlas.hpp"
#include "latent/model_io.hpp"
#include "latent/retrain.hpp"

namespace latent {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void check_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) fail(ErrorKind::ParseError, "config: " + where + " must be an object");
    const std::set<std::string_view> names(allowed);
    for (const auto& item : obj.items()) {
        if (!names.contains(item.key())) fail(ErrorKind::ParseError, "config: unknown key '" + item.key() + "' in " + where);
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

void read_path_if(const nlohmann::json& obj, const char* key, const fs::path& base, fs::path& target) {
    if (obj.contains(key)) target = resolve(base, obj.at(key).get<std::string>());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string timestamp() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    std::tm utc{};
    gmtime_r(&t, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

Json report_header(const std::string& command, const PipelineConfig& config) {
    Json doc;
    doc["command"] = command;
    doc["generated_at"] = timestamp();
    doc["seed"] = config.seed;
    return doc;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

template <typename Writer>
void write_csv_file(const fs::path& path, Writer writer) {
    std::ostringstream buf;
    writer(buf);
    write_text(path, buf.str());
}

Json history_json(const TrainReport& report) {
    Json rows = Json::array();
    for (std::size_t e = 0; e < report.history.size(); ++e) {
        rows.push_back({{"epoch", e}, {"e1", report.history[e].e1}, {"e2", report.history[e].e2}, {"total", report.history[e].total}});
    }
    return rows;
}

Json assignment_json(const AssignmentReport& report) {
    Json rows = Json::array();
    for (const SubjectCounts& r : report.rows) rows.push_back({{"subject_id", r.subject_id}, {"counts", r.counts}});
    return {{"accuracy", report.accuracy}, {"total", report.total}, {"correct", report.correct}, {"subjects", rows}};
}

Json head_json(const HeadConfig& c) {
    return {{"input_dim", c.input_dim}, {"hidden_dims", c.hidden_dims}, {"seed", c.seed},
            {"learning_rate", c.learning_rate}, {"epochs", c.epochs}, {"batch_size", c.batch_size}};
}

fs::path require_path(const fs::path& p, const char* what) {
    require(!p.empty(), ErrorKind::InvalidArgument, std::string("missing ") + what + " path");
    return p;
}

fs::path or_default(const fs::path& p, const fs::path& fallback) { return p.empty() ? fallback : p; }

// Creates the parent directory of an output file and returns the path.
fs::path prepared(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    return path;
}

Dataset load_data(const PipelineConfig& c, Split split) {
    return load_csv(require_path(split == Split::Train ? c.paths.data : c.paths.test, split == Split::Train ? "data" : "test"),
                    c.modality, split);
}

int cmd_synth(const PipelineConfig& c) {
    SynthSpec spec = c.synth;
    spec.seed = c.seed;
    const SynthData data = generate_synth(spec);
    const fs::path& out = c.paths.out;
    save_csv(prepared(out / "full_train.csv"), data.full_train);
    save_csv(prepared(out / "full_test.csv"), data.full_test);
    save_csv(prepared(out / "reduced_train.csv"), data.reduced_train);
    save_csv(prepared(out / "reduced_test.csv"), data.reduced_test);
    write_text(out / "synth_spec.json", synth_spec_to_json(spec) + "\n");
    Json doc = report_header("synth", c);
    doc["spec"] = Json::parse(synth_spec_to_json(spec));
    doc["counts"] = {{"full_train", data.full_train.size()}, {"full_test", data.full_test.size()},
                     {"reduced_train", data.reduced_train.size()}, {"reduced_test", data.reduced_test.size()}};
    write_json(out / "synth_report.json", doc);
    return 0;
}

int cmd_train(const PipelineConfig& c) {
    const Dataset data = load_data(c, Split::Train);
    require(!data.empty(), ErrorKind::InvalidArgument, "train: dataset is empty");
    const HeadConfig head{data.dim(), c.hidden_dims, c.seed, c.learning_rate, c.epochs, c.batch_size};
    DenseHead model(head);
    const TrainReport report = train_mse(model, data);
    save_model(prepared(or_default(c.paths.model, c.paths.out / "model.txt")), model);

    Json doc = report_header("train", c);
    doc["head"] = head_json(head);
    doc["samples"] = data.size();
    doc["history"] = history_json(report);
    doc["initial_loss"] = report.initial_loss();
    doc["final_loss"] = report.final_loss();
    doc["final_accuracy"] = report.final_accuracy;
    if (!c.paths.test.empty()) doc["test_accuracy"] = accuracy(model, load_data(c, Split::Test));
    write_json(c.paths.out / "train_report.json", doc);
    return 0;
}

int cmd_cluster(const PipelineConfig& c) {
    const DenseHead model = load_model(require_path(c.paths.model, "model"));
    const Dataset data = load_data(c, Split::Train);
    const LatentSet latents = extract_latents(model, data);
    const ClusterResult result = kmeans_pp(latents, {c.k, c.seed, 300, 1e-8});
    save_atlas(prepared(or_default(c.paths.atlas, c.paths.out / "atlas.json")), result.atlas);
    write_csv_file(c.paths.out / "membership.csv", [&](std::ostream& o) { write_membership_csv(o, result.atlas); });

    std::vector<std::string> warnings = result.warnings;
    if (model.latent_dim() >= 3) {
        const Projection projection = project_3d(result.atlas, latents);
        write_csv_file(c.paths.out / "projection.csv", [&](std::ostream& o) { write_projection_csv(o, projection); });
        warnings.insert(warnings.end(), projection.warnings.begin(), projection.warnings.end());
    } else {
        warnings.emplace_back("projection skipped: latent dimension below 3");
    }

    Json doc = report_header("cluster", c);
    doc["k"] = c.k;
    doc["samples"] = latents.size();
    doc["iterations"] = result.iterations;
    doc["converged"] = result.converged;
    doc["objective_history"] = result.objective_history;
    doc["silhouette"] = c.k >= 2 ? silhouette_score(latents, result.assignments, c.k) : 0.0;
    doc["class_labels"] = result.atlas.class_labels;
    doc["member_counts"] = result.atlas.member_counts;
    doc["purity"] = result.atlas.purity;
    doc["exemplar_ids"] = result.atlas.exemplar_ids;
    doc["warnings"] = warnings;
    write_json(c.paths.out / "cluster_report.json", doc);
    return 0;
}

int cmd_classify(const PipelineConfig& c) {
    const DenseHead model = load_model(require_path(c.paths.model, "model"));
    const CentroidAtlas atlas = load_atlas(require_path(c.paths.atlas, "atlas"));
    const Dataset data = c.paths.test.empty() ? load_data(c, Split::Train) : load_data(c, Split::Test);
    const Assignment assignment = assign_nearest(atlas, extract_latents(model, data));
    write_csv_file(c.paths.out / "assignments.csv", [&](std::ostream& o) { write_assignment_csv(o, assignment.report, atlas.k()); });

    Json doc = report_header("classify", c);
    doc["assignment"] = assignment_json(assignment.report);
    doc["model_accuracy"] = data.empty() ? 0.0 : accuracy(model, data);
    write_json(c.paths.out / "classify_report.json", doc);
    return 0;
}

int cmd_retrain(const PipelineConfig& c) {
    const DenseHead base = load_model(require_path(c.paths.model, "model"));
    const CentroidAtlas atlas = load_atlas(require_path(c.paths.atlas, "atlas"));
    Dataset old_data = load_data(c, Split::Train);
    Dataset new_data;
    new_data.modality = c.modality;
    if (!c.retrain.new_data_path.empty()) new_data = load_csv(c.retrain.new_data_path, c.modality, Split::Train);

    const RetrainProblem problem = make_retrain_problem(base, new_data, std::move(old_data), atlas, c.retrain.lambda);
    RetrainOptions options;
    options.clamp = c.retrain.clamp;
    options.tol = c.retrain.tol;
    options.max_iter = c.retrain.max_iter;
    const RetrainResult r = solve_retrain(problem, options);
    save_model(prepared(c.paths.out / "retrained_model.txt"), r.updated_model);

    Json doc = report_header("retrain", c);
    doc["lambda"] = problem.lambda;
    doc["options"] = {{"clamp", options.clamp}, {"tol", options.tol}, {"max_iter", options.max_iter}, {"max_passes", options.max_passes}};
    doc["new_samples"] = problem.new_data.size();
    doc["augmented_size"] = r.augmented_size;
    doc["delta_norm"] = r.delta_norm;
    doc["constraint_residual"] = r.constraint_residual;
    doc["clamped_residual"] = r.clamped_residual;
    doc["old_accuracy_before"] = r.old_accuracy_before;
    doc["old_accuracy_after"] = r.old_accuracy_after;
    doc["new_accuracy"] = r.new_accuracy;
    doc["centroid_drift"] = r.centroid_drift;
    doc["exemplar_self_assigned"] = r.exemplar_self_assigned;
    doc["passes"] = r.passes;
    doc["projection_iterations"] = r.projection_iterations;
    doc["projection_converged"] = r.projection_converged;
    doc["warnings"] = r.warnings;
    doc["delta"] = r.delta;
    if (!c.paths.test.empty()) {
        const Dataset test = load_data(c, Split::Test);
        const Assignment before = assign_nearest(atlas, extract_latents(base, test));
        const Assignment after = evaluate_drift(r, atlas, test);
        write_csv_file(c.paths.out / "assignments_before.csv", [&](std::ostream& o) { write_assignment_csv(o, before.report, atlas.k()); });
        write_csv_file(c.paths.out / "assignments_after.csv", [&](std::ostream& o) { write_assignment_csv(o, after.report, atlas.k()); });
        doc["test_assignment_before"] = assignment_json(before.report);
        doc["test_assignment_after"] = assignment_json(after.report);
    }
    write_json(c.paths.out / "retrain_report.json", doc);
    return 0;
}

int cmd_adapt(const PipelineConfig& c) {
    const CentroidAtlas atlas = load_atlas(require_path(or_default(c.adapt.atlas_path, c.paths.atlas), "atlas"));
    const Dataset data = load_data(c, Split::Train);
    require(!data.empty(), ErrorKind::InvalidArgument, "adapt: dataset is empty");
    const HeadConfig head{data.dim(), c.hidden_dims, c.adapt.seed.value_or(c.seed), c.adapt.lr, c.adapt.epochs,
                          c.adapt.batch_size};

    AdaptConfig config;
    config.eta = c.adapt.eta;
    config.atlas = atlas;
    config.class_constrained = c.adapt.class_constrained;
    AdaptConfig baseline_config = config;
    baseline_config.eta = 1.0;

    DenseHead baseline(head);
    const TrainReport baseline_report = train_adapted(baseline, data, baseline_config);
    DenseHead adapted(head);
    const TrainReport report = train_adapted(adapted, data, config);
    save_model(prepared(c.paths.out / "baseline_model.txt"), baseline);
    save_model(prepared(c.paths.out / "adapted_model.txt"), adapted);

    Json doc = report_header("adapt", c);
    doc["eta"] = config.eta;
    doc["class_constrained"] = config.class_constrained;
    doc["head"] = head_json(head);
    doc["history"] = history_json(report);
    doc["baseline_history"] = history_json(baseline_report);
    doc["baseline_train_accuracy"] = baseline_report.final_accuracy;
    doc["adapted_train_accuracy"] = report.final_accuracy;
    const Dataset eval = c.paths.test.empty() ? data : load_data(c, Split::Test);
    doc["evaluated_on"] = c.paths.test.empty() ? "train" : "test";
    doc["baseline_accuracy"] = accuracy(baseline, eval);
    doc["adapted_accuracy"] = accuracy(adapted, eval);
    const Assignment before = assign_nearest(atlas, extract_latents(baseline, eval));
    const Assignment after = assign_nearest(atlas, extract_latents(adapted, eval));
    write_csv_file(c.paths.out / "assignments_before.csv", [&](std::ostream& o) { write_assignment_csv(o, before.report, atlas.k()); });
    write_csv_file(c.paths.out / "assignments_after.csv", [&](std::ostream& o) { write_assignment_csv(o, after.report, atlas.k()); });
    doc["assignment_before"] = assignment_json(before.report);
    doc["assignment_after"] = assignment_json(after.report);
    write_json(c.paths.out / "adapt_report.json", doc);
    return 0;
}

int cmd_report(const PipelineConfig& c) {
    require(!c.paths.model.empty() || !c.paths.atlas.empty(), ErrorKind::InvalidArgument,
            "report: need a model and/or an atlas");
    Json doc = report_header("report", c);
    std::optional<DenseHead> model;
    std::optional<CentroidAtlas> atlas;
    if (!c.paths.model.empty()) {
        model = load_model(c.paths.model);
        doc["model"] = head_json(model->config());
        doc["model"]["parameter_count"] = model->parameter_count();
    }
    if (!c.paths.atlas.empty()) {
        atlas = load_atlas(c.paths.atlas);
        doc["atlas"] = {{"k", atlas->k()},
                        {"l", atlas->dim()},
                        {"class_labels", atlas->class_labels},
                        {"annotations", atlas->annotations},
                        {"member_counts", atlas->member_counts},
                        {"purity", atlas->purity},
                        {"exemplar_ids", atlas->exemplar_ids}};
        write_csv_file(c.paths.out / "membership.csv", [&](std::ostream& o) { write_membership_csv(o, *atlas); });
    }
    if (model && !c.paths.data.empty()) {
        const Dataset data = load_data(c, Split::Train);
        doc["data_accuracy"] = accuracy(*model, data);
        if (atlas) doc["data_assignment"] = assignment_json(assign_nearest(*atlas, extract_latents(*model, data)).report);
    }
    write_json(c.paths.out / "summary.json", doc);
    return 0;
}

void emit_error(std::ostream& err, const std::string& command, const std::string& kind, const std::string& message,
                std::optional<std::size_t> line = std::nullopt) {
    Json doc;
    doc["error"] = kind;
    doc["command"] = command;
    doc["message"] = message;
    if (line) doc["line"] = *line;
    err << doc.dump() << '\n';
}

}  // namespace

void PipelineConfig::validate() const {
    require(adapt.eta >= 0.0 && adapt.eta <= 1.0, ErrorKind::InvalidArgument, "config: eta must lie in [0, 1]");
    require(k >= 1, ErrorKind::InvalidArgument, "config: k must be at least 1");
    require(!hidden_dims.empty(), ErrorKind::InvalidArgument, "config: hidden_dims must not be empty");
    require(retrain.lambda >= 0.0, ErrorKind::InvalidArgument, "config: lambda must be non-negative");
    require(retrain.clamp > 0.0 && retrain.clamp < 0.5, ErrorKind::InvalidArgument, "config: clamp must lie in (0, 0.5)");
    require(retrain.tol > 0.0, ErrorKind::InvalidArgument, "config: tol must be positive");
    require(learning_rate > 0.0 && adapt.lr > 0.0, ErrorKind::InvalidArgument, "config: learning rates must be positive");
    require(batch_size >= 1 && adapt.batch_size >= 1, ErrorKind::InvalidArgument, "config: batch sizes must be positive");
}

PipelineConfig parse_pipeline_config(const std::string& text, const fs::path& base_dir) {
    PipelineConfig c;
    try {
        const nlohmann::json doc = nlohmann::json::parse(text);
        check_keys(doc,
                   {"seed", "paths", "modality", "hidden_dims", "learning_rate", "epochs", "batch_size", "k", "retrain",
                    "adapt", "synth"},
                   "config");
        read_if(doc, "seed", c.seed);
        if (doc.contains("paths")) {
            const auto& p = doc.at("paths");
            check_keys(p, {"data", "test", "model", "atlas", "out"}, "paths");
            read_path_if(p, "data", base_dir, c.paths.data);
            read_path_if(p, "test", base_dir, c.paths.test);
            read_path_if(p, "model", base_dir, c.paths.model);
            read_path_if(p, "atlas", base_dir, c.paths.atlas);
            read_path_if(p, "out", base_dir, c.paths.out);
        }
        if (doc.contains("modality")) c.modality = parse_modality(doc.at("modality").get<std::string>());
        read_if(doc, "hidden_dims", c.hidden_dims);
        read_if(doc, "learning_rate", c.learning_rate);
        read_if(doc, "epochs", c.epochs);
        read_if(doc, "batch_size", c.batch_size);
        read_if(doc, "k", c.k);
        if (doc.contains("retrain")) {
            const auto& r = doc.at("retrain");
            check_keys(r, {"new_data_path", "lambda", "tol", "max_iter", "clamp"}, "retrain");
            read_path_if(r, "new_data_path", base_dir, c.retrain.new_data_path);
            read_if(r, "lambda", c.retrain.lambda);
            read_if(r, "tol", c.retrain.tol);
            read_if(r, "max_iter", c.retrain.max_iter);
            read_if(r, "clamp", c.retrain.clamp);
        }
        if (doc.contains("adapt")) {
            const auto& a = doc.at("adapt");
            check_keys(a, {"eta", "atlas_path", "epochs", "lr", "batch_size", "seed", "class_constrained"}, "adapt");
            read_if(a, "eta", c.adapt.eta);
            read_path_if(a, "atlas_path", base_dir, c.adapt.atlas_path);
            read_if(a, "epochs", c.adapt.epochs);
            read_if(a, "lr", c.adapt.lr);
            read_if(a, "batch_size", c.adapt.batch_size);
            if (a.contains("seed")) c.adapt.seed = a.at("seed").get<std::uint64_t>();
            read_if(a, "class_constrained", c.adapt.class_constrained);
        }
        if (doc.contains("synth")) c.synth = synth_spec_from_json(doc.at("synth").dump());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    return parse_pipeline_config(read_file(path), path.parent_path());
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Latent-variable atlas pipeline: train, cluster, classify, retrain and adapt dense heads."};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::optional<double> eta;
    std::optional<double> lambda;
    std::string data, test, model, atlas, out_dir, new_data, modality;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "root seed");
    app.add_option("--data", data, "training (or input) CSV");
    app.add_option("--test", test, "held-out CSV");
    app.add_option("--model", model, "model file");
    app.add_option("--atlas", atlas, "atlas JSON");
    app.add_option("--new-data", new_data, "new samples CSV for retrain");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--modality", modality, "full | reduced");
    app.add_option("--k", k, "number of clusters");
    app.add_option("--eta", eta, "E1 weight in E_new");
    app.add_option("--lambda", lambda, "old-data weight in retraining");

    const std::vector<std::pair<const char*, const char*>> commands{
        {"synth", "write the synthetic two-view benchmark as CSV"},
        {"train", "train a dense head on --data"},
        {"cluster", "cluster the head's latents into an atlas"},
        {"classify", "assign records to the atlas and write per-subject counts"},
        {"retrain", "constrained retraining on new samples"},
        {"adapt", "train a head with the centroid-attraction loss"},
        {"report", "summarize a model and/or atlas"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "", "UsageError", e.what());
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);
        if (seed) c.seed = *seed;
        if (k) c.k = *k;
        if (eta) c.adapt.eta = *eta;
        if (lambda) c.retrain.lambda = *lambda;
        if (!data.empty()) c.paths.data = data;
        if (!test.empty()) c.paths.test = test;
        if (!model.empty()) c.paths.model = model;
        if (!atlas.empty()) c.paths.atlas = atlas;
        if (!new_data.empty()) c.retrain.new_data_path = new_data;
        if (!out_dir.empty()) c.paths.out = out_dir;
        if (!modality.empty()) c.modality = parse_modality(modality);
        c.validate();

        if (command == "synth") return cmd_synth(c);
        if (command == "train") return cmd_train(c);
        if (command == "cluster") return cmd_cluster(c);
        if (command == "classify") return cmd_classify(c);
        if (command == "retrain") return cmd_retrain(c);
        if (command == "adapt") return cmd_adapt(c);
        return cmd_report(c);
    } catch (const ParseError& e) {
        emit_error(err, command, "ParseError", e.what(), e.line());
    } catch (const Error& e) {
        emit_error(err, command, std::string(to_string(e.kind())), e.what());
    } catch (const fs::filesystem_error& e) {
        emit_error(err, command, "Io", e.what());
    } catch (const std::exception& e) {
        emit_error(err, command, "Internal", e.what());
    }
    return 1;
}

}  // namespace latent
