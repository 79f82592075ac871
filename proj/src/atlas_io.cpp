#include "latent/atlas_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "latent/error.hpp"

namespace latent {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string atlas_to_json(const CentroidAtlas& atlas) {
    atlas.validate();
    json doc;
    doc["version"] = kAtlasFormatVersion;
    doc["k"] = atlas.k();
    doc["l"] = atlas.dim();
    doc["centroids"] = atlas.centroids;
    doc["class_labels"] = atlas.class_labels;
    doc["annotations"] = atlas.annotations;
    doc["member_counts"] = atlas.member_counts;
    doc["purity"] = atlas.purity;
    doc["exemplar_ids"] = atlas.exemplar_ids;
    doc["exemplar_indices"] = atlas.exemplar_indices;
    return doc.dump(2);
}

CentroidAtlas atlas_from_json(const std::string& text) {
    CentroidAtlas atlas;
    try {
        const json doc = json::parse(text);
        const int version = doc.at("version").get<int>();
        require(version == kAtlasFormatVersion, ErrorKind::ParseError,
                "unsupported atlas format version " + std::to_string(version));
        atlas.centroids = doc.at("centroids").get<std::vector<Vec>>();
        atlas.class_labels = doc.at("class_labels").get<std::vector<int>>();
        atlas.annotations = doc.at("annotations").get<std::vector<std::string>>();
        atlas.member_counts = doc.at("member_counts").get<std::vector<std::size_t>>();
        atlas.purity = doc.at("purity").get<std::vector<double>>();
        atlas.exemplar_ids = doc.at("exemplar_ids").get<std::vector<std::string>>();
        atlas.exemplar_indices = doc.value("exemplar_indices", std::vector<std::size_t>(atlas.centroids.size(), 0));
        require(doc.at("k").get<std::size_t>() == atlas.k(), ErrorKind::ParseError, "atlas k disagrees with centroid count");
        require(doc.at("l").get<std::size_t>() == atlas.dim(), ErrorKind::ParseError, "atlas l disagrees with centroid size");
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, std::string("atlas JSON: ") + e.what());
    }
    try {
        atlas.validate();
    } catch (const Error& e) {
        fail(ErrorKind::ParseError, std::string("atlas JSON: ") + e.what());
    }
    return atlas;
}

void save_atlas(const std::filesystem::path& path, const CentroidAtlas& atlas) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write atlas file " + path.string());
    out << atlas_to_json(atlas) << '\n';
}

CentroidAtlas load_atlas(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open atlas file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return atlas_from_json(buffer.str());
}

void write_assignment_csv(std::ostream& out, const AssignmentReport& report, std::size_t k) {
    out << kCsvSchemaLine << '\n' << "subject_id";
    for (std::size_t c = 0; c < k; ++c) out << ",t" << (c + 1);
    out << '\n';
    for (const SubjectCounts& row : report.rows) {
        out << csv_escape(row.subject_id);
        for (std::size_t count : row.counts) out << ',' << count;
        out << '\n';
    }
}

void write_membership_csv(std::ostream& out, const CentroidAtlas& atlas) {
    std::size_t total = 0;
    for (std::size_t m : atlas.member_counts) total += m;
    out << kCsvSchemaLine << '\n' << "cluster,class_label,members,percent,purity,exemplar_id,annotation\n";
    for (std::size_t c = 0; c < atlas.k(); ++c) {
        const double percent =
            total == 0 ? 0.0 : 100.0 * static_cast<double>(atlas.member_counts[c]) / static_cast<double>(total);
        out << 't' << (c + 1) << ',' << atlas.class_labels[c] << ',' << atlas.member_counts[c] << ',' << fixed(percent, 1)
            << ',' << fixed(atlas.purity[c], 4) << ',' << csv_escape(atlas.exemplar_ids[c]) << ','
            << csv_escape(atlas.annotations[c]) << '\n';
    }
}

void write_projection_csv(std::ostream& out, const Projection& projection) {
    out << kCsvSchemaLine << '\n' << "id,x,y,z,cluster,class,kind\n";
    for (const ProjectedPoint& p : projection.rows) {
        out << csv_escape(p.id) << ',' << full_precision(p.x) << ',' << full_precision(p.y) << ',' << full_precision(p.z)
            << ',' << p.cluster << ',' << p.label << ',' << (p.is_centroid ? "centroid" : "point") << '\n';
    }
}

}  // namespace latent
