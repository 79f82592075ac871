#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "latent/latent_atlas.hpp"

namespace latent {

inline constexpr int kAtlasFormatVersion = 1;

// JSON document:
//   {"version": 1, "k": k, "l": l, "centroids": [[...], ...],
//    "class_labels": [...], "annotations": [...], "member_counts": [...],
//    "purity": [...], "exemplar_ids": [...], "exemplar_indices": [...]}
std::string atlas_to_json(const CentroidAtlas& atlas);
CentroidAtlas atlas_from_json(const std::string& text);

void save_atlas(const std::filesystem::path& path, const CentroidAtlas& atlas);
CentroidAtlas load_atlas(const std::filesystem::path& path);

// Per-subject counts: header "subject_id,t1,...,tk", one row per subject.
void write_assignment_csv(std::ostream& out, const AssignmentReport& report, std::size_t k);

// Cluster membership: cluster,class_label,members,percent,purity,exemplar_id,annotation
void write_membership_csv(std::ostream& out, const CentroidAtlas& atlas);

// Plot-ready coordinates: id,x,y,z,cluster,class,kind
void write_projection_csv(std::ostream& out, const Projection& projection);

// Leading comment line carried by every CSV the library writes.
inline constexpr const char* kCsvSchemaLine = "# latent-atlas csv v1";

// Quotes a CSV field when it contains separators, quotes or newlines.
std::string csv_escape(const std::string& field);

}  // namespace latent
