#pragma once

// Mesh files and artifact writing.
//
//  * OFF: triangles (d = 2) or two-vertex faces (d = 1) in R^3; nOFF with a
//    dimension line for other ambient dimensions.
//  * OBJ: `v`, `f` (triangles; larger polygons are fanned) and `l` records.
//  * CSV polyline: one point per row, consecutive rows joined; a blank row
//    starts a new polyline. A non-numeric first row is a header.
//
// Floats are written with 17 significant digits so files round-trip exactly.

#include <string>
#include <vector>

#include "plateau/geometry.hpp"

namespace plateau::io {

std::string format_double(double v);

/// Format from the extension (.off, .obj, .csv); throws ConfigError otherwise.
enum class MeshFormat { Off, Obj, Csv };
MeshFormat format_from_path(const std::string& path);

/// Throws ConfigError when the file is missing or malformed, DomainError when
/// the mesh itself is invalid.
geom::EmbeddedMesh read_mesh(const std::string& path);
geom::EmbeddedMesh parse_mesh(const std::string& text, MeshFormat format);

std::string write_off(const geom::EmbeddedMesh& mesh);
std::string write_obj(const geom::EmbeddedMesh& mesh);
/// Segments of a d = 1 mesh, one polyline block per simplex.
std::string write_csv(const geom::EmbeddedMesh& mesh);
std::string write_mesh(const geom::EmbeddedMesh& mesh, MeshFormat format);

std::string read_file(const std::string& path);

/// Writes every file to a temporary sibling, then renames all of them. On any
/// failure the temporaries are removed and nothing is left behind.
struct Artifact {
  std::string path;
  std::string content;
};
void write_atomically(const std::vector<Artifact>& artifacts);

}  // namespace plateau::io
