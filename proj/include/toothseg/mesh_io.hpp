#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toothseg/mesh.hpp"

namespace toothseg {

enum class MeshFormat { Obj, Ply, Stl };

using Rgb = std::array<std::uint8_t, 3>;

/// Picks the format from the file extension (case-insensitive).
MeshFormat format_from_path(const std::filesystem::path& path);

/// Parses ASCII OBJ, ASCII or binary little-endian PLY, or binary STL.
/// STL vertices are merged by exact coordinate match.
TriangleMesh parse_mesh(std::string_view bytes, MeshFormat format);

TriangleMesh load_mesh(const std::filesystem::path& path);

/// ASCII OBJ with full double precision, so reloading is exact.
std::string write_obj(const TriangleMesh& mesh);

/// ASCII PLY with per-face uchar red/green/blue properties.
std::string export_colored_ply(const TriangleMesh& mesh, std::span<const Rgb> face_colors);

/// Per-face colors for an id map (cluster ids or class labels); neighbouring
/// ids land far apart in hue.
std::vector<Rgb> colors_for_ids(std::span<const int> ids);

/// Label sidecar: one integer per line, or a JSON integer array.
std::vector<int> read_labels(std::string_view text);
std::string write_labels(std::span<const int> labels);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace toothseg
