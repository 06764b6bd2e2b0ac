#ifndef MFREG_IO_HPP
#define MFREG_IO_HPP

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mfreg/grid.hpp"
#include "mfreg/volume.hpp"

namespace mfreg::io {

// MetaImage subset: NDims=3, DimSize, ElementSpacing, ElementType in
// {MET_SHORT, MET_USHORT, MET_FLOAT, MET_DOUBLE}, ElementDataFile
// (LOCAL or a sibling raw file). Payload is little-endian; values are
// converted to 64-bit floats.
Volume read_volume(const std::filesystem::path& path);

// Writes a MET_DOUBLE MetaImage with an inline (LOCAL) payload.
void write_volume(const std::filesystem::path& path, const Volume& v);

// Deformation field: raw little-endian doubles, component-major, plus a
// key=value sidecar (<path>.meta) recording the nodal grid.
void write_deformation(const std::filesystem::path& path, std::span<const double> y,
                       const GridDesc& grid);
std::vector<double> read_deformation(const std::filesystem::path& path, const GridDesc& grid);
GridDesc read_deformation_grid(const std::filesystem::path& path);

// Landmarks: whitespace-separated voxel-index triples, one per line;
// converted to physical coordinates with the supplied spacing
// (cell-centered convention).
std::vector<std::array<double, 3>> read_landmarks(const std::filesystem::path& path,
                                                  const std::array<double, 3>& spacing);

struct LandmarkStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};

// Mean and standard deviation of ||phi(p_fixed) - p_moving|| with phi
// evaluated by trilinear interpolation of the nodal field y.
LandmarkStats landmark_error(const std::vector<std::array<double, 3>>& fixed,
                             const std::vector<std::array<double, 3>>& moving,
                             std::span<const double> y, const GridDesc& grid);

} // namespace mfreg::io

#endif
