#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pointvox/core.hpp"

namespace pointvox::io {

// PCB v1: little-endian; "PCB1"; u32 n; u32 d; n*3 float32 positions; n*d float32 features.
// Writing rounds every double to the nearest float32.
void write_pcb(std::ostream& out, const PointCloud& pc);
void write_pcb(const std::filesystem::path& path, const PointCloud& pc);
PointCloud read_pcb(std::istream& in);
PointCloud read_pcb(const std::filesystem::path& path);

// CSV with header `x,y,z[,f0,f1,...]`.
PointCloud read_point_csv(std::istream& in);
PointCloud read_point_csv(const std::filesystem::path& path);
void write_point_csv(std::ostream& out, const PointCloud& pc);

// Boxes CSV with header `cx,cy,cz,length,width,height,yaw`.
std::vector<BoundingBox3D> read_boxes_csv(std::istream& in);
std::vector<BoundingBox3D> read_boxes_csv(const std::filesystem::path& path);
void write_boxes_csv(std::ostream& out, const std::vector<BoundingBox3D>& boxes);
void write_boxes_csv(const std::filesystem::path& path, const std::vector<BoundingBox3D>& boxes);

}  // namespace pointvox::io
