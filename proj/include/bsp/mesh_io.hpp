#pragma once

#include <string>

#include "bsp/polytope.hpp"

namespace bsp {

// Wavefront OBJ with polygonal faces; each face is preceded by a comment
// recording its convex/plane provenance. triangulated=true fans every face.
void write_obj(const PolyMesh& mesh, const std::string& path, bool triangulated = false);

// One filled path per convex polygon, colors keyed by convex index
// (repeating palette). Canvas maps [-0.5, 0.5]^2 to size x size pixels.
void write_svg(const std::vector<ConvexPolygon>& polygons, const std::string& path, int size = 512);

// Minimal 8-bit grayscale PNG (stored-deflate blocks).
void write_png_gray8(const std::vector<uint8_t>& pixels, int width, int height,
                     const std::string& path);

} // namespace bsp
