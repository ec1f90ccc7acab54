#ifndef SV_OCCLUSION_H_
#define SV_OCCLUSION_H_

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sv/geometry.h"
#include "sv/image.h"

namespace sv {

// Knobs for depth-difference occlusion analysis.
struct OcclusionConfig {
  int n_slices = 8;             // equal-width depth layers, >= 2
  double edge_threshold = 0.1;  // on normalized Sobel magnitude, in (0,1)
  int min_region_area = 16;     // connected components below this are noise
};

// Axis-aligned inclusive pixel rectangle.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;
  bool contains(int x, int y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

// Output of local_foreground_mask. fg_slice is the elected foreground layer
// (-1 when no candidate region survived), rects the surviving components'
// bounding rectangles.
struct OcclusionMaskSet {
  FloatMap edge_map;    // normalized Sobel magnitude
  IndexMap slice_index; // depth layer per pixel, -1 where invalid
  Mask local_fg;        // inside a candidate rect AND at/nearer the fg layer
  Mask slice_mask;      // every pixel at/nearer the fg layer
  int fg_slice = -1;
  std::vector<PixelRect> rects;
};

// 3x3 Sobel gradient magnitude of the depth values with replicate-padded
// borders, normalized by the maximum magnitude (all zero when flat).
FloatMap sobel_magnitude(const DepthMap& depth);

// Splits the valid depth range [d_min, d_max] into n equal-width layers and
// labels each pixel with its layer (d_max lands in layer n-1, invalid pixels
// get -1). Throws DegenerateRange when the map is constant or empty.
IndexMap slice_depth(const DepthMap& depth, int n);

// Elects the foreground layer from strong depth edges: thresholded Sobel
// pixels form candidate regions (8-connected, small ones dropped), each edge
// pixel votes for the layer of the smallest valid depth in its 3x3 window,
// and the plurality layer b wins (ties toward the nearer layer). local_fg
// covers pixels inside any candidate bounding rectangle with layer <= b;
// slice_mask covers all pixels with layer <= b.
OcclusionMaskSet local_foreground_mask(const DepthMap& depth,
                                       const OcclusionConfig& config);

// Keeps world points that do NOT land on local_fg AND slice_mask when
// projected into cam; points behind the camera or outside the frame are
// kept. kept_indices (optional) receives the retained input positions.
std::vector<Eigen::Vector3d> filter_background_points(
    const std::vector<Eigen::Vector3d>& points, const OcclusionMaskSet& masks,
    const CameraView& cam, std::vector<size_t>* kept_indices = nullptr);

// Fills masked pixels by Jacobi diffusion from the unmasked boundary
// (4-neighborhood averages, initialized at the unmasked mean) until the
// largest per-sweep change drops below tol or max_sweeps is reached.
// Unmasked pixels are returned bit-identical.
Image inpaint_diffusion(const Image& image, const Mask& mask,
                        double tol = 1e-4, int max_sweeps = 500);

// Pluggable inpainting backend.
class Inpainter {
 public:
  virtual ~Inpainter() = default;
  virtual Image inpaint(const Image& image, const Mask& mask) const = 0;
};

// Deterministic built-in fallback (inpaint_diffusion).
class DiffusionInpainter : public Inpainter {
 public:
  Image inpaint(const Image& image, const Mask& mask) const override;
};

// Shells out to `command <in.png> <mask.png> <out.png>`; unmasked pixels are
// restored from the input afterwards so the backend can only touch the hole.
class ExternalInpainter : public Inpainter {
 public:
  explicit ExternalInpainter(std::string command);
  Image inpaint(const Image& image, const Mask& mask) const override;

 private:
  std::string command_;
};

// "diffusion" or "external:<command>".
std::unique_ptr<Inpainter> make_inpainter(const std::string& spec);

}  // namespace sv

#endif  // SV_OCCLUSION_H_
