#pragma once
#include "brickyard/synth.hpp"

namespace brickyard {

struct Mask {
  int width = 0, height = 0;
  std::vector<uint8_t> on;  // 0 or 1, row-major
  uint8_t& at(int x, int y) { return on[size_t(y) * width + x]; }
  uint8_t at(int x, int y) const { return on[size_t(y) * width + x]; }
  int count() const;
};

struct HsvRange {
  double h_lo = 0, h_hi = 360;  // degrees; lo > hi wraps
  double s_min = 0.5;
  double v_min = 0.4;
};

struct ColorMaskConfig {
  HsvRange yellow{40, 70, 0.5, 0.4};
  HsvRange magenta{290, 330, 0.5, 0.4};
  int proximity_px = 6;  // cross-color dilation radius
};

// rgb in [0,255] -> (h degrees [0,360), s, v in [0,1])
Eigen::Vector3d rgb_to_hsv(uint8_t r, uint8_t g, uint8_t b);

// yellow pixels near magenta ones and vice versa
std::pair<Mask, Mask> color_masks(const Image8& img, const ColorMaskConfig& cfg);

struct CornerConfig {
  int window = 5;         // response window, odd
  double threshold = 0.02;  // min eigenvalue, normalized gradients
  int nms_radius = 5;
  int partner_px = 3;     // cross-mask corner pairing distance
  int min_votes = 4;
};

// min-eigenvalue corners of a binary mask after NMS
std::vector<Eigen::Vector2i> mask_corners(const Mask& m, const CornerConfig& cfg);

// corner voting over fused-mask components; the winning component's pixels
std::vector<Eigen::Vector2i> detect_marker_frame(const Image8& img, const ColorMaskConfig& mcfg,
                                                 const CornerConfig& ccfg);

struct MarkerFrameObs {
  double stamp = 0.0;
  RigidTransform camera;  // world-from-camera
  std::vector<Eigen::Vector2i> pixels;
};

struct MarkerDetection {
  Eigen::Vector2d intersection = Eigen::Vector2d::Zero();  // ground frame
  Eigen::Vector2d leg_a_dir = Eigen::Vector2d::UnitX();    // unit, long leg
  Eigen::Vector2d leg_b_dir = Eigen::Vector2d::UnitY();
  double side_a = 0.0, side_b = 0.0;  // measured along the legs
  bool valid = false;
};

void to_json(json& j, const MarkerDetection& d);
void from_json(const json& j, MarkerDetection& d);

struct MarkerFitConfig {
  double window = 10.0;       // seconds of history kept
  double cluster_link = 0.30; // ground-point clustering distance
  int min_cluster = 8;
  double leg_a = 1.5;         // expected side lengths
  double leg_b = 1.0;
  double length_tol = 0.20;   // fractional
};

// project windowed pixels to the ground, cluster, fit the smallest oriented
// rectangle, pick the L corner opposite the emptiest one, check leg lengths
MarkerDetection accumulate_and_fit(const std::vector<MarkerFrameObs>& obs, const CameraModel& cam,
                                   const MarkerFitConfig& cfg);

}  // namespace brickyard
