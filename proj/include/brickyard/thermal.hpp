#pragma once
#include <optional>

#include "brickyard/synth.hpp"

namespace brickyard {

struct HeatDetection {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel box
  double distance = 0.0;               // meters, from box width
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // camera frame
  uint16_t peak = 0;                   // centi-degrees C
};

void to_json(json& j, const HeatDetection& d);
void from_json(const json& j, HeatDetection& d);

// threshold (centi-degC) -> largest 8-connected blob -> box; distance =
// k / box_width_px; position = box center backprojected to that depth.
// No blob means no detection.
std::optional<HeatDetection> detect_heat(const Image16& img, uint16_t threshold,
                                         const CameraModel& cam, double k);

// k from frames at known distances: the mean of distance * box_width
double calibrate_heat_range(const std::vector<std::pair<Image16, double>>& frames,
                            uint16_t threshold, const CameraModel& cam);

}  // namespace brickyard
