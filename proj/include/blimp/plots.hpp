#pragma once

#include <string>
#include <vector>

#include "blimp/agent.hpp"
#include "blimp/env.hpp"
#include "blimp/harness.hpp"

namespace blimp {

// A curve (or point set) in data coordinates. Colors come from a fixed
// palette by series order, so identical inputs render identical bytes.
struct PlotSeries {
  enum class Kind { line, points };

  std::string label;
  std::vector<double> x, y;
  Kind kind = Kind::line;
  // points only: circle radius in data units (0 = fixed 3 px dots). Radii in
  // data units need equal_aspect to mean anything.
  double data_radius = 0.0;
};

struct PlotOptions {
  std::string title, x_label, y_label;
  bool equal_aspect = false;  // same scale on both axes (maps)
  int width = 800, height = 500;
};

// Static SVG: axes, 1-2-5 ticks, legend, no scripts, no timestamps.
std::string render_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& options);
void write_plot(const std::string& path, const std::vector<PlotSeries>& series,
                const PlotOptions& options);

// The four standard trajectory views: planar path (east-north), altitude
// trace, motor trace, reward components. Rows with time == 0 restart the
// pen (episode boundaries never get connected). track, when given, overlays
// waypoints with their trigger radius on the path view. Returns the files
// written, in a fixed order.
std::vector<std::string> plot_trajectory(const TrajectoryLog& log, const TrackSpec* track,
                                         const std::string& out_dir);

// Training curves: return, mean loss, and exploration rate per episode row.
std::vector<std::string> plot_metrics(const std::vector<EpisodeMetric>& metrics,
                                      const std::string& out_dir);

}  // namespace blimp
