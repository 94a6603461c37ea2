#include "blimp/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

namespace blimp {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape_text(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span() const { return hi - lo; }
};

Range data_range(const std::vector<PlotSeries>& series, bool use_x) {
  Range r;
  bool seen = false;
  for (const PlotSeries& s : series) {
    for (double v : use_x ? s.x : s.y) {
      if (!std::isfinite(v)) continue;
      if (!seen) {
        r.lo = r.hi = v;
        seen = true;
      } else {
        r.include(v);
      }
    }
    // radius-bearing point sets need their circles inside the frame
    if (!use_x && s.data_radius > 0.0)
      for (double v : s.y)
        if (std::isfinite(v)) {
          r.include(v - s.data_radius);
          r.include(v + s.data_radius);
        }
    if (use_x && s.data_radius > 0.0)
      for (double v : s.x)
        if (std::isfinite(v)) {
          r.include(v - s.data_radius);
          r.include(v + s.data_radius);
        }
  }
  if (!seen) return {0.0, 1.0};
  if (r.span() <= 0.0) {
    double pad = std::max(1.0, std::abs(r.lo) * 0.5);
    return {r.lo - pad, r.hi + pad};
  }
  double pad = r.span() * 0.05;
  return {r.lo - pad, r.hi + pad};
}

// 1-2-5 tick spacing targeting ~6 intervals.
double tick_step(const Range& r) {
  double raw = r.span() / 6.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double snapped = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0;
  return snapped * mag;
}

}  // namespace

std::string render_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& options) {
  const double left = 64.0, right = 20.0, top = 40.0, bottom = 46.0;
  const double w = options.width, h = options.height;
  const double plot_w = w - left - right;
  const double plot_h = h - top - bottom;

  Range xr = data_range(series, true);
  Range yr = data_range(series, false);
  if (options.equal_aspect) {
    // widen the tighter axis so one data unit spans the same pixels on both
    double x_per_px = xr.span() / plot_w;
    double y_per_px = yr.span() / plot_h;
    double per_px = std::max(x_per_px, y_per_px);
    double grow_x = (per_px * plot_w - xr.span()) / 2.0;
    double grow_y = (per_px * plot_h - yr.span()) / 2.0;
    xr = {xr.lo - grow_x, xr.hi + grow_x};
    yr = {yr.lo - grow_y, yr.hi + grow_y};
  }

  auto px = [&](double x) { return left + (x - xr.lo) / xr.span() * plot_w; };
  auto py = [&](double y) { return top + plot_h - (y - yr.lo) / yr.span() * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << " " << options.height
      << "\">\n";
  svg << "<rect width=\"" << options.width << "\" height=\"" << options.height
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(w / 2) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << escape_text(options.title) << "</text>\n";

  // gridlines and tick labels
  svg << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#444444\">\n";
  double xstep = tick_step(xr);
  for (double t = std::ceil(xr.lo / xstep) * xstep; t <= xr.hi + 1e-9 * xstep; t += xstep) {
    double x = px(t);
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << fmt(std::abs(t) < 1e-12 * xstep ? 0.0 : t)
        << "</text>\n";
  }
  double ystep = tick_step(yr);
  for (double t = std::ceil(yr.lo / ystep) * ystep; t <= yr.hi + 1e-9 * ystep; t += ystep) {
    double y = py(t);
    svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left + plot_w)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\">" << fmt(std::abs(t) < 1e-12 * ystep ? 0.0 : t)
        << "</text>\n";
  }
  svg << "</g>\n";

  // frame and axis labels
  svg << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(plot_w)
      << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"" << fmt(h - 8)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape_text(options.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(top + plot_h / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 16 "
      << fmt(top + plot_h / 2) << ")\">" << escape_text(options.y_label) << "</text>\n";

  // data, clipped to the frame
  svg << "<clipPath id=\"frame\"><rect x=\"" << fmt(left) << "\" y=\"" << fmt(top)
      << "\" width=\"" << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
      << "\"/></clipPath>\n";
  svg << "<g clip-path=\"url(#frame)\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& s = series[i];
    const char* color = kPalette[i % kPaletteSize];
    std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.kind == PlotSeries::Kind::line) {
      // restart the polyline around non-finite samples
      bool open = false;
      for (std::size_t k = 0; k < n; ++k) {
        bool ok = std::isfinite(s.x[k]) && std::isfinite(s.y[k]);
        if (ok && !open) {
          svg << "<polyline fill=\"none\" stroke=\"" << color
              << "\" stroke-width=\"1.5\" points=\"";
          open = true;
        }
        if (ok) svg << fmt(px(s.x[k])) << "," << fmt(py(s.y[k])) << " ";
        if (!ok && open) {
          svg << "\"/>\n";
          open = false;
        }
      }
      if (open) svg << "\"/>\n";
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        if (s.data_radius > 0.0) {
          double r = s.data_radius / xr.span() * plot_w;
          svg << "<circle cx=\"" << fmt(px(s.x[k])) << "\" cy=\"" << fmt(py(s.y[k]))
              << "\" r=\"" << fmt(r) << "\" fill=\"none\" stroke=\"" << color
              << "\" stroke-width=\"1.5\"/>\n";
          svg << "<circle cx=\"" << fmt(px(s.x[k])) << "\" cy=\"" << fmt(py(s.y[k]))
              << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        } else {
          svg << "<circle cx=\"" << fmt(px(s.x[k])) << "\" cy=\"" << fmt(py(s.y[k]))
              << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
      }
    }
  }
  svg << "</g>\n";

  // legend, top-right inside the frame
  double lx = left + plot_w - 150.0, ly = top + 14.0;
  svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].label.empty()) continue;
    const char* color = kPalette[i % kPaletteSize];
    svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(lx + 22)
        << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly) << "\">"
        << escape_text(series[i].label) << "</text>\n";
    ly += 17.0;
  }
  svg << "</g>\n";

  svg << "</svg>\n";
  return svg.str();
}

void write_plot(const std::string& path, const std::vector<PlotSeries>& series,
                const PlotOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write plot file '" + path + "'");
  out << render_line_plot(series, options);
}

namespace {

// Split a log into episode segments: a row with time == 0 starts a new one.
std::vector<std::pair<std::size_t, std::size_t>> segments(const TrajectoryLog& log) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    if (log.rows[i].time == 0.0 && i > begin) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  if (begin < log.rows.size()) out.emplace_back(begin, log.rows.size());
  return out;
}

// Per-segment series share a palette slot by carrying an empty label after
// the first; the renderer assigns colors by index, so repeat the first
// segment's slot by folding all segments into one series separated by NaNs
// (the renderer restarts the pen at non-finite points).
PlotSeries segmented_series(const TrajectoryLog& log, const std::string& label,
                            double (*fx)(const TrajectoryRow&),
                            double (*fy)(const TrajectoryRow&)) {
  PlotSeries s;
  s.label = label;
  bool first = true;
  for (auto [begin, end] : segments(log)) {
    if (!first) {
      s.x.push_back(std::numeric_limits<double>::quiet_NaN());
      s.y.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    first = false;
    for (std::size_t i = begin; i < end; ++i) {
      s.x.push_back(fx(log.rows[i]));
      s.y.push_back(fy(log.rows[i]));
    }
  }
  return s;
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

}  // namespace

std::vector<std::string> plot_trajectory(const TrajectoryLog& log, const TrackSpec* track,
                                         const std::string& out_dir) {
  std::vector<std::string> written;

  {  // planar path, east-north so north points up on the page
    std::vector<PlotSeries> series;
    series.push_back(segmented_series(
        log, "path", [](const TrajectoryRow& r) { return r.position.y(); },
        [](const TrajectoryRow& r) { return r.position.x(); }));
    if (track) {
      PlotSeries wp;
      wp.label = "waypoints";
      wp.kind = PlotSeries::Kind::points;
      wp.data_radius = track->trigger_radius;
      for (const Vec3& p : track->waypoints) {
        wp.x.push_back(p.y());
        wp.y.push_back(p.x());
      }
      series.push_back(wp);
    }
    if (!log.rows.empty()) {
      PlotSeries start;
      start.label = "start";
      start.kind = PlotSeries::Kind::points;
      start.x.push_back(log.rows.front().position.y());
      start.y.push_back(log.rows.front().position.x());
      series.push_back(start);
    }
    PlotOptions opt;
    opt.title = "planar path";
    opt.x_label = "east [m]";
    opt.y_label = "north [m]";
    opt.equal_aspect = true;
    opt.width = 640;
    opt.height = 640;
    std::string path = join_path(out_dir, "path_east_north.svg");
    write_plot(path, series, opt);
    written.push_back(path);
  }

  {  // altitude trace (z is down; altitude = -z)
    std::vector<PlotSeries> series;
    series.push_back(segmented_series(
        log, "altitude", [](const TrajectoryRow& r) { return r.time; },
        [](const TrajectoryRow& r) { return -r.position.z(); }));
    PlotOptions opt;
    opt.title = "altitude";
    opt.x_label = "time [s]";
    opt.y_label = "altitude [m]";
    std::string path = join_path(out_dir, "altitude.svg");
    write_plot(path, series, opt);
    written.push_back(path);
  }

  {  // motor commands
    std::vector<PlotSeries> series;
    series.push_back(segmented_series(
        log, "main m0 = m1", [](const TrajectoryRow& r) { return r.time; },
        [](const TrajectoryRow& r) { return r.actuators.m0; }));
    series.push_back(segmented_series(
        log, "tail m2", [](const TrajectoryRow& r) { return r.time; },
        [](const TrajectoryRow& r) { return r.actuators.m2; }));
    PlotOptions opt;
    opt.title = "motor commands";
    opt.x_label = "time [s]";
    opt.y_label = "command";
    std::string path = join_path(out_dir, "motors.svg");
    write_plot(path, series, opt);
    written.push_back(path);
  }

  {  // reward components
    std::vector<PlotSeries> series;
    series.push_back(segmented_series(
        log, "total", [](const TrajectoryRow& r) { return r.time; },
        [](const TrajectoryRow& r) { return r.reward.total; }));
    series.push_back(segmented_series(
        log, "success", [](const TrajectoryRow& r) { return r.time; },
        [](const TrajectoryRow& r) { return r.reward.success; }));
    series.push_back(segmented_series(
        log, "track", [](const TrajectoryRow& r) { return r.time; },
        [](const TrajectoryRow& r) { return r.reward.track; }));
    series.push_back(segmented_series(
        log, "act", [](const TrajectoryRow& r) { return r.time; },
        [](const TrajectoryRow& r) { return r.reward.act; }));
    PlotOptions opt;
    opt.title = "reward components";
    opt.x_label = "time [s]";
    opt.y_label = "reward";
    std::string path = join_path(out_dir, "rewards.svg");
    write_plot(path, series, opt);
    written.push_back(path);
  }

  return written;
}

std::vector<std::string> plot_metrics(const std::vector<EpisodeMetric>& metrics,
                                      const std::string& out_dir) {
  std::vector<std::string> written;
  auto column = [&metrics](double (*f)(const EpisodeMetric&)) {
    std::vector<double> v;
    v.reserve(metrics.size());
    for (const EpisodeMetric& m : metrics) v.push_back(f(m));
    return v;
  };
  std::vector<double> steps = column([](const EpisodeMetric& m) {
    return static_cast<double>(m.env_step);
  });

  struct View {
    const char* file;
    const char* title;
    const char* y_label;
    double (*f)(const EpisodeMetric&);
  };
  const View views[] = {
      {"returns.svg", "episode return", "return",
       [](const EpisodeMetric& m) { return m.episode_return; }},
      {"loss.svg", "mean update loss", "loss",
       [](const EpisodeMetric& m) { return m.mean_loss; }},
      {"epsilon.svg", "exploration rate", "epsilon",
       [](const EpisodeMetric& m) { return m.epsilon; }},
  };
  for (const View& view : views) {
    PlotSeries s;
    s.label = view.title;
    s.x = steps;
    s.y = column(view.f);
    PlotOptions opt;
    opt.title = view.title;
    opt.x_label = "env step";
    opt.y_label = view.y_label;
    std::string path = join_path(out_dir, view.file);
    write_plot(path, {s}, opt);
    written.push_back(path);
  }
  return written;
}

}  // namespace blimp
