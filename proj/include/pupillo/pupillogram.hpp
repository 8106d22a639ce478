#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pupillo/geometry.hpp"

namespace pupillo {

struct PupillogramTrace {
  std::vector<double> t;  // seconds, strictly increasing
  std::vector<double> d;  // diameter per sample, > 0
  double stimulus_onset = 0.0;
  std::optional<double> stimulus_offset;
  std::string unit = "px";
  int median_window = 1;  // filter already applied to d (1 = none)

  /// Throws TooFewSamples, DimensionMismatch, NonMonotoneTime, OutOfRange
  /// (onset outside the sampled span) or InvariantViolation (d <= 0).
  void validate() const;
};

struct TraceOptions {
  int median_window = 3;  // odd, >= 1
  /// Converts pixel diameters to millimetres when set.
  std::optional<double> mm_per_pixel;
};

/// Sliding median with edge replication. w must be odd and >= 1; w = 1 is
/// the identity.
std::vector<double> median_filter(const std::vector<double>& values, int window);

/// d_i = pupil_diameter(e_i), scaled by mm_per_pixel when given, then
/// median filtered. Throws NonMonotoneTime unless timestamps strictly
/// increase.
PupillogramTrace trace_from_predictions(
    const std::vector<std::pair<double, Ellipse>>& predictions,
    double stimulus_onset, const TraceOptions& options = {},
    std::optional<double> stimulus_offset = std::nullopt);

struct PLROptions {
  /// Constriction starts where the velocity drops below -k * D0 per second.
  double velocity_threshold = 0.05;
};

/// Dynamic metrics are empty when no constriction is detected.
struct PLRMetrics {
  double D0 = 0.0;
  double Dmin = 0.0;
  double MCA = 0.0;
  bool constriction_detected = false;
  std::optional<double> tL;
  std::optional<double> MCV;
  std::optional<double> tC;
  // Supporting times, useful for plotting.
  std::optional<double> constriction_onset;
  std::optional<double> t_min;

  nlohmann::json to_json(const std::string& unit) const;
};

/// Centered finite differences; one-sided at the ends.
std::vector<double> velocity(const std::vector<double>& t,
                             const std::vector<double>& d);

/// D0 = mean of samples before the onset (at least two, else NoBaseline).
/// Dmin = min(D0, minimum after the onset), so MCA = D0 - Dmin >= 0.
/// Constriction onset is the first sample at or after the stimulus whose
/// velocity is below -k * D0. MCV is the largest -v between the onset and
/// the first minimum at or after it; tC is the time from onset to that
/// minimum.
PLRMetrics compute_plr_metrics(const PupillogramTrace& trace,
                               const PLROptions& options = {});

/// CSV header "t_seconds,diameter_<unit>".
void write_trace_csv(const std::filesystem::path& path, const PupillogramTrace& trace);
/// Reads samples and the unit; stimulus fields come from the sidecar.
PupillogramTrace read_trace_csv(const std::filesystem::path& path);

nlohmann::json trace_sidecar(const PupillogramTrace& trace, const PLROptions& options);
/// Applies stimulus times and filter metadata from a sidecar to `trace`.
void apply_sidecar(PupillogramTrace& trace, const nlohmann::json& sidecar);

/// Raster pupillogram with stimulus and constriction markers.
void render_pupillogram(const std::filesystem::path& path,
                        const PupillogramTrace& trace, const PLRMetrics& metrics,
                        int width = 800, int height = 400);

}  // namespace pupillo
