#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "artikin/kinematics.hpp"
#include "artikin/tracks.hpp"

namespace artikin {

struct FitOptions {
  int parts = 0;
  int horizon_begin = 0;
  int horizon_end = -1;  // -1: whole sequence
  RefineConfig refine;
  std::string dump_bases_path;  // optional Stage 1 debug dump
  bool skip_refine = false;     // initialization-only ablation
};

struct FitResult {
  ArticulatedModel model;
  std::vector<std::string> warnings;
  std::vector<double> loss_history;
};

// Full model recovery from raw tracks: occlusion interpolation, Stage 1
// motion-prior initialization, Stage 2 joint discovery, and refinement.
FitResult fit_tracks(const TrackSet& raw_tracks, const FitOptions& options);

// File-level pipeline: rig -> synthetic tracks -> fit -> export, plus an
// evaluation report against the generating model. Deterministic for a fixed
// seed and any thread count.
struct PipelineConfig {
  std::string rig_path;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  FitOptions fit;
  std::string tracks_out;  // optional
  std::string gt_out;      // optional
  std::string model_out;   // optional
  std::string report_out;  // optional
};
void run_pipeline(const PipelineConfig& config);

}  // namespace artikin
