#include "artikin/pipeline.hpp"

#include "artikin/errors.hpp"
#include "artikin/eval.hpp"
#include "artikin/init_stage.hpp"
#include "artikin/model_io.hpp"

namespace artikin {

FitResult fit_tracks(const TrackSet& raw_tracks, const FitOptions& options) {
  if (options.parts < 2)
    throw InvalidInputError("fit: need at least 2 parts (static + dynamic)");
  raw_tracks.validate();
  options.refine.validate();

  const TrackSet tracks = interpolate_occlusions(raw_tracks);
  int horizon_end = options.horizon_end;
  if (horizon_end < 0) horizon_end = tracks.frame_count - 1;

  const MotionBasisSet bases =
      run_stage1(tracks, options.parts, options.horizon_begin, horizon_end,
                 /*canonical_frame=*/0, options.refine.threads);
  if (!options.dump_bases_path.empty())
    save_motion_bases(bases, options.dump_bases_path);

  InitializeResult init = initialize(tracks, bases, options.refine);

  FitResult result;
  result.warnings = std::move(init.warnings);
  result.warnings.insert(result.warnings.end(), bases.warnings.begin(),
                         bases.warnings.end());
  if (options.skip_refine) {
    result.model = std::move(init.model);
    return result;
  }
  RefineResult refined = refine(init.model, tracks, options.refine);
  result.model = std::move(refined.model);
  result.loss_history = std::move(refined.loss_history);
  return result;
}

void run_pipeline(const PipelineConfig& config) {
  const RigSpec rig = load_rig(config.rig_path);
  auto [tracks, ground_truth] = synthesize(rig, config.noise, config.seed);

  if (!config.tracks_out.empty()) save_tracks(tracks, config.tracks_out);
  if (!config.gt_out.empty()) export_model(ground_truth, config.gt_out);

  FitOptions fit = config.fit;
  if (fit.parts <= 0) fit.parts = rig.part_count();
  const FitResult result = fit_tracks(tracks, fit);

  if (!config.model_out.empty()) export_model(result.model, config.model_out);
  if (!config.report_out.empty()) {
    const EvalReport report = evaluate(result.model, ground_truth, tracks);
    save_eval_report(report, config.report_out);
  }
}

}  // namespace artikin
