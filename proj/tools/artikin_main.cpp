#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "artikin/errors.hpp"
#include "artikin/eval.hpp"
#include "artikin/model_io.hpp"
#include "artikin/pipeline.hpp"
#include "artikin/tracks.hpp"

namespace {

struct CommonFitFlags {
  int parts = 0;
  std::string horizon;
  artikin::RefineConfig refine;
  std::string dump_bases;
  std::vector<double> view_axis;
  bool no_refine = false;

  void add_to(CLI::App* cmd, bool parts_required) {
    auto* p = cmd->add_option("--parts", parts, "part count K (incl. static)");
    if (parts_required) p->required();
    cmd->add_option("--horizon", horizon,
                    "motion horizon as begin:end frames (default full)");
    cmd->add_option("--lr-w", refine.lr_logits, "logit learning rate");
    cmd->add_option("--lr-ac", refine.lr_axis_pivot,
                    "axis/pivot learning rate");
    cmd->add_option("--lr-q", refine.lr_scalars, "scalar learning rate");
    cmd->add_option("--lambda-acc", refine.lambda_acc,
                    "acceleration loss weight");
    cmd->add_option("--lambda-z", refine.lambda_z,
                    "depth-stability loss weight");
    cmd->add_option("--iters", refine.iterations, "refinement iterations");
    cmd->add_option("--keep-fraction", refine.keep_fraction,
                    "trimmed-mean keep fraction");
    cmd->add_option("--threads", refine.threads, "worker thread count");
    cmd->add_option("--view-axis", view_axis,
                    "constant camera optical axis (x y z) enabling the "
                    "depth-stability term")
        ->expected(3);
    cmd->add_option("--dump-bases", dump_bases,
                    "write the Stage 1 motion bases to this file");
    cmd->add_flag("--no-refine", no_refine,
                  "stop after initialization (ablation)");
  }

  artikin::FitOptions build(int frame_count) const {
    artikin::FitOptions options;
    options.parts = parts;
    options.refine = refine;
    options.dump_bases_path = dump_bases;
    options.skip_refine = no_refine;
    if (!horizon.empty()) {
      const size_t colon = horizon.find(':');
      if (colon == std::string::npos)
        throw artikin::InvalidInputError("--horizon expects begin:end");
      try {
        options.horizon_begin = std::stoi(horizon.substr(0, colon));
        options.horizon_end = std::stoi(horizon.substr(colon + 1));
      } catch (const std::exception&) {
        throw artikin::InvalidInputError("--horizon expects begin:end");
      }
    }
    if (!view_axis.empty()) {
      const Eigen::Vector3d axis(view_axis[0], view_axis[1], view_axis[2]);
      options.refine.view_axes.assign(frame_count, axis.normalized());
    }
    return options;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"artikin: articulated kinematic model recovery from 3D point "
               "tracks"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand(
      "synth", "generate tracks and ground truth from a rig file");
  std::string synth_rig, synth_out, synth_gt_out;
  std::uint64_t synth_seed = 0;
  artikin::NoiseSpec synth_noise;
  synth->add_option("--rig", synth_rig, "rig file")->required();
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--sigma", synth_noise.position_sigma,
                    "track noise std (scene units)");
  synth->add_option("--occlusion-rate", synth_noise.occlusion_rate,
                    "per-sample occlusion probability");
  synth->add_option("--confidence-floor", synth_noise.confidence_floor,
                    "lower bound of the confidence distribution");
  synth->add_option("--out", synth_out, "output tracks file")->required();
  synth->add_option("--gt-out", synth_gt_out, "output ground-truth model");

  // fit
  auto* fit = app.add_subcommand("fit", "recover a model from a tracks file");
  std::string fit_tracks_path, fit_out;
  CommonFitFlags fit_flags;
  fit->add_option("--tracks", fit_tracks_path, "input tracks file")
      ->required();
  fit_flags.add_to(fit, /*parts_required=*/true);
  fit->add_option("--out", fit_out, "output model file")->required();

  // eval
  auto* eval_cmd = app.add_subcommand(
      "eval", "evaluate a model against a ground-truth model");
  std::string eval_model, eval_gt, eval_tracks, eval_report;
  eval_cmd->add_option("--model", eval_model, "predicted model file")
      ->required();
  eval_cmd->add_option("--gt", eval_gt, "ground-truth model file")->required();
  eval_cmd->add_option("--tracks", eval_tracks, "tracks file")->required();
  eval_cmd->add_option("--report", eval_report, "output report file")
      ->required();

  // pipeline
  auto* pipe = app.add_subcommand(
      "pipeline", "synth + fit + eval in one deterministic run");
  std::string pipe_rig, pipe_tracks_out, pipe_gt_out, pipe_out, pipe_report;
  std::uint64_t pipe_seed = 0;
  artikin::NoiseSpec pipe_noise;
  CommonFitFlags pipe_flags;
  pipe->add_option("--rig", pipe_rig, "rig file")->required();
  pipe->add_option("--seed", pipe_seed, "random seed");
  pipe->add_option("--sigma", pipe_noise.position_sigma, "track noise std");
  pipe->add_option("--occlusion-rate", pipe_noise.occlusion_rate,
                   "per-sample occlusion probability");
  pipe->add_option("--confidence-floor", pipe_noise.confidence_floor,
                   "lower bound of the confidence distribution");
  pipe_flags.add_to(pipe, /*parts_required=*/false);
  pipe->add_option("--tracks-out", pipe_tracks_out,
                   "write the synthesized tracks here");
  pipe->add_option("--gt-out", pipe_gt_out, "write the ground truth here");
  pipe->add_option("--out", pipe_out, "output model file")->required();
  pipe->add_option("--report", pipe_report, "output report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return artikin::kExitInvalidInput;
  }

  try {
    if (synth->parsed()) {
      const artikin::RigSpec rig = artikin::load_rig(synth_rig);
      auto [tracks, ground_truth] =
          artikin::synthesize(rig, synth_noise, synth_seed);
      artikin::save_tracks(tracks, synth_out);
      if (!synth_gt_out.empty())
        artikin::export_model(ground_truth, synth_gt_out);
    } else if (fit->parsed()) {
      const artikin::TrackSet tracks = artikin::load_tracks(fit_tracks_path);
      const artikin::FitResult result =
          artikin::fit_tracks(tracks, fit_flags.build(tracks.frame_count));
      print_warnings(result.warnings);
      artikin::export_model(result.model, fit_out);
    } else if (eval_cmd->parsed()) {
      const artikin::ArticulatedModel model = artikin::import_model(eval_model);
      const artikin::ArticulatedModel gt = artikin::import_model(eval_gt);
      const artikin::TrackSet tracks = artikin::load_tracks(eval_tracks);
      const artikin::EvalReport report = artikin::evaluate(model, gt, tracks);
      artikin::save_eval_report(report, eval_report);
    } else if (pipe->parsed()) {
      artikin::PipelineConfig config;
      config.rig_path = pipe_rig;
      config.seed = pipe_seed;
      config.noise = pipe_noise;
      // Frame count comes from the rig; resolved inside run_pipeline via the
      // horizon default used by fit_tracks.
      const artikin::RigSpec rig = artikin::load_rig(pipe_rig);
      config.fit = pipe_flags.build(rig.frame_count);
      config.tracks_out = pipe_tracks_out;
      config.gt_out = pipe_gt_out;
      config.model_out = pipe_out;
      config.report_out = pipe_report;
      artikin::run_pipeline(config);
    }
  } catch (const artikin::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return artikin::kExitOk;
}
