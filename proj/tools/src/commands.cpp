#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "segflow/checkpoint.hpp"
#include "segflow/dataset.hpp"
#include "segflow/errors.hpp"
#include "segflow/eval_report.hpp"
#include "segflow/flow_color.hpp"
#include "segflow/image_io.hpp"
#include "segflow/metrics.hpp"
#include "segflow/scene_gen.hpp"
#include "segflow/training.hpp"

namespace segflow::cli {

namespace fs = std::filesystem;

namespace {

std::string seq_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "seq_%03d", index);
  return buf;
}

void write_resolved_config(const RunConfig& run) {
  fs::create_directories(run.out_dir);
  run.save(fs::path(run.out_dir) / "resolved_config.json");
}

std::string phase_checkpoint_name(int phase_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "phase_%02d.ckpt", phase_index + 1);
  return buf;
}

void write_train_state(const fs::path& out_dir, int completed_phases, int total_phases) {
  nlohmann::json state{{"completed_phases", completed_phases},
                       {"total_phases", total_phases}};
  std::ofstream out(out_dir / "train_state.json", std::ios::trunc);
  out << state.dump(2) << "\n";
}

void write_val_curves(const fs::path& path, const std::vector<PhaseRecord>& phases) {
  std::ofstream out(path, std::ios::trunc);
  out << "phase,round,branch,step,val_error\n";
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto& rec = phases[i];
    for (const auto& point : rec.state.val_history) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%zu,%d,%s,%d,%.10g\n", i + 1, rec.round + 1,
                    branch_name(rec.branch), point.step, point.error);
      out << buf;
    }
  }
}

}  // namespace

int cmd_gen_data(RunConfig run) {
  run.propagate_seed();
  if (run.gen_train_seqs < 1 || run.gen_val_seqs < 1 || run.gen_frames < 2)
    throw ConfigError("gen-data: need at least 1 train sequence, 1 val sequence, 2 frames");

  Rng rng(run.seed);
  Rng spec_rng = rng.fork(0x57ec);
  const int total = run.gen_train_seqs + run.gen_val_seqs;
  auto specs = make_corpus_specs(total, run.model.input_width, run.model.input_height,
                                 run.gen_frames, spec_rng, run.gen_max_objects);
  for (auto& spec : specs) spec.target_object = run.gen_target_object;

  const fs::path out_root(run.out_dir);
  std::size_t train_pairs = 0, val_pairs = 0;
  for (int i = 0; i < total; ++i) {
    Rng scene_rng = rng.fork(0x5ce7e000ull + static_cast<std::uint64_t>(i));
    const GeneratedScene scene = generate_scene(specs[static_cast<std::size_t>(i)], scene_rng);
    const bool is_train = i < run.gen_train_seqs;
    export_scene(scene, out_root / (is_train ? "train" : "val"), seq_name(i));
    (is_train ? train_pairs : val_pairs) += scene.frames.size() - 1;
  }
  write_resolved_config(run);
  std::cout << "wrote " << run.gen_train_seqs << " train sequences (" << train_pairs
            << " pairs) and " << run.gen_val_seqs << " val sequences (" << val_pairs
            << " pairs) under " << run.out_dir << "\n";
  return kExitOk;
}

int cmd_train(RunConfig run) {
  run.propagate_seed();
  run.apply_ablations();
  if (run.seg_data.empty()) throw ConfigError("train: --seg-data is required");
  if (run.flow_data.empty()) run.flow_data = run.seg_data;

  const fs::path out_dir(run.out_dir);
  fs::create_directories(out_dir);

  const MemoryPairs seg_pairs = load_davis_layout(run.seg_data).materialize();
  const MemoryPairs flow_pairs = load_flow_dataset(run.flow_data).materialize();

  const int total_phases = run.train.rounds * 2;
  int start_phase = 0;
  SegFlowModel model(run.model);
  const fs::path state_path = out_dir / "train_state.json";
  if (fs::exists(state_path)) {
    std::ifstream in(state_path);
    const auto state = nlohmann::json::parse(std::string(std::istreambuf_iterator<char>(in),
                                                         std::istreambuf_iterator<char>()));
    const int completed = state.at("completed_phases").get<int>();
    if (completed > 0 && completed <= total_phases) {
      model = load_checkpoint(out_dir / phase_checkpoint_name(completed - 1));
      start_phase = completed;
      std::cout << "resuming after " << completed << " completed phase(s)\n";
    }
  }

  if (run.disable_offline) {
    // The -of variant skips the generic offline stage entirely; the
    // initial weights go straight to online fine-tuning.
    save_checkpoint(model, out_dir / "checkpoint_final.ckpt");
    write_resolved_config(run);
    std::cout << "offline training disabled; wrote initial checkpoint\n";
    return kExitOk;
  }

  std::ofstream log(out_dir / "train_log.txt", start_phase > 0 ? std::ios::app : std::ios::trunc);
  TrainHooks hooks;
  hooks.log = &log;
  hooks.on_phase_end = [&](int phase_index, const SegFlowModel& best) {
    save_checkpoint(best, out_dir / phase_checkpoint_name(phase_index));
    write_train_state(out_dir, phase_index + 1, total_phases);
  };

  const OfflineResult result =
      offline_train(model, seg_pairs, flow_pairs, run.train, hooks, start_phase);

  write_val_curves(out_dir / "val_curves.csv", result.phases);
  save_checkpoint(model, out_dir / "checkpoint_final.ckpt");
  write_resolved_config(run);

  if (result.diverged) {
    std::cerr << "training diverged: " << result.phases.back().state.diagnostic << "\n";
    return kExitDivergence;
  }
  std::cout << "trained " << result.phases.size() + start_phase << " phase(s); best checkpoint at "
            << (out_dir / "checkpoint_final.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_finetune(RunConfig run, const FinetuneArgs& args) {
  run.propagate_seed();
  run.apply_ablations();
  if (args.checkpoint.empty()) throw ConfigError("finetune: --ckpt is required");

  SegFlowModel model = load_checkpoint(args.checkpoint);
  const fs::path out_dir(run.out_dir);
  fs::create_directories(out_dir);

  if (run.disable_online) {
    save_checkpoint(model, out_dir / "checkpoint_finetuned.ckpt");
    write_resolved_config(run);
    std::cout << "online fine-tuning disabled; checkpoint copied unchanged\n";
    return kExitOk;
  }

  fs::path frame_path(args.frame_path);
  fs::path mask_path(args.mask_path);
  if (!args.sequence.empty()) {
    if (run.eval_data.empty())
      throw ConfigError("finetune: --seq needs --eval-data to locate the sequence");
    frame_path = fs::path(run.eval_data) / "Images" / args.sequence / "00000.png";
    mask_path = fs::path(run.eval_data) / "Annotations" / args.sequence / "00000.png";
  }
  if (frame_path.empty() || mask_path.empty())
    throw ConfigError("finetune: provide --seq or both --frame and --mask");
  if (!fs::exists(mask_path))
    throw DataError("finetune: first-frame mask not found: " + mask_path.string());
  if (!fs::exists(frame_path))
    throw DataError("finetune: first frame not found: " + frame_path.string());

  const Tensor frame = read_image_png(frame_path);
  const Tensor mask = read_mask_png(mask_path);

  std::ofstream log(out_dir / "finetune_log.txt", std::ios::trunc);
  TrainHooks hooks;
  hooks.log = &log;
  const TrainState state = online_finetune(model, frame, mask, run.train, hooks);

  save_checkpoint(model, out_dir / "checkpoint_finetuned.ckpt");
  write_resolved_config(run);
  if (state.diverged) {
    std::cerr << "fine-tuning diverged: " << state.diagnostic << "\n";
    return kExitDivergence;
  }
  std::cout << "fine-tuned; best validation error " << state.best_val_error << "\n";
  return kExitOk;
}

int cmd_eval(RunConfig run, const EvalArgs& args) {
  run.apply_ablations();
  if (args.dataset.empty()) throw ConfigError("eval: --data is required");
  if (args.checkpoint.empty() && !args.oracle)
    throw ConfigError("eval: --ckpt is required unless --oracle");

  std::optional<SegFlowModel> model;
  if (!args.checkpoint.empty()) model = load_checkpoint(args.checkpoint);

  LayoutOptions options;
  options.want_masks = true;
  const LayoutDataset ds = LayoutDataset::open(args.dataset, options);
  if (ds.sequences().empty()) throw DataError("eval: dataset has no sequences");
  const std::vector<EvalSequence> sequences = ds.load_all_eval_sequences();

  if (model) {
    const auto& first = sequences.front().frames.front();
    if (first.dim(1) != model->config().input_height || first.dim(2) != model->config().input_width)
      throw ShapeError("eval: checkpoint input size does not match the dataset frames");
  }

  EvalOptions eval_options;
  eval_options.flip_ensemble = args.flip_ensemble;
  eval_options.oracle = args.oracle;
  const EvalReport report =
      evaluate_sequences(model ? &*model : nullptr, sequences, eval_options);

  const fs::path out_dir(run.out_dir);
  fs::create_directories(out_dir);
  {
    std::ofstream text(out_dir / "report.txt", std::ios::trunc);
    text << report.to_text();
    std::ofstream machine(out_dir / "report.json", std::ios::trunc);
    machine << report.to_json() << "\n";
  }
  write_resolved_config(run);
  std::cout << report.to_text();
  return kExitOk;
}

int cmd_viz(RunConfig run, const VizArgs& args) {
  if (args.checkpoint.empty()) throw ConfigError("viz: --ckpt is required");
  if (args.frame_path.empty()) throw ConfigError("viz: --frame is required");
  const SegFlowModel model = load_checkpoint(args.checkpoint);

  FramePair pair;
  pair.frame_t = read_image_png(args.frame_path);
  pair.frame_t1 =
      args.next_path.empty() ? pair.frame_t : read_image_png(args.next_path);
  const SegFlowOutput out = model.forward(pair);

  const Tensor mask = logits_to_mask(out.seg_logits);
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor overlay = pair.frame_t;
  const double alpha = args.overlay_alpha;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) != 1.0) continue;
      overlay.at(0, y, x) = (1.0 - alpha) * overlay.at(0, y, x) + alpha * 1.0;
      overlay.at(1, y, x) = (1.0 - alpha) * overlay.at(1, y, x);
      overlay.at(2, y, x) = (1.0 - alpha) * overlay.at(2, y, x);
    }

  const fs::path out_dir(run.out_dir);
  fs::create_directories(out_dir);
  const std::string stem = fs::path(args.frame_path).stem().string();
  write_image_png(overlay, out_dir / (stem + "_seg.png"));
  write_image_png(flow_to_color(out.flow_pred), out_dir / (stem + "_flow.png"));
  write_resolved_config(run);
  std::cout << "wrote " << (out_dir / (stem + "_seg.png")).string() << " and "
            << (out_dir / (stem + "_flow.png")).string() << "\n";
  return kExitOk;
}

}  // namespace segflow::cli
