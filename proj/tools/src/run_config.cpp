#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "segflow/checkpoint.hpp"
#include "segflow/errors.hpp"

namespace segflow::cli {

using nlohmann::json;

void RunConfig::apply_ablations() {
  if (disable_fusion) {
    model.fusion_enabled = false;
    model.fusion_scales.clear();
  }
  if (disable_iterative) train.rounds = 1;
  if (disable_seg_augmentation) {
    train.augment_seg = false;
    train.online_affine = false;
  }
  if (disable_flow_augmentation) {
    train.augment_flow = false;
    train.online_synthesize = false;
  }
}

void RunConfig::propagate_seed() {
  model.seed = seed;
  train.seed = seed;
}

std::string RunConfig::to_json() const {
  json train_j{
      {"rounds", train.rounds},
      {"lr_seg", train.lr_seg},
      {"lr_flow", train.lr_flow},
      {"lr_online", train.lr_online},
      {"halving_interval", train.halving_interval},
      {"batch_size", train.batch_size},
      {"patience", train.patience},
      {"min_delta", train.min_delta},
      {"max_steps_per_phase", train.max_steps_per_phase},
      {"val_interval", train.val_interval},
      {"val_fraction", train.val_fraction},
      {"online_samples", train.online_samples},
  };
  json augment_j{
      {"max_shift_frac", train.affine_ranges.max_shift_frac},
      {"max_rotation", train.affine_ranges.max_rotation},
      {"flip_probability", train.affine_ranges.flip_probability},
      {"scale_min", train.affine_ranges.scale_min},
      {"scale_max", train.affine_ranges.scale_max},
      {"synth_max_displacement_frac", train.synthesis_ranges.max_displacement_frac},
      {"synth_max_rotation", train.synthesis_ranges.max_rotation},
  };
  json ablation_j{
      {"disable_fusion", disable_fusion},
      {"disable_online", disable_online},
      {"disable_offline", disable_offline},
      {"disable_iterative", disable_iterative},
      {"disable_seg_augmentation", disable_seg_augmentation},
      {"disable_flow_augmentation", disable_flow_augmentation},
  };
  json data_j{
      {"seg_data", seg_data},
      {"flow_data", flow_data},
      {"eval_data", eval_data},
  };
  json gen_j{
      {"train_seqs", gen_train_seqs},
      {"val_seqs", gen_val_seqs},
      {"frames", gen_frames},
      {"max_objects", gen_max_objects},
      {"target_object", gen_target_object},
  };
  json root{
      {"model", json::parse(model_config_to_json(model))},
      {"train", train_j},
      {"augment", augment_j},
      {"ablation", ablation_j},
      {"data", data_j},
      {"gen", gen_j},
      {"out", out_dir},
      {"seed", seed},
  };
  return root.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  RunConfig run;
  try {
    json root = json::parse(text);
    if (root.contains("model")) run.model = model_config_from_json(root.at("model").dump());
    if (root.contains("train")) {
      const json& t = root.at("train");
      auto get = [&t](const char* key, auto& field) {
        if (t.contains(key)) field = t.at(key).get<std::decay_t<decltype(field)>>();
      };
      get("rounds", run.train.rounds);
      get("lr_seg", run.train.lr_seg);
      get("lr_flow", run.train.lr_flow);
      get("lr_online", run.train.lr_online);
      get("halving_interval", run.train.halving_interval);
      get("batch_size", run.train.batch_size);
      get("patience", run.train.patience);
      get("min_delta", run.train.min_delta);
      get("max_steps_per_phase", run.train.max_steps_per_phase);
      get("val_interval", run.train.val_interval);
      get("val_fraction", run.train.val_fraction);
      get("online_samples", run.train.online_samples);
    }
    if (root.contains("augment")) {
      const json& a = root.at("augment");
      auto get = [&a](const char* key, double& field) {
        if (a.contains(key)) field = a.at(key).get<double>();
      };
      get("max_shift_frac", run.train.affine_ranges.max_shift_frac);
      get("max_rotation", run.train.affine_ranges.max_rotation);
      get("flip_probability", run.train.affine_ranges.flip_probability);
      get("scale_min", run.train.affine_ranges.scale_min);
      get("scale_max", run.train.affine_ranges.scale_max);
      get("synth_max_displacement_frac", run.train.synthesis_ranges.max_displacement_frac);
      get("synth_max_rotation", run.train.synthesis_ranges.max_rotation);
    }
    if (root.contains("ablation")) {
      const json& b = root.at("ablation");
      auto get = [&b](const char* key, bool& field) {
        if (b.contains(key)) field = b.at(key).get<bool>();
      };
      get("disable_fusion", run.disable_fusion);
      get("disable_online", run.disable_online);
      get("disable_offline", run.disable_offline);
      get("disable_iterative", run.disable_iterative);
      get("disable_seg_augmentation", run.disable_seg_augmentation);
      get("disable_flow_augmentation", run.disable_flow_augmentation);
    }
    if (root.contains("data")) {
      const json& d = root.at("data");
      if (d.contains("seg_data")) run.seg_data = d.at("seg_data").get<std::string>();
      if (d.contains("flow_data")) run.flow_data = d.at("flow_data").get<std::string>();
      if (d.contains("eval_data")) run.eval_data = d.at("eval_data").get<std::string>();
    }
    if (root.contains("gen")) {
      const json& g = root.at("gen");
      if (g.contains("train_seqs")) run.gen_train_seqs = g.at("train_seqs").get<int>();
      if (g.contains("val_seqs")) run.gen_val_seqs = g.at("val_seqs").get<int>();
      if (g.contains("frames")) run.gen_frames = g.at("frames").get<int>();
      if (g.contains("max_objects")) run.gen_max_objects = g.at("max_objects").get<int>();
      if (g.contains("target_object")) run.gen_target_object = g.at("target_object").get<int>();
    }
    if (root.contains("out")) run.out_dir = root.at("out").get<std::string>();
    if (root.contains("seed")) run.seed = root.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("RunConfig: malformed config JSON: ") + e.what());
  }
  return run;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("RunConfig: cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("RunConfig: cannot write " + path.string());
  out << to_json() << "\n";
}

}  // namespace segflow::cli
