#include "segflow/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "segflow/errors.hpp"
#include "segflow/flow_io.hpp"
#include "segflow/image_io.hpp"

namespace segflow {

namespace fs = std::filesystem;

namespace {

std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, const std::string& extension) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == extension)
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

LayoutDataset LayoutDataset::open(const fs::path& root, const LayoutOptions& options) {
  const fs::path images = root / "Images";
  if (!fs::is_directory(images))
    throw DataError("LayoutDataset: missing Images directory under " + root.string());

  LayoutDataset ds;
  ds.options_ = options;

  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(images))
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  std::sort(ids.begin(), ids.end());

  for (const auto& id : ids) {
    SequenceRef seq;
    seq.id = id;
    seq.frames = sorted_entries(images / id, ".png");
    if (seq.frames.size() < 2) continue;
    for (const auto& frame : seq.frames) {
      const std::string stem = frame.stem().string();
      fs::path ann = root / "Annotations" / id / (stem + ".png");
      fs::path flo = root / "Flow" / id / (stem + ".flo");
      seq.annotations.push_back(fs::is_regular_file(ann) ? ann : fs::path());
      seq.flows.push_back(fs::is_regular_file(flo) ? flo : fs::path());
    }
    ds.sequences_.push_back(std::move(seq));
  }

  for (std::size_t s = 0; s < ds.sequences_.size(); ++s) {
    const SequenceRef& seq = ds.sequences_[s];
    for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t) {
      const bool mask_missing = options.want_masks && seq.annotations[t].empty();
      const bool flow_missing = options.want_flows && seq.flows[t].empty();
      if (mask_missing || flow_missing) {
        if (options.skip_missing) continue;
        throw DataError("LayoutDataset: sequence " + seq.id + " frame " +
                        seq.frames[t].stem().string() + " lacks " +
                        (mask_missing ? "annotation" : "flow"));
      }
      ds.pair_index_.emplace_back(s, t);
    }
  }
  return ds;
}

FramePair LayoutDataset::get(std::size_t index) const {
  const auto [s, t] = pair_index_.at(index);
  const SequenceRef& seq = sequences_[s];
  FramePair pair;
  pair.frame_t = read_image_png(seq.frames[t]);
  pair.frame_t1 = read_image_png(seq.frames[t + 1]);
  if (options_.want_masks) pair.mask_gt = read_mask_png(seq.annotations[t]);
  if (options_.want_flows) {
    Tensor flow, valid;
    field_to_flow(read_flo(seq.flows[t]), flow, valid);
    pair.flow_gt = std::move(flow);
    pair.flow_valid = std::move(valid);
  }
  return pair;
}

EvalSequence LayoutDataset::load_eval_sequence(std::size_t seq_index) const {
  const SequenceRef& seq = sequences_.at(seq_index);
  EvalSequence ev;
  ev.id = seq.id;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    ev.frames.push_back(read_image_png(seq.frames[t]));
    if (seq.annotations[t].empty())
      throw DataError("LayoutDataset: evaluation needs an annotation for every frame of " +
                      seq.id);
    ev.gt_masks.push_back(read_mask_png(seq.annotations[t]));
  }
  bool all_flows = true;
  for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t)
    all_flows = all_flows && !seq.flows[t].empty();
  if (all_flows && seq.frames.size() >= 2) {
    for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t) {
      Tensor flow, valid;
      field_to_flow(read_flo(seq.flows[t]), flow, valid);
      ev.gt_flows.push_back(std::move(flow));
      ev.gt_flow_valids.push_back(std::move(valid));
    }
  }
  return ev;
}

std::vector<EvalSequence> LayoutDataset::load_all_eval_sequences() const {
  std::vector<EvalSequence> out;
  for (std::size_t s = 0; s < sequences_.size(); ++s) out.push_back(load_eval_sequence(s));
  return out;
}

MemoryPairs LayoutDataset::materialize() const {
  std::vector<FramePair> pairs;
  pairs.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) pairs.push_back(get(i));
  return MemoryPairs(std::move(pairs));
}

LayoutDataset load_davis_layout(const fs::path& root, bool skip_missing) {
  LayoutOptions options;
  options.want_masks = true;
  options.skip_missing = skip_missing;
  return LayoutDataset::open(root, options);
}

LayoutDataset load_flow_dataset(const fs::path& root, bool skip_missing) {
  LayoutOptions options;
  options.want_flows = true;
  options.skip_missing = skip_missing;
  return LayoutDataset::open(root, options);
}

void export_scene(const GeneratedScene& scene, const fs::path& root,
                  const std::string& sequence_id, bool write_flow) {
  const fs::path images = root / "Images" / sequence_id;
  const fs::path annotations = root / "Annotations" / sequence_id;
  const fs::path flow_dir = root / "Flow" / sequence_id;
  fs::create_directories(images);
  fs::create_directories(annotations);
  if (write_flow) fs::create_directories(flow_dir);
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    const std::string name = frame_name(static_cast<int>(t));
    write_image_png(scene.frames[t], images / (name + ".png"));
    write_mask_png(scene.masks[t], annotations / (name + ".png"));
    if (write_flow && t + 1 < scene.frames.size())
      write_flo(flow_to_field(scene.flows[t], &scene.flow_valids[t]), flow_dir / (name + ".flo"));
  }
}

}  // namespace segflow
