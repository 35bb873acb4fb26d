#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "segflow/eval_report.hpp"
#include "segflow/scene_gen.hpp"
#include "segflow/types.hpp"

namespace segflow {

// Anything the trainer can draw samples from.
class PairSource {
 public:
  virtual ~PairSource() = default;
  virtual std::size_t size() const = 0;
  virtual FramePair get(std::size_t index) const = 0;
};

class MemoryPairs final : public PairSource {
 public:
  MemoryPairs() = default;
  explicit MemoryPairs(std::vector<FramePair> pairs) : pairs_(std::move(pairs)) {}
  std::size_t size() const override { return pairs_.size(); }
  FramePair get(std::size_t index) const override { return pairs_[index]; }
  std::vector<FramePair>& pairs() { return pairs_; }

 private:
  std::vector<FramePair> pairs_;
};

// Dataset root layout:
//   <root>/Images/<seq>/<frame>.png
//   <root>/Annotations/<seq>/<frame>.png   (masks, nonzero = foreground)
//   <root>/Flow/<seq>/<frame>.flo          (frame -> frame+1)
struct SequenceRef {
  std::string id;
  std::vector<std::filesystem::path> frames;
  std::vector<std::filesystem::path> annotations;  // empty paths where missing
  std::vector<std::filesystem::path> flows;
};

struct LayoutOptions {
  bool want_masks = false;
  bool want_flows = false;
  // Missing annotations for a listed frame are per-item errors; with
  // skip_missing the offending pair is dropped instead.
  bool skip_missing = false;
};

// Lazily reading view over a dataset root. Pairs are consecutive frames
// of each sequence (a k-frame sequence yields k-1 pairs) carrying only
// the requested ground truths. Iteration order is deterministic:
// lexicographic by sequence id, then frame index.
class LayoutDataset final : public PairSource {
 public:
  static LayoutDataset open(const std::filesystem::path& root, const LayoutOptions& options);

  std::size_t size() const override { return pair_index_.size(); }
  FramePair get(std::size_t index) const override;

  const std::vector<SequenceRef>& sequences() const { return sequences_; }
  EvalSequence load_eval_sequence(std::size_t seq_index) const;
  std::vector<EvalSequence> load_all_eval_sequences() const;

  // All pairs read into memory; training at desk scale prefers this.
  MemoryPairs materialize() const;

 private:
  LayoutOptions options_;
  std::vector<SequenceRef> sequences_;
  std::vector<std::pair<std::size_t, std::size_t>> pair_index_;  // (sequence, frame t)
};

// Readers embodying the one-ground-truth-at-a-time premise: segmentation
// datasets carry masks only, flow datasets carry flow only.
LayoutDataset load_davis_layout(const std::filesystem::path& root, bool skip_missing = false);
LayoutDataset load_flow_dataset(const std::filesystem::path& root, bool skip_missing = false);

// Writes a generated scene into the layout under the given sequence id;
// frames + annotations always, flow fields when write_flow.
void export_scene(const GeneratedScene& scene, const std::filesystem::path& root,
                  const std::string& sequence_id, bool write_flow = true);

}  // namespace segflow
