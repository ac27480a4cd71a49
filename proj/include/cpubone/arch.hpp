#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cpubone/blocks.hpp"

namespace cpubone {

// ---------------------------------------------------------------------------
// Model and stage descriptions
// ---------------------------------------------------------------------------

/// Block family used by a stage.
///
/// GrFu / Gr are the grouped fused / unfused blocks of the CPUBone schedule.
/// Fu / MB are their ungrouped counterparts, used only by ablations.
enum class StageKind { GrFu, Gr, Fu, MB };

std::string to_string(StageKind kind);
StageKind stage_kind_from_string(const std::string& name);

struct StageSpec {
  std::uint64_t channels = 16;
  std::uint64_t num_blocks = 0;  // stride-1 residual blocks after the downsampler
  StageKind kind = StageKind::GrFu;
  std::uint64_t kernel = 3;
  bool attention = false;

  bool operator==(const StageSpec&) const = default;
};

/// Staged backbone. Stage 0 downsamples with the stem convolution; every
/// later stage opens with one stride-2 block. Block kind follows the
/// fused-below-256 rule for grouped stages: a block whose input has fewer
/// than 256 channels is fused, otherwise unfused.
struct ModelSpec {
  std::string variant = "B0";
  std::uint64_t stem_channels = 16;
  std::vector<StageSpec> stages;
  std::uint64_t head_dim = 32;  // attention channels per head
  std::uint64_t num_classes = 1000;
  std::uint64_t groups = 2;
  std::uint64_t expansion = 4;

  /// Structural checks: divisibility under `groups`, kernels in {2, 3},
  /// head_dim dividing every attention stage, stem matching stage 0.
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Violations of the CPUBone design rules (empty when the spec conforms):
/// fused iff input < 256 channels, 2x2 kernels exactly in the last two
/// stages, attention exactly in the last two stages, groups == 2.
std::vector<std::string> cpubone_rule_violations(const ModelSpec& spec);

ModelSpec cpubone_spec(const std::string& variant);  // "B0".."B3"

struct AblationMods {
  std::optional<std::uint64_t> groups;  // override first-conv groups everywhere
  bool plain_mbconv = false;            // ungrouped MBConv in every stage
  bool kernel3_everywhere = false;      // undo the 2x2 kernel reduction

  bool empty() const { return !groups && !plain_mbconv && !kernel3_everywhere; }
};

/// Modified copy for MAC accounting and benchmarking. Throws SpecError when a
/// group override does not divide the affected channel dimensions.
ModelSpec ablation_spec(const ModelSpec& base, const AblationMods& mods);

void to_json(nlohmann::json& j, const StageSpec& s);
void from_json(const nlohmann::json& j, StageSpec& s);
void to_json(nlohmann::json& j, const ModelSpec& m);
void from_json(const nlohmann::json& j, ModelSpec& m);

ModelSpec load_model_spec(const std::string& path);
void save_model_spec(const ModelSpec& spec, const std::string& path);

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

enum class UpsampleKind { Nearest };

struct AttentionSpec {
  std::uint64_t embed_channels = 128;
  std::uint64_t heads = 4;
  std::uint64_t downsample_factor = 2;
  UpsampleKind upsample = UpsampleKind::Nearest;
  std::uint64_t ffn_expansion = 4;

  std::uint64_t head_dim() const { return embed_channels / heads; }
  void validate() const;
};

/// Convolutions of the attention block in dataflow order: qkv (1x1, C -> 3C),
/// qkv_down (3x3 stride-2 depthwise on 3C), proj (1x1 at the reduced
/// resolution), ffn_expand, ffn_project.
std::vector<BlockConv> attention_convs(const AttentionSpec& spec);

/// Token-mixer MACs plus FFN MACs at h x w, split as (convs, matmuls).
struct AttentionMacs {
  MacCount convs;
  MacCount matmuls;
};
AttentionMacs attention_macs(const AttentionSpec& spec, std::uint64_t h, std::uint64_t w);

class AttentionBlock {
 public:
  AttentionBlock(AttentionSpec spec, std::vector<ConvLayer> layers);

  const AttentionSpec& spec() const { return spec_; }
  const ConvLayer& layer(const std::string& role) const;
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::uint64_t param_count() const;

 private:
  AttentionSpec spec_;
  std::vector<ConvLayer> layers_;
};

AttentionBlock build_attention(const AttentionSpec& spec, std::uint64_t seed);

/// Multi-head scaled dot-product attention on channel-major token maps.
/// q, k, v: (1, C, h, w) with C = heads * head_dim; token t = y * w + x.
/// When `probs` is given it receives heads * T * T softmax rows.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    std::uint64_t heads, std::vector<float>* probs = nullptr,
                                    MacCounter* counter = nullptr);

/// Token mixer: qkv projection, stride-2 depthwise downsample, attention over
/// the reduced tokens, output projection, nearest-neighbour upsample (cropped
/// back to the input extent), residual add.
Tensor attention_forward(const AttentionBlock& attn, const Tensor& input, unsigned threads = 1);
Tensor attention_forward_ref(const AttentionBlock& attn, const Tensor& input,
                             MacCounter* counter = nullptr);

/// attention_forward followed by the residual FFN (1x1 expand, gelu, 1x1).
Tensor attention_block_forward(const AttentionBlock& attn, const Tensor& input,
                               unsigned threads = 1);
Tensor attention_block_forward_ref(const AttentionBlock& attn, const Tensor& input,
                                   MacCounter* counter = nullptr);

// ---------------------------------------------------------------------------
// Model graph
// ---------------------------------------------------------------------------

/// One unit of the layer plan: a conv block or an attention block.
struct UnitPlan {
  std::uint64_t stage = 0;
  std::string name;
  std::variant<BlockSpec, AttentionSpec> unit;
};

/// Resolution-independent ordered list of units after the stem.
std::vector<UnitPlan> plan_units(const ModelSpec& spec);

// Stem and classifier are single convolutions (the classifier is a 1x1 conv
// on the pooled 1x1 map, i.e. a linear layer).
ConvSpec stem_conv(const ModelSpec& spec);
ConvSpec classifier_conv(const ModelSpec& spec);

class Model {
 public:
  struct Unit {
    std::uint64_t stage;
    std::string name;
    std::variant<Block, AttentionBlock> body;
  };

  Model(ModelSpec spec, ConvLayer stem, std::vector<Unit> units, ConvLayer classifier);

  const ModelSpec& spec() const { return spec_; }
  const ConvLayer& stem() const { return stem_; }
  const std::vector<Unit>& units() const { return units_; }
  const ConvLayer& classifier() const { return classifier_; }
  std::uint64_t param_count() const;

 private:
  ModelSpec spec_;
  ConvLayer stem_;
  std::vector<Unit> units_;
  ConvLayer classifier_;
};

Model build_model(const ModelSpec& spec, std::uint64_t seed);

/// Logits shaped (1, num_classes, 1, 1).
/// stage_shapes, when given, receives the output shape of every stage.
Tensor forward_model(const Model& model, const Tensor& input, unsigned threads = 1,
                     std::vector<Shape4>* stage_shapes = nullptr);

/// Reference kernels throughout; the counter ends at model_macs().total.
Tensor forward_model_ref(const Model& model, const Tensor& input, MacCounter* counter = nullptr);

}  // namespace cpubone
