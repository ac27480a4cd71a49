#include "cpubone/arch.hpp"

namespace cpubone {

namespace {

BlockVariant block_variant_for(StageKind kind, std::uint64_t c_in, bool downsample) {
  switch (kind) {
    case StageKind::Fu: return BlockVariant::FuMBConv;
    case StageKind::MB: return BlockVariant::MBConv;
    case StageKind::GrFu:
    case StageKind::Gr:
      break;
  }
  // The downsampler's input sits below the stage width, so it follows the
  // channel rule; residual blocks keep the stage kind.
  if (downsample) return c_in < 256 ? BlockVariant::GrFuMBConv : BlockVariant::GrMBConv;
  return kind == StageKind::GrFu ? BlockVariant::GrFuMBConv : BlockVariant::GrMBConv;
}

}  // namespace

std::vector<UnitPlan> plan_units(const ModelSpec& spec) {
  std::vector<UnitPlan> plan;
  std::uint64_t c_prev = spec.stem_channels;
  for (std::uint64_t i = 0; i < spec.stages.size(); ++i) {
    const StageSpec& st = spec.stages[i];
    const std::string prefix = "stage" + std::to_string(i);
    AttentionSpec attn{.embed_channels = st.channels,
                       .heads = spec.head_dim ? st.channels / spec.head_dim : 0};
    std::uint64_t n_attn = 0;
    auto push_attention = [&] {
      plan.push_back({i, prefix + ".attn" + std::to_string(n_attn++), attn});
    };
    auto block = [&](std::uint64_t c_in, bool downsample) {
      BlockSpec b;
      b.variant = block_variant_for(st.kind, c_in, downsample);
      b.c_in = c_in;
      b.c_out = st.channels;
      b.expansion = spec.expansion;
      b.kh = b.kw = st.kernel;
      b.stride = downsample ? 2 : 1;
      b.groups = spec.groups;
      b.residual = !downsample;
      return b;
    };
    std::uint64_t idx = 0;
    if (i > 0) {
      plan.push_back({i, prefix + ".block" + std::to_string(idx++), block(c_prev, true)});
      if (st.attention && st.num_blocks == 0) push_attention();
    }
    for (std::uint64_t r = 0; r < st.num_blocks; ++r) {
      plan.push_back({i, prefix + ".block" + std::to_string(idx++), block(st.channels, false)});
      if (st.attention) push_attention();
    }
    c_prev = st.channels;
  }
  return plan;
}

ConvSpec stem_conv(const ModelSpec& spec) {
  return ConvSpec{.c_in = 3, .c_out = spec.stem_channels, .kh = 3, .kw = 3, .stride = 2};
}

ConvSpec classifier_conv(const ModelSpec& spec) {
  return ConvSpec{.c_in = spec.stages.back().channels, .c_out = spec.num_classes,
                  .has_bias = true};
}

Model::Model(ModelSpec spec, ConvLayer stem, std::vector<Unit> units, ConvLayer classifier)
    : spec_(std::move(spec)),
      stem_(std::move(stem)),
      units_(std::move(units)),
      classifier_(std::move(classifier)) {}

std::uint64_t Model::param_count() const {
  auto layer_params = [](const ConvLayer& l) {
    return l.weights.weight.size() + l.weights.bias.size();
  };
  std::uint64_t n = layer_params(stem_) + layer_params(classifier_);
  for (const Unit& u : units_)
    n += std::visit([](const auto& body) { return body.param_count(); }, u.body);
  return n;
}

Model build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::uint64_t stream = seed;
  ConvLayer stem = make_conv_layer("stem", stem_conv(spec), Activation::Gelu, splitmix64(stream));
  std::vector<Model::Unit> units;
  for (const UnitPlan& p : plan_units(spec)) {
    const std::uint64_t s = splitmix64(stream);
    if (const auto* b = std::get_if<BlockSpec>(&p.unit))
      units.push_back({p.stage, p.name, build_block(*b, s)});
    else
      units.push_back({p.stage, p.name, build_attention(std::get<AttentionSpec>(p.unit), s)});
  }
  ConvLayer classifier =
      make_conv_layer("classifier", classifier_conv(spec), Activation::None, splitmix64(stream));
  return Model(spec, std::move(stem), std::move(units), std::move(classifier));
}

namespace {

void check_model_input(const Tensor& input) {
  const Shape4& s = input.shape();
  if (s.c != 3) throw ShapeError("model expects 3 input channels, got " + s.str());
}

template <typename RunConv, typename RunUnit>
Tensor run_model(const Model& model, const Tensor& input, RunConv conv, RunUnit unit,
                 std::vector<Shape4>* stage_shapes) {
  check_model_input(input);
  if (stage_shapes) stage_shapes->clear();
  Tensor x = conv(model.stem(), input);
  std::uint64_t stage = 0;
  for (const Model::Unit& u : model.units()) {
    for (; stage < u.stage; ++stage)
      if (stage_shapes) stage_shapes->push_back(x.shape());
    x = unit(u, x);
  }
  for (; stage < model.spec().stages.size(); ++stage)
    if (stage_shapes) stage_shapes->push_back(x.shape());
  return conv(model.classifier(), global_avg_pool(x));
}

}  // namespace

Tensor forward_model(const Model& model, const Tensor& input, unsigned threads,
                     std::vector<Shape4>* stage_shapes) {
  auto conv = [threads](const ConvLayer& l, const Tensor& x) { return l.forward(x, threads); };
  auto unit = [threads](const Model::Unit& u, const Tensor& x) {
    if (const auto* b = std::get_if<Block>(&u.body)) return forward_block(*b, x, threads);
    return attention_block_forward(std::get<AttentionBlock>(u.body), x, threads);
  };
  return run_model(model, input, conv, unit, stage_shapes);
}

Tensor forward_model_ref(const Model& model, const Tensor& input, MacCounter* counter) {
  auto conv = [counter](const ConvLayer& l, const Tensor& x) { return l.forward_ref(x, counter); };
  auto unit = [counter](const Model::Unit& u, const Tensor& x) {
    if (const auto* b = std::get_if<Block>(&u.body)) return forward_block_ref(*b, x, counter);
    return attention_block_forward_ref(std::get<AttentionBlock>(u.body), x, counter);
  };
  return run_model(model, input, conv, unit, nullptr);
}

}  // namespace cpubone
