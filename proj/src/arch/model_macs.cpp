#include "cpubone/arch.hpp"
#include "cpubone/mac_model.hpp"

namespace cpubone {

ModelMacs model_macs(const ModelSpec& spec, std::uint64_t input_h, std::uint64_t input_w) {
  spec.validate();
  if (input_h == 0 || input_w == 0) throw SpecError("input extents must be >= 1");
  ModelMacs out;
  auto add = [&out](std::string name, LayerKind kind, MacCount macs) {
    out.total += macs;
    if (kind == LayerKind::Conv) out.conv_subtotal += macs;
    out.layers.push_back({std::move(name), kind, macs});
  };
  // Walks a conv chain, resolving padding against the running extent.
  auto conv_step = [&](const std::string& name, ConvSpec c, std::uint64_t& h, std::uint64_t& w) {
    apply_same_padding(c, h, w);
    add(name, LayerKind::Conv, conv_macs(c, h, w));
    const std::uint64_t nh = c.out_h(h);
    w = c.out_w(w);
    h = nh;
  };

  std::uint64_t h = input_h;
  std::uint64_t w = input_w;
  conv_step("stem", stem_conv(spec), h, w);
  for (const UnitPlan& u : plan_units(spec)) {
    if (const auto* b = std::get_if<BlockSpec>(&u.unit)) {
      for (const BlockConv& bc : block_convs(*b)) conv_step(u.name + "." + bc.role, bc.conv, h, w);
      continue;
    }
    const AttentionSpec& a = std::get<AttentionSpec>(u.unit);
    const std::vector<BlockConv> convs = attention_convs(a);
    std::uint64_t rh = h;
    std::uint64_t rw = w;
    conv_step(u.name + ".qkv", convs[0].conv, rh, rw);
    conv_step(u.name + ".qkv_down", convs[1].conv, rh, rw);
    const std::uint64_t tokens = rh * rw;
    const MacCount product = MacCount(tokens) * tokens * a.embed_channels;
    add(u.name + ".scores", LayerKind::AttentionMatmul, product);
    add(u.name + ".weighted_sum", LayerKind::AttentionMatmul, product);
    conv_step(u.name + ".proj", convs[2].conv, rh, rw);
    std::uint64_t fh = h;
    std::uint64_t fw = w;
    conv_step(u.name + ".ffn_expand", convs[3].conv, fh, fw);
    conv_step(u.name + ".ffn_project", convs[4].conv, fh, fw);
  }
  // Global pooling leaves a 1x1 map; the classifier is a linear layer on it.
  ConvSpec head = classifier_conv(spec);
  add("classifier", LayerKind::Linear, conv_macs(head, 1, 1));
  return out;
}

}  // namespace cpubone
