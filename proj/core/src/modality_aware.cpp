#include "mtnetkit/modality_aware.hpp"

#include <algorithm>

#include "mtnetkit/error.hpp"

namespace mtnet {

namespace {

constexpr double kInitStd = 0.02;

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

}  // namespace

void FeatureQuad::validate() const {
  require_same(rgb_template, thermal_template, "feature quad templates");
  require_same(rgb_search, thermal_search, "feature quad search maps");
  if (rgb_template.rank() != 3 || rgb_search.rank() != 3) {
    throw ShapeError("feature quad: maps must be [C,H,W]");
  }
  if (rgb_template.dim(0) != rgb_search.dim(0)) {
    throw ShapeError("feature quad: template and search channel counts differ");
  }
}

CadmParams CadmParams::random(std::size_t channels, std::size_t reduction,
                              std::size_t min_dims, Rng& rng) {
  if (channels == 0 || reduction == 0) throw ConfigError("cadm: channels and reduction must be > 0");
  const std::size_t dims = std::max(channels / reduction, min_dims);
  CadmParams p;
  p.agg_w = rng.gaussian({channels, dims}, kInitStd);
  p.agg_b = Tensor({dims});
  p.rgb_w = rng.gaussian({dims, channels}, kInitStd);
  p.rgb_b = Tensor({channels});
  p.thermal_w = rng.gaussian({dims, channels}, kInitStd);
  p.thermal_b = Tensor({channels});
  return p;
}

CadmParams CadmParams::zeros(std::size_t channels, std::size_t descriptor_dims) {
  return {Tensor({channels, descriptor_dims}), Tensor({descriptor_dims}),
          Tensor({descriptor_dims, channels}), Tensor({channels}),
          Tensor({descriptor_dims, channels}), Tensor({channels})};
}

SspmParams SspmParams::random(Rng& rng) {
  SspmParams p;
  p.rgb_kernel = rng.gaussian({1, 1, 3, 3}, kInitStd);
  p.thermal_kernel = rng.gaussian({1, 1, 3, 3}, kInitStd);
  return p;
}

SspmParams SspmParams::zeros() {
  return {Tensor({1, 1, 3, 3}), Tensor({1, 1, 3, 3}), 0.0, 0.0};
}

Tensor channel_aggregate(const Tensor& f_rgb, const Tensor& f_thermal, const CadmParams& p) {
  require_same(f_rgb, f_thermal, "channel_aggregate");
  return linear(gap(add(f_rgb, f_thermal)), p.agg_w, p.agg_b);
}

Tensor channel_gate(const Tensor& descriptor, const CadmParams& p, Modality m) {
  const bool rgb = m == Modality::rgb;
  return sigmoid(linear(descriptor, rgb ? p.rgb_w : p.thermal_w, rgb ? p.rgb_b : p.thermal_b));
}

Tensor channel_distribute(const Tensor& f, const Tensor& descriptor, const CadmParams& p,
                          Modality m) {
  return scale_channels(f, channel_gate(descriptor, p, m));
}

FeatureQuad cadm_forward(const FeatureQuad& quad, const CadmParams& template_params,
                         const CadmParams& search_params) {
  quad.validate();
  const Tensor dz = channel_aggregate(quad.rgb_template, quad.thermal_template, template_params);
  const Tensor dx = channel_aggregate(quad.rgb_search, quad.thermal_search, search_params);
  return {channel_distribute(quad.rgb_template, dz, template_params, Modality::rgb),
          channel_distribute(quad.thermal_template, dz, template_params, Modality::thermal),
          channel_distribute(quad.rgb_search, dx, search_params, Modality::rgb),
          channel_distribute(quad.thermal_search, dx, search_params, Modality::thermal)};
}

Tensor correlate(const Tensor& templ, const Tensor& search) {
  if (templ.rank() != 3 || search.rank() != 3 || templ.dim(0) != search.dim(0)) {
    throw ShapeError("correlate: template " + shape_string(templ.shape()) + " vs search " +
                     shape_string(search.shape()));
  }
  if (templ.dim(1) > search.dim(1) || templ.dim(2) > search.dim(2)) {
    throw ShapeError("correlate: template larger than search region");
  }
  const Tensor kernel = templ.reshaped({1, templ.dim(0), templ.dim(1), templ.dim(2)});
  return conv2d(search, kernel, 0, 1);
}

Tensor sspm_similarity(const Tensor& templ, const Tensor& search, const SspmParams& p,
                       Modality m) {
  const Tensor raw = correlate(templ, search);
  const Tensor up = bilinear_upsample(raw, search.dim(1), search.dim(2));
  const bool rgb = m == Modality::rgb;
  const double bias = rgb ? p.rgb_bias : p.thermal_bias;
  return sigmoid(conv2d(up, rgb ? p.rgb_kernel : p.thermal_kernel, 1, 1, {&bias, 1}));
}

FusedFeatures sspm_fuse(const FeatureQuad& refined, const SimilarityMaps& maps) {
  refined.validate();
  const auto check = [&](const Tensor& s) {
    if (s.rank() != 3 || s.dim(0) != 1 || s.dim(1) != refined.rgb_search.dim(1) ||
        s.dim(2) != refined.rgb_search.dim(2)) {
      throw ShapeError("sspm_fuse: similarity map " + shape_string(s.shape()) +
                       " does not match search features");
    }
  };
  check(maps.rgb);
  check(maps.thermal);
  FusedFeatures out;
  out.templ = add(refined.rgb_template, refined.thermal_template);
  out.search = add(add(mul(refined.rgb_search, maps.rgb), refined.rgb_search),
                   add(mul(refined.thermal_search, maps.thermal), refined.thermal_search));
  return out;
}

ModalityAwareNet::ModalityAwareNet(std::size_t channels, const ModalityAwareConfig& config) {
  Rng rng(config.seed);
  template_params_ = CadmParams::random(channels, config.reduction, config.min_dims, rng);
  search_params_ = CadmParams::random(channels, config.reduction, config.min_dims, rng);
  sspm_ = SspmParams::random(rng);
}

ModalityAwareNet::ModalityAwareNet(CadmParams template_params, CadmParams search_params,
                                   SspmParams sspm)
    : template_params_(std::move(template_params)),
      search_params_(std::move(search_params)),
      sspm_(std::move(sspm)) {}

ModalityAwareNet::RefinedTemplate ModalityAwareNet::refine_template(
    const ModalityPair& templ) const {
  const Tensor dz = channel_aggregate(templ.rgb, templ.thermal, template_params_);
  return {channel_distribute(templ.rgb, dz, template_params_, Modality::rgb),
          channel_distribute(templ.thermal, dz, template_params_, Modality::thermal)};
}

Tensor ModalityAwareNet::fuse_template(const RefinedTemplate& t) const {
  return add(t.rgb, t.thermal);
}

Tensor ModalityAwareNet::fuse_search(const RefinedTemplate& t, const ModalityPair& search) const {
  const Tensor dx = channel_aggregate(search.rgb, search.thermal, search_params_);
  FeatureQuad refined{t.rgb, t.thermal,
                      channel_distribute(search.rgb, dx, search_params_, Modality::rgb),
                      channel_distribute(search.thermal, dx, search_params_, Modality::thermal)};
  const SimilarityMaps maps{
      sspm_similarity(refined.rgb_template, refined.rgb_search, sspm_, Modality::rgb),
      sspm_similarity(refined.thermal_template, refined.thermal_search, sspm_, Modality::thermal)};
  return sspm_fuse(refined, maps).search;
}

FusedFeatures ModalityAwareNet::forward(const FeatureQuad& quad) const {
  const RefinedTemplate t = refine_template({quad.rgb_template, quad.thermal_template});
  return {fuse_template(t), fuse_search(t, {quad.rgb_search, quad.thermal_search})};
}

}  // namespace mtnet
