#pragma once

#include <cstdint>

#include "mtnetkit/backbone.hpp"
#include "mtnetkit/rng.hpp"
#include "mtnetkit/tensor.hpp"

namespace mtnet {

/// Backbone outputs for both modalities: template maps [C,hz,wz] and
/// search maps [C,hx,wx].
struct FeatureQuad {
  Tensor rgb_template;
  Tensor thermal_template;
  Tensor rgb_search;
  Tensor thermal_search;

  void validate() const;
};

/// Channel aggregation (shared) and per-modality channel distribution.
/// Weight layout follows `linear`: w is [in, out].
struct CadmParams {
  Tensor agg_w, agg_b;          // [C, Cg], [Cg]
  Tensor rgb_w, rgb_b;          // [Cg, C], [C]
  Tensor thermal_w, thermal_b;  // [Cg, C], [C]

  std::size_t channels() const { return agg_w.dim(0); }
  std::size_t descriptor_dims() const { return agg_w.dim(1); }

  /// N(0, 0.02^2) weights, zero biases. Cg = max(C / reduction, min_dims).
  static CadmParams random(std::size_t channels, std::size_t reduction, std::size_t min_dims,
                           Rng& rng);
  static CadmParams zeros(std::size_t channels, std::size_t descriptor_dims);
};

/// Per-modality 3x3 refinement conv (1 -> 1 channel) applied to the upsampled
/// correlation map.
struct SspmParams {
  Tensor rgb_kernel, thermal_kernel;  // [1,1,3,3]
  double rgb_bias = 0.0, thermal_bias = 0.0;

  static SspmParams random(Rng& rng);
  static SspmParams zeros();
};

/// d_g = FC_g(GAP(f_R + f_T)).
Tensor channel_aggregate(const Tensor& f_rgb, const Tensor& f_thermal, const CadmParams& p);

/// sigmoid(FC_i(d_g)), one gate per channel.
Tensor channel_gate(const Tensor& descriptor, const CadmParams& p, Modality m);

/// f_i scaled channel-wise by channel_gate(d_g).
Tensor channel_distribute(const Tensor& f, const Tensor& descriptor, const CadmParams& p,
                          Modality m);

/// Channel refinement of both pairs: template pair with `template_params`,
/// search pair with `search_params`.
FeatureQuad cadm_forward(const FeatureQuad& quad, const CadmParams& template_params,
                         const CadmParams& search_params);

/// Valid cross-correlation of `search` [C,H,W] with `templ` [C,h,w] as the
/// kernel, summed over channels: [1, H-h+1, W-w+1].
Tensor correlate(const Tensor& templ, const Tensor& search);

/// S_i = sigmoid(conv3x3(upsample(correlate(templ, search)))) at the search
/// resolution, values in (0,1).
Tensor sspm_similarity(const Tensor& templ, const Tensor& search, const SspmParams& p,
                       Modality m);

struct SimilarityMaps {
  Tensor rgb;      // [1,H,W]
  Tensor thermal;  // [1,H,W]
};

struct FusedFeatures {
  Tensor templ;   // rgb + thermal refined templates
  Tensor search;  // (rgb*S_R + rgb) + (thermal*S_T + thermal)
};

FusedFeatures sspm_fuse(const FeatureQuad& refined, const SimilarityMaps& maps);

struct ModalityAwareConfig {
  std::size_t reduction = 4;
  std::size_t min_dims = 8;
  std::uint64_t seed = 2;
};

/// CADM for both paths plus SSPM on the search path. The template half can
/// be computed once per template and reused across frames.
class ModalityAwareNet {
 public:
  ModalityAwareNet(std::size_t channels, const ModalityAwareConfig& config);
  ModalityAwareNet(CadmParams template_params, CadmParams search_params, SspmParams sspm);

  struct RefinedTemplate {
    Tensor rgb, thermal;
  };

  RefinedTemplate refine_template(const ModalityPair& templ) const;
  Tensor fuse_template(const RefinedTemplate& t) const;
  Tensor fuse_search(const RefinedTemplate& t, const ModalityPair& search) const;
  FusedFeatures forward(const FeatureQuad& quad) const;

  const CadmParams& template_params() const noexcept { return template_params_; }
  const CadmParams& search_params() const noexcept { return search_params_; }
  const SspmParams& sspm_params() const noexcept { return sspm_; }

 private:
  CadmParams template_params_;
  CadmParams search_params_;
  SspmParams sspm_;
};

}  // namespace mtnet
