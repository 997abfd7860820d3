#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "mtnetkit/rng.hpp"
#include "mtnetkit/tensor.hpp"

namespace mtnet {

/// Token sequence [L,D] with its positional encodings [L,D]. Token order is
/// row-major over the source map's (row, col).
struct TokenSeq {
  Tensor tokens;
  Tensor pos;

  std::size_t length() const { return tokens.dim(0); }
};

/// Affine map in `linear` layout: w [in,out], b [out].
struct Projection {
  Tensor w, b;

  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
  static Projection random(std::size_t in, std::size_t out, double stddev, Rng& rng);
  static Projection zeros(std::size_t in, std::size_t out);
};

struct AttentionParams {
  Projection q, k, v, out;
  static AttentionParams random(std::size_t dim, Rng& rng);
};

struct LayerNormParams {
  Tensor gamma, beta;
  static LayerNormParams identity(std::size_t dim);
};

struct FfnParams {
  Projection hidden, out;
  static FfnParams random(std::size_t dim, std::size_t hidden, Rng& rng);
};

/// One branch of one fusion layer: self-attention, cross-attention to the
/// other branch, FFN. Each sublayer is pre-norm with a residual connection.
struct BranchLayerParams {
  LayerNormParams self_norm;
  AttentionParams self_attn;
  LayerNormParams cross_norm_q, cross_norm_kv;
  AttentionParams cross_attn;
  LayerNormParams ffn_norm;
  FfnParams ffn;
};

struct FusionLayerParams {
  BranchLayerParams templ;
  BranchLayerParams search;
};

/// Closing cross-attention (search queries, template keys/values) and FFN.
struct FinalCrossParams {
  LayerNormParams norm_q, norm_kv;
  AttentionParams attn;
  LayerNormParams ffn_norm;
  FfnParams ffn;
};

struct FusionConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 4;
  std::size_t ffn_mult = 4;
  bool use_pos = true;
  std::uint64_t seed = 3;

  void validate() const;
};

struct FusionParams {
  Projection template_proj;  // 1x1 conv C -> D
  Projection search_proj;
  std::vector<FusionLayerParams> layers;
  FinalCrossParams final_cross;

  /// N(0, 0.02^2) weights, zero biases, identity layer norms.
  static FusionParams random(std::size_t channels, const FusionConfig& config, Rng& rng);

  /// Zeroes every attention output projection and every FFN output map,
  /// turning each residual sublayer into the identity.
  void zero_output_projections();
};

/// Receives each attention probability matrix [Lq,Lk]; `site` names the
/// sublayer (e.g. "layer2.search.cross").
using AttentionObserver =
    std::function<void(std::string_view site, std::size_t head, const Tensor& probs)>;

/// Fixed 2-D sinusoidal encodings for an h x w grid, [h*w, dim]. The first
/// dim/2 channels encode the row, the rest the column. dim % 4 == 0.
Tensor sine_position_encoding(std::size_t height, std::size_t width, std::size_t dim);

/// 1x1 convolution C -> D followed by flattening [C,s,s] -> [s*s, D].
TokenSeq tokenize(const Tensor& features, const Projection& proj);

/// Multi-head scaled dot-product attention with scale 1/sqrt(D/heads).
/// With use_pos, positional encodings are added to queries and keys only.
Tensor mha(const TokenSeq& query, const TokenSeq& kv, const AttentionParams& params,
           std::size_t heads, bool use_pos, const AttentionObserver* observer = nullptr,
           std::string_view site = "mha");

Tensor layer_norm(const Tensor& x, const LayerNormParams& p, double eps = 1e-5);
Tensor ffn(const Tensor& x, const FfnParams& p);

/// Hybrid fusion: `layers` rounds of (self, cross, FFN) on both branches,
/// then the final cross-attention + FFN. Returns the fused search tokens.
Tensor fusion_forward(const TokenSeq& templ, const TokenSeq& search, const FusionParams& params,
                      const FusionConfig& config, const AttentionObserver* observer = nullptr);

class FusionNetwork {
 public:
  FusionNetwork(std::size_t channels, FusionConfig config);
  FusionNetwork(FusionParams params, FusionConfig config);

  const FusionConfig& config() const noexcept { return config_; }
  const FusionParams& params() const noexcept { return params_; }
  FusionParams& params() noexcept { return params_; }

  TokenSeq tokenize_template(const Tensor& fused_template) const {
    return tokenize(fused_template, params_.template_proj);
  }
  TokenSeq tokenize_search(const Tensor& fused_search) const {
    return tokenize(fused_search, params_.search_proj);
  }
  Tensor forward(const TokenSeq& templ, const TokenSeq& search,
                 const AttentionObserver* observer = nullptr) const {
    return fusion_forward(templ, search, params_, config_, observer);
  }

 private:
  FusionConfig config_;
  FusionParams params_;
};

}  // namespace mtnet
