#include "mtnetkit/fusion.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mtnetkit/error.hpp"

namespace mtnet {

namespace {

constexpr double kInitStd = 0.02;

BranchLayerParams random_branch(std::size_t dim, std::size_t hidden, Rng& rng) {
  BranchLayerParams b;
  b.self_norm = LayerNormParams::identity(dim);
  b.self_attn = AttentionParams::random(dim, rng);
  b.cross_norm_q = LayerNormParams::identity(dim);
  b.cross_norm_kv = LayerNormParams::identity(dim);
  b.cross_attn = AttentionParams::random(dim, rng);
  b.ffn_norm = LayerNormParams::identity(dim);
  b.ffn = FfnParams::random(dim, hidden, rng);
  return b;
}

void zero(Projection& p) {
  p = Projection::zeros(p.w.dim(0), p.w.dim(1));
}

TokenSeq view(const Tensor& tokens, const Tensor& pos) { return {tokens, pos}; }

}  // namespace

void FusionConfig::validate() const {
  if (dim == 0 || heads == 0) throw ConfigError("fusion.dim and fusion.heads must be positive");
  if (dim % heads != 0) throw ConfigError("fusion.dim must be divisible by fusion.heads");
  if (dim % 4 != 0) throw ConfigError("fusion.dim must be divisible by 4 (2-D sine encoding)");
  if (ffn_mult == 0) throw ConfigError("fusion.ffn_mult must be positive");
}

Projection Projection::random(std::size_t in, std::size_t out, double stddev, Rng& rng) {
  return {rng.gaussian({in, out}, stddev), Tensor({out})};
}

Projection Projection::zeros(std::size_t in, std::size_t out) {
  return {Tensor({in, out}), Tensor({out})};
}

AttentionParams AttentionParams::random(std::size_t dim, Rng& rng) {
  AttentionParams p;
  p.q = Projection::random(dim, dim, kInitStd, rng);
  p.k = Projection::random(dim, dim, kInitStd, rng);
  p.v = Projection::random(dim, dim, kInitStd, rng);
  p.out = Projection::random(dim, dim, kInitStd, rng);
  return p;
}

LayerNormParams LayerNormParams::identity(std::size_t dim) {
  return {Tensor({dim}, 1.0), Tensor({dim})};
}

FfnParams FfnParams::random(std::size_t dim, std::size_t hidden, Rng& rng) {
  return {Projection::random(dim, hidden, kInitStd, rng),
          Projection::random(hidden, dim, kInitStd, rng)};
}

FusionParams FusionParams::random(std::size_t channels, const FusionConfig& config, Rng& rng) {
  config.validate();
  const std::size_t dim = config.dim, hidden = config.dim * config.ffn_mult;
  FusionParams p;
  p.template_proj = Projection::random(channels, dim, kInitStd, rng);
  p.search_proj = Projection::random(channels, dim, kInitStd, rng);
  p.layers.reserve(config.layers);
  for (std::size_t i = 0; i < config.layers; ++i) {
    FusionLayerParams layer;
    layer.templ = random_branch(dim, hidden, rng);
    layer.search = random_branch(dim, hidden, rng);
    p.layers.push_back(std::move(layer));
  }
  p.final_cross.norm_q = LayerNormParams::identity(dim);
  p.final_cross.norm_kv = LayerNormParams::identity(dim);
  p.final_cross.attn = AttentionParams::random(dim, rng);
  p.final_cross.ffn_norm = LayerNormParams::identity(dim);
  p.final_cross.ffn = FfnParams::random(dim, hidden, rng);
  return p;
}

void FusionParams::zero_output_projections() {
  for (FusionLayerParams& layer : layers) {
    for (BranchLayerParams* b : {&layer.templ, &layer.search}) {
      zero(b->self_attn.out);
      zero(b->cross_attn.out);
      zero(b->ffn.out);
    }
  }
  zero(final_cross.attn.out);
  zero(final_cross.ffn.out);
}

Tensor sine_position_encoding(std::size_t height, std::size_t width, std::size_t dim) {
  if (dim % 4 != 0) throw ShapeError("sine_position_encoding: dim must be divisible by 4");
  const std::size_t half = dim / 2;
  constexpr double kTemperature = 10000.0;
  const double two_pi = 2.0 * std::numbers::pi;
  Tensor pos({height * width, dim});
  for (std::size_t i = 0; i < height; ++i) {
    const double y = static_cast<double>(i + 1) / static_cast<double>(height) * two_pi;
    for (std::size_t j = 0; j < width; ++j) {
      const double x = static_cast<double>(j + 1) / static_cast<double>(width) * two_pi;
      for (std::size_t k = 0; k < half; ++k) {
        const double freq =
            std::pow(kTemperature, static_cast<double>(2 * (k / 2)) / static_cast<double>(half));
        const bool even = k % 2 == 0;
        pos.at(i * width + j, k) = even ? std::sin(y / freq) : std::cos(y / freq);
        pos.at(i * width + j, half + k) = even ? std::sin(x / freq) : std::cos(x / freq);
      }
    }
  }
  return pos;
}

TokenSeq tokenize(const Tensor& features, const Projection& proj) {
  if (features.rank() != 3) throw ShapeError("tokenize: expected [C,s,s] features");
  const std::size_t channels = features.dim(0), h = features.dim(1), w = features.dim(2);
  Tensor columns({h * w, channels});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < h * w; ++p) columns.at(p, c) = features[c * h * w + p];
  }
  const Tensor tokens = proj(columns);
  return {tokens, sine_position_encoding(h, w, tokens.dim(1))};
}

Tensor mha(const TokenSeq& query, const TokenSeq& kv, const AttentionParams& params,
           std::size_t heads, bool use_pos, const AttentionObserver* observer,
           std::string_view site) {
  const std::size_t dim = query.tokens.dim(1);
  if (heads == 0 || dim % heads != 0) throw ShapeError("mha: dim not divisible by heads");
  if (kv.tokens.dim(1) != dim) throw ShapeError("mha: query and key dims differ");
  const std::size_t lq = query.tokens.dim(0), lk = kv.tokens.dim(0), dh = dim / heads;

  const Tensor q = params.q(use_pos ? add(query.tokens, query.pos) : query.tokens);
  const Tensor k = params.k(use_pos ? add(kv.tokens, kv.pos) : kv.tokens);
  const Tensor v = params.v(kv.tokens);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor concat({lq, dim});
  Tensor qh({lq, dh}), kht({dh, lk}), vh({lk, dh});
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < lq; ++i) {
      for (std::size_t d = 0; d < dh; ++d) qh.at(i, d) = q.at(i, off + d);
    }
    for (std::size_t i = 0; i < lk; ++i) {
      for (std::size_t d = 0; d < dh; ++d) {
        kht.at(d, i) = k.at(i, off + d);
        vh.at(i, d) = v.at(i, off + d);
      }
    }
    const Tensor probs = scaled_softmax_lastdim(matmul(qh, kht), inv_sqrt);
    if (observer && *observer) (*observer)(site, h, probs);
    const Tensor head_out = matmul(probs, vh);
    for (std::size_t i = 0; i < lq; ++i) {
      for (std::size_t d = 0; d < dh; ++d) concat.at(i, off + d) = head_out.at(i, d);
    }
  }
  return params.out(concat);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p, double eps) {
  const std::size_t dim = x.shape().back();
  if (p.gamma.size() != dim || p.beta.size() != dim) throw ShapeError("layer_norm: size mismatch");
  Tensor out(x.shape());
  const std::size_t rows = x.size() / dim;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * dim;
    double* o = out.data().data() + r * dim;
    double mean = 0.0;
    for (std::size_t j = 0; j < dim; ++j) mean += in[j];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (std::size_t j = 0; j < dim; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(dim);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < dim; ++j) o[j] = (in[j] - mean) * inv * p.gamma[j] + p.beta[j];
  }
  require_finite(out, "layer_norm");
  return out;
}

Tensor ffn(const Tensor& x, const FfnParams& p) { return p.out(relu(p.hidden(x))); }

Tensor fusion_forward(const TokenSeq& templ, const TokenSeq& search, const FusionParams& params,
                      const FusionConfig& config, const AttentionObserver* observer) {
  config.validate();
  if (templ.tokens.dim(1) != config.dim || search.tokens.dim(1) != config.dim) {
    throw ShapeError("fusion_forward: token dim does not match config");
  }
  const std::size_t heads = config.heads;
  const bool use_pos = config.use_pos;
  Tensor z = templ.tokens;
  Tensor x = search.tokens;

  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const FusionLayerParams& layer = params.layers[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";

    const Tensor zn = layer_norm(z, layer.templ.self_norm);
    z = add(z, mha(view(zn, templ.pos), view(zn, templ.pos), layer.templ.self_attn, heads,
                   use_pos, observer, prefix + "template.self"));
    const Tensor xn = layer_norm(x, layer.search.self_norm);
    x = add(x, mha(view(xn, search.pos), view(xn, search.pos), layer.search.self_attn, heads,
                   use_pos, observer, prefix + "search.self"));

    // Both cross-attentions read the post-self-attention state of the other branch.
    const Tensor z_cross =
        mha(view(layer_norm(z, layer.templ.cross_norm_q), templ.pos),
            view(layer_norm(x, layer.templ.cross_norm_kv), search.pos), layer.templ.cross_attn,
            heads, use_pos, observer, prefix + "template.cross");
    const Tensor x_cross =
        mha(view(layer_norm(x, layer.search.cross_norm_q), search.pos),
            view(layer_norm(z, layer.search.cross_norm_kv), templ.pos), layer.search.cross_attn,
            heads, use_pos, observer, prefix + "search.cross");
    z = add(z, z_cross);
    x = add(x, x_cross);

    z = add(z, ffn(layer_norm(z, layer.templ.ffn_norm), layer.templ.ffn));
    x = add(x, ffn(layer_norm(x, layer.search.ffn_norm), layer.search.ffn));
  }

  const FinalCrossParams& fin = params.final_cross;
  x = add(x, mha(view(layer_norm(x, fin.norm_q), search.pos),
                 view(layer_norm(z, fin.norm_kv), templ.pos), fin.attn, heads, use_pos, observer,
                 "final.cross"));
  x = add(x, ffn(layer_norm(x, fin.ffn_norm), fin.ffn));
  return x;
}

FusionNetwork::FusionNetwork(std::size_t channels, FusionConfig config)
    : config_(config) {
  Rng rng(config_.seed);
  params_ = FusionParams::random(channels, config_, rng);
}

FusionNetwork::FusionNetwork(FusionParams params, FusionConfig config)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

}  // namespace mtnet
