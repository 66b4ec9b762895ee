#pragma once

#include <Eigen/Dense>
#include <malloc.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "hmpdrl/error.hpp"
#include "hmpdrl/features.hpp"
#include "hmpdrl/rng.hpp"

namespace hmpdrl::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

enum class Mode { Train, Infer };

/// Keeps large matrix buffers in the heap instead of mapping and unmapping
/// them on every allocation; training allocates many short-lived matrices.
inline void configure_allocator() {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
}

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Fully connected stack. Every hidden layer is Linear -> BatchNorm -> ReLU
/// (no linear bias; the batch-norm shift plays that role). The output layer
/// is Linear with bias, optionally followed by ReLU.
class DenseNet {
 public:
  struct Layer {
    Mat weight;  // out x in
    RowVec bias;  // output layer only
    bool batch_norm = false;
    RowVec gamma, beta, running_mean, running_var;
  };

  struct LayerCache {
    Mat input;
    Mat xhat;  // normalized pre-activation (hidden layers)
    Mat act;   // post-activation output
    RowVec inv_std, mean, var;
  };
  struct Cache {
    std::vector<LayerCache> layers;
  };

  struct Grad {
    std::vector<Mat> weight;
    std::vector<RowVec> bias, gamma, beta;
  };

  DenseNet() = default;

  DenseNet(std::vector<int> sizes, bool last_relu, Rng& rng, BatchNormOptions bn = {})
      : sizes_(std::move(sizes)), last_relu_(last_relu), bn_(bn) {
    if (sizes_.size() < 2) throw DimensionError("a dense net needs at least two layer sizes");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      Layer layer;
      // He-uniform
      const double bound = std::sqrt(6.0 / in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      layer.weight.resize(out, in);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
      layer.batch_norm = l + 2 < sizes_.size();
      if (layer.batch_norm) {
        layer.gamma = RowVec::Ones(out);
        layer.beta = RowVec::Zero(out);
        layer.running_mean = RowVec::Zero(out);
        layer.running_var = RowVec::Ones(out);
      } else {
        layer.bias = RowVec::Zero(out);
      }
      layers_.push_back(std::move(layer));
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  bool last_relu() const { return last_relu_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Mat forward(const Mat& x, Mode mode, Cache* cache = nullptr) const {
    if (x.cols() != input_dim())
      throw DimensionError("dense net expects " + std::to_string(input_dim()) + " inputs, got " +
                           std::to_string(x.cols()));
    if (cache) cache->layers.assign(layers_.size(), {});
    Mat a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      LayerCache* lc = cache ? &cache->layers[l] : nullptr;
      if (lc) lc->input = a;
      Mat z;
      z.noalias() = a * layer.weight.transpose();
      if (layer.batch_norm) {
        RowVec mean, var;
        if (mode == Mode::Train) {
          mean = z.colwise().mean();
          var = (z.rowwise() - mean).array().square().colwise().mean();
        } else {
          mean = layer.running_mean;
          var = layer.running_var;
        }
        const RowVec inv_std = (var.array() + bn_.eps).rsqrt();
        z = (z.rowwise() - mean).array().rowwise() * inv_std.array();
        if (lc) {
          lc->xhat = z;
          lc->inv_std = inv_std;
          lc->mean = mean;
          lc->var = var;
        }
        z = (z.array().rowwise() * layer.gamma.array()).rowwise() + layer.beta.array();
        z = z.cwiseMax(0.0);
      } else {
        z.rowwise() += layer.bias;
        if (last_relu_) z = z.cwiseMax(0.0);
      }
      if (lc) lc->act = z;
      a = std::move(z);
    }
    return a;
  }

  Grad zero_grad() const {
    Grad g;
    for (const auto& l : layers_) {
      g.weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(RowVec::Zero(l.bias.size()));
      g.gamma.push_back(RowVec::Zero(l.gamma.size()));
      g.beta.push_back(RowVec::Zero(l.beta.size()));
    }
    return g;
  }

  /// Accumulates parameter gradients into `grad` and returns dL/dx. Hidden
  /// layers backpropagate through batch statistics in train mode and
  /// through the fixed running statistics in infer mode.
  Mat backward(const Mat& dout, const Cache& cache, Mode mode, Grad& grad) const {
    Mat da = dout;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& layer = layers_[li];
      const LayerCache& lc = cache.layers[li];
      Mat dz;
      if (layer.batch_norm) {
        const Mat dy = (lc.act.array() > 0.0).select(da, 0.0);
        grad.gamma[li] += (dy.array() * lc.xhat.array()).colwise().sum().matrix();
        grad.beta[li] += dy.colwise().sum();
        const Mat dxhat = dy.array().rowwise() * layer.gamma.array();
        if (mode == Mode::Train) {
          const double n = static_cast<double>(dxhat.rows());
          const RowVec sum_dxhat = dxhat.colwise().sum();
          const RowVec sum_dxhat_xhat = (dxhat.array() * lc.xhat.array()).colwise().sum().matrix();
          dz = (n * dxhat.array()).matrix();
          dz.rowwise() -= sum_dxhat;
          dz -= (lc.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
          dz = (dz.array().rowwise() * (lc.inv_std.array() / n)).matrix();
        } else {
          dz = dxhat.array().rowwise() * lc.inv_std.array();
        }
      } else {
        dz = last_relu_ ? Mat((lc.act.array() > 0.0).select(da, 0.0)) : da;
        grad.bias[li] += dz.colwise().sum();
      }
      grad.weight[li].noalias() += dz.transpose() * lc.input;
      Mat next;
      next.noalias() = dz * layer.weight;
      da = std::move(next);
    }
    return da;
  }

  void update_running_stats(const Cache& cache) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Layer& layer = layers_[l];
      if (!layer.batch_norm) continue;
      const auto& lc = cache.layers[l];
      const double n = static_cast<double>(lc.input.rows());
      const RowVec unbiased = n > 1.0 ? RowVec(lc.var * (n / (n - 1.0))) : lc.var;
      layer.running_mean = (1.0 - bn_.momentum) * layer.running_mean + bn_.momentum * lc.mean;
      layer.running_var = (1.0 - bn_.momentum) * layer.running_var + bn_.momentum * unbiased;
    }
  }

  /// Trainable parameters (weights, biases, scales, shifts) as flat views.
  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
      out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
      if (l.batch_norm) {
        out.emplace_back(l.gamma.data(), static_cast<std::size_t>(l.gamma.size()));
        out.emplace_back(l.beta.data(), static_cast<std::size_t>(l.beta.size()));
      } else {
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
      }
    }
    return out;
  }

  static std::vector<std::span<double>> gradients(Grad& g) {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
      out.emplace_back(g.weight[l].data(), static_cast<std::size_t>(g.weight[l].size()));
      if (g.gamma[l].size() > 0) {
        out.emplace_back(g.gamma[l].data(), static_cast<std::size_t>(g.gamma[l].size()));
        out.emplace_back(g.beta[l].data(), static_cast<std::size_t>(g.beta[l].size()));
      } else {
        out.emplace_back(g.bias[l].data(), static_cast<std::size_t>(g.bias[l].size()));
      }
    }
    return out;
  }

  /// Every stored double, running statistics included, in file order.
  template <typename F>
  void for_each_stored(F&& f) {
    for (auto& l : layers_) {
      f(std::span<double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
      if (l.batch_norm) {
        for (RowVec* v : {&l.gamma, &l.beta, &l.running_mean, &l.running_var})
          f(std::span<double>(v->data(), static_cast<std::size_t>(v->size())));
      } else {
        f(std::span<double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
      }
    }
  }

  std::size_t stored_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      n += static_cast<std::size_t>(l.weight.size()) +
           (l.batch_norm ? 4 * static_cast<std::size_t>(l.gamma.size()) : static_cast<std::size_t>(l.bias.size()));
    return n;
  }

 private:
  std::vector<int> sizes_;
  bool last_relu_ = false;
  BatchNormOptions bn_{};
  std::vector<Layer> layers_;
};

/// State-value estimator over batches of network inputs.
class ValueEstimator {
 public:
  virtual ~ValueEstimator() = default;
  virtual Eigen::VectorXd values(std::span<const StateInput* const> states) const = 0;
};

/// V == 0 everywhere; the one-step-reward greedy baseline.
class ZeroValue final : public ValueEstimator {
 public:
  Eigen::VectorXd values(std::span<const StateInput* const> states) const override {
    return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states.size()));
  }
};

struct ValueNetDims {
  std::vector<int> embed{25, 300, 200};         // phi_g
  std::vector<int> pairwise{200, 200, 100};     // psi_h
  std::vector<int> attention{400, 200, 200, 1};  // psi_alpha
  std::vector<int> value{114, 350, 250, 200, 1};  // f_v

  /// Dimensions for K checkpoints: rows are 6+4K+11 wide, f_v sees 6+4K+100.
  static ValueNetDims for_checkpoints(int K) {
    ValueNetDims d;
    d.embed.front() = row_dim(K);
    d.value.front() = self_state_dim(K) + d.pairwise.back();
    return d;
  }
  bool operator==(const ValueNetDims&) const = default;
};

/// Attention value network: g_i = phi_g(row_i), h_i = psi_h(g_i),
/// alpha_i = psi_alpha(g_i ++ mean_k g_k), c = sum softmax(alpha)_i h_i,
/// v = f_v(self ++ c).
class ValueNet final : public ValueEstimator {
 public:
  struct Cache {
    DenseNet::Cache embed, pairwise, attention, value;
    Mat G, H;
    Eigen::VectorXd weights;  // softmax weights, one per row
    std::vector<Eigen::Index> offsets;  // row offset per sample, plus the end
  };

  struct Grad {
    DenseNet::Grad embed, pairwise, attention, value;
  };

  ValueNet() : ValueNet(ValueNetDims{}, 0) {}

  ValueNet(ValueNetDims dims, std::uint64_t seed, BatchNormOptions bn = {}) : dims_(std::move(dims)) {
    if (dims_.embed.back() != dims_.pairwise.front() || 2 * dims_.embed.back() != dims_.attention.front() ||
        dims_.attention.back() != 1 || dims_.value.back() != 1 ||
        dims_.value.front() != dims_.embed.front() - kEntityFeatureDim + dims_.pairwise.back())
      throw DimensionError("inconsistent value network dimensions");
    Rng rng(seed);
    embed_ = DenseNet(dims_.embed, true, rng, bn);
    pairwise_ = DenseNet(dims_.pairwise, false, rng, bn);
    attention_ = DenseNet(dims_.attention, false, rng, bn);
    value_ = DenseNet(dims_.value, false, rng, bn);
  }

  const ValueNetDims& dims() const { return dims_; }
  int self_dim() const { return dims_.embed.front() - kEntityFeatureDim; }
  int row_dim() const { return dims_.embed.front(); }

  DenseNet& embed() { return embed_; }
  DenseNet& pairwise() { return pairwise_; }
  DenseNet& attention() { return attention_; }
  DenseNet& value() { return value_; }
  const DenseNet& embed() const { return embed_; }
  const DenseNet& pairwise() const { return pairwise_; }
  const DenseNet& attention() const { return attention_; }
  const DenseNet& value() const { return value_; }

  Eigen::VectorXd forward(std::span<const StateInput* const> states, Mode mode, Cache* cache = nullptr) const {
    const auto B = static_cast<Eigen::Index>(states.size());
    const int sd = self_dim(), rd = row_dim();
    std::vector<Eigen::Index> offsets(states.size() + 1, 0);
    for (std::size_t b = 0; b < states.size(); ++b) {
      const StateInput& s = *states[b];
      if (s.self_dim() != sd) throw DimensionError("self-state has " + std::to_string(s.self_dim()) + " values, expected " + std::to_string(sd));
      if (s.n < 1) throw DimensionError("value network needs at least one entity row");
      if (s.rows.size() != static_cast<std::size_t>(s.n) * static_cast<std::size_t>(rd))
        throw DimensionError("entity rows must be " + std::to_string(rd) + " wide");
      offsets[b + 1] = offsets[b] + s.n;
    }
    const Eigen::Index total = offsets.back();
    Mat R(total, rd);
    for (std::size_t b = 0; b < states.size(); ++b)
      R.middleRows(offsets[b], states[b]->n) =
          Eigen::Map<const Mat>(states[b]->rows.data(), states[b]->n, rd);

    Cache local;
    Cache& c = cache ? *cache : local;
    c.offsets = offsets;
    c.G = embed_.forward(R, mode, cache ? &c.embed : nullptr);
    c.H = pairwise_.forward(c.G, mode, cache ? &c.pairwise : nullptr);

    const Eigen::Index gd = c.G.cols();
    Mat att_in(total, 2 * gd);
    att_in.leftCols(gd) = c.G;
    for (std::size_t b = 0; b < states.size(); ++b) {
      const Eigen::Index n = offsets[b + 1] - offsets[b];
      const RowVec gm = c.G.middleRows(offsets[b], n).colwise().mean();
      att_in.block(offsets[b], gd, n, gd).rowwise() = gm;
    }
    const Mat alpha = attention_.forward(att_in, mode, cache ? &c.attention : nullptr);

    c.weights.resize(total);
    const Eigen::Index hd = c.H.cols();
    Mat fin(B, sd + hd);
    for (std::size_t b = 0; b < states.size(); ++b) {
      const Eigen::Index o = offsets[b], n = offsets[b + 1] - offsets[b];
      const double mx = alpha.col(0).segment(o, n).maxCoeff();
      double sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) sum += (c.weights[o + i] = std::exp(alpha(o + i, 0) - mx));
      c.weights.segment(o, n) /= sum;
      const auto bi = static_cast<Eigen::Index>(b);
      fin.row(bi).head(sd) = Eigen::Map<const RowVec>(states[b]->self.data(), sd);
      fin.row(bi).tail(hd) = c.weights.segment(o, n).transpose() * c.H.middleRows(o, n);
    }
    const Mat v = value_.forward(fin, mode, cache ? &c.value : nullptr);
    return v.col(0);
  }

  Eigen::VectorXd values(std::span<const StateInput* const> states) const override {
    return forward(states, Mode::Infer);
  }

  Grad zero_grad() const {
    return {embed_.zero_grad(), pairwise_.zero_grad(), attention_.zero_grad(), value_.zero_grad()};
  }

  /// Backpropagates dL/dv (one entry per sample) through a cached forward.
  void backward(const Eigen::VectorXd& dv, const Cache& c, Mode mode, Grad& g) const {
    const Mat dfin = value_.backward(Mat(dv), c.value, mode, g.value);
    const int sd = self_dim();
    const Eigen::Index hd = c.H.cols(), gd = c.G.cols();
    const Eigen::Index total = c.G.rows();
    Mat dH(total, hd);
    Mat dalpha(total, 1);
    const std::size_t B = c.offsets.size() - 1;
    for (std::size_t b = 0; b < B; ++b) {
      const Eigen::Index o = c.offsets[b], n = c.offsets[b + 1] - c.offsets[b];
      const RowVec dc = dfin.row(static_cast<Eigen::Index>(b)).segment(sd, hd);
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = c.weights[o + i];
        dH.row(o + i) = w * dc;
        const double dw = dc.dot(c.H.row(o + i));
        dalpha(o + i, 0) = dw;
        s += w * dw;
      }
      for (Eigen::Index i = 0; i < n; ++i) dalpha(o + i, 0) = c.weights[o + i] * (dalpha(o + i, 0) - s);
    }
    const Mat datt = attention_.backward(dalpha, c.attention, mode, g.attention);
    Mat dG = datt.leftCols(gd);
    for (std::size_t b = 0; b < B; ++b) {
      const Eigen::Index o = c.offsets[b], n = c.offsets[b + 1] - c.offsets[b];
      const RowVec dgm = datt.block(o, gd, n, gd).colwise().sum() / static_cast<double>(n);
      dG.middleRows(o, n).rowwise() += dgm;
    }
    dG += pairwise_.backward(dH, c.pairwise, mode, g.pairwise);
    embed_.backward(dG, c.embed, mode, g.embed);
  }

  /// Mean squared error and its gradient, without touching any parameter.
  double loss_and_grad(std::span<const StateInput* const> states, std::span<const double> targets, Mode mode,
                       Grad* g, Cache* cache_out = nullptr) const {
    Cache c;
    const Eigen::VectorXd v = forward(states, mode, &c);
    const auto B = static_cast<double>(states.size());
    const Eigen::VectorXd diff = v - Eigen::Map<const Eigen::VectorXd>(targets.data(), v.size());
    const double loss = diff.squaredNorm() / B;
    if (g) backward(2.0 * diff / B, c, mode, *g);
    if (cache_out) *cache_out = std::move(c);
    return loss;
  }

  double loss(std::span<const StateInput* const> states, std::span<const double> targets, Mode mode) const {
    return loss_and_grad(states, targets, mode, nullptr);
  }

  /// One SGD step on a minibatch in train mode; returns the pre-step loss.
  double sgd_step(std::span<const StateInput* const> states, std::span<const double> targets, double lr) {
    if (states.empty()) throw DimensionError("empty training batch");
    Grad g = zero_grad();
    Cache c;
    const double l = loss_and_grad(states, targets, Mode::Train, &g, &c);
    auto params = parameters();
    auto grads = gradients(g);
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i].size(); ++j) params[i][j] -= lr * grads[i][j];
    embed_.update_running_stats(c.embed);
    pairwise_.update_running_stats(c.pairwise);
    attention_.update_running_stats(c.attention);
    value_.update_running_stats(c.value);
    return l;
  }

  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    for (DenseNet* n : {&embed_, &pairwise_, &attention_, &value_}) {
      auto p = n->parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  static std::vector<std::span<double>> gradients(Grad& g) {
    std::vector<std::span<double>> out;
    for (DenseNet::Grad* d : {&g.embed, &g.pairwise, &g.attention, &g.value}) {
      auto p = DenseNet::gradients(*d);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  std::vector<DenseNet*> nets() { return {&embed_, &pairwise_, &attention_, &value_}; }

 private:
  ValueNetDims dims_;
  DenseNet embed_, pairwise_, attention_, value_;
};

// ---------------------------------------------------------------------------
// Weight file: magic "HMPDRL-VNET v1", u32 net count, per net u32 layer-size
// count and u32 sizes, then every stored double (little-endian) net by net,
// layer by layer: weights, then gamma/beta/running mean/running var for
// batch-normalized layers or the bias for output layers.

inline constexpr char kWeightMagic[] = "HMPDRL-VNET v1";
inline constexpr std::size_t kWeightMagicSize = sizeof(kWeightMagic) - 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw FormatError("weight file truncated at byte " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
};

}  // namespace detail

inline std::string serialize(const ValueNet& net_in) {
  ValueNet& net = const_cast<ValueNet&>(net_in);  // for_each_stored only reads here
  std::string out(kWeightMagic, kWeightMagicSize);
  const auto nets = net.nets();
  detail::put_u32(out, static_cast<std::uint32_t>(nets.size()));
  for (const DenseNet* n : nets) {
    detail::put_u32(out, static_cast<std::uint32_t>(n->sizes().size()));
    for (int s : n->sizes()) detail::put_u32(out, static_cast<std::uint32_t>(s));
  }
  for (DenseNet* n : nets)
    n->for_each_stored([&](std::span<double> v) {
      for (double d : v) detail::put_f64(out, d);
    });
  return out;
}

inline ValueNet deserialize(const std::string& buf) {
  if (buf.size() < kWeightMagicSize || buf.compare(0, kWeightMagicSize, kWeightMagic) != 0)
    throw FormatError("not a value-network weight file (bad magic)");
  detail::Reader r{buf, kWeightMagicSize};
  const std::uint32_t count = r.u32();
  if (count != 4) throw FormatError("weight file holds " + std::to_string(count) + " networks, expected 4");
  std::vector<std::vector<int>> sizes(4);
  for (auto& s : sizes) {
    const std::uint32_t len = r.u32();
    if (len < 2 || len > 64) throw FormatError("implausible layer count in weight file");
    for (std::uint32_t i = 0; i < len; ++i) s.push_back(static_cast<int>(r.u32()));
  }
  ValueNetDims dims{sizes[0], sizes[1], sizes[2], sizes[3]};
  ValueNet net(dims, 0);
  for (DenseNet* n : net.nets())
    n->for_each_stored([&](std::span<double> v) {
      for (double& d : v) d = r.f64();
    });
  if (r.pos != buf.size()) throw FormatError("trailing bytes after weight blob");
  return net;
}

inline void save_weights(const ValueNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::string bytes = serialize(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path);
}

inline ValueNet load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

/// Loads and checks the architecture against `expected`.
inline ValueNet load_weights(const std::string& path, const ValueNetDims& expected) {
  ValueNet net = load_weights(path);
  if (!(net.dims() == expected)) {
    auto fmt = [](const std::vector<int>& v) {
      std::string s = "(";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s + ")";
    };
    throw DimensionError("weight file dimensions " + fmt(net.dims().embed) + fmt(net.dims().pairwise) +
                         fmt(net.dims().attention) + fmt(net.dims().value) + " do not match expected " +
                         fmt(expected.embed) + fmt(expected.pairwise) + fmt(expected.attention) + fmt(expected.value));
  }
  return net;
}

/// FNV-1a over the serialized form; identifies a weight snapshot.
inline std::uint64_t weight_hash(const ValueNet& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(net)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hmpdrl::nn
