#include "uwt/trust/scorer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace uwt {

namespace {
constexpr double kLnEps = 1e-5;
}

std::size_t ScorerConfig::parameter_count() const {
  const auto layout = parameter_layout(*this);
  return layout.back().offset + layout.back().size();
}

void ScorerConfig::validate() const {
  if (layers == 0 || model_dim == 0 || heads == 0 || ff_dim == 0 || input_dim == 0 || seq_len == 0)
    throw std::invalid_argument("scorer dimensions must be positive");
  if (model_dim % heads != 0) throw std::invalid_argument("model_dim must be divisible by heads");
  if (input_dim != kFeatureDim) throw std::invalid_argument("input_dim must equal feature count");
}

std::vector<ParamGroup> parameter_layout(const ScorerConfig& c) {
  std::vector<ParamGroup> out;
  std::size_t off = 0;
  auto add = [&](std::string name, std::size_t r, std::size_t cols) {
    out.push_back(ParamGroup{std::move(name), off, r, cols});
    off += r * cols;
  };
  const std::size_t d = c.model_dim;
  add("input.weight", d, c.input_dim);
  add("input.bias", 1, d);
  add("pos_embedding", c.seq_len, d);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1.gain", 1, d);
    add(p + "ln1.bias", 1, d);
    for (const char* m : {"q", "k", "v", "o"}) {
      add(p + "attn." + m + ".weight", d, d);
      add(p + "attn." + m + ".bias", 1, d);
    }
    add(p + "ln2.gain", 1, d);
    add(p + "ln2.bias", 1, d);
    add(p + "ff1.weight", c.ff_dim, d);
    add(p + "ff1.bias", 1, c.ff_dim);
    add(p + "ff2.weight", d, c.ff_dim);
    add(p + "ff2.bias", 1, d);
  }
  add("head.weight", 1, d);
  add("head.bias", 1, 1);
  return out;
}

ScorerModel ScorerModel::zeros(const ScorerConfig& config) {
  config.validate();
  ScorerModel m;
  m.config = config;
  m.params.assign(config.parameter_count(), 0.0);
  return m;
}

ScorerModel ScorerModel::initialized(const ScorerConfig& config, RngStream& rng) {
  ScorerModel m = zeros(config);
  const double depth_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(config.layers));
  for (const auto& g : parameter_layout(config)) {
    const auto ends_with = [&](std::string_view s) {
      return g.name.size() >= s.size() && g.name.compare(g.name.size() - s.size(), s.size(), s) == 0;
    };
    double sd = 0.0;
    if (ends_with(".gain")) {
      for (std::size_t i = 0; i < g.size(); ++i) m.params[g.offset + i] = 1.0;
      continue;
    }
    if (g.name == "pos_embedding") {
      sd = 0.02;
    } else if (ends_with(".weight")) {
      sd = 1.0 / std::sqrt(static_cast<double>(g.cols));
      if (ends_with("attn.o.weight") || ends_with("ff2.weight")) sd *= depth_scale;
    }
    if (sd == 0.0) continue;
    for (std::size_t i = 0; i < g.size(); ++i) m.params[g.offset + i] = sd * rng.normal();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr char kMagic[8] = {'U', 'W', 'T', 'S', 'C', 'O', 'R', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& b, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(b, u);
}

struct Reader {
  const std::string& b;
  std::size_t pos{0};

  void need(std::size_t n) {
    if (pos + n > b.size()) throw std::runtime_error("model file truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t u = u64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
};

}  // namespace

void save_model(const ScorerModel& model, const std::filesystem::path& path) {
  const ScorerConfig& c = model.config;
  if (model.params.size() != c.parameter_count())
    throw std::invalid_argument("parameter vector does not match config");
  std::string b(kMagic, sizeof kMagic);
  put_u32(b, kVersion);
  for (std::size_t v : {c.layers, c.model_dim, c.heads, c.ff_dim, c.input_dim, c.seq_len})
    put_u32(b, static_cast<std::uint32_t>(v));
  for (double v : model.standardizer.mean) put_f64(b, v);
  for (double v : model.standardizer.scale) put_f64(b, v);
  put_u64(b, model.params.size());
  for (double v : model.params) put_f64(b, v);
  put_u64(b, fnv1a64(b));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("failed writing model file " + path.string());
}

ScorerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  const std::string b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (b.size() < sizeof kMagic + 8 || std::memcmp(b.data(), kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a scorer model file: " + path.string());
  Reader r{b, sizeof kMagic};
  if (r.u32() != kVersion) throw std::runtime_error("unsupported model file version");
  ScorerModel m;
  m.config.layers = r.u32();
  m.config.model_dim = r.u32();
  m.config.heads = r.u32();
  m.config.ff_dim = r.u32();
  m.config.input_dim = r.u32();
  m.config.seq_len = r.u32();
  m.config.validate();
  for (double& v : m.standardizer.mean) v = r.f64();
  for (double& v : m.standardizer.scale) v = r.f64();
  const std::uint64_t n = r.u64();
  if (n != m.config.parameter_count()) throw std::runtime_error("model parameter count mismatch");
  m.params.resize(n);
  for (double& v : m.params) v = r.f64();
  const std::size_t body = r.pos;
  if (r.u64() != fnv1a64(std::string_view(b.data(), body)))
    throw std::runtime_error("model file checksum mismatch");
  if (r.pos != b.size()) throw std::runtime_error("trailing bytes in model file");
  return m;
}

// ---------------------------------------------------------------------------
// Scorer

template <typename T>
struct Scorer<T>::LayerCache {
  Mat x_in, xhat1, h1, q, k, v, o, x_mid, xhat2, h2, u, g;
  Eigen::Matrix<T, Eigen::Dynamic, 1> rstd1, rstd2;
  std::vector<Mat> attn;  // segment-major, then head
};

template <typename T>
struct Scorer<T>::Cache {
  std::vector<std::size_t> off, len;
  Mat in_std, x_out, pooled;
  std::vector<LayerCache> layers;
  std::vector<T> logit;
};

template <typename T>
Scorer<T>::Scorer(const ScorerModel& model)
    : config_(model.config),
      std_(model.standardizer),
      params_(model.params.begin(), model.params.end()) {
  index_layout();
}

template <typename T>
Scorer<T>::Scorer(ScorerConfig config, Standardizer standardizer, std::vector<T> params)
    : config_(config), std_(standardizer), params_(std::move(params)) {
  index_layout();
}

template <typename T>
void Scorer<T>::index_layout() {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (params_.size() != layout.back().offset + layout.back().size())
    throw std::invalid_argument("parameter vector does not match scorer config");
  std::size_t i = 0;
  auto next = [&]() { return layout.at(i++).offset; };
  input_.w = next();
  input_.b = next();
  pos_ = next();
  layer_.resize(config_.layers);
  for (auto& l : layer_) {
    for (Offsets* o : {&l.ln1, &l.q, &l.k, &l.v, &l.o, &l.ln2, &l.ff1, &l.ff2}) {
      o->w = next();
      o->b = next();
    }
  }
  head_.w = next();
  head_.b = next();
}

template <typename T>
ScorerModel Scorer<T>::to_model() const {
  ScorerModel m;
  m.config = config_;
  m.standardizer = std_;
  m.params.assign(params_.begin(), params_.end());
  return m;
}

template <typename T>
Eigen::Map<const typename Scorer<T>::Mat> Scorer<T>::mat(std::size_t off, std::size_t r,
                                                          std::size_t c) const {
  return Eigen::Map<const Mat>(params_.data() + off, static_cast<Eigen::Index>(r),
                               static_cast<Eigen::Index>(c));
}

template <typename T>
Eigen::Map<const typename Scorer<T>::RowVec> Scorer<T>::vec(std::size_t off, std::size_t n) const {
  return Eigen::Map<const RowVec>(params_.data() + off, static_cast<Eigen::Index>(n));
}

namespace {

template <typename Mat, typename Vec, typename G>
void layer_norm(const Mat& x, const G& gain, const G& bias, Mat& xhat, Vec& rstd, Mat& y) {
  using T = typename Mat::Scalar;
  const auto mu = x.rowwise().mean();
  xhat = x.colwise() - mu;
  rstd = (xhat.array().square().rowwise().mean() + T(kLnEps)).rsqrt();
  xhat = xhat.array().colwise() * rstd.array();
  y = (xhat.array().rowwise() * gain.array()).rowwise() + bias.array();
}

// dy -> dx; accumulates gain/bias gradients.
template <typename Mat, typename Vec, typename G, typename MG>
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& rstd, const G& gain, MG dgain,
                        MG dbias) {
  dgain += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gain.array();
  const auto m1 = dxhat.rowwise().mean();
  const auto m2 = (dxhat.array() * xhat.array()).rowwise().mean();
  Mat dx = (dxhat.colwise() - m1).array() - xhat.array().colwise() * m2;
  dx.array().colwise() *= rstd.array();
  return dx;
}

template <typename T>
T sigmoid(T z) {
  return z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

}  // namespace

template <typename T>
void Scorer<T>::forward(const std::vector<const SeqInput<T>*>& batch, Cache& c) const {
  const std::size_t d = config_.model_dim, f = config_.input_dim, ff = config_.ff_dim;
  const std::size_t nh = config_.heads, dh = config_.head_dim();
  const std::size_t bsz = batch.size();
  c.off.resize(bsz);
  c.len.resize(bsz);
  std::size_t rows = 0;
  for (std::size_t s = 0; s < bsz; ++s) {
    const auto L = static_cast<std::size_t>(batch[s]->x.rows());
    if (L == 0 || L > config_.seq_len || static_cast<std::size_t>(batch[s]->x.cols()) != f)
      throw std::invalid_argument("scorer input has invalid shape");
    c.off[s] = rows;
    c.len[s] = L;
    rows += L;
  }
  const auto R = static_cast<Eigen::Index>(rows);

  c.in_std.resize(R, static_cast<Eigen::Index>(f));
  for (std::size_t s = 0; s < bsz; ++s)
    c.in_std.middleRows(static_cast<Eigen::Index>(c.off[s]), static_cast<Eigen::Index>(c.len[s])) =
        batch[s]->x;
  for (std::size_t j = 0; j < f; ++j)
    c.in_std.col(static_cast<Eigen::Index>(j)) =
        (c.in_std.col(static_cast<Eigen::Index>(j)).array() - T(std_.mean[j])) / T(std_.scale[j]);

  Mat x(R, static_cast<Eigen::Index>(d));
  x.noalias() = c.in_std * mat(input_.w, d, f).transpose();
  x.rowwise() += vec(input_.b, d);
  const auto pos = mat(pos_, config_.seq_len, d);
  for (std::size_t s = 0; s < bsz; ++s)
    x.middleRows(static_cast<Eigen::Index>(c.off[s]), static_cast<Eigen::Index>(c.len[s])) +=
        pos.bottomRows(static_cast<Eigen::Index>(c.len[s]));

  const T scale = T(1) / std::sqrt(T(dh));
  c.layers.resize(config_.layers);
  for (std::size_t li = 0; li < config_.layers; ++li) {
    const LayerOffsets& lo = layer_[li];
    LayerCache& lc = c.layers[li];
    lc.x_in = x;
    layer_norm(lc.x_in, vec(lo.ln1.w, d), vec(lo.ln1.b, d), lc.xhat1, lc.rstd1, lc.h1);
    lc.q.noalias() = lc.h1 * mat(lo.q.w, d, d).transpose();
    lc.q.rowwise() += vec(lo.q.b, d);
    lc.k.noalias() = lc.h1 * mat(lo.k.w, d, d).transpose();
    lc.k.rowwise() += vec(lo.k.b, d);
    lc.v.noalias() = lc.h1 * mat(lo.v.w, d, d).transpose();
    lc.v.rowwise() += vec(lo.v.b, d);
    lc.o.resize(R, static_cast<Eigen::Index>(d));
    lc.attn.resize(bsz * nh);
    for (std::size_t s = 0; s < bsz; ++s) {
      const auto o0 = static_cast<Eigen::Index>(c.off[s]);
      const auto L = static_cast<Eigen::Index>(c.len[s]);
      for (std::size_t h = 0; h < nh; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h * dh);
        const auto DH = static_cast<Eigen::Index>(dh);
        Mat& a = lc.attn[s * nh + h];
        a.noalias() = lc.q.block(o0, c0, L, DH) * lc.k.block(o0, c0, L, DH).transpose();
        a *= scale;
        a = a.colwise() - a.rowwise().maxCoeff();
        a = a.array().exp();
        a.array().colwise() /= a.rowwise().sum().array();
        lc.o.block(o0, c0, L, DH).noalias() = a * lc.v.block(o0, c0, L, DH);
      }
    }
    lc.x_mid = lc.x_in;
    lc.x_mid.noalias() += lc.o * mat(lo.o.w, d, d).transpose();
    lc.x_mid.rowwise() += vec(lo.o.b, d);
    layer_norm(lc.x_mid, vec(lo.ln2.w, d), vec(lo.ln2.b, d), lc.xhat2, lc.rstd2, lc.h2);
    lc.u.noalias() = lc.h2 * mat(lo.ff1.w, ff, d).transpose();
    lc.u.rowwise() += vec(lo.ff1.b, ff);
    lc.g = lc.u.array() / (T(1) + (-lc.u.array()).exp());
    x = lc.x_mid;
    x.noalias() += lc.g * mat(lo.ff2.w, d, ff).transpose();
    x.rowwise() += vec(lo.ff2.b, d);
  }
  c.x_out = std::move(x);
  c.pooled.resize(static_cast<Eigen::Index>(bsz), static_cast<Eigen::Index>(d));
  c.logit.resize(bsz);
  const auto hw = vec(head_.w, d);
  const T hb = params_[head_.b];
  for (std::size_t s = 0; s < bsz; ++s) {
    c.pooled.row(static_cast<Eigen::Index>(s)) =
        c.x_out.middleRows(static_cast<Eigen::Index>(c.off[s]), static_cast<Eigen::Index>(c.len[s]))
            .colwise()
            .mean();
    c.logit[s] = c.pooled.row(static_cast<Eigen::Index>(s)).dot(hw) + hb;
  }
}

template <typename T>
std::vector<T> Scorer<T>::logits(const std::vector<const SeqInput<T>*>& batch) const {
  if (batch.empty()) return {};
  Cache c;
  forward(batch, c);
  return c.logit;
}

namespace {

template <typename T>
T bce_with_logit(T z, T t) {
  return std::max(z, T(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

template <typename T>
T Scorer<T>::loss(const std::vector<const SeqInput<T>*>& batch) const {
  const auto z = logits(batch);
  T total = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) total += bce_with_logit(z[s], batch[s]->target);
  return total / T(batch.size());
}

template <typename T>
T Scorer<T>::loss_and_grad(const std::vector<const SeqInput<T>*>& batch,
                           std::vector<T>& grad) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Cache c;
  forward(batch, c);
  const std::size_t d = config_.model_dim, f = config_.input_dim, ff = config_.ff_dim;
  const std::size_t nh = config_.heads, dh = config_.head_dim();
  const std::size_t bsz = batch.size();
  const auto R = c.x_out.rows();
  grad.assign(params_.size(), T(0));
  auto gmat = [&](std::size_t off, std::size_t r, std::size_t cols) {
    return Eigen::Map<Mat>(grad.data() + off, static_cast<Eigen::Index>(r),
                           static_cast<Eigen::Index>(cols));
  };
  auto gvec = [&](std::size_t off, std::size_t n) {
    return Eigen::Map<RowVec>(grad.data() + off, static_cast<Eigen::Index>(n));
  };

  T total = 0;
  Mat dx(R, static_cast<Eigen::Index>(d));
  const auto hw = vec(head_.w, d);
  auto dhw = gvec(head_.w, d);
  for (std::size_t s = 0; s < bsz; ++s) {
    const T z = c.logit[s], t = batch[s]->target;
    total += bce_with_logit(z, t);
    const T dz = (sigmoid(z) - t) / T(bsz);
    dhw += dz * c.pooled.row(static_cast<Eigen::Index>(s));
    grad[head_.b] += dz;
    const RowVec drow = hw * (dz / T(c.len[s]));
    dx.middleRows(static_cast<Eigen::Index>(c.off[s]), static_cast<Eigen::Index>(c.len[s]))
        .rowwise() = drow;
  }

  const T scale = T(1) / std::sqrt(T(dh));
  for (std::size_t li = config_.layers; li-- > 0;) {
    const LayerOffsets& lo = layer_[li];
    const LayerCache& lc = c.layers[li];
    // Feed-forward block.
    gmat(lo.ff2.w, d, ff).noalias() += dx.transpose() * lc.g;
    gvec(lo.ff2.b, d) += dx.colwise().sum();
    Mat du = dx * mat(lo.ff2.w, d, ff);
    {
      const auto sg = (T(1) + (-lc.u.array()).exp()).inverse();
      du.array() *= sg * (T(1) + lc.u.array() * (T(1) - sg));
    }
    gmat(lo.ff1.w, ff, d).noalias() += du.transpose() * lc.h2;
    gvec(lo.ff1.b, ff) += du.colwise().sum();
    const Mat dh2 = du * mat(lo.ff1.w, ff, d);
    Mat dmid = dx + layer_norm_backward(dh2, lc.xhat2, lc.rstd2, vec(lo.ln2.w, d),
                                        gvec(lo.ln2.w, d), gvec(lo.ln2.b, d));
    // Attention block.
    gmat(lo.o.w, d, d).noalias() += dmid.transpose() * lc.o;
    gvec(lo.o.b, d) += dmid.colwise().sum();
    const Mat dO = dmid * mat(lo.o.w, d, d);
    Mat dq(R, static_cast<Eigen::Index>(d)), dk(R, static_cast<Eigen::Index>(d)),
        dv(R, static_cast<Eigen::Index>(d));
    for (std::size_t s = 0; s < bsz; ++s) {
      const auto o0 = static_cast<Eigen::Index>(c.off[s]);
      const auto L = static_cast<Eigen::Index>(c.len[s]);
      for (std::size_t h = 0; h < nh; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h * dh);
        const auto DH = static_cast<Eigen::Index>(dh);
        const Mat& a = lc.attn[s * nh + h];
        const auto dOs = dO.block(o0, c0, L, DH);
        Mat da = dOs * lc.v.block(o0, c0, L, DH).transpose();
        dv.block(o0, c0, L, DH).noalias() = a.transpose() * dOs;
        const auto rs = (da.array() * a.array()).rowwise().sum();
        Mat ds = a.array() * (da.array().colwise() - rs);
        ds *= scale;
        dq.block(o0, c0, L, DH).noalias() = ds * lc.k.block(o0, c0, L, DH);
        dk.block(o0, c0, L, DH).noalias() = ds.transpose() * lc.q.block(o0, c0, L, DH);
      }
    }
    gmat(lo.q.w, d, d).noalias() += dq.transpose() * lc.h1;
    gvec(lo.q.b, d) += dq.colwise().sum();
    gmat(lo.k.w, d, d).noalias() += dk.transpose() * lc.h1;
    gvec(lo.k.b, d) += dk.colwise().sum();
    gmat(lo.v.w, d, d).noalias() += dv.transpose() * lc.h1;
    gvec(lo.v.b, d) += dv.colwise().sum();
    Mat dh1 = dq * mat(lo.q.w, d, d);
    dh1.noalias() += dk * mat(lo.k.w, d, d);
    dh1.noalias() += dv * mat(lo.v.w, d, d);
    dx = dmid + layer_norm_backward(dh1, lc.xhat1, lc.rstd1, vec(lo.ln1.w, d), gvec(lo.ln1.w, d),
                                    gvec(lo.ln1.b, d));
  }
  gmat(input_.w, d, f).noalias() += dx.transpose() * c.in_std;
  gvec(input_.b, d) += dx.colwise().sum();
  auto dpos = gmat(pos_, config_.seq_len, d);
  for (std::size_t s = 0; s < bsz; ++s)
    dpos.bottomRows(static_cast<Eigen::Index>(c.len[s])) +=
        dx.middleRows(static_cast<Eigen::Index>(c.off[s]), static_cast<Eigen::Index>(c.len[s]));
  return total / T(bsz);
}

template <typename T>
SeqInput<T> Scorer<T>::prepare(const FeatureSequence& seq, double target) {
  SeqInput<T> in;
  const std::size_t first = seq.vectors.size() - seq.valid_len;
  in.x.resize(static_cast<Eigen::Index>(seq.valid_len), static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t i = 0; i < seq.valid_len; ++i)
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      const double v = seq.vectors[first + i][j];
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
      in.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<T>(v);
    }
  in.target = static_cast<T>(target);
  return in;
}

template <typename T>
double Scorer<T>::score(const FeatureSequence& seq) const {
  return score_batch({&seq}).front();
}

template <typename T>
std::vector<double> Scorer<T>::score_batch(const std::vector<const FeatureSequence*>& seqs) const {
  std::vector<double> out(seqs.size(), kColdStartScore);
  std::vector<SeqInput<T>> inputs;
  std::vector<std::size_t> where;
  inputs.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i]->vectors.size() != config_.seq_len || seqs[i]->valid_len > config_.seq_len)
      throw std::invalid_argument("sequence length does not match scorer config");
    for (const auto& v : seqs[i]->vectors)
      for (double x : v.values)
        if (!std::isfinite(x)) throw std::invalid_argument("non-finite feature value");
    if (seqs[i]->valid_len == 0) continue;
    inputs.push_back(prepare(*seqs[i]));
    where.push_back(i);
  }
  if (inputs.empty()) return out;
  std::vector<const SeqInput<T>*> ptrs;
  for (const auto& in : inputs) ptrs.push_back(&in);
  const auto z = logits(ptrs);
  for (std::size_t k = 0; k < where.size(); ++k)
    out[where[k]] = static_cast<double>(sigmoid(z[k]));
  return out;
}

template class Scorer<float>;
template class Scorer<double>;

GradCheckResult gradient_check(const Scorer<double>& scorer,
                               const std::vector<const SeqInput<double>*>& batch, double h,
                               std::size_t per_group, RngStream& rng, double floor) {
  std::vector<double> analytic;
  scorer.loss_and_grad(batch, analytic);
  Scorer<double> probe = scorer;
  GradCheckResult res;
  for (const auto& g : parameter_layout(scorer.config())) {
    std::vector<std::size_t> idx(g.size());
    std::iota(idx.begin(), idx.end(), g.offset);
    if (per_group != 0 && idx.size() > per_group) {
      for (std::size_t i = 0; i < per_group; ++i)
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      idx.resize(per_group);
    }
    for (std::size_t i : idx) {
      double& p = probe.params()[i];
      const double saved = p;
      p = saved + h;
      const double lp = probe.loss(batch);
      p = saved - h;
      const double lm = probe.loss(batch);
      p = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_group = g.name;
      }
    }
  }
  return res;
}

}  // namespace uwt
