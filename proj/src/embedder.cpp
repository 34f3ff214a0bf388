#include "ragforge/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::embed {

std::string_view to_string(Pooling p) {
  switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::max: return "max";
    case Pooling::first: return "first";
  }
  return "mean";
}

Pooling parse_pooling(std::string_view name) {
  if (name == "mean") return Pooling::mean;
  if (name == "max") return Pooling::max;
  if (name == "first") return Pooling::first;
  throw ConfigError("unknown pooling mode: " + std::string(name));
}

void FeatureConfig::validate() const {
  if (dim < 8) throw ConfigError("features.dim must be >= 8");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (in_batch_negative_weight < 0.0 || in_batch_negative_weight > 1.0) {
    throw ConfigError("train.in_batch_negative_weight must be in [0, 1]");
  }
  if (in_batch_negative_weight > 0.0 && batch_size < 2) {
    throw ConfigError("train.batch_size must be >= 2 when in-batch negatives are enabled");
  }
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0 || !(adam_eps > 0.0)) {
    throw ConfigError("train.adam_* out of range");
  }
}

namespace {

std::string normalize_token(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(raw[e - 1]))) --e;
  return to_lower(b < e ? raw.substr(b, e - b) : raw);
}

void add_hashed(Vector& v, std::string_view feature, std::uint64_t seed, double weight) {
  std::uint64_t h = splitmix64(fnv1a64(feature) ^ splitmix64(seed));
  std::size_t bucket = static_cast<std::size_t>(h % v.size());
  double sign = ((h >> 63) & 1U) ? -1.0 : 1.0;
  v[bucket] += sign * weight;
}

}  // namespace

std::vector<Vector> featurize(std::string_view text, const FeatureConfig& cfg) {
  std::vector<Vector> out;
  for (auto raw : split_whitespace(text)) {
    std::string tok = normalize_token(raw);
    Vector v(cfg.dim, 0.0);
    add_hashed(v, "w:" + tok, cfg.hash_seed, 1.0);
    std::string marked = "<" + tok + ">";
    for (std::size_t i = 0; i + 3 <= marked.size(); ++i) {
      add_hashed(v, "t:" + marked.substr(i, 3), cfg.hash_seed, 0.5);
    }
    out.push_back(std::move(v));
  }
  return out;
}

Vector pool(const std::vector<Vector>& features, Pooling mode, std::size_t dim) {
  if (features.empty()) return Vector(dim, 0.0);
  switch (mode) {
    case Pooling::first:
      return features.front();
    case Pooling::max: {
      Vector out = features.front();
      for (const auto& f : features)
        for (std::size_t i = 0; i < dim; ++i) out[i] = std::max(out[i], f[i]);
      return out;
    }
    case Pooling::mean:
      break;
  }
  Vector out(dim, 0.0);
  for (const auto& f : features)
    for (std::size_t i = 0; i < dim; ++i) out[i] += f[i];
  const double n = static_cast<double>(features.size());
  for (double& x : out) x /= n;
  return out;
}

Vector base_vector(std::string_view text, const FeatureConfig& cfg) {
  Vector v = pool(featurize(text, cfg), cfg.pooling, cfg.dim);
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
  return v;
}

Projection::Projection(std::size_t dim, std::vector<double> row_major, std::uint32_t version)
    : dim_(dim), matrix_(std::move(row_major)), version_(version) {
  if (matrix_.size() != dim_ * dim_) throw InputError("projection matrix size does not match dim");
}

Projection Projection::identity(std::size_t dim) {
  std::vector<double> m(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = 1.0;
  Projection p(dim, std::move(m), 0);
  p.finalize();
  return p;
}

Projection Projection::initial(std::size_t dim, std::uint64_t seed, double noise_std) {
  std::mt19937_64 rng(seed);
  std::vector<double> m(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim * dim; ++i) m[i] = noise_std * standard_normal(rng);
  for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] += 1.0;
  Projection p(dim, std::move(m), 0);
  p.finalize();
  return p;
}

Vector Projection::apply(const Vector& x) const {
  Vector y(dim_, 0.0);
  for (std::size_t r = 0; r < dim_; ++r) {
    const double* row = &matrix_[r * dim_];
    double acc = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

void Projection::finalize() {
  BinaryWriter image;
  for (double& x : matrix_) {
    x = static_cast<double>(static_cast<float>(x));
    image.put_f32(static_cast<float>(x));
  }
  version_ = crc32_of(image.bytes());
}

Embedding embed_base(const Vector& base, const Projection& proj) {
  if (base.size() != proj.dim()) throw QueryError("feature dim does not match projection dim");
  Vector y = proj.apply(base);
  double norm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
  Embedding e;
  e.values.assign(y.size(), 0.0f);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    e.values[0] = 1.0f;
    return e;
  }
  for (std::size_t i = 0; i < y.size(); ++i) e.values[i] = static_cast<float>(y[i] / norm);
  return e;
}

Embedding embed(std::string_view text, const Projection& proj, const FeatureConfig& cfg) {
  return embed_base(base_vector(text, cfg), proj);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw QueryError("cosine of vectors with different dims");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

EncodedPair encode_pair(const clicks::TrainingPair& pair, const FeatureConfig& cfg) {
  EncodedPair e;
  e.query = base_vector(pair.query, cfg);
  e.doc = base_vector(pair.doc_text, cfg);
  e.ratio = pair.ratio;
  e.weight = pair.weight;
  e.query_key = fnv1a64(pair.query);
  e.doc_key = fnv1a64(pair.doc_text);
  return e;
}

namespace {

struct Tower {
  Vector unit;  // W x / |W x|
  double norm = 0.0;
};

Tower run_tower(const Projection& proj, const Vector& x) {
  Tower t;
  t.unit = proj.apply(x);
  t.norm = std::sqrt(std::inner_product(t.unit.begin(), t.unit.end(), t.unit.begin(), 0.0));
  for (double& v : t.unit) v /= t.norm;
  return t;
}

double dot(const Vector& a, const Vector& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

// d cos(u, v) / du scaled by `coef`, accumulated into g_u:
//   coef * (v_hat - c * u_hat) / |u|
void accumulate_cos_grad(Vector& g, const Tower& self, const Tower& other, double c, double coef) {
  const double s = coef / self.norm;
  for (std::size_t k = 0; k < g.size(); ++k) g[k] += s * (other.unit[k] - c * self.unit[k]);
}

}  // namespace

LossAndGrad loss_and_grad(std::span<const EncodedPair> batch, const Projection& proj, const TrainConfig& cfg) {
  if (batch.empty()) throw InputError("loss_and_grad: empty batch");
  const std::size_t dim = proj.dim();
  const std::size_t n = batch.size();

  std::vector<Tower> q(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = run_tower(proj, batch[i].query);
    d[i] = run_tower(proj, batch[i].doc);
    if (!(q[i].norm > 0.0) || !(d[i].norm > 0.0) || !std::isfinite(q[i].norm) || !std::isfinite(d[i].norm)) {
      throw NumericalError("degenerate projection output for pair " + std::to_string(i), i);
    }
  }

  std::vector<Vector> gq(n, Vector(dim, 0.0)), gd(n, Vector(dim, 0.0));
  double weight_sum = 0.0;
  for (const auto& p : batch) weight_sum += p.weight;

  double loss = 0.0;
  if (weight_sum > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double c = dot(q[i].unit, d[i].unit);
      const double diff = c - batch[i].ratio;
      const double term = batch[i].weight * diff * diff / weight_sum;
      if (!std::isfinite(term)) throw NumericalError("non-finite loss at pair " + std::to_string(i), i);
      loss += term;
      const double coef = 2.0 * batch[i].weight * diff / weight_sum;
      accumulate_cos_grad(gq[i], q[i], d[i], c, coef);
      accumulate_cos_grad(gd[i], d[i], q[i], c, coef);
    }
  }

  const double lambda = cfg.in_batch_negative_weight;
  if (lambda > 0.0 && n > 1) {
    std::size_t terms = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && batch[i].query_key != batch[j].query_key && batch[i].doc_key != batch[j].doc_key) ++terms;
    if (terms > 0) {
      const double scale = lambda / static_cast<double>(terms);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j || batch[i].query_key == batch[j].query_key || batch[i].doc_key == batch[j].doc_key) continue;
          const double c = dot(q[i].unit, d[j].unit);
          const double term = scale * c * c;
          if (!std::isfinite(term)) throw NumericalError("non-finite negative term at pair " + std::to_string(i), i);
          loss += term;
          const double coef = 2.0 * scale * c;
          accumulate_cos_grad(gq[i], q[i], d[j], c, coef);
          accumulate_cos_grad(gd[j], d[j], q[i], c, coef);
        }
      }
    }
  }

  // dL/dW = sum_i gq_i x_qi^T + gd_i x_di^T
  LossAndGrad out;
  out.loss = loss;
  out.grad.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& xq = batch[i].query;
    const Vector& xd = batch[i].doc;
    for (std::size_t r = 0; r < dim; ++r) {
      const double a = gq[i][r];
      const double b = gd[i][r];
      if (a == 0.0 && b == 0.0) continue;
      double* row = &out.grad[r * dim];
      for (std::size_t c = 0; c < dim; ++c) row[c] += a * xq[c] + b * xd[c];
    }
  }
  return out;
}

LossAndGrad loss_and_grad(std::span<const clicks::TrainingPair> batch, const Projection& proj,
                          const TrainConfig& cfg, const FeatureConfig& fcfg) {
  std::vector<EncodedPair> enc;
  enc.reserve(batch.size());
  for (const auto& p : batch) enc.push_back(encode_pair(p, fcfg));
  return loss_and_grad(enc, proj, cfg);
}

TrainResult train(std::span<const clicks::TrainingPair> pairs, const TrainConfig& cfg, const FeatureConfig& fcfg) {
  return train(pairs, cfg, fcfg, Projection::initial(fcfg.dim, cfg.rng_seed));
}

TrainResult train(std::span<const clicks::TrainingPair> pairs, const TrainConfig& cfg, const FeatureConfig& fcfg,
                  Projection initial) {
  cfg.validate();
  fcfg.validate();
  if (pairs.empty()) throw EmptyInputError("no training pairs");
  if (initial.dim() != fcfg.dim) throw ConfigError("initial projection dim does not match features.dim");

  TrainResult result;
  result.projection = std::move(initial);
  if (cfg.epochs == 0) return result;

  std::vector<clicks::TrainingPair> ordered(pairs.begin(), pairs.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    return std::tie(a.query, a.doc_id, a.doc_text, a.ratio, a.weight) <
           std::tie(b.query, b.doc_id, b.doc_text, b.ratio, b.weight);
  });
  std::vector<EncodedPair> encoded;
  encoded.reserve(ordered.size());
  for (const auto& p : ordered) encoded.push_back(encode_pair(p, fcfg));

  const std::size_t dim = fcfg.dim;
  std::vector<double>& w = result.projection.mutable_matrix();
  std::vector<double> m(dim * dim, 0.0), v(dim * dim, 0.0);
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<std::size_t> order(encoded.size());
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    portable_shuffle(order, rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<EncodedPair> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(encoded[order[k]]);
      LossAndGrad lg;
      try {
        lg = loss_and_grad(batch, result.projection, cfg);
      } catch (const NumericalError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + ": " + e.what());
      }
      if (!std::isfinite(lg.loss)) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      }
      epoch_loss += lg.loss;

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double g = lg.grad[k];
        m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g;
        v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g * g;
        w[k] -= cfg.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.adam_eps);
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
    spdlog::debug("epoch {}: mean loss {:.6f}", epoch, result.epoch_losses.back());
  }
  if (!std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); })) {
    throw TrainingError("training produced non-finite weights");
  }
  result.projection.finalize();
  return result;
}

std::string encode_projection(const Projection& p) {
  BinaryWriter w;
  w.put_bytes("RFPJ");
  w.put_u32(p.version());
  w.put_u32(static_cast<std::uint32_t>(p.dim()));
  for (double x : p.matrix()) w.put_f32(static_cast<float>(x));
  w.put_crc();
  return w.bytes();
}

Projection decode_projection(std::string_view bytes) {
  BinaryReader r(verify_framed(bytes, "RFPJ"));
  r.get_bytes(4);
  std::uint32_t version = r.get_u32();
  std::uint32_t dim = r.get_u32();
  if (dim < 8 || dim > 8192) throw FormatError("projection dim out of range: " + std::to_string(dim));
  if (r.remaining() != static_cast<std::size_t>(dim) * dim * 4) throw FormatError("projection payload size mismatch");
  std::vector<double> m(static_cast<std::size_t>(dim) * dim);
  for (double& x : m) {
    float f = r.get_f32();
    if (!std::isfinite(f)) throw FormatError("projection contains non-finite entries");
    x = f;
  }
  return Projection(dim, std::move(m), version);
}

void save_projection(const Projection& p, const std::string& path) { write_file(path, encode_projection(p)); }

Projection load_projection(const std::string& path) { return decode_projection(read_file(path)); }

}  // namespace ragforge::embed
