#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragforge/click_ingest.hpp"

namespace ragforge::embed {

enum class Pooling { mean, max, first };

std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view name);

struct FeatureConfig {
  std::size_t dim = 256;
  std::uint64_t hash_seed = 0;
  Pooling pooling = Pooling::mean;

  void validate() const;  // throws ConfigError
};

using Vector = std::vector<double>;

// One dim-length vector per whitespace token: signed feature hashing of the
// normalized token (weight 1) and of its boundary-marked character trigrams
// (weight 0.5 each).
std::vector<Vector> featurize(std::string_view text, const FeatureConfig& cfg);

// Empty input pools to the zero vector of length `dim`.
Vector pool(const std::vector<Vector>& features, Pooling mode, std::size_t dim);

// featurize + pool, with the zero vector replaced by e0 so normalization is total.
Vector base_vector(std::string_view text, const FeatureConfig& cfg);

// Shared linear map applied to both the query and the document tower.
// Entries are kept at float precision so the persisted file is exact.
class Projection {
 public:
  Projection() = default;
  Projection(std::size_t dim, std::vector<double> row_major, std::uint32_t version);

  static Projection identity(std::size_t dim);
  // Identity plus N(0, noise_std^2) noise, seeded.
  static Projection initial(std::size_t dim, std::uint64_t seed, double noise_std = 0.01);

  std::size_t dim() const { return dim_; }
  std::uint32_t version() const { return version_; }
  const std::vector<double>& matrix() const { return matrix_; }
  double at(std::size_t r, std::size_t c) const { return matrix_[r * dim_ + c]; }

  Vector apply(const Vector& x) const;

  // Rounds entries to float and recomputes the version fingerprint (CRC32 of
  // the float image). Called after construction and after training.
  void finalize();
  // Mutable access for optimizers; call finalize() afterwards.
  std::vector<double>& mutable_matrix() { return matrix_; }

  friend bool operator==(const Projection&, const Projection&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> matrix_;
  std::uint32_t version_ = 0;
};

struct Embedding {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

Embedding embed(std::string_view text, const Projection& proj, const FeatureConfig& cfg);
Embedding embed_base(const Vector& base, const Projection& proj);
double cosine(std::span<const float> a, std::span<const float> b);
inline double cosine(const Embedding& a, const Embedding& b) { return cosine(a.values, b.values); }

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double in_batch_negative_weight = 0.2;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws ConfigError
};

// A training pair with both towers' pooled inputs precomputed.
struct EncodedPair {
  Vector query;
  Vector doc;
  double ratio = 0.0;
  double weight = 0.0;
  std::uint64_t query_key = 0;  // identifies equal query texts
  std::uint64_t doc_key = 0;    // identifies equal document texts
};

EncodedPair encode_pair(const clicks::TrainingPair& pair, const FeatureConfig& cfg);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // row-major dim x dim
};

// loss = sum_i w_i (cos(q_i, d_i) - r_i)^2 / sum_i w_i
//      + lambda * sum_{i != j} cos(q_i, d_j)^2 / #negative terms
// Negative terms skip (i, j) when q_i and q_j or d_i and d_j are the same text,
// since d_j would then be a positive for q_i. Throws NumericalError carrying the
// offending pair index on a non-finite term.
LossAndGrad loss_and_grad(std::span<const EncodedPair> batch, const Projection& proj, const TrainConfig& cfg);
LossAndGrad loss_and_grad(std::span<const clicks::TrainingPair> batch, const Projection& proj,
                          const TrainConfig& cfg, const FeatureConfig& fcfg);

struct TrainResult {
  Projection projection;
  std::vector<double> epoch_losses;  // mean minibatch loss per epoch
};

// Adam over seeded shuffled minibatches. Pairs are put in canonical order first,
// so results do not depend on input order. Single-threaded and bit-reproducible.
TrainResult train(std::span<const clicks::TrainingPair> pairs, const TrainConfig& cfg, const FeatureConfig& fcfg);
TrainResult train(std::span<const clicks::TrainingPair> pairs, const TrainConfig& cfg, const FeatureConfig& fcfg,
                  Projection initial);

// "RFPJ", u32 version, u32 dim, dim*dim f32 LE (row-major), CRC32.
std::string encode_projection(const Projection& p);
Projection decode_projection(std::string_view bytes);
void save_projection(const Projection& p, const std::string& path);
Projection load_projection(const std::string& path);

}  // namespace ragforge::embed
