#include "opfv/reward.hpp"

#include <iostream>
#include <stdexcept>
#include <unordered_map>

#include "opfv/linalg.hpp"
#include "opfv/rng.hpp"

namespace opfv {

ContextBinner ContextBinner::per_dimension_sign(int context_dim) {
  if (context_dim > 62) throw std::invalid_argument("sign binner limited to 62 dimensions");
  ContextBinner b;
  b.n_cells = 0;  // keys are sparse bitmasks
  b.key = [context_dim](const Eigen::VectorXd& x) {
    std::int64_t mask = 0;
    for (int d = 0; d < context_dim; ++d)
      if (x[d] >= 0.0) mask |= (std::int64_t{1} << d);
    return mask;
  };
  return b;
}

ContextBinner ContextBinner::single_dimension_sign(int dim) {
  ContextBinner b;
  b.n_cells = 2;
  b.key = [dim](const Eigen::VectorXd& x) { return x[dim] >= 0.0 ? std::int64_t{1} : std::int64_t{0}; };
  return b;
}

FeatureEncoder::FeatureEncoder(EncoderSpec spec, int n_actions, int context_dim)
    : spec_(std::move(spec)), n_actions_(n_actions), context_dim_(context_dim) {
  const bool needs_phi = spec_.phi_action || spec_.cell_phi || spec_.cell_phi_action;
  if (needs_phi && !spec_.phi)
    throw std::invalid_argument("encoder interaction blocks require a time feature");
  const bool needs_cell = spec_.cell_phi || spec_.cell_phi_action;
  if (needs_cell && (!spec_.cell || spec_.cell->n_cells <= 0))
    throw std::invalid_argument("encoder cell blocks require a dense context binner");
  const int card = spec_.phi ? spec_.phi->cardinality() : 0;
  const int cells = spec_.cell ? spec_.cell->n_cells : 0;
  dim_ = 0;
  if (spec_.context) dim_ += context_dim_;
  if (spec_.phi) dim_ += card;
  if (spec_.action) dim_ += n_actions_;
  if (spec_.phi_action) dim_ += card * n_actions_;
  if (spec_.cell_phi) dim_ += cells * card;
  if (spec_.cell_phi_action) dim_ += cells * card * n_actions_;
  if (spec_.intercept) dim_ += 1;
}

Eigen::VectorXd FeatureEncoder::encode(const Eigen::VectorXd& x, Timestamp t, int action) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(dim_);
  int off = 0;
  if (spec_.context) {
    z.segment(0, context_dim_) = x;
    off += context_dim_;
  }
  int c = 0;
  if (spec_.phi) {
    c = spec_.phi->feature_of(t);
    z[off + c] = 1.0;
    off += spec_.phi->cardinality();
  }
  if (spec_.action) {
    z[off + action] = 1.0;
    off += n_actions_;
  }
  const int card = spec_.phi ? spec_.phi->cardinality() : 0;
  if (spec_.phi_action) {
    z[off + c * n_actions_ + action] = 1.0;
    off += card * n_actions_;
  }
  if (spec_.cell_phi || spec_.cell_phi_action) {
    const int cell = static_cast<int>(spec_.cell->key(x));
    const int cells = spec_.cell->n_cells;
    if (spec_.cell_phi) {
      z[off + cell * card + c] = 1.0;
      off += cells * card;
    }
    if (spec_.cell_phi_action) {
      z[off + (cell * card + c) * n_actions_ + action] = 1.0;
      off += cells * card * n_actions_;
    }
  }
  if (spec_.intercept) z[off] = 1.0;
  return z;
}

Eigen::VectorXd FeatureEncoder::penalty_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(dim_);
  if (spec_.intercept) mask[dim_ - 1] = 0.0;
  return mask;
}

RewardModel RewardModel::zero() { return RewardModel(); }

RewardModel RewardModel::oracle(RewardFn q) {
  RewardModel m;
  m.kind_ = Kind::kOracle;
  m.oracle_ = std::move(q);
  return m;
}

double RewardModel::g_part(const Eigen::VectorXd& x, Timestamp t, int action) const {
  switch (kind_) {
    case Kind::kZero:
      return 0.0;
    case Kind::kOracle:
      return oracle_(x, t, action);
    default:
      return g_->weights.dot(g_->encoder.encode(x, t, action));
  }
}

double RewardModel::h_part(const Eigen::VectorXd& x, Timestamp t, int action) const {
  if (kind_ != Kind::kTwoStage || !h_ || t > fit_horizon_) return 0.0;
  return h_->weights.dot(h_->encoder.encode(x, t, action));
}

double RewardModel::predict(const Eigen::VectorXd& x, Timestamp t, int action) const {
  return g_part(x, t, action) + h_part(x, t, action);
}

const RewardModel::LinearPart* RewardModel::direct_part() const {
  return g_ ? &*g_ : nullptr;
}

const RewardModel::LinearPart* RewardModel::residual_part() const {
  return h_ ? &*h_ : nullptr;
}

namespace {

RewardModel::LinearPart fit_linear(const LoggedDataset& ds, const FeatureEncoder& enc,
                                   const Eigen::VectorXd& targets, double ridge) {
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(enc.dim(), enc.dim());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(enc.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd z = enc.encode(rec.context, rec.t, rec.action);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z);
    rhs += targets[static_cast<Eigen::Index>(i)] * z;
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  RewardModel::LinearPart part;
  part.encoder = enc;
  part.ridge = ridge;
  part.weights = linalg::ridge_solve_gram(gram, rhs, ridge, enc.penalty_mask());
  return part;
}

FeatureEncoder g_encoder(const LoggedDataset& ds, const TimeFeatureFn& phi, bool interaction) {
  EncoderSpec spec;
  spec.phi = phi;
  spec.phi_action = interaction;
  return FeatureEncoder(spec, ds.n_actions(), ds.context_dim());
}

}  // namespace

RewardModel fit_direct(const LoggedDataset& ds, const TimeFeatureFn& phi_f,
                       const DirectFitConfig& cfg) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) y[static_cast<Eigen::Index>(i)] = ds[i].reward;
  RewardModel m;
  m.kind_ = RewardModel::Kind::kDirect;
  m.fit_horizon_ = ds.horizon();
  m.g_ = fit_linear(ds, g_encoder(ds, phi_f, cfg.phi_action_interaction), y, cfg.ridge);
  return m;
}

PairDataset build_pairwise_dataset(const LoggedDataset& ds, const TimeFeatureFn& phi,
                                   const PairConfig& cfg) {
  const ContextBinner binner =
      cfg.binner ? *cfg.binner : ContextBinner::per_dimension_sign(ds.context_dim());

  struct BucketKey {
    int action;
    int feature;
    std::int64_t cell;
    bool operator==(const BucketKey&) const = default;
  };
  struct BucketHash {
    std::size_t operator()(const BucketKey& k) const {
      return mix64(static_cast<std::uint64_t>(k.cell) * 31 + k.action * 1009 + k.feature);
    }
  };
  std::unordered_map<BucketKey, std::vector<std::size_t>, BucketHash> buckets;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    buckets[{rec.action, phi.feature_of(rec.t), binner.key(rec.context)}].push_back(i);
  }

  // reservoir sampling keeps the cap without materializing every pair
  std::vector<PairRecord> reservoir;
  reservoir.reserve(std::min<std::size_t>(cfg.max_pairs, 4096));
  std::size_t seen = 0;
  Rng rng(cfg.seed, "pair-reservoir");
  auto offer = [&](PairRecord&& pr) {
    ++seen;
    if (reservoir.size() < cfg.max_pairs) {
      reservoir.push_back(std::move(pr));
    } else {
      const auto slot = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(seen) - 1));
      if (slot < cfg.max_pairs) reservoir[slot] = std::move(pr);
    }
  };

  std::vector<BucketKey> keys;
  keys.reserve(buckets.size());
  for (const auto& [key, idx] : buckets) keys.push_back(key);
  std::sort(keys.begin(), keys.end(), [](const BucketKey& a, const BucketKey& b) {
    return std::tie(a.action, a.feature, a.cell) < std::tie(b.action, b.feature, b.cell);
  });

  for (const auto& key : keys) {
    const auto& idx = buckets[key];
    for (std::size_t p = 0; p + 1 < idx.size(); ++p) {
      for (std::size_t q = p + 1; q < idx.size(); ++q) {
        const auto& ri = ds[idx[p]];
        const auto& rj = ds[idx[q]];
        offer(PairRecord{idx[p], idx[q], key.action, key.feature, key.cell, ri.t, rj.t, ri.reward,
                         rj.reward});
      }
    }
  }
  return PairDataset(std::move(reservoir));
}

RewardModel fit_two_stage(const LoggedDataset& ds, const TimeFeatureFn& phi,
                          const TwoStageConfig& cfg) {
  const TimeFeatureFn phi_res =
      cfg.phi_residual ? *cfg.phi_residual : features::day_of_week(phi.domain_end());

  PairConfig pair_cfg = cfg.pairs;
  if (!pair_cfg.binner) pair_cfg.binner = ContextBinner::per_dimension_sign(ds.context_dim());
  const PairDataset pairs = build_pairwise_dataset(ds, phi, pair_cfg);

  RewardModel m;
  m.kind_ = RewardModel::Kind::kTwoStage;
  m.fit_horizon_ = ds.horizon();

  if (pairs.empty()) {
    std::cerr << "fit_two_stage: empty pair set, falling back to a direct fit with no residual "
                 "model\n";
    m.degraded_ = true;
  } else {
    // Residual stage on pairwise differences. Context and plain action blocks
    // cancel identically inside each pair, so the design keeps only the
    // time-feature blocks (plus configured interactions).
    EncoderSpec hspec;
    hspec.context = false;
    hspec.action = false;
    hspec.intercept = false;
    hspec.phi = phi_res;
    hspec.phi_action = cfg.phi_action_interaction;
    if (cfg.cell_interactions) {
      hspec.cell = pair_cfg.binner;
      hspec.cell_phi = true;
      hspec.cell_phi_action = true;
    }
    FeatureEncoder henc(hspec, ds.n_actions(), ds.context_dim());

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(henc.dim(), henc.dim());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(henc.dim());
    for (const auto& pr : pairs.pairs()) {
      const auto& rec_i = ds[pr.i];
      const auto& rec_j = ds[pr.j];
      const Eigen::VectorXd z = henc.encode(rec_i.context, rec_i.t, rec_i.action) -
                                henc.encode(rec_j.context, rec_j.t, rec_j.action);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(z);
      rhs += (pr.r_i - pr.r_j) * z;
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    RewardModel::LinearPart hpart;
    hpart.encoder = henc;
    hpart.ridge = cfg.ridge_h;
    hpart.weights = linalg::ridge_solve_gram(gram, rhs, cfg.ridge_h, henc.penalty_mask());
    m.h_ = std::move(hpart);
  }

  Eigen::VectorXd targets(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const double h = m.h_ ? m.h_->weights.dot(m.h_->encoder.encode(rec.context, rec.t, rec.action))
                          : 0.0;
    targets[static_cast<Eigen::Index>(i)] = rec.reward - h;
  }
  m.g_ = fit_linear(ds, g_encoder(ds, phi, true), targets, cfg.ridge_g);
  return m;
}

}  // namespace opfv
