#include "stpp/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace stpp {

namespace detail {

// Workspace cap for Gram evaluation: matrices with more entries than this are
// processed in column blocks so pooled batches with very long sequences never
// materialize an n x m matrix. Exposed mutably as a test hook.
Eigen::Index gram_block_entry_cap = 4000000;

}  // namespace detail

namespace {

constexpr double kNegativeFloor = -1e-9;

void check_config(const KernelConfig& cfg) {
    if (cfg.kind == KernelKind::matern) {
        throw std::invalid_argument("matern kernel is reserved but not implemented");
    }
    if (!(cfg.bandwidth > 0.0) || !std::isfinite(cfg.bandwidth)) {
        throw std::invalid_argument("kernel bandwidth must be positive and finite");
    }
}

// Pools a batch into a 3 x N matrix of (t, x, y) columns; records the
// sequence index of each column for the unbiased estimator.
struct PooledBatch {
    Eigen::Matrix3Xd points;
    std::vector<Eigen::Index> seq_of_col;
    std::vector<Eigen::Index> seq_offsets;  // first column per sequence
    Eigen::Index n_sequences = 0;

    Eigen::Index seq_begin(Eigen::Index s) const {
        return seq_offsets[static_cast<std::size_t>(s)];
    }
    Eigen::Index seq_end(Eigen::Index s) const {
        return s + 1 < n_sequences ? seq_offsets[static_cast<std::size_t>(s + 1)] : points.cols();
    }
};

PooledBatch pool(const EmbeddingBatch& batch, const char* label) {
    if (batch.sequences.empty()) {
        throw std::invalid_argument(std::string(label) + " batch must contain sequences");
    }
    const double horizon = batch.sequences.front().horizon;
    std::size_t total = 0;
    for (const EventSequence& seq : batch.sequences) {
        if (std::abs(seq.horizon - horizon) > 1e-9 * std::max(1.0, std::abs(horizon))) {
            throw std::invalid_argument(std::string(label) +
                                        " batch mixes sequences of different horizons");
        }
        total += seq.events.size();
    }
    PooledBatch out;
    out.n_sequences = static_cast<Eigen::Index>(batch.sequences.size());
    out.points.resize(3, static_cast<Eigen::Index>(total));
    out.seq_of_col.reserve(total);
    Eigen::Index col = 0;
    for (std::size_t s = 0; s < batch.sequences.size(); ++s) {
        out.seq_offsets.push_back(col);
        for (const Event& e : batch.sequences[s].events) {
            if (!std::isfinite(e.time) || !e.location.allFinite()) {
                throw std::invalid_argument(std::string(label) + " batch has non-finite event");
            }
            out.points.col(col) = e.as_vector();
            out.seq_of_col.push_back(static_cast<Eigen::Index>(s));
            ++col;
        }
    }
    return out;
}

// Gram matrix of exp(-|a_i - b_j|^2 / (2 bw^2)) via the squared-distance
// expansion; one Eigen product carries the whole double sum.
Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::Matrix3Xd>& a,
                     const Eigen::Ref<const Eigen::Matrix3Xd>& b, double bandwidth) {
    if (a.cols() == 0 || b.cols() == 0) return Eigen::MatrixXd(a.cols(), b.cols());
    const Eigen::RowVectorXd na = a.colwise().squaredNorm();
    const Eigen::RowVectorXd nb = b.colwise().squaredNorm();
    Eigen::MatrixXd d2 = (-2.0 * a.transpose() * b);
    d2.colwise() += na.transpose();
    d2.rowwise() += nb;
    return (d2.cwiseMax(0.0).array() * (-0.5 / (bandwidth * bandwidth))).exp().matrix();
}

Eigen::Index block_cols(Eigen::Index rows, Eigen::Index cols) {
    if (rows <= 0) return cols;
    return std::max<Eigen::Index>(1, std::min(cols, detail::gram_block_entry_cap / rows));
}

// Sum of all kernel values between the two point sets, bounded workspace.
double gram_sum(const Eigen::Ref<const Eigen::Matrix3Xd>& a,
                const Eigen::Ref<const Eigen::Matrix3Xd>& b, double bandwidth) {
    if (a.cols() == 0 || b.cols() == 0) return 0.0;
    if (a.cols() * b.cols() <= detail::gram_block_entry_cap) {
        return gram(a, b, bandwidth).sum();
    }
    double total = 0.0;
    const Eigen::Index bc = block_cols(a.cols(), b.cols());
    for (Eigen::Index c0 = 0; c0 < b.cols(); c0 += bc) {
        const Eigen::Index c = std::min(bc, b.cols() - c0);
        total += gram(a, b.middleCols(c0, c), bandwidth).sum();
    }
    return total;
}

// Sum of within-batch kernel values restricted to same-sequence pairs.
double same_sequence_sum(const PooledBatch& p, double bandwidth) {
    double sum = 0.0;
    for (Eigen::Index s = 0; s < p.n_sequences; ++s) {
        const Eigen::Index begin = p.seq_begin(s);
        const Eigen::Index len = p.seq_end(s) - begin;
        sum += gram_sum(p.points.middleCols(begin, len), p.points.middleCols(begin, len),
                        bandwidth);
    }
    return sum;
}

void check_unbiased(const PooledBatch& p, const char* label) {
    if (p.n_sequences < 2) {
        throw std::invalid_argument(std::string(label) +
                                    " batch needs >= 2 sequences for the unbiased estimator");
    }
}

// Per-target row sum and point-weighted sum against a source point set:
//   row_sum[i]  = sum_j k(p_i, q_j)
//   weighted(:, i) = sum_j k(p_i, q_j) q_j
// with same-sequence pairs optionally masked (p and q must then be the same
// pooled batch). Computed in column blocks of q.
struct RowAccumulation {
    Eigen::VectorXd row_sum;
    Eigen::Matrix3Xd weighted;
};

RowAccumulation accumulate_rows(const PooledBatch& p, const PooledBatch& q, double bandwidth,
                                bool mask_same_sequence) {
    RowAccumulation acc;
    acc.row_sum = Eigen::VectorXd::Zero(p.points.cols());
    acc.weighted = Eigen::Matrix3Xd::Zero(3, p.points.cols());
    if (p.points.cols() == 0 || q.points.cols() == 0) return acc;
    const Eigen::Index bc = block_cols(p.points.cols(), q.points.cols());
    for (Eigen::Index c0 = 0; c0 < q.points.cols(); c0 += bc) {
        const Eigen::Index c = std::min(bc, q.points.cols() - c0);
        Eigen::MatrixXd g = gram(p.points, q.points.middleCols(c0, c), bandwidth);
        if (mask_same_sequence) {
            for (Eigen::Index j = 0; j < c; ++j) {
                const Eigen::Index s = q.seq_of_col[static_cast<std::size_t>(c0 + j)];
                const Eigen::Index begin = p.seq_begin(s);
                g.block(begin, j, p.seq_end(s) - begin, 1).setZero();
            }
        }
        acc.row_sum += g.rowwise().sum();
        acc.weighted += q.points.middleCols(c0, c) * g.transpose();
    }
    return acc;
}

}  // namespace

double kernel_eval(const Event& a, const Event& b, const KernelConfig& cfg) {
    check_config(cfg);
    if (!std::isfinite(a.time) || !a.location.allFinite() || !std::isfinite(b.time) ||
        !b.location.allFinite()) {
        throw std::invalid_argument("kernel_eval: non-finite event coordinates");
    }
    const double d2 = (a.as_vector() - b.as_vector()).squaredNorm();
    return std::exp(-d2 / (2.0 * cfg.bandwidth * cfg.bandwidth));
}

double mmd_squared(const EmbeddingBatch& expert, const EmbeddingBatch& learner,
                   const KernelConfig& cfg, MmdEstimator estimator) {
    check_config(cfg);
    const PooledBatch pe = pool(expert, "expert");
    const PooledBatch pl = pool(learner, "learner");
    const double L = static_cast<double>(pe.n_sequences);
    const double M = static_cast<double>(pl.n_sequences);

    const double sum_ee = gram_sum(pe.points, pe.points, cfg.bandwidth);
    const double sum_ll = gram_sum(pl.points, pl.points, cfg.bandwidth);
    const double sum_el = gram_sum(pe.points, pl.points, cfg.bandwidth);

    double within_expert = 0.0;
    double within_learner = 0.0;
    if (estimator == MmdEstimator::biased) {
        within_expert = sum_ee / (L * L);
        within_learner = sum_ll / (M * M);
    } else {
        check_unbiased(pe, "expert");
        check_unbiased(pl, "learner");
        within_expert = (sum_ee - same_sequence_sum(pe, cfg.bandwidth)) / (L * (L - 1.0));
        within_learner = (sum_ll - same_sequence_sum(pl, cfg.bandwidth)) / (M * (M - 1.0));
    }
    const double cross = sum_el * 2.0 / (L * M);

    double d2 = within_expert + within_learner - cross;
    if (d2 < 0.0 && d2 > kNegativeFloor) d2 = 0.0;
    return d2;
}

std::vector<Eigen::Matrix3Xd> mmd_grad_events(const EmbeddingBatch& expert,
                                              const EmbeddingBatch& learner,
                                              const KernelConfig& cfg, MmdEstimator estimator) {
    check_config(cfg);
    const PooledBatch pe = pool(expert, "expert");
    const PooledBatch pl = pool(learner, "learner");
    const double L = static_cast<double>(pe.n_sequences);
    const double M = static_cast<double>(pl.n_sequences);
    const double inv_bw2 = 1.0 / (cfg.bandwidth * cfg.bandwidth);

    const Eigen::Index n = pl.points.cols();
    const bool small = n * std::max(n, pe.points.cols()) <= detail::gram_block_entry_cap;
    Eigen::Matrix3Xd grad = Eigen::Matrix3Xd::Zero(3, n);
    if (n > 0 && small) {
        // full Gram matrices fit in the workspace
        Eigen::MatrixXd g_ll = gram(pl.points, pl.points, cfg.bandwidth);
        double within_norm = 1.0;
        if (estimator == MmdEstimator::biased) {
            within_norm = 1.0 / (M * M);
        } else {
            check_unbiased(pe, "expert");
            check_unbiased(pl, "learner");
            within_norm = 1.0 / (M * (M - 1.0));
            for (Eigen::Index s = 0; s < pl.n_sequences; ++s) {
                const Eigen::Index begin = pl.seq_begin(s);
                g_ll.block(begin, begin, pl.seq_end(s) - begin, pl.seq_end(s) - begin).setZero();
            }
        }
        // d/da_j of the within-learner term: -2 norm / bw^2 * sum_b k(a_j,b)(a_j - b)
        const Eigen::VectorXd row_ll = g_ll.rowwise().sum();
        const Eigen::Matrix3Xd weighted_ll = pl.points * g_ll;
        grad += (-2.0 * within_norm * inv_bw2) *
                ((pl.points.array().rowwise() * row_ll.transpose().array()).matrix() - weighted_ll);

        if (pe.points.cols() > 0) {
            const Eigen::MatrixXd g_le = gram(pl.points, pe.points, cfg.bandwidth);
            const Eigen::VectorXd row_le = g_le.rowwise().sum();
            const Eigen::Matrix3Xd weighted_le = pe.points * g_le.transpose();
            grad += (2.0 / (L * M) * inv_bw2) *
                    ((pl.points.array().rowwise() * row_le.transpose().array()).matrix() -
                     weighted_le);
        }
    } else if (n > 0) {
        double within_norm = 1.0 / (M * M);
        bool mask = false;
        if (estimator == MmdEstimator::unbiased) {
            check_unbiased(pe, "expert");
            check_unbiased(pl, "learner");
            within_norm = 1.0 / (M * (M - 1.0));
            mask = true;
        }
        const RowAccumulation ll = accumulate_rows(pl, pl, cfg.bandwidth, mask);
        grad += (-2.0 * within_norm * inv_bw2) *
                ((pl.points.array().rowwise() * ll.row_sum.transpose().array()).matrix() -
                 ll.weighted);
        if (pe.points.cols() > 0) {
            const RowAccumulation le = accumulate_rows(pl, pe, cfg.bandwidth, false);
            grad += (2.0 / (L * M) * inv_bw2) *
                    ((pl.points.array().rowwise() * le.row_sum.transpose().array()).matrix() -
                     le.weighted);
        }
    }

    std::vector<Eigen::Matrix3Xd> out;
    out.reserve(static_cast<std::size_t>(pl.n_sequences));
    for (Eigen::Index s = 0; s < pl.n_sequences; ++s) {
        const Eigen::Index begin = pl.seq_begin(s);
        out.push_back(grad.middleCols(begin, pl.seq_end(s) - begin));
    }
    return out;
}

double reward_field(const EmbeddingBatch& expert, const EmbeddingBatch& learner,
                    const Event& query, const KernelConfig& cfg) {
    check_config(cfg);
    if (!std::isfinite(query.time) || !query.location.allFinite()) {
        throw std::invalid_argument("reward_field: non-finite query");
    }
    const PooledBatch pe = pool(expert, "expert");
    const PooledBatch pl = pool(learner, "learner");

    const Eigen::Vector3d q = query.as_vector();
    const double inv2bw2 = 1.0 / (2.0 * cfg.bandwidth * cfg.bandwidth);
    double expert_mass = 0.0;
    for (Eigen::Index j = 0; j < pe.points.cols(); ++j) {
        expert_mass += std::exp(-(pe.points.col(j) - q).squaredNorm() * inv2bw2);
    }
    double learner_mass = 0.0;
    for (Eigen::Index j = 0; j < pl.points.cols(); ++j) {
        learner_mass += std::exp(-(pl.points.col(j) - q).squaredNorm() * inv2bw2);
    }
    return expert_mass / static_cast<double>(pe.n_sequences) -
           learner_mass / static_cast<double>(pl.n_sequences);
}

}  // namespace stpp
