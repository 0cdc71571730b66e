#include "enscert/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "enscert/ensemble.hpp"
#include "enscert/format.hpp"

namespace enscert::training {

using autodiff::BoundMlp;
using autodiff::Graph;
using autodiff::MlpForward;
using autodiff::NodeId;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::DRTPairwise: return "drt_pairwise";
        case Variant::DRTAggregate: return "drt_aggregate";
        case Variant::GDOnly: return "gd_only";
        case Variant::CMOnly: return "cm_only";
        case Variant::ADP: return "adp";
        case Variant::GAL: return "gal";
        case Variant::None: return "none";
    }
    return "none";
}

Variant variant_from_string(const std::string& s) {
    if (s == "drt_pairwise") return Variant::DRTPairwise;
    if (s == "drt_aggregate") return Variant::DRTAggregate;
    if (s == "gd_only") return Variant::GDOnly;
    if (s == "cm_only") return Variant::CMOnly;
    if (s == "adp") return Variant::ADP;
    if (s == "gal") return Variant::GAL;
    if (s == "none") return Variant::None;
    throw std::invalid_argument("unknown training variant: " + s);
}

void TrainingConfig::validate() const {
    if (rho1 < 0.0 || rho2 < 0.0)
        throw std::invalid_argument("TrainingConfig: rho weights must be nonnegative");
    if (!(sigma >= 0.0)) throw std::invalid_argument("TrainingConfig: sigma must be >= 0");
    if (k_noise < 1) throw std::invalid_argument("TrainingConfig: k_noise must be >= 1");
    if (epochs < 0 || batch_size < 1)
        throw std::invalid_argument("TrainingConfig: bad epoch/batch settings");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainingConfig: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("TrainingConfig: momentum must lie in [0, 1)");
    if (lr_decay_period < 0 || !(lr_decay_factor > 0.0))
        throw std::invalid_argument("TrainingConfig: bad lr decay settings");
}

void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
                       double momentum) {
    if (!param.same_shape(grad) || !param.same_shape(velocity))
        throw std::invalid_argument("sgd_momentum_step: shape mismatch");
    for (size_t i = 0; i < param.size(); ++i) {
        velocity.v[i] = momentum * velocity.v[i] + grad.v[i];
        param.v[i] -= lr * velocity.v[i];
    }
}

void sgd_momentum_step(Vector& param, const Tensor& grad, Tensor& velocity, double lr,
                       double momentum) {
    if (static_cast<int>(param.size()) != grad.rows || grad.cols != 1 ||
        !grad.same_shape(velocity))
        throw std::invalid_argument("sgd_momentum_step: shape mismatch");
    for (size_t i = 0; i < param.size(); ++i) {
        velocity.v[i] = momentum * velocity.v[i] + grad.v[i];
        param[i] -= lr * velocity.v[i];
    }
}

std::string TrainingHistory::to_csv() const {
    std::ostringstream os;
    os << "epoch,std_loss,gd_loss,cm_loss,variant_loss,train_acc\n";
    for (const auto& e : epochs) {
        os << e.epoch << "," << fmt17(e.std_loss) << "," << fmt17(e.gd_loss) << ","
           << fmt17(e.cm_loss) << "," << fmt17(e.variant_loss) << "," << fmt17(e.train_acc)
           << "\n";
    }
    return os.str();
}

namespace {

struct MemberNodes {
    BoundMlp bm;
    MlpForward fwd;
    model::Prediction pred;
};

MemberNodes bind_and_forward(Graph& g, const model::MlpClassifier& m, NodeId x) {
    MemberNodes mn;
    mn.bm = autodiff::bind_mlp(g, m);
    mn.fwd = autodiff::mlp_forward(g, mn.bm, x);
    Vector probs = g.value(mn.fwd.probs).v;
    mn.pred = model::predict_from_confidences(probs);
    return mn;
}

NodeId zero_scalar(Graph& g) { return g.constant(Tensor::scalar(0.0)); }

NodeId gd_node_from(Graph& g, const MemberNodes& a, const MemberNodes& b, NodeId x, int y0) {
    const NodeId ga = autodiff::input_gradient_node(g, a.bm, a.fwd, x, y0, a.pred.runner_up);
    const NodeId gb = autodiff::input_gradient_node(g, b.bm, b.fwd, x, y0, b.pred.runner_up);
    return g.l2_norm(g.add(ga, gb));
}

NodeId cm_node_from(Graph& g, const MemberNodes& a, const MemberNodes& b, int y0) {
    const NodeId ma = autodiff::margin_node(g, a.fwd, a.pred.runner_up, y0);
    const NodeId mb = autodiff::margin_node(g, b.fwd, b.pred.runner_up, y0);
    return g.add(ma, mb);
}

// Frozen runner-up of member m at x_noisy, where ties inside predict() keep
// the lowest index; the runner-up never equals y0's slot when the member
// mispredicts (callers gate on correct prediction first).
bool member_correct(const MemberNodes& mn, int y0) { return mn.pred.top == y0; }

NodeId entropy_node(Graph& g, NodeId simplex_vec) {
    const int c = g.value(simplex_vec).rows;
    const NodeId floored = g.add(simplex_vec, g.constant(Tensor::full(c, 1, 1e-300)));
    return g.neg(g.sum(g.mul(simplex_vec, g.log(floored))));
}

NodeId dot_node(Graph& g, NodeId a, NodeId b) { return g.sum(g.mul(a, b)); }

// Leibniz determinant of an n x n matrix of scalar nodes, n <= 4.
NodeId det_node(Graph& g, const std::vector<std::vector<NodeId>>& m) {
    const int n = static_cast<int>(m.size());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    NodeId acc = zero_scalar(g);
    do {
        // Sign from inversion count.
        int inversions = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (perm[i] > perm[j]) ++inversions;
        NodeId prod = m[0][perm[0]];
        for (int i = 1; i < n; ++i) prod = g.mul(prod, m[i][perm[i]]);
        acc = inversions % 2 == 0 ? g.add(acc, prod) : g.sub(acc, prod);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return acc;
}

}  // namespace

NodeId std_loss(Graph& g, const model::MlpClassifier& m, const Vector& x_noisy, int y0) {
    const NodeId x = g.constant(Tensor::column(x_noisy));
    const MemberNodes mn = bind_and_forward(g, m, x);
    return autodiff::cross_entropy_node(g, mn.fwd, y0);
}

NodeId gd_loss(Graph& g, const model::MlpClassifier& mi, const model::MlpClassifier& mj,
               const Vector& x_noisy, int y0) {
    const NodeId x = g.constant(Tensor::column(x_noisy));
    const MemberNodes a = bind_and_forward(g, mi, x);
    const MemberNodes b = bind_and_forward(g, mj, x);
    if (!member_correct(a, y0) || !member_correct(b, y0)) return zero_scalar(g);
    return gd_node_from(g, a, b, x, y0);
}

NodeId cm_loss(Graph& g, const model::MlpClassifier& mi, const model::MlpClassifier& mj,
               const Vector& x_noisy, int y0) {
    const NodeId x = g.constant(Tensor::column(x_noisy));
    const MemberNodes a = bind_and_forward(g, mi, x);
    const MemberNodes b = bind_and_forward(g, mj, x);
    if (!member_correct(a, y0) || !member_correct(b, y0)) return zero_scalar(g);
    return cm_node_from(g, a, b, y0);
}

NodeId gd_loss_aggregate(Graph& g, std::span<const model::MlpClassifier> members,
                         const Vector& x_noisy, int y0) {
    const NodeId x = g.constant(Tensor::column(x_noisy));
    std::vector<MemberNodes> mns;
    for (const auto& m : members) {
        mns.push_back(bind_and_forward(g, m, x));
        if (!member_correct(mns.back(), y0)) return zero_scalar(g);
    }
    NodeId acc = autodiff::input_gradient_node(g, mns[0].bm, mns[0].fwd, x, y0,
                                               mns[0].pred.runner_up);
    for (size_t i = 1; i < mns.size(); ++i) {
        acc = g.add(acc, autodiff::input_gradient_node(g, mns[i].bm, mns[i].fwd, x, y0,
                                                       mns[i].pred.runner_up));
    }
    return g.l2_norm(acc);
}

NodeId cm_loss_aggregate(Graph& g, std::span<const model::MlpClassifier> members,
                         const Vector& x_noisy, int y0) {
    const NodeId x = g.constant(Tensor::column(x_noisy));
    std::vector<MemberNodes> mns;
    for (const auto& m : members) {
        mns.push_back(bind_and_forward(g, m, x));
        if (!member_correct(mns.back(), y0)) return zero_scalar(g);
    }
    NodeId acc = autodiff::margin_node(g, mns[0].fwd, mns[0].pred.runner_up, y0);
    for (size_t i = 1; i < mns.size(); ++i) {
        acc = g.add(acc, autodiff::margin_node(g, mns[i].fwd, mns[i].pred.runner_up, y0));
    }
    return acc;
}

AdpLoss adp_loss(Graph& g, std::span<const model::MlpClassifier> members,
                 const Vector& x_noisy, int y0, double alpha_adp, double beta_adp,
                 bool entropy_per_member) {
    const int n = static_cast<int>(members.size());
    if (n < 2) throw std::invalid_argument("adp_loss: at least two members");
    const int c = members[0].num_classes();
    const NodeId x = g.constant(Tensor::column(x_noisy));

    std::vector<MemberNodes> mns;
    for (const auto& m : members) mns.push_back(bind_and_forward(g, m, x));

    // Entropy of the mean confidence vector.
    NodeId mean = g.add(mns[0].fwd.probs, mns[1].fwd.probs);
    for (int i = 2; i < n; ++i) mean = g.add(mean, mns[i].fwd.probs);
    mean = g.div_scalar(mean, g.constant(Tensor::scalar(static_cast<double>(n))));
    NodeId ent = entropy_node(g, mean);
    const double ent_weight = entropy_per_member ? alpha_adp * n : alpha_adp;

    // Selector dropping the y0 row.
    Tensor sel(c - 1, c);
    for (int r = 0, src = 0; src < c; ++src) {
        if (src == y0) continue;
        sel.at(r++, src) = 1.0;
    }
    const NodeId sel_node = g.constant(sel);

    std::vector<NodeId> unit;
    for (int i = 0; i < n; ++i) {
        const NodeId sub = g.matvec(sel_node, mns[i].fwd.probs);
        const NodeId norm = g.add(g.l2_norm(sub), g.constant(Tensor::scalar(1e-12)));
        unit.push_back(g.div_scalar(sub, norm));
    }
    std::vector<std::vector<NodeId>> gram(n, std::vector<NodeId>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) gram[i][j] = dot_node(g, unit[i], unit[j]);
    }
    const NodeId det = det_node(g, gram);
    const NodeId log_ed = g.log(g.add(det, g.constant(Tensor::scalar(1e-12))));

    AdpLoss out;
    out.node = g.add(g.scalar_mul(g.constant(Tensor::scalar(ent_weight)), ent),
                     g.scalar_mul(g.constant(Tensor::scalar(beta_adp)), log_ed));
    out.ed_degenerate = (c - 1 < n) || g.value(det).v[0] <= 1e-12;
    return out;
}

NodeId gal_loss(Graph& g, std::span<const model::MlpClassifier> members,
                const Vector& x_noisy, int y0) {
    const int n = static_cast<int>(members.size());
    if (n < 2) throw std::invalid_argument("gal_loss: at least two members");
    const int c = members[0].num_classes();
    const NodeId x = g.constant(Tensor::column(x_noisy));

    std::vector<NodeId> loss_grads;
    for (const auto& m : members) {
        const MemberNodes mn = bind_and_forward(g, m, x);
        // d(-log f_{y0})/d logits = f - e_{y0}, pulled to the input.
        const NodeId seed = g.sub(mn.fwd.probs, g.constant(Tensor::one_hot(c, y0)));
        loss_grads.push_back(autodiff::input_gradient_with_seed(g, mn.bm, mn.fwd, x, seed));
    }

    NodeId acc = -1;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const NodeId num = dot_node(g, loss_grads[i], loss_grads[j]);
            const NodeId den =
                g.add(g.mul(g.l2_norm(loss_grads[i]), g.l2_norm(loss_grads[j])),
                      g.constant(Tensor::scalar(1e-30)));
            const NodeId cos_ij = g.div_scalar(num, den);
            const NodeId e = g.exp(cos_ij);
            acc = acc < 0 ? e : g.add(acc, e);
        }
    }
    return g.log(acc);
}

namespace {

struct LossAccumulators {
    double std_sum = 0.0;
    double gd_sum = 0.0;
    double cm_sum = 0.0;
    double variant_sum = 0.0;
    int64_t draws = 0;
};

// Batch loss graph for one noisy draw: every member bound once, all variant
// terms reusing the same forwards.
struct DrawResult {
    double std_value = 0.0;
    double gd_value = 0.0;
    double cm_value = 0.0;
    double variant_value = 0.0;
    std::vector<autodiff::MlpGradients> grads;
};

DrawResult evaluate_draw(const std::vector<model::MlpClassifier>& members,
                         const Vector& x_noisy, int y0, const TrainingConfig& cfg) {
    Graph g;
    const NodeId x = g.constant(Tensor::column(x_noisy));
    std::vector<MemberNodes> mns;
    mns.reserve(members.size());
    for (const auto& m : members) mns.push_back(bind_and_forward(g, m, x));

    NodeId total = zero_scalar(g);
    DrawResult res;

    for (const auto& mn : mns) {
        const NodeId ce = autodiff::cross_entropy_node(g, mn.fwd, y0);
        res.std_value += g.value(ce).v[0];
        total = g.add(total, ce);
    }

    const bool pairwise = cfg.variant == Variant::DRTPairwise ||
                          cfg.variant == Variant::GDOnly || cfg.variant == Variant::CMOnly;
    if (pairwise) {
        const bool use_gd = cfg.variant != Variant::CMOnly && cfg.rho1 > 0.0;
        const bool use_cm = cfg.variant != Variant::GDOnly && cfg.rho2 > 0.0;
        NodeId gd_total = -1, cm_total = -1;
        for (size_t i = 0; i < mns.size(); ++i) {
            if (!member_correct(mns[i], y0)) continue;
            for (size_t j = i + 1; j < mns.size(); ++j) {
                if (!member_correct(mns[j], y0)) continue;
                if (use_gd) {
                    const NodeId gd = gd_node_from(g, mns[i], mns[j], x, y0);
                    gd_total = gd_total < 0 ? gd : g.add(gd_total, gd);
                }
                if (use_cm) {
                    const NodeId cm = cm_node_from(g, mns[i], mns[j], y0);
                    cm_total = cm_total < 0 ? cm : g.add(cm_total, cm);
                }
            }
        }
        if (gd_total >= 0) {
            res.gd_value = g.value(gd_total).v[0];
            total = g.add(total, g.scalar_mul(g.constant(Tensor::scalar(cfg.rho1)), gd_total));
        }
        if (cm_total >= 0) {
            res.cm_value = g.value(cm_total).v[0];
            total = g.add(total, g.scalar_mul(g.constant(Tensor::scalar(cfg.rho2)), cm_total));
        }
    } else if (cfg.variant == Variant::DRTAggregate) {
        bool all_correct = true;
        for (const auto& mn : mns) all_correct = all_correct && member_correct(mn, y0);
        if (all_correct) {
            NodeId grad_acc = -1;
            NodeId margin_acc = -1;
            for (const auto& mn : mns) {
                const NodeId gi = autodiff::input_gradient_node(g, mn.bm, mn.fwd, x, y0,
                                                                mn.pred.runner_up);
                grad_acc = grad_acc < 0 ? gi : g.add(grad_acc, gi);
                const NodeId mi = autodiff::margin_node(g, mn.fwd, mn.pred.runner_up, y0);
                margin_acc = margin_acc < 0 ? mi : g.add(margin_acc, mi);
            }
            const NodeId gd = g.l2_norm(grad_acc);
            res.gd_value = g.value(gd).v[0];
            res.cm_value = g.value(margin_acc).v[0];
            res.variant_value = res.gd_value + res.cm_value;
            total = g.add(total, g.scalar_mul(g.constant(Tensor::scalar(cfg.rho1)), gd));
            total = g.add(total, g.scalar_mul(g.constant(Tensor::scalar(cfg.rho2)), margin_acc));
        }
    } else if (cfg.variant == Variant::ADP || cfg.variant == Variant::GAL) {
        // Same constructions as adp_loss/gal_loss, rebuilt on the shared
        // forwards so the cross-entropy and regularizer gradients land on the
        // same leaves.
        NodeId reg = -1;
        if (cfg.variant == Variant::ADP) {
            // Entropy of the mean confidence plus log Gram determinant on the
            // shared forwards.
            const int n = static_cast<int>(mns.size());
            const int c = members[0].num_classes();
            NodeId mean = g.add(mns[0].fwd.probs, mns[1].fwd.probs);
            for (int i = 2; i < n; ++i) mean = g.add(mean, mns[i].fwd.probs);
            mean = g.div_scalar(mean, g.constant(Tensor::scalar(static_cast<double>(n))));
            const NodeId ent = entropy_node(g, mean);
            Tensor sel(c - 1, c);
            for (int r = 0, src = 0; src < c; ++src) {
                if (src == y0) continue;
                sel.at(r++, src) = 1.0;
            }
            const NodeId sel_node = g.constant(sel);
            std::vector<NodeId> unit;
            for (int i = 0; i < n; ++i) {
                const NodeId sub = g.matvec(sel_node, mns[i].fwd.probs);
                const NodeId norm = g.add(g.l2_norm(sub), g.constant(Tensor::scalar(1e-12)));
                unit.push_back(g.div_scalar(sub, norm));
            }
            std::vector<std::vector<NodeId>> gram(n, std::vector<NodeId>(n));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) gram[i][j] = dot_node(g, unit[i], unit[j]);
            const NodeId log_ed =
                g.log(g.add(det_node(g, gram), g.constant(Tensor::scalar(1e-12))));
            const double ent_w =
                cfg.adp_entropy_per_member ? cfg.adp_alpha * n : cfg.adp_alpha;
            reg = g.add(g.scalar_mul(g.constant(Tensor::scalar(ent_w)), ent),
                        g.scalar_mul(g.constant(Tensor::scalar(cfg.adp_beta)), log_ed));
        } else {
            const int n = static_cast<int>(mns.size());
            const int c = members[0].num_classes();
            std::vector<NodeId> loss_grads;
            for (const auto& mn : mns) {
                const NodeId seed = g.sub(mn.fwd.probs, g.constant(Tensor::one_hot(c, y0)));
                loss_grads.push_back(
                    autodiff::input_gradient_with_seed(g, mn.bm, mn.fwd, x, seed));
            }
            NodeId acc = -1;
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    const NodeId num = dot_node(g, loss_grads[i], loss_grads[j]);
                    const NodeId den =
                        g.add(g.mul(g.l2_norm(loss_grads[i]), g.l2_norm(loss_grads[j])),
                              g.constant(Tensor::scalar(1e-30)));
                    const NodeId e = g.exp(g.div_scalar(num, den));
                    acc = acc < 0 ? e : g.add(acc, e);
                }
            }
            reg = g.log(acc);
        }
        res.variant_value = g.value(reg).v[0];
        total = g.add(total, reg);
    }

    const double total_value = g.value(total).v[0];
    if (!std::isfinite(total_value)) {
        throw std::runtime_error("train: non-finite loss in draw evaluation");
    }

    const autodiff::GradientMap gm = g.backward(total);
    for (const auto& mn : mns) res.grads.push_back(autodiff::collect_mlp_gradients(mn.bm, gm));
    return res;
}

}  // namespace

TrainingHistory train(std::vector<model::MlpClassifier>& members, const data::Dataset& ds,
                      const TrainingConfig& cfg) {
    cfg.validate();
    ds.validate();
    if (members.empty()) throw std::invalid_argument("train: no members");
    for (const auto& m : members) {
        if (m.input_dim() != ds.dim || m.num_classes() < ds.num_classes)
            throw std::invalid_argument("train: member dimensions do not match the dataset");
    }

    const size_t n_members = members.size();
    OptimizerState opt;
    for (const auto& m : members) {
        autodiff::MlpGradients v;
        for (const auto& l : m.layers()) {
            v.weights.push_back(Tensor(l.w.rows, l.w.cols));
            v.biases.push_back(Tensor(static_cast<int>(l.b.size()), 1));
        }
        opt.velocity.push_back(std::move(v));
    }

    numstats::RngStream shuffle_rng = numstats::RngStream(cfg.seed, 0).substream(1);
    numstats::RngStream noise_rng = numstats::RngStream(cfg.seed, 0).substream(2);

    TrainingHistory history;
    double lr_now = cfg.lr;
    std::vector<size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.lr_decay_period > 0 && epoch > 0 && epoch % cfg.lr_decay_period == 0) {
            lr_now *= cfg.lr_decay_factor;
        }
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }

        LossAccumulators acc;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);

            std::vector<autodiff::MlpGradients> batch_grads;
            for (const auto& m : members) {
                autodiff::MlpGradients gz;
                for (const auto& l : m.layers()) {
                    gz.weights.push_back(Tensor(l.w.rows, l.w.cols));
                    gz.biases.push_back(Tensor(static_cast<int>(l.b.size()), 1));
                }
                batch_grads.push_back(std::move(gz));
            }

            for (size_t s = start; s < end; ++s) {
                const Vector& x0 = ds.features[order[s]];
                const int y0 = ds.labels[order[s]];
                for (int k = 0; k < cfg.k_noise; ++k) {
                    Vector x_noisy = x0;
                    if (cfg.sigma > 0.0) {
                        for (auto& v : x_noisy) v += cfg.sigma * noise_rng.normal();
                    }
                    DrawResult dr;
                    try {
                        dr = evaluate_draw(members, x_noisy, y0, cfg);
                    } catch (const std::runtime_error&) {
                        std::ostringstream os;
                        os << "train: non-finite loss (epoch " << epoch << ", sample "
                           << order[s] << ", draw " << k << ", variant "
                           << to_string(cfg.variant) << ")";
                        throw std::runtime_error(os.str());
                    }
                    acc.std_sum += dr.std_value;
                    acc.gd_sum += dr.gd_value;
                    acc.cm_sum += dr.cm_value;
                    acc.variant_sum += dr.variant_value;
                    acc.draws += 1;
                    for (size_t mi = 0; mi < n_members; ++mi) {
                        auto& dst = batch_grads[mi];
                        const auto& src = dr.grads[mi];
                        for (size_t li = 0; li < dst.weights.size(); ++li) {
                            for (size_t q = 0; q < dst.weights[li].size(); ++q)
                                dst.weights[li].v[q] += src.weights[li].v[q];
                            for (size_t q = 0; q < dst.biases[li].size(); ++q)
                                dst.biases[li].v[q] += src.biases[li].v[q];
                        }
                    }
                }
            }

            for (size_t mi = 0; mi < n_members; ++mi) {
                auto& layers = members[mi].mutable_layers();
                for (size_t li = 0; li < layers.size(); ++li) {
                    sgd_momentum_step(layers[li].w, batch_grads[mi].weights[li],
                                      opt.velocity[mi].weights[li], lr_now, cfg.momentum);
                    sgd_momentum_step(layers[li].b, batch_grads[mi].biases[li],
                                      opt.velocity[mi].biases[li], lr_now, cfg.momentum);
                }
            }
            opt.step_count += 1;
        }

        // Uniform-WE accuracy on clean inputs.
        int64_t correct = 0;
        const std::vector<double> w(n_members, 1.0);
        for (size_t i = 0; i < ds.size(); ++i) {
            if (ensemble::we_predict(members, w, ds.features[i]) == ds.labels[i]) ++correct;
        }

        EpochStats es;
        es.epoch = epoch;
        const double denom = std::max<int64_t>(acc.draws, 1);
        es.std_loss = acc.std_sum / denom;
        es.gd_loss = acc.gd_sum / denom;
        es.cm_loss = acc.cm_sum / denom;
        es.variant_loss = acc.variant_sum / denom;
        es.train_acc = static_cast<double>(correct) / static_cast<double>(ds.size());
        history.epochs.push_back(es);
    }
    return history;
}

}  // namespace enscert::training
